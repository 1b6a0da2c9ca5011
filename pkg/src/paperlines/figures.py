"""Matplotlib renderings written next to the report files.

Everything here is presentation only; the numbers come from the analysis
modules untouched.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .detect import ChainDetection, LaidDetection


def save_spectrum_plot(times, amplitude, band_edges, path: str | Path) -> None:
    """Scale spectrum S(t) with the band edges marked."""
    fig, ax = plt.subplots(figsize=(7, 3.2), dpi=120)
    ax.plot(times, amplitude, lw=1.2, color="#1f4e79")
    for edge in band_edges:
        ax.axvline(edge, color="#999999", ls="--", lw=0.8)
    ax.set_xlabel("scale t")
    ax.set_ylabel("S(t)")
    ax.set_xlim(times[0], times[-1])
    ax.margins(y=0.05)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _signal_axes(ax, signal, smoothed, threshold, peak_indices, x=None, omitted=()):
    x = np.arange(len(signal)) if x is None else np.asarray(x)
    ax.plot(x, signal, color="#b0b0b0", lw=0.8, label="projection")
    ax.plot(x, smoothed, color="#1f4e79", lw=1.2, label="smoothed")
    ax.axhline(threshold, color="#777777", ls=":", lw=1.0, label="threshold")
    peak_indices = np.asarray(peak_indices, dtype=int)
    if peak_indices.size:
        kept = [i for k, i in enumerate(peak_indices) if k not in set(omitted)]
        drop = [i for k, i in enumerate(peak_indices) if k in set(omitted)]
        if kept:
            ax.plot(x[kept], smoothed[kept], "x", color="#e8790f", ms=8, mew=2, label="peaks")
        if drop:
            ax.plot(x[drop], smoothed[drop], "x", color="#bbbbbb", ms=8, mew=2, label="omitted")
    ax.legend(loc="upper right", fontsize=8, frameon=False)


def save_chain_signal_plot(det: ChainDetection, path: str | Path) -> None:
    """Projected signal with detected peaks and the threshold line."""
    fig, ax = plt.subplots(figsize=(7, 3.2), dpi=120)
    idx = [int(p) for p in det.report.positions_px]
    _signal_axes(ax, det.signal, det.smoothed, det.threshold, idx,
                 omitted=det.report.omitted_indices)
    ax.set_xlabel(f"{det.report.orientation.value} position (px)")
    ax.set_ylabel("projected intensity")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_laid_signal_plot(det: LaidDetection, path: str | Path) -> None:
    """Cross-section at the dominant angle, peaks, threshold and 1 cm window."""
    fig, ax = plt.subplots(figsize=(7, 3.2), dpi=120)
    offsets = det.sinogram.offsets
    idx = [int(np.argmin(np.abs(offsets - p))) for p in det.report.positions_px]
    _signal_axes(ax, det.signal, det.smoothed, det.threshold, idx, x=offsets)
    if det.report.window_length_px:
        half = det.report.window_length_px / 2.0
        a = det.report.window_anchor_px
        ax.axvspan(a - half, a + half, color="#2563eb", alpha=0.08, label="1 cm window")
    ax.set_xlabel(f"offset at {det.report.angle_deg:.1f} deg (px)")
    ax.set_ylabel("projection")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
