import numpy as np
import pytest

from paperlines import (
    GrayImage,
    Orientation,
    RectFilterSpec,
    dominant_angle,
    johnson_filter,
    project,
    radon,
    rect_fourier_filter,
)


def smooth_test_image(n=64):
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return (
        0.45 * np.exp(-((xx - 24) ** 2 + (yy - 30) ** 2) / (2 * 8**2))
        + 0.3 * np.exp(-((xx - 44) ** 2 + (yy - 38) ** 2) / (2 * 5**2))
    ), xx, yy


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        RectFilterSpec(width_px=2)
    with pytest.raises(ValueError):
        RectFilterSpec(width_px=0)
    with pytest.raises(ValueError):
        RectFilterSpec(height_fraction=0.0)
    preset = johnson_filter()
    assert preset.width_px == 3 and preset.height_fraction == pytest.approx(1 / 3)


def test_filter_keeps_vertical_grating():
    x = np.arange(64)
    grating = 0.5 + 0.3 * np.cos(2 * np.pi * 5 * x / 64)
    img = np.tile(grating, (48, 1))
    out = rect_fourier_filter(img, RectFilterSpec())
    np.testing.assert_allclose(out, img, atol=1e-6)


def test_filter_removes_horizontal_grating():
    y = np.arange(48)
    grating = 0.5 + 0.3 * np.cos(2 * np.pi * 5 * y / 48)
    img = np.tile(grating[:, None], (1, 64))
    out = rect_fourier_filter(img, RectFilterSpec(orientation=Orientation.VERTICAL))
    np.testing.assert_allclose(out, np.full_like(img, img.mean()), atol=1e-6)


def test_filter_on_noise_leaves_vertical_streaks():
    rng = np.random.default_rng(31)
    img = rng.uniform(0, 1, (64, 64))
    out = rect_fourier_filter(img, RectFilterSpec())
    col_profile_var = out.mean(axis=0).var()
    along_col_var = out.var(axis=0).mean()
    assert col_profile_var / max(along_col_var, 1e-30) > 10


def test_filter_linearity():
    rng = np.random.default_rng(32)
    f = rng.uniform(0, 1, (32, 32))
    g = rng.uniform(0, 1, (32, 32))
    spec = RectFilterSpec(width_px=3, height_fraction=0.5)
    lhs = rect_fourier_filter(2.0 * f + 0.5 * g, spec)
    rhs = 2.0 * rect_fourier_filter(f, spec) + 0.5 * rect_fourier_filter(g, spec)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_project_sums():
    img = np.ones((4, 4))
    np.testing.assert_array_equal(project(img, Orientation.VERTICAL), [4, 4, 4, 4])
    col = np.zeros((8, 8))
    col[:, 5] = 1.0
    assert project(col, Orientation.VERTICAL).argmax() == 5
    row = np.zeros((8, 8))
    row[3, :] = 1.0
    assert project(row, Orientation.HORIZONTAL).argmax() == 3


def test_project_commutes_with_filter_for_grating():
    x = np.arange(64)
    grating = 0.5 + 0.25 * np.cos(2 * np.pi * 4 * x / 64)
    img = np.tile(grating, (32, 1))
    spec = RectFilterSpec()
    direct = project(img, Orientation.VERTICAL)
    filtered = project(rect_fourier_filter(img, spec), Orientation.VERTICAL)
    np.testing.assert_allclose(direct, filtered, atol=1e-6)


def test_radon_centred_vertical_line():
    img = np.zeros((65, 65))
    img[:, 32] = 1.0
    sino = radon(GrayImage(img), [0.0, 30.0, 90.0])
    peak_offset = sino.offsets[np.argmax(sino.data[:, 0])]
    assert peak_offset == 0.0
    # the straight-on view is the sharpest
    assert sino.data[:, 0].max() > sino.data[:, 1].max()


def test_radon_centred_point():
    img = np.zeros((65, 65))
    img[32, 32] = 1.0
    sino = radon(GrayImage(img), np.arange(0, 180, 15.0))
    for k in range(sino.angles.size):
        assert sino.offsets[np.argmax(sino.data[:, k])] == 0.0
        assert sino.data[:, k].sum() == pytest.approx(1.0, rel=1e-12)


def test_radon_mass_preservation():
    field, _, _ = smooth_test_image()
    sino = radon(GrayImage(field), np.arange(0, 180, 7.5))
    mass = field.sum()
    col_masses = sino.data.sum(axis=0)
    assert np.max(np.abs(col_masses - mass)) / mass < 1e-3


def test_radon_grating_period(laid_cal):
    # horizontal grating, 8 lines/cm at 12 px/mm: period 15 px in the 90 column
    from paperlines.phantom import PhantomSpec, LineSet, generate

    offs = tuple(np.arange(-52.5, 53.0, 15.0))
    spec = PhantomSpec(width=191, height=191, background=0.3, scale=12.0,
                       elements=(LineSet(contrast=0.3, line_width_px=4.0,
                                         angle_deg=90.0, offsets_px=offs),))
    img, _ = generate(spec)
    sino = radon(img, [90.0])
    col = sino.data[:, 0]
    peaks = []
    for i in range(1, len(col) - 1):
        if col[i] > col[i - 1] and col[i] >= col[i + 1] and col[i] > col.max() * 0.5:
            peaks.append(sino.offsets[i])
    gaps = np.diff(peaks)
    assert np.allclose(gaps, 15.0, atol=1.0)


def test_fourier_slice_theorem():
    field, xx, yy = smooth_test_image()
    sino = radon(GrayImage(field), [0.0, 45.0, 90.0])
    c = (64 - 1) / 2.0
    n_off = len(sino.offsets)
    mmax = n_off // 2 - 1
    omegas = 2 * np.pi * np.arange(-mmax, mmax + 1) / n_off
    for k, ang in enumerate([0.0, 45.0, 90.0]):
        col = sino.data[:, k]
        g_hat = np.array([(col * np.exp(-1j * w * sino.offsets)).sum() for w in omegas])
        th = np.deg2rad(ang)
        slice_vals = np.array([
            (field * np.exp(-1j * (w * np.cos(th) * (xx - c) + w * np.sin(th) * (yy - c)))).sum()
            for w in omegas
        ])
        rel = np.linalg.norm(g_hat - slice_vals) / np.linalg.norm(slice_vals)
        assert rel < 0.02


def test_dominant_angle_vertical_line():
    img = np.zeros((65, 65))
    img[:, 32] = 1.0
    sino = radon(GrayImage(img), np.arange(0, 180, 0.5))
    dom = dominant_angle(sino)
    assert dom.angle_deg == 0.0
    assert not dom.low_confidence


def test_dominant_angle_tilted_grating():
    from paperlines.phantom import PhantomSpec, LineSet, generate

    offs = tuple(np.arange(-52.5, 53.0, 15.0))
    spec = PhantomSpec(width=191, height=191, background=0.3, scale=12.0,
                       elements=(LineSet(contrast=0.3, line_width_px=4.0,
                                         angle_deg=92.0, offsets_px=offs),))
    img, _ = generate(spec)
    sino = radon(img, np.arange(0, 180, 0.5))
    dom = dominant_angle(sino)
    assert abs(dom.angle_deg - 92.0) <= 0.5


def test_dominant_angle_constant_low_confidence():
    img = np.full((41, 41), 0.5)
    sino = radon(GrayImage(img), np.arange(0, 180, 5.0))
    dom = dominant_angle(sino)
    assert dom.low_confidence
