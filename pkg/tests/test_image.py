import numpy as np
import pytest

from paperlines import GrayImage, RgbImage, crop_patch, invert, to_grayscale
from paperlines.errors import OutOfBounds, UnsupportedFormat
from paperlines import imgio


def test_grayscale_white_black_red():
    data = np.zeros((1, 3, 3))
    data[0, 0] = (1.0, 1.0, 1.0)
    data[0, 1] = (0.0, 0.0, 0.0)
    data[0, 2] = (1.0, 0.0, 0.0)
    gray = to_grayscale(RgbImage(data))
    assert gray.data[0, 0] == pytest.approx(1.0)
    assert gray.data[0, 1] == pytest.approx(0.0)
    assert gray.data[0, 2] == pytest.approx(0.2126)


def test_grayscale_equal_channels_identity():
    rng = np.random.default_rng(3)
    chan = rng.uniform(0, 1, (5, 7))
    rgb = RgbImage(np.stack([chan, chan, chan], axis=-1), scale=4.0)
    gray = to_grayscale(rgb)
    np.testing.assert_allclose(gray.data, chan, atol=1e-12)
    assert gray.scale == 4.0


def test_gray_image_invariants():
    with pytest.raises(ValueError):
        GrayImage(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        GrayImage(np.zeros((4, 4)), scale=-1.0)
    with pytest.raises(ValueError):
        GrayImage(np.zeros(4))


def test_invert():
    img = GrayImage(np.array([[0.2, 0.8]]))
    np.testing.assert_allclose(invert(img).data, [[0.8, 0.2]])


def test_crop_identity_and_block():
    rng = np.random.default_rng(1)
    img = GrayImage(rng.uniform(0, 1, (100, 100)), scale=2.0)
    full = crop_patch(img, 0, 0, 100, 100)
    np.testing.assert_array_equal(full.data, img.data)
    assert full.scale == 2.0
    block = crop_patch(img, 0, 0, 10, 10)
    np.testing.assert_array_equal(block.data, img.data[:10, :10])


def test_crop_composition():
    rng = np.random.default_rng(2)
    img = GrayImage(rng.uniform(0, 1, (60, 80)))
    two_step = crop_patch(crop_patch(img, 10, 5, 50, 40), 5, 10, 20, 15)
    one_step = crop_patch(img, 15, 15, 20, 15)
    np.testing.assert_array_equal(two_step.data, one_step.data)


def test_crop_out_of_bounds():
    img = GrayImage(np.zeros((20, 20)))
    with pytest.raises(OutOfBounds):
        crop_patch(img, 15, 0, 10, 5)
    with pytest.raises(OutOfBounds):
        crop_patch(img, -1, 0, 5, 5)
    with pytest.raises(OutOfBounds):
        crop_patch(img, 0, 0, 0, 5)


def test_png_gray_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    img = GrayImage(rng.uniform(0, 1, (33, 47)))
    path = tmp_path / "g.png"
    imgio.write_png(img, path, bit_depth=16)
    back = imgio.read_image(path)
    assert isinstance(back, GrayImage)
    np.testing.assert_allclose(back.data, img.data, atol=1.0 / 65535)


def test_png_rgb_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    img = RgbImage(rng.uniform(0, 1, (20, 30, 3)))
    path = tmp_path / "c.png"
    imgio.write_png(img, path)
    back = imgio.read_image(path)
    assert isinstance(back, RgbImage)
    np.testing.assert_allclose(back.data, img.data, atol=1.0 / 255)


@pytest.mark.parametrize("maxval", [255, 65535])
def test_pgm_roundtrip(tmp_path, maxval):
    rng = np.random.default_rng(7)
    img = GrayImage(rng.uniform(0, 1, (16, 24)))
    path = tmp_path / "g.pgm"
    imgio.write_pgm(img, path, maxval=maxval)
    back = imgio.read_image(path)
    assert isinstance(back, GrayImage)
    np.testing.assert_allclose(back.data, img.data, atol=1.0 / maxval)


def test_ascii_pgm():
    raw = b"P2\n# comment\n3 2\n255\n0 128 255\n64 32 16\n"
    arr = imgio._read_pnm(raw)
    assert arr.shape == (2, 3)
    assert arr[0, 1] == pytest.approx(128 / 255)


def test_unsupported_format(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("not an image")
    with pytest.raises(UnsupportedFormat):
        imgio.read_image(path)
