import numpy as np
import pytest
from PIL import Image as PILImage

from lesionseg.errors import FormatError
from lesionseg.imageio import load_image, load_mask, load_roi, save_image, save_mask
from lesionseg.model import BinaryMask, GrayImage


def write_png8(path, arr):
    PILImage.fromarray(arr.astype(np.uint8), mode="L").save(path)


def write_png16(path, arr):
    PILImage.fromarray(arr.astype("<u2")).save(path)


def write_pgm(path, arr, maxval):
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode()
    path.write_bytes(header + arr.astype(dtype).tobytes())


class TestLoadImage:
    def test_uniform_255_maps_to_one(self, tmp_path):
        p = tmp_path / "a.png"
        write_png8(p, np.full((4, 5), 255))
        img = load_image(p)
        assert (img.pixels == 1.0).all()

    def test_uniform_0_maps_to_zero(self, tmp_path):
        p = tmp_path / "a.png"
        write_png8(p, np.zeros((4, 5)))
        assert (load_image(p).pixels == 0.0).all()

    def test_midscale_rescale(self, tmp_path):
        p = tmp_path / "a.png"
        write_png8(p, np.full((2, 2), 128))
        assert load_image(p).pixels[0, 0] == 128 / 255

    def test_16bit_png_rescale(self, tmp_path):
        p = tmp_path / "a.png"
        write_png16(p, np.full((2, 2), 40000))
        assert load_image(p).pixels[0, 0] == 40000 / 65535

    def test_pgm_8bit(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_pgm(p, np.arange(6).reshape(2, 3) * 40, 255)
        img = load_image(p)
        assert img.pixels[1, 2] == 200 / 255

    def test_pgm_16bit(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_pgm(p, np.array([[0, 65535], [1234, 40000]]), 65535)
        img = load_image(p)
        assert img.pixels[1, 0] == 1234 / 65535

    def test_pgm_header_comments(self, tmp_path):
        p = tmp_path / "a.pgm"
        body = np.array([[7, 8]], dtype="u1").tobytes()
        p.write_bytes(b"P5\n# a comment\n2 1\n# more\n255\n" + body)
        img = load_image(p)
        assert img.pixels[0, 1] == 8 / 255

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.png"
        with pytest.raises(FormatError, match="nope.png"):
            load_image(missing)

    def test_multichannel_rejected(self, tmp_path):
        p = tmp_path / "rgb.png"
        PILImage.fromarray(np.zeros((3, 3, 3), dtype=np.uint8), mode="RGB").save(p)
        with pytest.raises(FormatError, match="mode 'RGB'"):
            load_image(p)

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "junk.png"
        p.write_bytes(b"this is not an image")
        with pytest.raises(FormatError, match="unsupported image format"):
            load_image(p)

    def test_truncated_pgm_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n4 4\n255\nxx")
        with pytest.raises(FormatError, match="truncated"):
            load_image(p)


class TestRoundTrips:
    @pytest.mark.parametrize("ext", ["png", "pgm"])
    @pytest.mark.parametrize("depth", [8, 16])
    def test_load_save_load_bit_exact(self, tmp_path, ext, depth):
        rng = np.random.Generator(np.random.PCG64(5))
        maxval = 255 if depth == 8 else 65535
        raw = rng.integers(0, maxval + 1, size=(7, 9))
        src = tmp_path / f"src.{ext}"
        if ext == "pgm":
            write_pgm(src, raw, maxval)
        elif depth == 8:
            write_png8(src, raw)
        else:
            write_png16(src, raw)
        img = load_image(src)
        dst = tmp_path / f"copy.{ext}"
        save_image(img, dst, bit_depth=depth)
        again = load_image(dst)
        assert np.array_equal(img.pixels, again.pixels)
        # quantization recovers the original integers exactly
        assert np.array_equal(np.rint(again.pixels * maxval).astype(int), raw)

    def test_save_rejects_odd_depth(self, tmp_path):
        img = GrayImage(np.zeros((2, 2)))
        with pytest.raises(FormatError):
            save_image(img, tmp_path / "x.png", bit_depth=12)

    def test_save_rejects_unknown_extension(self, tmp_path):
        img = GrayImage(np.zeros((2, 2)))
        with pytest.raises(FormatError):
            save_image(img, tmp_path / "x.tiff")


class TestMasks:
    def test_any_nonzero_is_foreground(self, tmp_path):
        p = tmp_path / "m.png"
        write_png8(p, np.array([[0, 1], [128, 255]]))
        mask = load_mask(p)
        assert np.array_equal(mask.bits, np.array([[False, True], [True, True]]))

    def test_mask_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(9))
        bits = rng.random((6, 4)) > 0.5
        p = tmp_path / "m.png"
        save_mask(BinaryMask(bits), p)
        assert np.array_equal(load_mask(p).bits, bits)
        raw = np.asarray(PILImage.open(p))
        assert set(np.unique(raw)) <= {0, 255}


class TestRoi:
    def test_load(self, tmp_path):
        p = tmp_path / "roi.json"
        p.write_text('{"x": 2, "y": 3, "w": 4, "h": 5}')
        roi = load_roi(p)
        assert (roi.x, roi.y, roi.w, roi.h) == (2, 3, 4, 5)

    def test_rejects_extra_keys(self, tmp_path):
        p = tmp_path / "roi.json"
        p.write_text('{"x": 2, "y": 3, "w": 4, "h": 5, "z": 0}')
        with pytest.raises(FormatError):
            load_roi(p)

    def test_rejects_bad_json(self, tmp_path):
        p = tmp_path / "roi.json"
        p.write_text("{not json")
        with pytest.raises(FormatError):
            load_roi(p)
