import numpy as np
import pytest

from vitac_common.exception import BadMagicError, FileFormatError, TruncatedFileError, UnsupportedFormatError
from vitac_ingest.components.pnm import PixelImage, parse_pnm, read_pnm, serialize_pnm, write_pnm


def _image(channels=3, max_value=255, seed=0, w=5, h=4):
    rng = np.random.default_rng(seed)
    return PixelImage(w, h, channels, max_value, rng.integers(0, max_value + 1, size=(h, w, channels)))


@pytest.mark.parametrize("channels,max_value", [(1, 255), (3, 255), (1, 65535), (3, 1023)])
def test_round_trip(channels, max_value):
    img = _image(channels, max_value)
    data = serialize_pnm(img)
    assert parse_pnm(data) == img
    assert serialize_pnm(parse_pnm(data)) == data


def test_sixteen_bit_is_big_endian():
    img = PixelImage(1, 1, 1, 65535, np.array([[[0x1234]]]))
    assert serialize_pnm(img).endswith(b"\x12\x34")


def test_header_comments_and_whitespace():
    data = b"P5 # depth\n2\t# width done\n1\n255\n" + bytes([7, 9])
    img = parse_pnm(data)
    assert (img.width, img.height, img.channels) == (2, 1, 1)
    assert img.pixels.ravel().tolist() == [7, 9]


def test_bad_magic():
    with pytest.raises(BadMagicError):
        parse_pnm(b"P3\n1 1\n255\n0 0 0\n")


def test_truncated_payload():
    data = serialize_pnm(_image())
    with pytest.raises(TruncatedFileError):
        parse_pnm(data[:-1])


def test_truncated_header():
    with pytest.raises(TruncatedFileError):
        parse_pnm(b"P6\n4 ")


@pytest.mark.parametrize("maxval", [b"0", b"70000"])
def test_unsupported_maxval(maxval):
    with pytest.raises(UnsupportedFormatError):
        parse_pnm(b"P5\n1 1\n" + maxval + b"\n\0\0")


def test_sample_above_maxval():
    with pytest.raises(FileFormatError):
        parse_pnm(b"P5\n1 1\n10\n" + bytes([11]))


def test_file_round_trip(tmp_path):
    img = _image(1)
    path = write_pnm(img, tmp_path / "a" / "img.pgm")
    assert read_pnm(path) == img


def test_rgb_example():
    img = parse_pnm(b"P6 2 1 255\n" + bytes([255, 0, 0, 0, 255, 0]))
    assert (img.width, img.height, img.channels) == (2, 1, 3)
    assert img.pixels[0, 0].tolist() == [255, 0, 0]


def test_p7_is_rejected():
    with pytest.raises(BadMagicError):
        parse_pnm(b"P7 1 1 255\n\0")


def test_sixteen_bit_example():
    assert parse_pnm(b"P5 1 1 65535\n\x01\x00").pixels.item() == 256
