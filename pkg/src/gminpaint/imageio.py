"""Grayscale image and mask I/O plus patch sampling.

Images are carried as float64 arrays of shape (height, width) with nominal
range [0, 255]; quantization to 8 bits only happens in :func:`save_image`.
Binary PGM (P5, maxval 255) is the canonical format, 8-bit grayscale PNG is
accepted for convenience.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import CorruptImage, DimensionMismatch, InpaintError, UnsupportedFormat

MASK_THRESHOLD = 128

_PGM_HEADER = re.compile(rb"\AP5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


@dataclass(frozen=True)
class GrayImage:
    """Row-major grid of real-valued intensities."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def with_pixels(self, rows, cols, values) -> "GrayImage":
        out = self.data.copy()
        out[rows, cols] = values
        return GrayImage(out)

    def quantized(self) -> np.ndarray:
        """8-bit view used when writing: clamp to [0, 255], round half to even."""
        return np.clip(np.rint(self.data), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class InpaintMask:
    """Boolean grid; ``True`` marks a pixel to be inpainted."""

    unknown: np.ndarray

    def __post_init__(self):
        arr = np.array(self.unknown, dtype=bool)
        if arr.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D mask, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "unknown", arr)

    @property
    def height(self) -> int:
        return self.unknown.shape[0]

    @property
    def width(self) -> int:
        return self.unknown.shape[1]

    @property
    def shape(self):
        return self.unknown.shape

    @property
    def count(self) -> int:
        return int(self.unknown.sum())

    def check_matches(self, img: GrayImage):
        if self.shape != img.shape:
            raise DimensionMismatch(f"mask {self.shape} does not match image {img.shape}")


def _read_pgm(raw: bytes, path) -> np.ndarray:
    m = _PGM_HEADER.match(raw)
    if m is None:
        raise CorruptImage(f"{path}: malformed PGM header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: PGM maxval {maxval} (only 255 is supported)")
    if width < 1 or height < 1:
        raise CorruptImage(f"{path}: invalid PGM dimensions {width}x{height}")
    payload = raw[m.end():]
    if len(payload) < width * height:
        raise CorruptImage(f"{path}: PGM payload truncated ({len(payload)} < {width * height} bytes)")
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width)


def _read_png(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormat(f"{path}: not a PNG file")
            if im.mode != "L":
                raise UnsupportedFormat(f"{path}: PNG mode {im.mode!r} is not 8-bit grayscale")
            return np.asarray(im, dtype=np.uint8).copy()
    except UnidentifiedImageError as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc


def _read_raw(path) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head.startswith(b"\x89PNG"):
            return _read_png(path)
        if head[:2] == b"P5":
            fh.seek(0)
            return _read_pgm(fh.read(), path)
    if head[:2] in (b"P1", b"P2", b"P3", b"P4", b"P6"):
        raise UnsupportedFormat(f"{path}: only binary grayscale PGM (P5) is supported")
    raise UnsupportedFormat(f"{path}: unrecognized image format")


def load_image(path) -> GrayImage:
    """Load an 8-bit grayscale PGM (P5) or PNG image.

    Raises FileNotFoundError, :class:`UnsupportedFormat` (color, 16-bit,
    ASCII PGM, ...) or :class:`CorruptImage`.
    """
    return GrayImage(_read_raw(path).astype(np.float64))


def load_mask(path, threshold: int = MASK_THRESHOLD) -> InpaintMask:
    """Load a mask image; pixels with stored intensity >= threshold are unknown."""
    return InpaintMask(_read_raw(path) >= threshold)


def save_image(img: GrayImage | np.ndarray, path):
    """Write ``img`` as PGM or PNG depending on the file extension."""
    if not isinstance(img, GrayImage):
        img = GrayImage(img)
    arr = img.quantized()
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        from PIL import Image

        Image.fromarray(arr, mode="L").save(path, format="PNG")
    elif ext in (".pgm", ".pnm", ""):
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
            fh.write(arr.tobytes())
    else:
        raise UnsupportedFormat(f"cannot write {ext!r} files (use .pgm or .png)")


def save_mask(mask: InpaintMask, path):
    save_image(GrayImage(np.where(mask.unknown, 255.0, 0.0)), path)


def corrupt(img: GrayImage, mask: InpaintMask, fill: float = 128.0) -> GrayImage:
    """Copy of ``img`` with every unknown pixel replaced by ``fill``."""
    mask.check_matches(img)
    out = img.data.copy()
    out[mask.unknown] = fill
    return GrayImage(out)


def extract_patches(img: GrayImage, size: int, count: int, rng_seed: int, return_corners: bool = False):
    """Sample ``count`` square patches with uniformly drawn top-left corners.

    Returns an array of shape (count, size*size), each row a patch in
    row-major order. With ``return_corners`` the (count, 2) array of
    (row, col) corners is returned as well.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if img.height < size or img.width < size:
        raise InpaintError(f"image {img.shape} is smaller than a {size}x{size} patch")
    rng = np.random.default_rng(rng_seed)
    rows = rng.integers(0, img.height - size + 1, size=count)
    cols = rng.integers(0, img.width - size + 1, size=count)
    win = np.lib.stride_tricks.sliding_window_view(img.data, (size, size))
    patches = win[rows, cols].reshape(count, size * size).copy()
    if return_corners:
        return patches, np.stack([rows, cols], axis=1)
    return patches
