"""Synthetic inpainting masks: scratches, text and blobs.

No mask ever marks a pixel in the outermost rows or columns, so every
generated mask is accepted by :func:`gminpaint.graph.build_graph`.
"""
from __future__ import annotations

import string

import numpy as np
from scipy import ndimage

from .imageio import InpaintMask

STYLES = ("scratch", "text", "blob")

# 8-connected steps, ordered so that neighbouring indices are 45 degrees apart
_STEPS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]


def _check(width, height, coverage):
    if not 0 < coverage <= 0.5:
        raise ValueError(f"coverage must lie in (0, 0.5], got {coverage}")
    if width < 3 or height < 3:
        raise ValueError("masks need at least 3x3 pixels")


def _interior(height, width):
    inner = np.zeros((height, width), dtype=bool)
    inner[1:-1, 1:-1] = True
    return inner


def scratch_mask(width, height, coverage, seed) -> InpaintMask:
    """1-pixel-wide random walks that drift slowly in direction."""
    _check(width, height, coverage)
    rng = np.random.default_rng(seed)
    target = max(1, int(round(coverage * width * height)))
    target = min(target, (width - 2) * (height - 2))
    unk = np.zeros((height, width), dtype=bool)
    count = 0
    while count < target:
        r = int(rng.integers(1, height - 1))
        c = int(rng.integers(1, width - 1))
        heading = int(rng.integers(0, 8))
        for _ in range(int(rng.integers(8, 40))):
            if not unk[r, c]:
                unk[r, c] = True
                count += 1
                if count >= target:
                    break
            heading = (heading + int(rng.choice([-1, 0, 0, 0, 0, 0, 1]))) % 8
            dr, dc = _STEPS[heading]
            r, c = r + dr, c + dc
            if not (1 <= r < height - 1 and 1 <= c < width - 1):
                break
    return InpaintMask(unk)


def text_mask(width, height, coverage, seed) -> InpaintMask:
    """Random capital letters rendered with PIL's built-in bitmap font."""
    from PIL import Image, ImageDraw, ImageFont

    _check(width, height, coverage)
    rng = np.random.default_rng(seed)
    target = max(1, int(round(coverage * width * height)))
    canvas = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    inner = _interior(height, width)
    unk = np.zeros((height, width), dtype=bool)
    for _ in range(10_000):
        if unk.sum() >= target:
            break
        word = "".join(rng.choice(list(string.ascii_uppercase), size=int(rng.integers(2, 6))))
        x = int(rng.integers(-4, max(1, width - 8)))
        y = int(rng.integers(-4, max(1, height - 8)))
        draw.text((x, y), word, fill=255, font=font)
        unk = (np.asarray(canvas) >= 128) & inner
    return InpaintMask(unk)


def blob_mask(width, height, coverage, seed, radius: int = 2) -> InpaintMask:
    """Disks of the given radius around random seed points."""
    _check(width, height, coverage)
    rng = np.random.default_rng(seed)
    target = max(1, int(round(coverage * width * height)))
    inner = _interior(height, width)
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    disk = xx**2 + yy**2 <= radius**2
    seeds = np.zeros((height, width), dtype=bool)
    unk = np.zeros_like(seeds)
    for _ in range(width * height):
        if unk.sum() >= target:
            break
        seeds[int(rng.integers(1, height - 1)), int(rng.integers(1, width - 1))] = True
        unk = ndimage.binary_dilation(seeds, structure=disk) & inner
    return InpaintMask(unk)


def make_mask(width, height, style="scratch", coverage=0.05, seed=0) -> InpaintMask:
    if style == "scratch":
        return scratch_mask(width, height, coverage, seed)
    if style == "text":
        return text_mask(width, height, coverage, seed)
    if style == "blob":
        return blob_mask(width, height, coverage, seed)
    raise ValueError(f"unknown mask style {style!r} (choose from {', '.join(STYLES)})")
