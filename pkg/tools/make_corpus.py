"""Freeze a small grayscale natural-image corpus from scikit-image's sample data.

Writes 8-bit binary PGM crops to tests/data/natural/ (training images) and
tests/data/ (the held-out cameraman crops used by the end-to-end tests).
Run once; the outputs are committed so the test-suite never needs scikit-image.
"""
import pathlib

import numpy as np
from skimage import color, data

ROOT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data"

TRAINING = {
    "moon": (160, 160),
    "coins": (60, 100),
    "brick": (100, 100),
    "grass": (160, 160),
    "gravel": (100, 300),
    "clock": (40, 120),
    "astronaut": (40, 180),
    "coffee": (120, 250),
    "chelsea": (60, 150),
    "rocket": (160, 300),
}
SIZE = 128


def to_gray(img):
    if img.ndim == 3:
        img = np.round(color.rgb2gray(img) * 255.0)
    return np.clip(img, 0, 255).astype(np.uint8)


def write_pgm(path, arr):
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def main():
    (ROOT / "natural").mkdir(parents=True, exist_ok=True)
    for name, (r, c) in TRAINING.items():
        img = to_gray(getattr(data, name)())
        write_pgm(ROOT / "natural" / f"{name}.pgm", img[r:r + SIZE, c:c + SIZE])
    camera = to_gray(data.camera())
    # 128x128 region whose central 64x64 block is the end-to-end test crop
    big = camera[120:248, 180:308]
    write_pgm(ROOT / "camera128.pgm", big)
    write_pgm(ROOT / "camera64.pgm", big[32:96, 32:96])


if __name__ == "__main__":
    main()
