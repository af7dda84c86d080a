"""Gradient-ascent inpainting under a Student-t field-of-experts prior.

The log prior of an image is a sum over the 2x2 windows that touch an
unknown pixel and over the filters f of ``-alpha_f * log(1 + r^2 / 2)``,
where r is the filter response of the window.  Unknown pixels climb that
log prior with a fixed step and are clamped to [0, 255].
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .imageio import GrayImage, InpaintMask
from .prior import FilterBank

INITIAL_FILL = 128.0


@dataclass
class BaselineConfig:
    alphas: tuple | None = None  # per filter; None means 1.0 each
    step_size: float = 0.1
    iterations: int = 2500

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.alphas is not None:
            self.alphas = tuple(float(a) for a in self.alphas)
            if any(a <= 0 for a in self.alphas):
                raise ValueError("alphas must be positive")

    def alpha_vector(self, n_filters):
        if self.alphas is None:
            return np.ones(n_filters)
        if len(self.alphas) != n_filters:
            raise ValueError(f"{len(self.alphas)} alphas for {n_filters} filters")
        return np.asarray(self.alphas)


def _offsets(size):
    return [(k // size, k % size) for k in range(size * size)]


def _touched(unknown, size):
    h, w = unknown.shape
    out = np.zeros((h - size + 1, w - size + 1), dtype=bool)
    for dr, dc in _offsets(size):
        out |= unknown[dr:dr + h - size + 1, dc:dc + w - size + 1]
    return out


def _responses(x, bank: FilterBank):
    """Filter responses of every window, shape (filters, h - size + 1, w - size + 1)."""
    size = bank.patch_size
    h, w = x.shape
    views = np.stack([x[dr:dr + h - size + 1, dc:dc + w - size + 1] for dr, dc in _offsets(size)])
    return np.tensordot(bank.filters, views, axes=1)


def log_prior(x, mask: InpaintMask, bank: FilterBank, alphas) -> float:
    """Log prior summed over the windows touching an unknown pixel."""
    x = np.asarray(x, dtype=np.float64)
    r = _responses(x, bank)
    per = -np.asarray(alphas)[:, None, None] * np.log1p(0.5 * r * r)
    return float(per.sum(axis=0)[_touched(mask.unknown, bank.patch_size)].sum())


def _gradient(x, unknown, bank, alphas):
    size = bank.patch_size
    h, w = x.shape
    r = _responses(x, bank)
    coef = -alphas[:, None, None] * r / (1.0 + 0.5 * r * r)
    grad = np.zeros_like(x)
    for k, (dr, dc) in enumerate(_offsets(size)):
        grad[dr:dr + h - size + 1, dc:dc + w - size + 1] += np.tensordot(bank.filters[:, k], coef, axes=1)
    grad[~unknown] = 0.0
    return grad


def log_prior_gradient(img, mask: InpaintMask, bank: FilterBank, cfg: BaselineConfig | None = None) -> np.ndarray:
    """d log prior / dx as a full-size array, zero at observed pixels."""
    cfg = cfg or BaselineConfig()
    x = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    mask.check_matches(GrayImage(x))
    return _gradient(x, mask.unknown, bank, cfg.alpha_vector(len(bank)))


def run_baseline(img: GrayImage, mask: InpaintMask, bank: FilterBank, cfg: BaselineConfig | None = None):
    """Inpaint by gradient ascent; returns (image, energy trace, seconds per iteration)."""
    cfg = cfg or BaselineConfig()
    mask.check_matches(img)
    alphas = cfg.alpha_vector(len(bank))
    unk = mask.unknown
    x = img.data.copy()
    x[unk] = INITIAL_FILL
    trace = np.empty(cfg.iterations)
    t0 = time.perf_counter()
    for n in range(cfg.iterations):
        x[unk] = np.clip(x[unk] + cfg.step_size * _gradient(x, unk, bank, alphas)[unk], 0.0, 255.0)
        trace[n] = log_prior(x, mask, bank, alphas)
    per_iter = (time.perf_counter() - t0) / cfg.iterations if cfg.iterations else 0.0
    return GrayImage(x), trace, per_iter


def energy_trace_text(trace) -> str:
    lines = ["# gminpaint baseline energy trace v1", "iteration\tlog_prior"]
    lines += [f"{n}\t{e:.10g}" for n, e in enumerate(trace, start=1)]
    return "\n".join(lines) + "\n"
