"""Figures for the command-line reports, rendered straight to files."""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=100, metadata={"Software": None} if str(path).endswith(".png") else None)


def inpaint_figure(path, corrupted, result, mask=None, reference=None, titles=None):
    """Side-by-side panels: corrupted input, result and (optionally) the reference."""
    panels = [("corrupted", corrupted), ("inpainted", result)]
    if reference is not None:
        panels.append(("reference", reference))
    if mask is not None:
        panels.insert(1, ("mask", np.where(mask.unknown, 255.0, 0.0)))
    if titles:
        panels = [(t, p[1]) for t, p in zip(titles, panels)]
    fig = Figure(figsize=(3 * len(panels), 3.5))
    for n, (title, data) in enumerate(panels, start=1):
        ax = fig.add_subplot(1, len(panels), n)
        arr = getattr(data, "data", data)
        ax.imshow(arr, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        ax.set_title(title)
        ax.set_axis_off()
    fig.tight_layout()
    _save(fig, path)


def psnr_figure(path, rows):
    """Region PSNR per iteration; ``rows`` is a list of (iteration, whole, region, ssim)."""
    fig = Figure(figsize=(4.5, 3.2))
    ax = fig.add_subplot(1, 1, 1)
    its = [r[0] for r in rows]
    ax.plot(its, [r[1] for r in rows], "o-", label="whole image")
    ax.plot(its, [r[2] for r in rows], "s-", label="masked region")
    ax.set_xlabel("iteration")
    ax.set_ylabel("PSNR (dB)")
    ax.set_xticks(its)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def energy_figure(path, trace):
    fig = Figure(figsize=(4.5, 3.2))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(np.arange(1, len(trace) + 1), trace)
    ax.set_xlabel("iteration")
    ax.set_ylabel("log prior")
    fig.tight_layout()
    _save(fig, path)


def mixture_figure(path, model, span=60.0):
    """Each expert's 1-D mixture over its filter response."""
    from .prior import expert_density

    fig = Figure(figsize=(3.2 * len(model.experts), 3.0))
    r = np.linspace(-span, span, 601)
    for n, (comps, filt) in enumerate(zip(model.experts, model.filter_bank), start=1):
        ax = fig.add_subplot(1, len(model.experts), n)
        ax.semilogy(r, np.maximum(expert_density(comps, r), 1e-12))
        ax.set_title("filter " + " ".join(f"{v:+.2f}" for v in filt), fontsize=8)
        ax.set_xlabel("response")
    fig.tight_layout()
    _save(fig, path)
