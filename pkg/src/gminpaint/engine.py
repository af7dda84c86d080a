"""Belief propagation with Gaussian-mixture messages.

Each clique's potential is the shared 2x2 prior conditioned on the clique's
known pixels.  Messages are mixtures over separators; a message i -> j is
the product of clique i's potential with its other incoming messages,
integrated down to the separator, pruned to ``max_components`` and
normalized.  After every iteration each unknown pixel is read off the
belief of the lowest-id clique containing it.
"""
from __future__ import annotations

import concurrent.futures
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .gaussmix import (
    _COUNTER,
    DEFAULT_RIDGE,
    GaussianMixture,
    OpCounter,
    WeightMode,
    condition,
    count_operations,
    marginalize,
    mode_scan,
    product,
    prune,
)
from .graph import CliqueGraph, build_graph, make_schedule
from .imageio import GrayImage, InpaintMask
from .prior import PriorModel, build_clique_potential

log = logging.getLogger(__name__)

INITIAL_FILL = 128.0


@dataclass
class EngineConfig:
    weight_mode: WeightMode = WeightMode.EXACT
    max_components: int = 1
    iterations: int = 3
    convergence_tol: float = 0.1
    ridge: float = DEFAULT_RIDGE
    schedule: str = "auto"
    # "lowest": belief of the lowest-id clique; "mean": mean of the modes of all covering cliques
    pixel_reduce: str = "lowest"
    # read all messages from the previous iteration (loopy only)
    synchronous: bool = False
    workers: int = 1
    # bound on intermediate products; None means len(potential) * max_components
    product_cap: int | None = None
    # expert component weighting used when the potential is built from a PriorModel
    expert_weights: str = "density"
    # loopy message graph: "full" (every shared pixel on every edge) or "valid" (running intersection)
    cluster: str = "full"

    def __post_init__(self):
        self.weight_mode = WeightMode.parse(self.weight_mode)
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.convergence_tol < 0 or self.ridge < 0:
            raise ValueError("convergence_tol and ridge must be non-negative")
        if self.pixel_reduce not in ("lowest", "mean"):
            raise ValueError(f"unknown pixel_reduce {self.pixel_reduce!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.cluster not in ("full", "valid"):
            raise ValueError(f"unknown cluster graph {self.cluster!r}")


@dataclass
class IterationStats:
    iteration: int
    mean_change: float
    max_change: float
    wall_time: float
    messages: int
    ops: OpCounter


@dataclass
class RunStats:
    schedule: str = "none"
    n_unknown: int = 0
    n_cliques: int = 0
    n_edges: int = 0
    stop_reason: str = "no_unknowns"
    iterations: list = field(default_factory=list)
    # unknown pixel ids (row-major) and their estimates after each iteration
    pixels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    history: list = field(default_factory=list)

    @property
    def ops(self) -> OpCounter:
        total = OpCounter()
        for it in self.iterations:
            total.merge(it.ops)
        return total

    def image_at(self, img: GrayImage, iteration: int) -> GrayImage:
        """Input image with the estimates of a given (1-based) iteration filled in."""
        out = img.data.copy().reshape(-1)
        out[self.pixels] = self.history[iteration - 1]
        return GrayImage(out.reshape(img.shape))

    def to_text(self, timing: bool = False) -> str:
        """Tab-separated per-iteration rows preceded by '#' metadata lines.

        Wall times are left out unless ``timing`` is set, so that identical
        runs give byte-identical files.
        """
        dims = sorted({n for it in self.iterations for n in (*it.ops.mults, *it.ops.invs)} | {1, 2, 3, 4})
        head = ["iteration", "mean_change", "max_change"] + (["wall_time_s"] if timing else []) + ["messages"]
        head += [f"mult_n{n}" for n in dims] + [f"inv_n{n}" for n in dims]
        lines = [
            "# gminpaint run statistics v1",
            f"# schedule={self.schedule} unknown={self.n_unknown} cliques={self.n_cliques} "
            f"edges={self.n_edges} stop={self.stop_reason}",
            "\t".join(head),
        ]
        for it in self.iterations:
            row = [str(it.iteration), f"{it.mean_change:.6f}", f"{it.max_change:.6f}"]
            row += [f"{it.wall_time:.6f}"] if timing else []
            row += [str(it.messages)]
            row += [str(it.ops.mults.get(n, 0)) for n in dims] + [str(it.ops.invs.get(n, 0)) for n in dims]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def count_ops(stats: RunStats):
    """(n, multiplications, inversions) rows summed over the run, n = 1..4."""
    return stats.ops.table()


def condition_potentials(g: CliqueGraph, potential: GaussianMixture):
    """Shared 4-pixel potential relabeled onto each window and conditioned on its known pixels."""
    out = []
    potential.quads  # solve the shared potential once; relabeled copies reuse it
    for c in g.cliques:
        local = potential.relabel(c.window)
        if c.observed:
            pids, vals = zip(*c.observed)
            local = condition(local, pids, vals)
        out.append(local)
    return out


def _accumulate(base, incoming, mode, cap):
    acc = base
    for m in incoming:
        if m.is_uniform():
            continue
        acc = product(acc, m, mode)
        if len(acc) > cap:
            acc = prune(acc, cap)
    return acc


def send_message(g: CliqueGraph, potentials, messages, edge, cfg: EngineConfig, schedule=None) -> GaussianMixture:
    """Compute the message along directed ``edge`` = (i, j).

    ``schedule`` supplies the neighbour lists and separators; by default the
    full clique graph is used.
    """
    i, j = edge
    adjacency = g.adjacency if schedule is None else schedule.adjacency
    sep = g.separator(i, j) if schedule is None else schedule.separator(i, j)
    cap = cfg.product_cap or len(potentials[i]) * cfg.max_components
    try:
        incoming = [messages[(k, i)] for k in adjacency[i] if k != j]
        acc = _accumulate(potentials[i], incoming, cfg.weight_mode, cap)
        msg = marginalize(acc, sep, cfg.weight_mode, cfg.ridge)
        return prune(msg, cfg.max_components)
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalFailure(str(exc), clique=i, edge=edge) from exc


def belief(potentials, messages, adjacency, i, cfg: EngineConfig) -> GaussianMixture:
    cap = cfg.product_cap or len(potentials[i]) * cfg.max_components
    return _accumulate(potentials[i], [messages[(k, i)] for k in adjacency[i]], cfg.weight_mode, cap)


def _estimate(g, potentials, messages, adjacency, cfg, pixels):
    beliefs = {}

    def pixel_mode(cid, pid):
        if cid not in beliefs:
            try:
                beliefs[cid] = belief(potentials, messages, adjacency, cid, cfg)
            except (NumericalFailure, np.linalg.LinAlgError) as exc:
                raise NumericalFailure(str(exc), clique=cid) from exc
        return mode_scan(marginalize(beliefs[cid], (pid,), cfg.weight_mode, cfg.ridge))

    est = np.empty(len(pixels))
    for n, pid in enumerate(pixels):
        ids = g.pixel_cliques[pid]
        if cfg.pixel_reduce == "lowest":
            est[n] = pixel_mode(ids[0], pid)
        else:
            est[n] = float(np.mean([pixel_mode(c, pid) for c in ids]))
    return est


def _sweep_sync(g, potentials, messages, edges, cfg, schedule):
    old = dict(messages)

    def one(e):
        ctx_counter = OpCounter()
        with count_operations(ctx_counter):
            return e, send_message(g, potentials, old, e, cfg, schedule), ctx_counter

    if cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(one, edges))
    else:
        results = [one(e) for e in edges]
    parent = _COUNTER.get()
    for e, msg, c in results:
        messages[e] = msg
        if parent is not None:
            parent.merge(c)


def run(img: GrayImage, mask: InpaintMask, model, cfg: EngineConfig | None = None):
    """Inpaint ``img`` where ``mask`` is set.

    ``model`` is a :class:`PriorModel` or an already built 4-variable
    potential.  Returns the inpainted image and :class:`RunStats`.
    """
    cfg = cfg or EngineConfig()
    mask.check_matches(img)
    stats = RunStats()
    if mask.count == 0:
        return GrayImage(img.data.copy()), stats

    g = build_graph(img, mask)
    potential = build_clique_potential(model, cfg.weight_mode, cfg.expert_weights) if isinstance(model, PriorModel) else model
    if potential.dim != 4:
        raise ValueError(f"the clique potential must cover 4 pixels, got {potential.dim}")
    schedule = make_schedule(g, cfg.schedule, cfg.iterations, cfg.cluster)
    pixels = np.array(g.unknown_pixels, dtype=int)
    stats.schedule = schedule.kind
    stats.n_unknown = len(pixels)
    stats.n_cliques = len(g)
    stats.n_edges = len(schedule.separators)
    stats.pixels = pixels
    stats.stop_reason = "iteration_cap"

    setup = OpCounter()
    with count_operations(setup):
        potentials = condition_potentials(g, potential)
    messages = {}
    for (i, j), sep in schedule.separators.items():
        messages[(i, j)] = GaussianMixture.uniform(sep)
        messages[(j, i)] = GaussianMixture.uniform(sep)

    if schedule.kind == "two_pass":
        rounds = [schedule.passes]
    else:
        rounds = [[p] for p in schedule.passes] or [[()]]
    synchronous = cfg.synchronous and schedule.kind == "loopy"

    prev = np.full(len(pixels), INITIAL_FILL)
    for n, passes in enumerate(rounds, start=1):
        counter = OpCounter()
        if n == 1:
            counter.merge(setup)
        t0 = time.perf_counter()
        sent = 0
        with count_operations(counter):
            for edges in passes:
                if synchronous:
                    _sweep_sync(g, potentials, messages, edges, cfg, schedule)
                else:
                    for e in edges:
                        messages[e] = send_message(g, potentials, messages, e, cfg, schedule)
                sent += len(edges)
            est = _estimate(g, potentials, messages, schedule.adjacency, cfg, pixels)
        wall = time.perf_counter() - t0
        change = np.abs(est - prev)
        stats.iterations.append(IterationStats(n, float(change.mean()), float(change.max()), wall, sent, counter))
        stats.history.append(est)
        log.info("iteration %d: mean change %.3f, max change %.3f, %.2fs", n,
                 change.mean(), change.max(), wall)
        if len(stats.iterations) >= 3 and stats.iterations[-1].max_change > stats.iterations[-2].max_change:
            log.warning("max change increased at iteration %d (%.3f > %.3f)", n,
                        stats.iterations[-1].max_change, stats.iterations[-2].max_change)
        prev = est
        if schedule.kind == "two_pass":
            stats.stop_reason = "exact"
            break
        if n < len(rounds) and change.max() < cfg.convergence_tol:
            stats.stop_reason = "converged"
            break
    else:
        if stats.iterations and stats.iterations[-1].max_change < cfg.convergence_tol:
            stats.stop_reason = "converged"

    out = img.data.copy().reshape(-1)
    out[pixels] = prev
    return GrayImage(out.reshape(img.shape)), stats
