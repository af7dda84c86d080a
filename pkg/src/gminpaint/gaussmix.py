"""Weighted mixtures of (possibly degenerate) Gaussians in canonical form.

A component over variables ``x`` (length n) is

    beta * exp(-(x - mu)^T L (x - mu))

stored as ``log_weight = log(beta)``, ``precision = L`` and ``info = L mu``.
Note there is no factor 1/2 in the exponent, so ``L`` is half the usual
statistical precision.  ``L`` may be singular (rank-1 lifted experts); the
mean is then any solution of ``L mu = info`` and ``log_weight`` is the peak
value along the range of ``L``.

All mixtures are immutable and operations return new objects.  Components
are stored batched: ``precisions`` has shape (K, n, n), ``infos`` (K, n).
"""
from __future__ import annotations

import contextlib
import contextvars
import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, NumericalFailure

DEFAULT_RIDGE = 1e-6
# relative eigenvalue cutoff when solving L mu = info for singular L
PINV_RCOND = 1e-10
GRAY_LEVELS = np.arange(256, dtype=np.float64)


class WeightMode(enum.Enum):
    """How component weights propagate through product and marginalization.

    EXACT keeps pointwise density semantics (products multiply densities,
    marginals integrate them).  PAPER multiplies peak weights in products and
    leaves them untouched by marginalization.
    """

    EXACT = "exact"
    PAPER = "paper"

    @classmethod
    def parse(cls, value) -> "WeightMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("paper", "paperfaithful", "paper_faithful", "paper-faithful"):
            return cls.PAPER
        return cls(v)


class OpCounter:
    """Tally of (n x n)(n x 1) products and n x n inversions, keyed by n."""

    def __init__(self):
        self.mults = defaultdict(int)
        self.invs = defaultdict(int)

    def mult(self, n, times=1):
        self.mults[int(n)] += int(times)

    def inv(self, n, times=1):
        self.invs[int(n)] += int(times)

    def merge(self, other: "OpCounter"):
        for n, c in other.mults.items():
            self.mults[n] += c
        for n, c in other.invs.items():
            self.invs[n] += c

    def table(self, dims=(1, 2, 3, 4)):
        keys = sorted(set(dims) | set(self.mults) | set(self.invs))
        return [(n, self.mults.get(n, 0), self.invs.get(n, 0)) for n in keys]

    def total(self):
        return sum(self.mults.values()) + sum(self.invs.values())


_COUNTER: contextvars.ContextVar = contextvars.ContextVar("gaussmix_counter", default=None)


@contextlib.contextmanager
def count_operations(counter: OpCounter | None = None):
    """Record matrix operations performed inside the block."""
    counter = counter if counter is not None else OpCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


def _tally(kind, n, times):
    c = _COUNTER.get()
    if c is not None and n > 0 and times > 0:
        getattr(c, kind)(n, times)


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _pseudo_solve(precisions, infos):
    """Batched minimum-norm solution of ``L mu = eta`` and ``q = eta^T mu``."""
    k, n = infos.shape
    if n == 0:
        return np.zeros((k, 0)), np.zeros(k)
    _tally("inv", n, k)
    _tally("mult", n, k)
    w, v = np.linalg.eigh(precisions)
    scale = np.max(np.abs(w), axis=1, keepdims=True)
    keep = w > PINV_RCOND * np.maximum(scale, np.finfo(float).tiny)
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    proj = np.einsum("kji,kj->ki", v, infos)
    means = np.einsum("kij,kj->ki", v, proj * inv_w)
    quads = np.einsum("ki,ki->k", infos, means)
    return means, quads


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian in canonical form."""

    log_weight: float
    precision: np.ndarray
    info: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.precision, dtype=np.float64))
        h = np.atleast_1d(np.asarray(self.info, dtype=np.float64))
        if p.shape != (h.size, h.size):
            raise DimensionMismatch(f"precision {p.shape} does not match info of length {h.size}")
        object.__setattr__(self, "precision", p)
        object.__setattr__(self, "info", h)
        object.__setattr__(self, "log_weight", float(self.log_weight))

    @classmethod
    def from_moments(cls, mean, cov, log_weight=0.0) -> "GaussianComponent":
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        prec = _sym(np.linalg.inv(cov))
        return cls(log_weight, prec, prec @ np.atleast_1d(mean))

    @property
    def dim(self) -> int:
        return self.info.size

    @cached_property
    def mean(self) -> np.ndarray:
        return _pseudo_solve(self.precision[None], self.info[None])[0][0]

    @property
    def covariance(self) -> np.ndarray:
        """``inv(precision)``; only defined for invertible precision."""
        return np.linalg.inv(self.precision)

    def to_moments(self):
        return self.mean, self.covariance

    def density(self, x) -> float:
        return float(GaussianMixture((tuple(range(self.dim))), [self]).density(x))


class GaussianMixture:
    """Weighted sum of Gaussian components over an ordered variable set.

    ``vars`` are integer identifiers kept in ascending order so that equal
    variable sets have identical representations.
    """

    __slots__ = ("vars", "log_weights", "precisions", "infos", "_solved")

    def __init__(self, vars, components=None, *, log_weights=None, precisions=None, infos=None):
        vars = tuple(int(v) for v in vars)
        if list(vars) != sorted(set(vars)):
            raise ValueError(f"variable set must be strictly ascending without duplicates: {vars}")
        n = len(vars)
        if components is not None:
            comps = list(components)
            log_weights = [c.log_weight for c in comps]
            precisions = [c.precision for c in comps]
            infos = [c.info for c in comps]
        lw = np.asarray(log_weights, dtype=np.float64).reshape(-1)
        k = lw.size
        if k == 0:
            raise ValueError("a mixture needs at least one component")
        prec = np.asarray(precisions, dtype=np.float64).reshape(k, n, n)
        info = np.asarray(infos, dtype=np.float64).reshape(k, n)
        for arr in (lw, prec, info):
            arr.setflags(write=False)
        self.vars = vars
        self.log_weights = lw
        self.precisions = prec
        self.infos = info
        self._solved = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def uniform(cls, vars) -> "GaussianMixture":
        """Single flat component (zero precision and info, log weight 0)."""
        n = len(tuple(vars))
        return cls(vars, log_weights=[0.0], precisions=np.zeros((1, n, n)), infos=np.zeros((1, n)))

    @classmethod
    def from_moments(cls, vars, weights, means, covs) -> "GaussianMixture":
        comps = [GaussianComponent.from_moments(m, c, math.log(w)) for w, m, c in zip(weights, means, covs)]
        return cls(vars, comps)

    # -- inspection -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.vars)

    def __len__(self) -> int:
        return self.log_weights.size

    def __repr__(self):
        return f"GaussianMixture(vars={self.vars}, components={len(self)})"

    def component(self, i) -> GaussianComponent:
        return GaussianComponent(self.log_weights[i], self.precisions[i], self.infos[i])

    @property
    def components(self):
        return [self.component(i) for i in range(len(self))]

    def _solve(self):
        if self._solved is None:
            self._solved = _pseudo_solve(self.precisions, self.infos)
        return self._solved

    @property
    def means(self) -> np.ndarray:
        return self._solve()[0]

    @property
    def quads(self) -> np.ndarray:
        """``info^T mean`` per component (the peak-to-scale offset)."""
        return self._solve()[1]

    @property
    def log_scales(self) -> np.ndarray:
        """``log_weight - quad``: the constant term of the log-density exponent."""
        return self.log_weights - self.quads

    def is_uniform(self) -> bool:
        return len(self) == 1 and not self.precisions.any() and not self.infos.any()

    # -- evaluation -------------------------------------------------------------

    def log_density(self, x) -> np.ndarray:
        """Log of the mixture density at point(s) ``x`` of shape (n,) or (N, n)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim <= 1
        x = np.atleast_2d(x) if self.dim else x.reshape(-1, 0)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"point has dimension {x.shape[-1]}, mixture has {self.dim}")
        means = self.means
        # info minus its range component: non-zero only if info is outside range(L)
        resid = self.infos - np.einsum("kij,kj->ki", self.precisions, means)
        d = x[:, None, :] - means[None, :, :]
        quad = np.einsum("nki,kij,nkj->nk", d, self.precisions, d)
        terms = self.log_weights[None, :] - quad + 2.0 * (x @ resid.T)
        out = logsumexp(terms, axis=1)
        return out[0] if single else out

    def density(self, x):
        return np.exp(self.log_density(x))

    # -- variable bookkeeping ---------------------------------------------------

    def embed(self, vars) -> "GaussianMixture":
        """Zero-pad precision and info onto the superset ``vars``."""
        vars = tuple(vars)
        if vars == self.vars:
            return self
        pos = [vars.index(v) for v in self.vars]
        k, n = len(self), len(vars)
        prec = np.zeros((k, n, n))
        prec[:, np.ix_(pos, pos)[0], np.ix_(pos, pos)[1]] = self.precisions
        info = np.zeros((k, n))
        info[:, pos] = self.infos
        return GaussianMixture(vars, log_weights=self.log_weights, precisions=prec, infos=info)

    def relabel(self, mapping) -> "GaussianMixture":
        """Rename variables via ``mapping`` (dict or sequence aligned with ``vars``)."""
        if not isinstance(mapping, dict):
            mapping = dict(zip(self.vars, mapping))
        new = [int(mapping[v]) for v in self.vars]
        order = np.argsort(new, kind="stable")
        prec = self.precisions[:, order][:, :, order]
        info = self.infos[:, order]
        out = GaussianMixture(sorted(new), log_weights=self.log_weights, precisions=prec, infos=info)
        if self._solved is not None:
            out._solved = (self._solved[0][:, order], self._solved[1])
        return out

    def normalize(self) -> "GaussianMixture":
        """Shift log weights so that the largest is 0."""
        top = self.log_weights.max()
        if not np.isfinite(top):
            raise NumericalFailure("mixture has no finite log weight")
        out = GaussianMixture(self.vars, log_weights=self.log_weights - top,
                              precisions=self.precisions, infos=self.infos)
        out._solved = self._solved
        return out

    def take(self, idx) -> "GaussianMixture":
        idx = np.asarray(idx, dtype=int)
        out = GaussianMixture(self.vars, log_weights=self.log_weights[idx],
                              precisions=self.precisions[idx], infos=self.infos[idx])
        if self._solved is not None:
            out._solved = (self._solved[0][idx], self._solved[1][idx])
        return out


def _check_finite(m: GaussianMixture, what):
    if not (np.all(np.isfinite(m.precisions)) and np.all(np.isfinite(m.infos))
            and not np.any(np.isnan(m.log_weights))):
        raise NumericalFailure(f"non-finite values after {what}")
    return m


def density(m: GaussianMixture, x):
    return m.density(x)


def product(a: GaussianMixture, b: GaussianMixture, mode=WeightMode.EXACT) -> GaussianMixture:
    """Pairwise product over ``vars(a) | vars(b)``; component (i, j) is at i * len(b) + j."""
    mode = WeightMode.parse(mode)
    if b.is_uniform() and set(b.vars) <= set(a.vars):
        return a
    if a.is_uniform() and set(a.vars) <= set(b.vars):
        return b
    vars = tuple(sorted(set(a.vars) | set(b.vars)))
    ea, eb = a.embed(vars), b.embed(vars)
    ka, kb, n = len(a), len(b), len(vars)
    prec = (ea.precisions[:, None] + eb.precisions[None, :]).reshape(ka * kb, n, n)
    info = (ea.infos[:, None] + eb.infos[None, :]).reshape(ka * kb, n)
    if mode is WeightMode.PAPER:
        lw = (a.log_weights[:, None] + b.log_weights[None, :]).reshape(-1)
        return _check_finite(GaussianMixture(vars, log_weights=lw, precisions=prec, infos=info), "product")
    scale = (a.log_scales[:, None] + b.log_scales[None, :]).reshape(-1)
    means, quads = _pseudo_solve(prec, info)
    out = GaussianMixture(vars, log_weights=scale + quads, precisions=prec, infos=info)
    out._solved = (means, quads)
    return _check_finite(out, "product")


def marginalize(m: GaussianMixture, keep, mode=WeightMode.EXACT, ridge: float = DEFAULT_RIDGE) -> GaussianMixture:
    """Integrate out every variable not in ``keep``.

    Uses the Schur complement of the eliminated block, which equals taking
    the sub-block of the covariance whenever the covariance exists but stays
    exact when only the eliminated block is invertible.  ``ridge`` * I is
    added to eliminated blocks whose smallest eigenvalue is below ``ridge``.
    """
    mode = WeightMode.parse(mode)
    keep = tuple(sorted(set(int(v) for v in keep)))
    if not keep:
        raise ValueError("keep set must be non-empty")
    if not set(keep) <= set(m.vars):
        raise ValueError(f"keep set {keep} is not a subset of {m.vars}")
    if keep == m.vars:
        return m
    ki = [m.vars.index(v) for v in keep]
    ei = [i for i, v in enumerate(m.vars) if v not in keep]
    k, d, r = len(m), len(ei), len(ki)
    p_kk = m.precisions[:, ki][:, :, ki]
    p_ke = m.precisions[:, ki][:, :, ei]
    p_ee = m.precisions[:, ei][:, :, ei]
    h_k, h_e = m.infos[:, ki], m.infos[:, ei]

    _tally("inv", d, k)
    w, v = np.linalg.eigh(p_ee)
    w = np.where(w[:, :1] < ridge, w + ridge, w) if ridge > 0 else w
    if np.any(w <= 0):
        raise NumericalFailure("eliminated precision block is singular; use a positive ridge")
    a_ee = np.einsum("kij,kj,klj->kil", v, 1.0 / w, v)
    _tally("mult", d, k * (r + 1))
    a_ek = np.einsum("kij,kjl->kil", a_ee, np.swapaxes(p_ke, 1, 2))
    a_he = np.einsum("kij,kj->ki", a_ee, h_e)
    prec = _sym(p_kk - np.einsum("kij,kjl->kil", p_ke, a_ek))
    info = h_k - np.einsum("kij,kj->ki", p_ke, a_he)
    if mode is WeightMode.PAPER:
        out = GaussianMixture(keep, log_weights=m.log_weights, precisions=prec, infos=info)
        return _check_finite(out, "marginalization")
    log_det = np.sum(np.log(w), axis=1)
    scale = m.log_scales + np.einsum("ki,ki->k", h_e, a_he) + 0.5 * d * math.log(math.pi) - 0.5 * log_det
    means, quads = _pseudo_solve(prec, info)
    out = GaussianMixture(keep, log_weights=scale + quads, precisions=prec, infos=info)
    out._solved = (means, quads)
    return _check_finite(out, "marginalization")


def condition(m: GaussianMixture, observed, values) -> GaussianMixture:
    """Restrict every component to ``x[observed] = values``.

    Works directly on the canonical form (no inversion of the observed
    covariance block); log weights absorb the exponent evaluated at the
    observed values so the result is the exact slice of the joint.
    """
    observed = [int(v) for v in observed]
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if not observed:
        raise ValueError("observed set must be non-empty")
    if len(values) != len(observed):
        raise DimensionMismatch(f"{len(observed)} observed variables but {len(values)} values")
    if not set(observed) <= set(m.vars):
        raise ValueError(f"observed {observed} is not a subset of {m.vars}")
    order = {v: x for v, x in zip(observed, values)}
    oi = [i for i, v in enumerate(m.vars) if v in order]
    ui = [i for i, v in enumerate(m.vars) if v not in order]
    if not ui:
        raise ValueError("conditioning on every variable leaves nothing unknown")
    xo = np.array([order[m.vars[i]] for i in oi])
    k = len(m)
    p_uu = m.precisions[:, ui][:, :, ui]
    p_uo = m.precisions[:, ui][:, :, oi]
    p_oo = m.precisions[:, oi][:, :, oi]
    _tally("mult", len(ui), k)
    _tally("mult", len(oi), k)
    info = m.infos[:, ui] - p_uo @ xo
    scale = m.log_scales + 2.0 * m.infos[:, oi] @ xo - np.einsum("i,kij,j->k", xo, p_oo, xo)
    means, quads = _pseudo_solve(p_uu, info)
    out = GaussianMixture([m.vars[i] for i in ui], log_weights=scale + quads, precisions=p_uu, infos=info)
    out._solved = (means, quads)
    return _check_finite(out, "conditioning")


def prune(m: GaussianMixture, max_components: int) -> GaussianMixture:
    """Keep the ``max_components`` heaviest components, then normalize.

    Survivors are ordered by decreasing weight; ties go to the lower index.
    """
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    if len(m) > max_components:
        order = np.argsort(-m.log_weights, kind="stable")[:max_components]
        m = m.take(order)
    return m.normalize()


def mode_scan(m: GaussianMixture) -> int:
    """Most likely gray level of a univariate mixture.

    A single component with positive precision returns its mean rounded to
    the nearest level (halves round down), otherwise the density is scanned
    over 0..255 and the lowest maximizing level wins.
    """
    if m.dim != 1:
        raise DimensionMismatch(f"mode_scan needs a univariate mixture, got {m.dim} variables")
    if len(m) == 1 and m.precisions[0, 0, 0] > 0:
        mu = m.infos[0, 0] / m.precisions[0, 0, 0]
        if not np.isfinite(mu):
            raise NumericalFailure("non-finite mean in mode_scan")
        return int(min(255, max(0, math.ceil(mu - 0.5))))
    logd = m.log_density(GRAY_LEVELS[:, None])
    return int(np.argmax(logd))
