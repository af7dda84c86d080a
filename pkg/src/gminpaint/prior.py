"""Learning the 2x2 patch prior.

Pipeline: PCA filters from random patches (uniform-gray component dropped),
a 1-D Gaussian mixture per filter fitted by EM to the filter responses,
lifting of each 1-D component to a rank-1 Gaussian over the patch, and the
product of the per-filter mixtures as the clique potential.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegeneratePatches, DimensionMismatch, InsufficientData, MalformedModel
from .gaussmix import GaussianComponent, GaussianMixture, WeightMode, product
from .imageio import GrayImage, extract_patches

SIGMA_MIN = 1e-3
FORMAT_NAME = "gminpaint-prior"
FORMAT_VERSION = 1
DC_COSINE_WARN = 0.95


class DCComponentWarning(UserWarning):
    """The dropped principal component is not close to a uniform patch."""


@dataclass(frozen=True)
class FilterBank:
    patch_size: int
    filters: np.ndarray  # (F, patch_size**2), unit rows
    dropped: np.ndarray | None = None
    dc_cosine: float | None = None

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.filters, dtype=np.float64))
        if f.shape[1] != self.patch_size**2:
            raise DimensionMismatch(f"filters of length {f.shape[1]} do not fit {self.patch_size}x{self.patch_size} patches")
        f.setflags(write=False)
        object.__setattr__(self, "filters", f)

    def __len__(self):
        return self.filters.shape[0]

    def __iter__(self):
        return iter(self.filters)


@dataclass(frozen=True)
class Gaussian1D:
    weight: float
    mean: float
    sigma: float

    def density(self, r):
        """Unnormalized ``weight * exp(-(r - mean)^2 / (2 sigma^2))``."""
        r = np.asarray(r, dtype=np.float64)
        return self.weight * np.exp(-((r - self.mean) ** 2) / (2.0 * self.sigma**2))


def expert_density(components, r, weights: str = "density"):
    """1-D expert value at response(s) ``r``, weighted as in :func:`component_log_weight`."""
    r = np.asarray(r, dtype=np.float64)
    return sum(math.exp(component_log_weight(g, weights)) * np.exp(-((r - g.mean) ** 2) / (2.0 * g.sigma**2))
               for g in components)


@dataclass
class PriorModel:
    filter_bank: FilterBank
    experts: list  # per filter, list of Gaussian1D
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.experts) != len(self.filter_bank):
            raise MalformedModel(f"{len(self.experts)} experts for {len(self.filter_bank)} filters")

    @property
    def patch_size(self):
        return self.filter_bank.patch_size

    def with_components(self, k):
        """Copy keeping only the ``k`` heaviest components of each expert (weights renormalized)."""
        experts = []
        for comps in self.experts:
            top = sorted(comps, key=lambda g: -g.weight)[:k]
            total = sum(g.weight for g in top)
            experts.append([Gaussian1D(g.weight / total, g.mean, g.sigma) for g in top])
        return PriorModel(self.filter_bank, experts, dict(self.metadata))


# -- filters --------------------------------------------------------------------


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def learn_filters(patches, exact_dc: bool = True) -> FilterBank:
    """PCA filters with the leading (uniform-gray) component removed.

    The leading eigenvector of the patch covariance is dropped; a
    :class:`DCComponentWarning` is emitted if its absolute cosine with the
    all-ones direction is below 0.95.  With ``exact_dc`` the returned filters
    are the principal components of the covariance projected orthogonally to
    the all-ones vector, so every filter has exactly zero response to a
    constant patch; otherwise the raw trailing eigenvectors are returned.
    """
    x = np.asarray(patches, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("patches must be a 2-D array (count, size*size)")
    count, n = x.shape
    size = int(round(math.sqrt(n)))
    if size * size != n:
        raise DimensionMismatch(f"patch length {n} is not a square")
    if count < n + 1:
        raise DegeneratePatches(f"need at least {n + 1} patches, got {count}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (count - 1)
    w, v = np.linalg.eigh(cov)
    if w[-1] <= 1e-12 * max(1.0, float(np.abs(x).max()) ** 2):
        raise DegeneratePatches("patch set has zero variance")
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    dc = np.full(n, 1.0 / math.sqrt(n))
    top = _fix_sign(v[:, 0])
    cosine = abs(float(top @ dc))
    if cosine < DC_COSINE_WARN:
        warnings.warn(f"dropped principal component has |cos| = {cosine:.3f} with the uniform patch",
                      DCComponentWarning, stacklevel=2)
    if exact_dc:
        proj = np.eye(n) - np.outer(dc, dc)
        wp, vp = np.linalg.eigh(proj @ cov @ proj)
        # the all-ones direction is the exact null vector; drop it by overlap, not by rank
        overlap = np.abs(vp.T @ dc)
        idx = [i for i in np.argsort(wp)[::-1] if overlap[i] < 0.5][: n - 1]
        filters = np.array([_fix_sign(vp[:, i] - (vp[:, i] @ dc) * dc) for i in idx])
        filters /= np.linalg.norm(filters, axis=1, keepdims=True)
    else:
        filters = np.array([_fix_sign(v[:, i]) for i in range(1, n)])
    return FilterBank(size, filters, dropped=top, dc_cosine=cosine)


def filter_responses(bank: FilterBank, patches) -> np.ndarray:
    """Inner products, shape (filters, patches)."""
    x = np.atleast_2d(np.asarray(patches, dtype=np.float64))
    if x.shape[1] != bank.filters.shape[1]:
        raise DimensionMismatch(f"patches of length {x.shape[1]} vs filters of length {bank.filters.shape[1]}")
    return bank.filters @ x.T


# -- 1-D mixtures -----------------------------------------------------------------


def kmeans_init(data, k: int, seed: int, max_iters: int = 100):
    """Lloyd's algorithm in 1-D, seeded with ``k`` distinct data values.

    Returns (weight, mean, sigma) triples sorted by mean.  Sigmas are the
    within-cluster standard deviations floored at ``SIGMA_MIN``.
    """
    x = np.asarray(data, dtype=np.float64).ravel()
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.size < k:
        raise InsufficientData(f"{x.size} data points for {k} clusters")
    uniq = np.unique(x)
    if uniq.size < k:
        raise InsufficientData(f"only {uniq.size} distinct values for {k} clusters")
    rng = np.random.default_rng(seed)
    centers = np.sort(rng.choice(uniq, size=k, replace=False))
    labels = None
    for _ in range(max_iters):
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if members.size:
                centers[j] = members.mean()
    out = []
    for j in range(k):
        members = x[labels == j]
        sigma = members.std() if members.size else 0.0
        out.append((members.size / x.size, float(centers[j]), max(float(sigma), SIGMA_MIN)))
    return sorted(out, key=lambda t: t[1])


def _log_normal(x, mean, sigma):
    return -0.5 * ((x[:, None] - mean) / sigma) ** 2 - np.log(sigma) - 0.5 * math.log(2 * math.pi)


def fit_gmm_em(data, k: int = 3, seed: int = 0, tol: float = 1e-6, max_iters: int = 500,
               return_loglik: bool = False):
    """Fit a k-component 1-D Gaussian mixture by EM from a k-means start.

    Stops once the mean log-likelihood improves by less than ``tol``.  With
    ``return_loglik`` the per-iteration mean log-likelihoods are returned too
    (entry 0 is the k-means initialization).
    """
    x = np.asarray(data, dtype=np.float64).ravel()
    if x.size < k:
        raise InsufficientData(f"{x.size} data points for {k} components")
    from scipy.special import logsumexp

    init = kmeans_init(x, k, seed)
    w = np.array([t[0] for t in init])
    mu = np.array([t[1] for t in init])
    sd = np.array([t[2] for t in init])

    def loglik(w, mu, sd):
        with np.errstate(divide="ignore"):
            lp = _log_normal(x, mu, sd) + np.log(w)
        total = logsumexp(lp, axis=1)
        return lp, total

    lp, total = loglik(w, mu, sd)
    history = [float(total.mean())]
    for _ in range(max_iters):
        resp = np.exp(lp - total[:, None])
        nk = resp.sum(axis=0)
        live = nk > 0
        w = nk / x.size
        mu = np.where(live, (resp * x[:, None]).sum(axis=0) / np.where(live, nk, 1.0), mu)
        var = (resp * (x[:, None] - mu) ** 2).sum(axis=0) / np.where(live, nk, 1.0)
        sd = np.where(live, np.maximum(np.sqrt(var), SIGMA_MIN), sd)
        lp, total = loglik(w, mu, sd)
        history.append(float(total.mean()))
        if history[-1] - history[-2] < tol:
            break
    comps = [Gaussian1D(float(a), float(b), float(c)) for a, b, c in zip(w, mu, sd)]
    comps.sort(key=lambda g: g.mean)
    if return_loglik:
        return comps, np.array(history)
    return comps


# -- lifting and the clique potential ---------------------------------------------


EXPERT_WEIGHTS = ("density", "peak")


def component_log_weight(g: Gaussian1D, weights: str = "density") -> float:
    """Log peak value of one expert component.

    ``density`` uses the fitted mixture density, weight / (sqrt(2 pi) sigma);
    ``peak`` uses the mixing weight itself as the peak value.
    """
    if g.weight <= 0:
        return -math.inf
    if weights == "peak":
        return math.log(g.weight)
    if weights == "density":
        return math.log(g.weight) - math.log(math.sqrt(2 * math.pi) * g.sigma)
    raise ValueError(f"unknown expert weighting {weights!r}")


def lift_1d(g: Gaussian1D, filt, weights: str = "density") -> GaussianComponent:
    """Rank-1 Gaussian over the patch equal to ``g`` evaluated at the filter response.

    precision = J J^T / (2 sigma^2); the mean representative puts all of
    mu / J_p on the coordinate p of the largest |J_p|.  See
    :func:`component_log_weight` for ``weights``.
    """
    j = np.asarray(filt, dtype=np.float64).ravel()
    if not np.any(j):
        raise ValueError("cannot lift onto a zero filter")
    prec = np.outer(j, j) / (2.0 * g.sigma**2)
    p = int(np.argmax(np.abs(j)))
    mean = np.zeros_like(j)
    mean[p] = g.mean / j[p]
    return GaussianComponent(component_log_weight(g, weights), prec, prec @ mean)


def expert_mixture(components, filt, weights: str = "density") -> GaussianMixture:
    j = np.asarray(filt).ravel()
    return GaussianMixture(range(j.size), [lift_1d(g, j, weights) for g in components])


def build_clique_potential(model: PriorModel, mode=WeightMode.EXACT, weights: str = "density") -> GaussianMixture:
    """Product of the lifted expert mixtures over the patch variables 0..n-1."""
    mixtures = [expert_mixture(comps, f, weights) for comps, f in zip(model.experts, model.filter_bank)]
    potential = mixtures[0]
    for m in mixtures[1:]:
        potential = product(potential, m, mode)
    return potential


# -- end-to-end learning ------------------------------------------------------------


def sample_patches(images, count: int, size: int, seed: int) -> np.ndarray:
    """Draw ``count`` patches from a list of images, picking the image uniformly per patch."""
    if not images:
        raise DegeneratePatches("no images to sample from")
    rng = np.random.default_rng(seed)
    which = rng.integers(0, len(images), size=count)
    seeds = rng.integers(0, 2**63 - 1, size=len(images))
    parts = []
    for i, img in enumerate(images):
        c = int(np.sum(which == i))
        if c:
            parts.append(extract_patches(img, size, c, int(seeds[i])))
    out = np.concatenate(parts, axis=0)
    # restore the interleaving implied by ``which`` so the order does not depend on grouping
    order = np.argsort(np.argsort(which, kind="stable"), kind="stable")
    return out[order]


def learn_prior(images, n_patches: int = 50_000, em_samples: int = 5_000, k: int = 3,
                seed: int = 0, patch_size: int = 2) -> PriorModel:
    """Learn filters and per-filter mixtures from a list of :class:`GrayImage`."""
    images = [im if isinstance(im, GrayImage) else GrayImage(im) for im in images]
    s_pca, s_em, s_fit = np.random.SeedSequence(seed).generate_state(3)
    patches = sample_patches(images, n_patches, patch_size, int(s_pca))
    bank = learn_filters(patches)
    em_patches = sample_patches(images, em_samples, patch_size, int(s_em))
    responses = filter_responses(bank, em_patches)
    experts = [fit_gmm_em(r, k=k, seed=int(s_fit) + f) for f, r in enumerate(responses)]
    meta = {
        "patch_size": patch_size,
        "n_patches": int(n_patches),
        "em_samples": int(em_samples),
        "components": int(k),
        "seed": int(seed),
        "n_images": len(images),
        "dc_cosine": float(bank.dc_cosine),
        # Pearson kurtosis of each filter's responses (3 for a Gaussian)
        "kurtosis": [float(v) for v in stats.kurtosis(responses, axis=1, fisher=False)],
    }
    return PriorModel(bank, experts, meta)


# -- serialization ----------------------------------------------------------------


def _fmt(value, indent=0):
    pad = "  " * indent
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError("model values must be finite")
        return format(v, ".17g")
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ",\n".join(f"{pad}  {json.dumps(str(k))}: {_fmt(v, indent + 1)}" for k, v in value.items())
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in value):
            return "[" + ", ".join(_fmt(v) for v in value) + "]"
        inner = ",\n".join(f"{pad}  {_fmt(v, indent + 1)}" for v in value)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_model(model: PriorModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "patch_size": int(model.patch_size),
        "filters": [[float(v) for v in f] for f in model.filter_bank.filters],
        "experts": [[{"weight": g.weight, "mean": g.mean, "sigma": g.sigma} for g in comps]
                    for comps in model.experts],
        "metadata": model.metadata,
    }
    return _fmt(doc) + "\n"


def loads_model(text: str) -> PriorModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"model file is not valid: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise MalformedModel("not a gminpaint prior model")
    if doc.get("version") != FORMAT_VERSION:
        raise MalformedModel(f"unsupported model version {doc.get('version')!r} (expected {FORMAT_VERSION})")
    try:
        size = int(doc["patch_size"])
        filters = np.array(doc["filters"], dtype=np.float64)
        experts = [[Gaussian1D(float(g["weight"]), float(g["mean"]), float(g["sigma"])) for g in comps]
                   for comps in doc["experts"]]
        metadata = dict(doc.get("metadata", {}))
        bank = FilterBank(size, filters)
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise MalformedModel(f"model file is inconsistent: {exc}") from exc
    if any(not comps for comps in experts) or any(g.sigma <= 0 or g.weight < 0 for c in experts for g in c):
        raise MalformedModel("every expert needs components with positive sigma and non-negative weight")
    return PriorModel(bank, experts, metadata)


def save_model(model: PriorModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> PriorModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


DEFAULT_MODEL_RESOURCE = "default_prior.json"


def default_model() -> PriorModel:
    """The prior shipped with the package (learned from the bundled test corpus, seed 0)."""
    from importlib.resources import files

    return loads_model(files("gminpaint").joinpath("data", DEFAULT_MODEL_RESOURCE).read_text(encoding="utf-8"))
