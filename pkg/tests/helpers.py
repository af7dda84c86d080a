"""Shared oracles and random constructions for the tests."""
import math
import string

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from gminpaint.gaussmix import GaussianMixture
from gminpaint.graph import build_graph


def random_spd(rng, n, lo=0.2, hi=3.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(rng.uniform(lo, hi, size=n)) @ q.T


def random_mixture(rng, vars, k, spread=2.0):
    """Full-rank mixture with moderate weights, means and precisions."""
    n = len(vars)
    precs = np.array([random_spd(rng, n) for _ in range(k)])
    means = rng.normal(scale=spread, size=(k, n))
    lws = rng.normal(scale=0.5, size=k)
    infos = np.einsum("kij,kj->ki", precs, means)
    return GaussianMixture(vars, log_weights=lws, precisions=precs, infos=infos)


def moment_log_density(m: GaussianMixture, x, keep=None):
    """Independent oracle: each component as beta * (pi^n / det L)^(1/2) * N(mu, (2L)^-1),
    optionally marginalized in moment form onto the positions ``keep``."""
    x = np.atleast_2d(x)
    n = m.dim
    terms = []
    for lw, prec, info in zip(m.log_weights, m.precisions, m.infos):
        mu = np.linalg.solve(prec, info)
        cov = np.linalg.inv(2.0 * prec)
        mass = lw + 0.5 * n * math.log(math.pi) - 0.5 * np.linalg.slogdet(prec)[1]
        if keep is not None:
            mu, cov = mu[keep], cov[np.ix_(keep, keep)]
        terms.append(mass + multivariate_normal(mu, cov).logpdf(x))
    return logsumexp(np.array(terms).reshape(len(terms), -1), axis=0)


def brute_force_modes(img, mask, potential, levels=np.arange(256.0)):
    """Argmax of each unknown pixel's exact marginal, by scanning all level combinations.

    The joint over the unknown pixels is the product of the 4-pixel potential
    evaluated on every window touching an unknown pixel; it is built as a dense
    log table (256^n entries), so only a handful of unknowns are feasible.
    """
    g = build_graph(img, mask)
    pix = g.unknown_pixels
    idx = {p: i for i, p in enumerate(pix)}
    n = len(pix)
    if n > 3:
        raise ValueError("brute force is limited to 3 unknown pixels")
    joint = np.zeros((levels.size,) * n)
    for c in g.cliques:
        grids = np.meshgrid(*[levels] * len(c.vars), indexing="ij")
        pts = np.zeros(grids[0].shape + (4,))
        for k, pid in enumerate(c.window):
            pts[..., k] = grids[c.vars.index(pid)] if pid in c.vars else img.data.flat[pid]
        table = potential.log_density(pts.reshape(-1, 4)).reshape(grids[0].shape)
        shape = [1] * n
        for p in c.vars:
            shape[idx[p]] = levels.size
        # windows list their unknowns in ascending pixel order, matching idx
        joint = joint + table.reshape(shape)
    modes = []
    for i in range(n):
        other = tuple(a for a in range(n) if a != i)
        marg = logsumexp(joint, axis=other) if other else joint
        modes.append(int(levels[np.argmax(marg)]))
    return pix, modes


def line_mask(shape, row, col, length, vertical):
    m = np.zeros(shape, dtype=bool)
    for k in range(length):
        m[row + k * vertical, col + k * (1 - vertical)] = True
    return m


LETTERS = string.ascii_lowercase
