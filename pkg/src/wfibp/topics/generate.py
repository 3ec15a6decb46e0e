"""Forward simulation of the focused topic model."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ..generative import TimeGrid, fixed_k_generate, simulate_joint
from ..measures import PRFParams
from .corpus import Corpus


def nb_logpmf(n, r):
    """``log[Gamma(r + n) / (Gamma(r) n!) 2^-(r + n)]``; ``r = 0`` puts all mass on ``n = 0``."""
    n = np.asarray(n, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = gammaln(r + n) - gammaln(r) - gammaln(n + 1) - (r + n) * np.log(2.0)
    return np.where(r == 0, np.where(n == 0, 0.0, -np.inf), out)


def sample_nb(r, rng: np.random.Generator):
    """Document length ``W ~ NB(r, 1/2)`` (mean ``r``)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape, dtype=np.int64)
    pos = r > 0
    out[pos] = rng.negative_binomial(r[pos], 0.5)
    return out


def _dirichlet(a, rng):
    g = rng.gamma(a)
    s = g.sum()
    if s == 0:
        # every gamma draw underflowed; the mass goes to one component
        g = np.zeros_like(a)
        g[rng.choice(a.size, p=a / a.sum())] = 1.0
        s = 1.0
    return g / s


def generate_corpus(K: int, grid: TimeGrid, N, D: int, eta: float, gamma: float, alpha: float, beta: float,
                    rng: np.random.Generator, step: float | None = None):
    """Simulate a corpus; ``K = 0`` draws the topic allocations from the nonparametric model.

    Returns ``(corpus, truth)`` where ``truth`` holds the allocations ``Z``,
    trajectories ``values``, word distributions ``rho``, proportions ``phi``
    (``T1 x K``) and per-document assignment arrays ``assign``.
    """
    if D < 2 or eta <= 0 or gamma <= 0:
        raise ValueError("need D >= 2, eta > 0, gamma > 0")
    if K > 0:
        values, Z = fixed_k_generate(alpha, beta, K, grid, N, rng, step)
    else:
        fs, Z = simulate_joint(PRFParams(alpha, beta), grid, N, rng, step)
        values = fs.values
    Kx = Z.ids.size
    rho = rng.dirichlet(np.full(D, eta), size=Kx) if Kx else np.zeros((0, D))
    phi = rng.gamma(gamma, 1.0, size=(len(grid), Kx))
    docs, assign = [], []
    for t, z in enumerate(Z.Z):
        dt, at = [], []
        for i in range(z.shape[0]):
            act = np.flatnonzero(z[i])
            W = int(sample_nb(phi[t, act].sum(), rng)) if act.size else 0
            if W == 0:
                dt.append(np.zeros(0, np.int64))
                at.append(np.zeros(0, np.int64))
                continue
            theta = _dirichlet(phi[t, act], rng)
            a = act[rng.choice(act.size, size=W, p=theta)]
            cdf = np.cumsum(rho[a], axis=1)
            w = (rng.random((W, 1)) > cdf).sum(axis=1)
            dt.append(np.minimum(w, D - 1))
            at.append(a)
        docs.append(dt)
        assign.append(at)
    truth = {"Z": Z, "values": values, "rho": rho, "phi": phi, "assign": assign, "gamma": gamma}
    return Corpus(docs, D), truth
