"""Beta-process atoms, the two-parameter IBP, and related conjugate draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class PRFParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"PRF needs alpha > 0 and beta > 0, got {self.alpha}, {self.beta}")


@dataclass
class AtomSet:
    masses: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.ids is None:
            self.ids = np.arange(self.masses.size)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.shape != self.masses.shape:
            raise ValueError("one id per mass")
        if np.unique(self.ids).size != self.ids.size:
            raise ValueError("atom ids must be unique")
        if np.any((self.masses <= 0) | (self.masses >= 1)):
            raise ValueError("atom masses must lie in (0, 1)")

    def __len__(self):
        return self.masses.size


class IdSource:
    """Monotone integer ids for features, stable for the lifetime of a run."""

    def __init__(self, start: int = 0):
        self._it = count(start)

    def take(self, n: int) -> np.ndarray:
        return np.array([next(self._it) for _ in range(n)], dtype=np.int64)


def levy_density(x, alpha: float, c: float):
    """Beta-process Levy density ``alpha x^-1 (1 - x)^(c - 1)``.

    ``c = beta`` gives the prior; ``c = beta + N_t`` the intensity of features
    left unseen by ``N_t`` Bernoulli draws.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("Levy density is defined on (0, 1)")
    out = alpha * np.exp((c - 1.0) * np.log1p(-x)) / x
    return float(out) if out.ndim == 0 else out


def levy_mass(a: float, b: float, alpha: float, c: float) -> float:
    """Integral of the Levy density over ``[a, b)`` by adaptive quadrature."""
    if not 0 < a <= b <= 1:
        raise ValueError("interval must lie in (0, 1]")
    if a == b:
        return 0.0
    m = min(b, max(a, 0.5))
    total = 0.0
    if m > a:
        # x = exp(y) removes the 1/x stiffness at the lower end
        f = lambda y: alpha * np.exp((c - 1.0) * np.log1p(-np.exp(y)))
        total += integrate.quad(f, np.log(a), np.log(m), limit=200, epsabs=1e-13, epsrel=1e-11)[0]
    if b > m:
        # v = (1 - x)^c turns the (1 - x)^(c - 1) end into a smooth integrand
        g = lambda v: alpha / (c * (1.0 - v ** (1.0 / c)))
        total += integrate.quad(g, (1.0 - b) ** c, (1.0 - m) ** c, limit=200, epsabs=1e-13, epsrel=1e-11)[0]
    return float(total)


def _sample_inv_x(alpha, lo, hi, rng):
    # Poisson process with intensity alpha/x on [lo, hi)
    if hi <= lo:
        return np.empty(0)
    n = rng.poisson(alpha * np.log(hi / lo))
    return lo * (hi / lo) ** rng.random(n)


def sample_truncated_process(alpha: float, c: float, u: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson process on ``[u, 1)`` with intensity ``alpha x^-1 (1 - x)^(c - 1)``.

    Sampled by thinning. For ``c >= 1`` the envelope is ``alpha / x`` with
    acceptance ``(1 - x)^(c - 1)``. For ``c < 1`` the density blows up at one, so
    the envelope is ``2^(1 - c) alpha / x`` on ``[u, 1/2]`` and
    ``2 alpha (1 - x)^(c - 1)`` on ``(1/2, 1)``.
    """
    if not 0 < u < 1:
        raise ValueError("truncation level u must lie in (0, 1)")
    if alpha <= 0:
        return np.empty(0)
    if c >= 1:
        x = _sample_inv_x(alpha, u, 1.0, rng)
        keep = rng.random(x.size) < np.exp((c - 1.0) * np.log1p(-x))
        return np.sort(x[keep])
    scale = 2.0 ** (1.0 - c)
    mid = max(u, 0.5)
    left = _sample_inv_x(alpha * scale, u, mid, rng)
    left = left[rng.random(left.size) < np.exp((c - 1.0) * np.log1p(-left)) / scale]
    # right piece: intensity 2 alpha (1 - x)^(c - 1) on [mid, 1), inverse CDF in 1 - x
    top = (1.0 - mid) ** c
    n = rng.poisson(2.0 * alpha * top / c)
    right = 1.0 - (top * rng.random(n)) ** (1.0 / c)
    right = right[(right < 1.0) & (rng.random(n) < 1.0 / (2.0 * np.maximum(right, 1e-300)))]
    return np.sort(np.concatenate([left, right]))


def sample_ibp(alpha: float, beta: float, N: int, rng: np.random.Generator) -> np.ndarray:
    """Two-parameter Indian buffet process draw with ``N`` customers.

    Customer ``i`` (1-based) takes an existing dish with probability
    ``m_k / (beta + i - 1)`` and ``Poisson(alpha beta / (beta + i - 1))`` new
    dishes. Columns are ordered by the customer who first took them.
    """
    if N < 1:
        raise ValueError("IBP needs at least one customer")
    if alpha < 0 or beta <= 0:
        raise ValueError("IBP needs alpha >= 0 and beta > 0")
    cols: list[np.ndarray] = []
    m = np.zeros(0)
    rows = []
    for i in range(1, N + 1):
        denom = beta + i - 1.0
        old = rng.random(m.size) < m / denom
        k_new = rng.poisson(alpha * beta / denom) if alpha > 0 else 0
        row = np.concatenate([old, np.ones(k_new, dtype=bool)])
        rows.append(row)
        m = np.concatenate([m, np.zeros(k_new)]) + row
    K = m.size
    Z = np.zeros((N, K), dtype=np.int8)
    for i, row in enumerate(rows):
        Z[i, : row.size] = row
    return Z


def posterior_beta_draw(n, N, beta: float, rng: np.random.Generator, size=None):
    """Mass of a feature seen in ``n`` of ``N`` objects: ``Beta(n, beta + N - n)``."""
    n = np.asarray(n)
    N = np.asarray(N)
    if np.any(n < 1) or np.any(n > N):
        raise ValueError("a seen feature needs 1 <= n <= N")
    return rng.beta(n, beta + N - n, size=size)


def bernoulli_rows(masses, N: int, rng: np.random.Generator) -> np.ndarray:
    """``N`` rows of independent ``Bernoulli(mass_k)`` entries."""
    masses = np.asarray(masses, dtype=float)
    if np.any((masses < 0) | (masses > 1)):
        raise ValueError("masses must lie in [0, 1]")
    return (rng.random((N, masses.size)) < masses).astype(np.int8)
