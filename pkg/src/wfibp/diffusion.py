"""Wright-Fisher numerics: the discrete-population chain and its diffusion limit.

The diffusion ``dX = gamma(X) dt + sigma(X) dB`` with
``gamma(x) = (mu (1 - x) - beta x) / 2`` and ``sigma(x) = sqrt(x (1 - x))`` is
integrated with steps that are exact in law near the boundaries: within
``NEAR_BOUNDARY`` of either end the process is locally a Cox-Ingersoll-Ross
diffusion (with the far factor of ``sigma^2`` frozen over the step), whose
noncentral chi-square transition is sampled directly. Elsewhere plain
Euler-Maruyama steps are used; the two agree to first order. With ``mu = 0``
the origin is absorbing; with ``beta = 0`` so is one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

DEFAULT_MAX_STEP = 1e-3
NEAR_BOUNDARY = 0.1   # distance below which the exact CIR step replaces an Euler step


def default_step(duration: float) -> float:
    """Integration step used when none is configured: ``min(1e-3, duration / 50)``."""
    return min(DEFAULT_MAX_STEP, duration / 50.0)


@dataclass(frozen=True)
class DiffusionParams:
    mu: float
    beta: float
    step: float = DEFAULT_MAX_STEP

    def __post_init__(self):
        if self.mu < 0 or self.beta < 0:
            raise ValueError(f"mutation rates must be nonnegative, got mu={self.mu}, beta={self.beta}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")


@dataclass(frozen=True)
class DiscreteWFParams:
    G: int
    muG: float
    betaG: float

    def __post_init__(self):
        if self.G < 1:
            raise ValueError("population size G must be >= 1")
        if not (0 <= self.muG <= 1 and 0 <= self.betaG <= 1):
            raise ValueError("muG and betaG must lie in [0, 1]")

    def psi(self, i):
        """Post-mutation mutant frequency for a generation with ``i`` mutants."""
        i = np.asarray(i, dtype=float)
        return (i * (1.0 - self.betaG) + (self.G - i) * self.muG) / self.G


@dataclass
class Trajectory:
    """One feature's path on a diffusion-time grid."""

    times: np.ndarray
    values: np.ndarray
    absorbed: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any((self.values < 0) | (self.values > 1)):
            raise ValueError("trajectory values must lie in [0, 1]")

    def __len__(self):
        return self.values.size


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError("x must lie in [0, 1]")
    return x


def drift(x, mu: float, beta: float):
    """Drift term ``(mu (1 - x) - beta x) / 2``."""
    x = _check_unit(x)
    out = 0.5 * (mu * (1.0 - x) - beta * x)
    return float(out) if out.ndim == 0 else out


def diffusion_coeff(x):
    """Volatility ``sqrt(x (1 - x))``."""
    x = _check_unit(x)
    out = np.sqrt(x * (1.0 - x))
    return float(out) if out.ndim == 0 else out


def speed_density(x, mu: float, beta: float):
    """Speed density ``exp(I(x)) / sigma^2(x)`` with ``I(x) = int 2 gamma / sigma^2``.

    The scale integral gives ``I(x) = mu log x + beta log(1 - x)`` up to an
    additive constant fixed so that the ``mu = 0`` case is exactly
    ``x^-1 (1 - x)^(beta - 1)``; for general ``mu`` this is
    ``x^(mu - 1) (1 - x)^(beta - 1)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("speed density is defined on the open interval (0, 1)")
    out = np.exp((mu - 1.0) * np.log(x) + (beta - 1.0) * np.log1p(-x))
    return float(out) if out.ndim == 0 else out


def discrete_step_distribution(i: int, p: DiscreteWFParams) -> np.ndarray:
    """Binomial transition row ``p_ij`` of the population-``G`` chain from state ``i``."""
    if not 0 <= i <= p.G:
        raise ValueError(f"state {i} outside 0..{p.G}")
    return stats.binom.pmf(np.arange(p.G + 1), p.G, float(p.psi(i)))


def discrete_step(y, p: DiscreteWFParams, rng: np.random.Generator):
    """One generation of the discrete chain for an array of mutant counts."""
    y = np.asarray(y)
    return rng.binomial(p.G, p.psi(y))


def _n_substeps(duration: float, step: float) -> int:
    return max(1, int(math.ceil(duration / step - 1e-9)))


@njit(cache=True)
def _integrate_kernel(x, mu, beta, n, dt, seed):
    """``n`` steps in place; Euler-Maruyama in the interior, exact CIR near a boundary.

    Within ``NEAR_BOUNDARY`` of 0 the distance ``Y = X`` follows
    ``dY = (a - k Y) dt + sqrt(s Y) dB`` with ``a = mu / 2``, ``k = (mu + beta) / 2``
    and ``s = 1 - X`` frozen over the step; near 1 the same holds for
    ``Y = 1 - X`` with ``a = beta / 2``. Euler steps smear out the boundary (a
    tiny ``mu`` then behaves like a much larger one); the noncentral chi-square
    transition keeps absorption and the slow escape from the boundary right.
    """
    np.random.seed(seed)
    k = 0.5 * (mu + beta)
    h = -math.expm1(-k * dt) / k if k > 0 else dt
    ek = math.exp(-k * dt)
    sdt = math.sqrt(dt)
    for _ in range(n):
        for i in range(x.size):
            xi = x[i]
            upper = xi > 0.5
            y = 1.0 - xi if upper else xi
            if y >= NEAR_BOUNDARY:
                xi += 0.5 * (mu * (1.0 - xi) - beta * xi) * dt + math.sqrt(xi * (1.0 - xi)) * sdt * np.random.standard_normal()
            else:
                a = beta if upper else mu
                s = 1.0 - y
                c = 0.25 * s * h
                # Y(dt) = c chi'^2(df, lam), drawn as 2 c Gamma(df / 2 + Poisson(lam / 2))
                shape = a / s + np.random.poisson(0.5 * y * ek / c)
                y = 2.0 * c * np.random.gamma(shape, 1.0) if shape > 0 else 0.0
                xi = 1.0 - y if upper else y
            x[i] = min(max(xi, 0.0), 1.0)
    return x


def _integrate(x, mu, beta, n, dt, rng):
    flat = np.ascontiguousarray(x, dtype=float).ravel().copy()
    seed = int(rng.integers(0, 2**32 - 1))
    return _integrate_kernel(flat, float(mu), float(beta), int(n), float(dt), seed).reshape(np.shape(x))


def propagate(x, mu: float, beta: float, duration: float, rng: np.random.Generator,
              step: float | None = None) -> np.ndarray:
    """Advance an array of independent diffusions by ``duration``; returns the endpoints."""
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    x = np.array(x, dtype=float, copy=True)
    if duration == 0 or x.size == 0:
        return x
    step = default_step(duration) if step is None else step
    if step <= 0:
        raise ValueError("step must be positive")
    n = _n_substeps(duration, step)
    return _integrate(x, mu, beta, n, duration / n, rng)


def propagate_grid(x0, mu: float, beta: float, durations, rng: np.random.Generator,
                   step: float | None = None) -> np.ndarray:
    """Values at the start and after each successive interval.

    Returns an array of shape ``(len(durations) + 1, *x0.shape)``.
    """
    x = np.array(x0, dtype=float, copy=True)
    out = np.empty((len(durations) + 1,) + x.shape)
    out[0] = x
    for j, d in enumerate(durations):
        x = propagate(x, mu, beta, d, rng, step)
        out[j + 1] = x
    return out


def simulate_forward(x0: float, params: DiffusionParams, duration: float,
                     rng: np.random.Generator) -> Trajectory:
    """Full-resolution path of one ``WF(mu, beta)`` diffusion started at ``x0``."""
    if not 0 <= x0 <= 1:
        raise ValueError("x0 must lie in [0, 1]")
    if not duration > 0:
        raise ValueError("duration must be positive")
    n = _n_substeps(duration, min(params.step, duration))
    dt = duration / n
    vals = np.empty(n + 1)
    vals[0] = x0
    x = np.array([x0], dtype=float)
    for j in range(n):
        x = _integrate(x, params.mu, params.beta, 1, dt, rng)
        vals[j + 1] = x[0]
    absorbed = False
    if params.mu == 0:
        hit = np.flatnonzero(vals == 0.0)
        absorbed = hit.size > 0
    return Trajectory(np.linspace(0.0, duration, n + 1), vals, absorbed)


def simulate_backward(x_end: float, beta: float, duration: float, step: float,
                      rng: np.random.Generator) -> Trajectory:
    """Path of a ``WF(0, beta)`` diffusion that ends at ``x_end``, in original time order.

    ``WF(0, beta)`` is reversible with respect to its speed density, so running
    the same dynamics forward from ``x_end`` and reversing the index gives the
    backward path. Time zero of the result is ``-duration`` relative to the end.
    """
    if beta <= 0:
        raise ValueError("backward simulation needs beta > 0")
    if duration < 0 or step <= 0:
        raise ValueError("duration must be nonnegative and step positive")
    if duration == 0:
        return Trajectory(np.array([0.0]), np.array([x_end]), x_end == 0.0)
    fwd = simulate_forward(x_end, DiffusionParams(0.0, beta, step), duration, rng)
    # leading zeros in reversed time mark a birth, not an absorption
    return Trajectory(fwd.times, fwd.values[::-1].copy(), x_end == 0.0)


def stationary_sample(mu: float, beta: float, rng: np.random.Generator, size=None):
    """Draw from the ``Beta(mu, beta)`` stationary law of ``WF(mu, beta)``."""
    if mu <= 0 or beta <= 0:
        raise ValueError("WF(mu, beta) has a stationary law only for mu > 0 and beta > 0")
    return rng.beta(mu, beta, size=size)


def propagate_back_grid(x_end, beta: float, durations, rng: np.random.Generator,
                        step: float | None = None) -> np.ndarray:
    """Backward ``WF(0, beta)`` values on a grid ending at ``x_end``.

    ``durations`` are the interval lengths in original time order. Returns shape
    ``(len(durations) + 1, *x_end.shape)`` in original time order, so the last
    row equals ``x_end``.
    """
    if beta <= 0:
        raise ValueError("backward simulation needs beta > 0")
    rev = propagate_grid(x_end, 0.0, beta, list(durations)[::-1], rng, step)
    return rev[::-1].copy()
