"""Forward simulation of the dynamic feature model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlog1py

from .diffusion import propagate, propagate_back_grid, propagate_grid
from .measures import (
    IdSource,
    PRFParams,
    bernoulli_rows,
    posterior_beta_draw,
    sample_ibp,
    sample_truncated_process,
)


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        if t.size == 0:
            raise ValueError("time grid is empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def regular(cls, n_times: int, spacing: float, start: float = 0.0) -> "TimeGrid":
        return cls(start + spacing * np.arange(n_times))

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self):
        return self.times.size


@dataclass
class FeatureSystem:
    """Feature trajectories on a grid; ``values[t, k]`` is the mass of feature ``ids[k]``."""

    grid: TimeGrid
    ids: np.ndarray
    values: np.ndarray
    birth: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.grid), self.ids.size)
        self.birth = np.asarray(self.birth, dtype=np.int64)
        if np.unique(self.ids).size != self.ids.size:
            raise ValueError("feature ids must be unique")

    @property
    def n_features(self) -> int:
        return self.ids.size

    def active_at(self, t: int, u: float) -> np.ndarray:
        return self.values[t] >= u


@dataclass
class AllocationSeries:
    """Binary allocation matrices ``Z_t`` sharing one feature-column space."""

    Z: list
    ids: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.Z = [np.asarray(z, dtype=np.int8) for z in self.Z]
        for z in self.Z:
            if z.ndim != 2 or z.shape[1] != self.ids.size:
                raise ValueError(f"allocation matrix shape {z.shape} does not match {self.ids.size} ids")

    @property
    def N(self) -> np.ndarray:
        return np.array([z.shape[0] for z in self.Z])

    @property
    def counts(self) -> np.ndarray:
        """``n[t, k]``: number of objects at time ``t`` with feature ``k``."""
        if not self.Z:
            return np.zeros((0, self.ids.size), dtype=np.int64)
        return np.stack([z.sum(axis=0) for z in self.Z]).astype(np.int64)

    def seen(self) -> np.ndarray:
        return self.counts.sum(axis=0) > 0

    def sorted_by_id(self) -> "AllocationSeries":
        order = np.argsort(self.ids, kind="stable")
        return AllocationSeries([z[:, order] for z in self.Z], self.ids[order])

    def stacked(self) -> np.ndarray:
        return np.vstack(self.Z) if self.Z else np.zeros((0, self.ids.size), dtype=np.int8)


def _check_counts(N, T1):
    N = np.asarray(N, dtype=np.int64).ravel()
    if N.size == 1 and T1 > 1:
        N = np.repeat(N, T1)
    if N.size != T1 or np.any(N < 1):
        raise ValueError("need one positive object count per grid time")
    return N


def simulate_prf_system(params: PRFParams, u: float, grid: TimeGrid, rng: np.random.Generator,
                        step: float | None = None, ids: IdSource | None = None) -> FeatureSystem:
    """Features of ``PRF(alpha, beta)`` whose mass reaches ``u`` at some grid time.

    Features above ``u`` at the first time are drawn from the truncated
    equilibrium process and propagated forward. At each later time candidates
    are drawn the same way, propagated backward, and kept only if they were
    below ``u`` at every earlier grid time.
    """
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    ids = ids or IdSource()
    T1 = len(grid)
    d = grid.durations
    blocks, births = [], []
    for j in range(T1):
        x = sample_truncated_process(params.alpha, params.beta, u, rng)
        vals = np.zeros((T1, x.size))
        if j > 0 and x.size:
            back = propagate_back_grid(x, params.beta, d[:j], rng, step)
            keep = np.all(back[:-1] < u, axis=0)
            x, back = x[keep], back[:, keep]
            vals = np.zeros((T1, x.size))
            vals[: j + 1] = back
        vals[j] = x
        if j < T1 - 1 and x.size:
            vals[j:] = propagate_grid(x, 0.0, params.beta, d[j:], rng, step)
        blocks.append(vals)
        births.append(np.full(x.size, j))
    values = np.concatenate(blocks, axis=1) if blocks else np.zeros((T1, 0))
    birth = np.concatenate(births)
    return FeatureSystem(grid, ids.take(values.shape[1]), values, birth)


def unseen_acceptance(values_before: np.ndarray, N_before: np.ndarray) -> np.ndarray:
    """``prod_t (1 - x_t)^N_t``: probability a feature was unseen at the given times."""
    if values_before.shape[0] == 0:
        return np.ones(values_before.shape[1:])
    logp = xlog1py(N_before[:, None], -np.minimum(values_before, 1.0)).sum(axis=0)
    return np.exp(logp)


def simulate_joint(params: PRFParams, grid: TimeGrid, N, rng: np.random.Generator,
                   step: float | None = None, ids: IdSource | None = None
                   ) -> tuple[FeatureSystem, AllocationSeries]:
    """Jointly simulate seen features and their allocation matrices.

    ``Z`` at the first time is an IBP draw; each seen feature gets a posterior
    beta mass and evolves by ``WF(0, beta)``. At each later time a candidate IBP
    draw supplies features seen there for the first time: their masses are
    propagated backward and the candidates accepted with probability
    ``prod_{earlier t} (1 - x_t)^N_t``.
    """
    ids = ids or IdSource()
    T1 = len(grid)
    N = _check_counts(N, T1)
    d = grid.durations
    a, b = params.alpha, params.beta

    # the Levy density alpha x^-1 (1-x)^(beta-1) is the IBP with mass alpha / beta
    Z0 = sample_ibp(a / b, b, int(N[0]), rng)
    n0 = Z0.sum(axis=0)
    x0 = posterior_beta_draw(n0, N[0], b, rng) if n0.size else np.zeros(0)
    values = np.zeros((T1, n0.size))
    values[0] = x0
    if T1 > 1 and n0.size:
        values = propagate_grid(x0, 0.0, b, d, rng, step)
    birth = np.zeros(n0.size, dtype=np.int64)
    Z = [Z0]
    for j in range(1, T1):
        old = bernoulli_rows(values[j], int(N[j]), rng)
        Zc = sample_ibp(a / b, b, int(N[j]), rng)
        nc = Zc.sum(axis=0)
        if nc.size:
            xc = posterior_beta_draw(nc, N[j], b, rng)
            back = propagate_back_grid(xc, b, d[:j], rng, step)
            acc = rng.random(nc.size) < unseen_acceptance(back[:-1], N[:j])
            xc, back, Zc = xc[acc], back[:, acc], Zc[:, acc]
            new_vals = np.zeros((T1, xc.size))
            new_vals[: j + 1] = back
            if j < T1 - 1 and xc.size:
                new_vals[j:] = propagate_grid(xc, 0.0, b, d[j:], rng, step)
        else:
            Zc = np.zeros((int(N[j]), 0), dtype=np.int8)
            new_vals = np.zeros((T1, 0))
        values = np.concatenate([values, new_vals], axis=1)
        birth = np.concatenate([birth, np.full(new_vals.shape[1], j)])
        Z = [np.pad(z, ((0, 0), (0, new_vals.shape[1]))) for z in Z]
        Z.append(np.concatenate([old, Zc], axis=1).astype(np.int8))
    fid = ids.take(values.shape[1])
    return FeatureSystem(grid, fid, values, birth), AllocationSeries(Z, fid)


def fixed_k_generate(alpha: float, beta: float, K: int, grid: TimeGrid, N, rng: np.random.Generator,
                     step: float | None = None) -> tuple[np.ndarray, AllocationSeries]:
    """Fixed-K model: ``K`` stationary ``WF(alpha beta / K, beta)`` features with Bernoulli allocations.

    Returns ``(values, Z)`` with ``values`` of shape ``(T + 1, K)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    T1 = len(grid)
    N = _check_counts(N, T1)
    mu = alpha * beta / K
    x0 = rng.beta(mu, beta, size=K)
    values = propagate_grid(x0, mu, beta, grid.durations, rng, step)
    Z = [bernoulli_rows(values[t], int(N[t]), rng) for t in range(T1)]
    return values, AllocationSeries(Z, np.arange(K))


def relabel_fixed_k(values_t0: np.ndarray, values_t1: np.ndarray, eps: float) -> np.ndarray:
    """Pairs ``(x(t0), x(t1))`` of fixed-K particles alive (``>= eps``) at both times."""
    keep = (values_t0 >= eps) & (values_t1 >= eps)
    return np.column_stack([values_t0[keep], values_t1[keep]])


__all__ = [
    "AllocationSeries",
    "FeatureSystem",
    "TimeGrid",
    "fixed_k_generate",
    "relabel_fixed_k",
    "simulate_joint",
    "simulate_prf_system",
    "unseen_acceptance",
]
