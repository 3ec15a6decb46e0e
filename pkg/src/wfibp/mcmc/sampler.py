"""Outer MCMC loop for the nonparametric and fixed-K samplers.

Nonparametric iteration order:

    Z | X, S, D  ->  hook params | Z, D  ->  X_seen | Z (particle Gibbs)
    ->  S | Z, X  ->  X_unseen | S, Z (thinning)

Slices are drawn after the seen trajectories so that ``s_t <= x*(t)`` always
holds for the trajectories the next Gibbs sweep sees. Unseen features are
redrawn from their posterior every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..generative import TimeGrid
from .gibbs import LikelihoodHook, gibbs_sweep
from .moves import swap_sweep, xor_sweep
from .particle import (
    ParticleFilterConfig,
    pg_update_first_seen,
    pg_update_fixed_k,
    pg_update_seen,
    static_update,
)
from .state import InferenceState, sample_slices
from .thinning import thin_unseen


@dataclass
class MCMCConfig:
    alpha: float = 1.0
    beta: float = 1.0
    iterations: int = 2000
    burn_in: int = 200
    thin: int = 1
    n_particles: int = 50
    step: float | None = None
    K: int = 0                  # 0 = nonparametric
    static: bool = False        # frozen-probability baseline (fixed-K only)
    init_features: int = 1      # nonparametric start
    anneal: int = 0             # iterations of tempered Z sweeps at the start of burn-in
    anneal_start: float = 10.0  # initial likelihood temperature, decays geometrically to 1
    xor_moves: bool = False     # whole-column XOR proposals (needs a hook with total_loglik)
    anneal_prior_weight: float = 1.0  # weight of log p(Z | X, S) in XOR moves while annealing
    swap_moves: bool = False    # within-row swaps of two entries (needs a hook with row_loglik)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.iterations < 0 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("iterations, burn_in must be >= 0 and thin >= 1")
        if self.K < 0 or self.init_features < 0:
            raise ValueError("K and init_features must be >= 0")
        if self.static and self.K == 0:
            raise ValueError("the static baseline is defined for the fixed-K model only")
        if self.anneal < 0 or self.anneal > self.burn_in or self.anneal_start < 1:
            raise ValueError("need 0 <= anneal <= burn_in and anneal_start >= 1")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        ParticleFilterConfig(self.n_particles)

    @property
    def pf(self) -> ParticleFilterConfig:
        return ParticleFilterConfig(self.n_particles)


@dataclass
class Sample:
    """One retained posterior draw (seen features only in the nonparametric case)."""

    iteration: int
    ids: np.ndarray
    values: np.ndarray
    Z: list
    params: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.ids.size


def _init_nonparametric(grid: TimeGrid, N: np.ndarray, n_feat: int, rng) -> InferenceState:
    T1 = len(grid)
    Z = [(rng.random((int(n), n_feat)) < 0.5).astype(np.int8) for n in N]
    for z in Z:
        # every initial feature is seen at the first time so its trajectory is well defined
        if n_feat and z.shape[0]:
            z[0] = 1
    counts = np.stack([z.sum(axis=0) for z in Z]) if n_feat else np.zeros((T1, 0))
    values = (counts + 0.5) / (N[:, None] + 1.0)
    return InferenceState(grid, N, np.arange(n_feat), values, Z)


def _init_fixed_k(grid: TimeGrid, N: np.ndarray, K: int, alpha: float, beta: float, rng) -> InferenceState:
    x = rng.beta(alpha * beta / K, beta, size=K)
    x = np.clip(x, 1e-3, 1 - 1e-3)
    values = np.tile(x, (len(grid), 1))
    Z = [(rng.random((int(n), K)) < x).astype(np.int8) for n in N]
    return InferenceState(grid, N, np.arange(K), values, Z, fixed_k=True)


class Sampler:
    """Single chain; ``step`` performs one full iteration in place."""

    def __init__(self, grid: TimeGrid, N, hook: LikelihoodHook | None, config: MCMCConfig,
                 rng: np.random.Generator, state: InferenceState | None = None):
        self.grid = grid
        self.N = np.asarray(N, dtype=np.int64)
        if self.N.size != len(grid):
            raise ValueError(f"got {self.N.size} object counts for {len(grid)} grid times")
        self.hook = hook or LikelihoodHook()
        self.config = config
        self.rng = rng
        self.durations = grid.durations
        self.iteration = 0
        if state is None:
            if config.K:
                state = _init_fixed_k(grid, self.N, config.K, config.alpha, config.beta, rng)
            else:
                state = _init_nonparametric(grid, self.N, config.init_features, rng)
        if config.K and state.K != config.K:
            raise ValueError(f"state has {state.K} features but K={config.K}")
        self.state = state
        # the hook may need to adjust Z (e.g. give every document a topic) before slices exist
        self.hook.sync(state)
        if not config.K:
            self._refresh_unseen()

    # nonparametric pieces

    def _refresh_unseen(self) -> None:
        st, c = self.state, self.config
        st.keep_features(st.seen_mask())
        sample_slices(st, self.rng)
        new = thin_unseen(st.slices, self.N, c.alpha, c.beta, self.durations, self.rng, c.step)
        if new.shape[1]:
            st.add_features(new)

    def _pg_seen(self) -> None:
        st, c = self.state, self.config
        counts = st.counts()
        first = st.first_seen()
        for f in np.unique(first[first < st.T1]):
            cols = np.flatnonzero(first == f)
            ref, n = st.values[:, cols], counts[:, cols]
            if f == 0:
                new = pg_update_seen(ref, n, self.N, c.beta, self.durations, c.pf, self.rng, c.step)
            else:
                new = pg_update_first_seen(ref, int(f), n, self.N, c.beta, self.durations, c.pf, self.rng, c.step)
            st.values[:, cols] = new

    def _pg_fixed(self) -> None:
        st, c = self.state, self.config
        n = st.counts()
        if c.static:
            st.values[:] = static_update(n, self.N, c.alpha, c.beta, c.K, self.rng)
        else:
            st.values[:] = pg_update_fixed_k(st.values, n, self.N, c.alpha, c.beta, self.durations,
                                             c.pf, self.rng, c.step)

    def temperature(self) -> float:
        c = self.config
        if self.iteration >= c.anneal:
            return 1.0
        return float(c.anneal_start ** (1.0 - self.iteration / c.anneal))

    def step(self) -> None:
        st = self.state
        temp = self.temperature()
        if self.config.K:
            gibbs_sweep(st, self.hook, self.rng, use_slice=False, temperature=temp)
            if self.config.swap_moves:
                swap_sweep(st, self.hook, self.rng, use_slice=False, temperature=temp)
            if self.config.xor_moves:
                w = self.config.anneal_prior_weight if self.iteration < self.config.anneal else 1.0
                xor_sweep(st, self.hook, self.rng, use_slice=False, temperature=temp, prior_weight=w)
            self.hook.update(st, self.rng)
            self._pg_fixed()
        else:
            gibbs_sweep(st, self.hook, self.rng, use_slice=True, temperature=temp)
            if self.config.swap_moves:
                swap_sweep(st, self.hook, self.rng, use_slice=True, temperature=temp)
            if self.config.xor_moves:
                w = self.config.anneal_prior_weight if self.iteration < self.config.anneal else 1.0
                xor_sweep(st, self.hook, self.rng, use_slice=True, temperature=temp, prior_weight=w)
            self.hook.update(st, self.rng)
            self._pg_seen()
            self._refresh_unseen()
        self.iteration += 1

    def sample(self) -> Sample:
        st = self.state
        mask = np.ones(st.K, bool) if self.config.K else st.seen_mask()
        order = np.argsort(st.ids[mask], kind="stable")
        cols = np.flatnonzero(mask)[order]
        params = self.hook.record(st)
        params["n_features"] = int(cols.size)
        params["column_ids"] = st.ids.copy()   # column order of any per-feature hook records
        return Sample(self.iteration, st.ids[cols].copy(), st.values[:, cols].copy(),
                      [z[:, cols].copy() for z in st.Z], params)

    def keeps(self) -> bool:
        """Whether the current iteration is retained (after burn-in, every ``thin``-th)."""
        c = self.config
        return self.iteration > c.burn_in and (self.iteration - c.burn_in) % c.thin == 0

    def run(self, callback=None):
        while self.iteration < self.config.iterations:
            self.step()
            if callback is not None:
                callback(self)
            if self.keeps():
                yield self.sample()


def run_mcmc(grid: TimeGrid, N, hook: LikelihoodHook | None, config: MCMCConfig, rng: np.random.Generator,
             state: InferenceState | None = None, callback=None):
    """Nonparametric slice sampler; yields one ``Sample`` per retained iteration."""
    if config.K:
        raise ValueError("run_mcmc is the nonparametric sampler; use run_fixed_k for K > 0")
    return Sampler(grid, N, hook, config, rng, state).run(callback)


def run_fixed_k(grid: TimeGrid, N, hook: LikelihoodHook | None, K: int, config: MCMCConfig,
                rng: np.random.Generator, state: InferenceState | None = None, callback=None):
    """Fixed-K sampler (optionally the static baseline)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if config.K != K:
        config = MCMCConfig(**{**config.__dict__, "K": K})
    return Sampler(grid, N, hook, config, rng, state).run(callback)
