"""Sampler state: materialized features, allocations and slice variables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..generative import AllocationSeries, TimeGrid


@dataclass
class InferenceState:
    """Mutable state of one chain.

    ``values[t, k]`` is the mass of feature ``ids[k]`` at grid time ``t`` and
    ``Z[t]`` is the ``N_t x K`` allocation matrix sharing that column order.
    Columns whose counts are zero at every time are materialized unseen
    features; all features below every slice are left implicit.
    """

    grid: TimeGrid
    N: np.ndarray
    ids: np.ndarray
    values: np.ndarray
    Z: list
    slices: np.ndarray | None = None
    next_id: int = 0
    fixed_k: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.grid), self.ids.size)
        self.Z = [np.asarray(z, dtype=np.int8).reshape(int(n), self.ids.size) for z, n in zip(self.Z, self.N)]
        if len(self.Z) != len(self.grid):
            raise ValueError("need one allocation matrix per grid time")
        if self.ids.size:
            self.next_id = max(self.next_id, int(self.ids.max()) + 1)

    @property
    def K(self) -> int:
        return self.ids.size

    @property
    def T1(self) -> int:
        return len(self.grid)

    def counts(self) -> np.ndarray:
        return np.stack([z.sum(axis=0, dtype=np.int64) for z in self.Z])

    def seen_mask(self) -> np.ndarray:
        return self.counts().sum(axis=0) > 0

    def first_seen(self) -> np.ndarray:
        """Index of the first grid time with a positive count (``T1`` if never seen)."""
        c = self.counts() > 0
        return np.where(c.any(axis=0), c.argmax(axis=0), self.T1)

    def x_star(self, t: int) -> float:
        active = self.Z[t].any(axis=0)
        return float(self.values[t, active].min()) if active.any() else 1.0

    def add_features(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(self.T1, -1)
        n = values.shape[1]
        new = np.arange(self.next_id, self.next_id + n, dtype=np.int64)
        self.next_id += n
        self.ids = np.concatenate([self.ids, new])
        self.values = np.concatenate([self.values, values], axis=1)
        self.Z = [np.pad(z, ((0, 0), (0, n))) for z in self.Z]
        return new

    def keep_features(self, mask: np.ndarray) -> None:
        mask = np.asarray(mask, dtype=bool)
        self.ids = self.ids[mask]
        self.values = self.values[:, mask]
        self.Z = [z[:, mask] for z in self.Z]

    def allocation(self, seen_only: bool = True) -> AllocationSeries:
        mask = self.seen_mask() if seen_only else np.ones(self.K, dtype=bool)
        return AllocationSeries([z[:, mask].copy() for z in self.Z], self.ids[mask]).sorted_by_id()

    def check(self) -> None:
        """Assert the structural invariants (used by tests)."""
        c = self.counts()
        x = self.values
        assert np.all((x >= 0) & (x <= 1))
        assert np.all(x[c > 0] > 0), "active feature with zero mass"
        if self.slices is not None:
            for t in range(self.T1):
                assert self.slices[t] <= self.x_star(t) + 1e-15


def sample_slice(state: InferenceState, t: int, rng: np.random.Generator) -> float:
    """``s_t ~ Uniform[0, x*(t)]`` with ``x*(t) = 1`` when nothing is active at ``t``."""
    return float(rng.uniform(0.0, state.x_star(t)))


def sample_slices(state: InferenceState, rng: np.random.Generator) -> np.ndarray:
    state.slices = np.array([sample_slice(state, t, rng) for t in range(state.T1)])
    return state.slices
