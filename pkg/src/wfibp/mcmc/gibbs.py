"""Per-entry Gibbs updates of the allocation matrices."""

from __future__ import annotations

import math

import numpy as np

from .state import InferenceState


class LikelihoodHook:
    """Observation-model plug point for the Gibbs sweep.

    The sweep calls ``sync`` once per sweep (columns may have changed), then
    ``begin_row``/``end_row`` around each object, and ``entry_logliks`` for each
    updated entry. Subclasses override what they need; the base class is the
    flat likelihood.
    """

    def sync(self, state: InferenceState) -> None:
        pass

    def begin_row(self, state: InferenceState, t: int, i: int) -> None:
        pass

    def entry_logliks(self, state: InferenceState, t: int, i: int, k: int) -> tuple[float, float]:
        """``(log P(D_it | z_ik = 0, rest), log P(D_it | z_ik = 1, rest))``."""
        return 0.0, 0.0

    def set_entry(self, state: InferenceState, t: int, i: int, k: int, value: int) -> None:
        pass

    def end_row(self, state: InferenceState, t: int, i: int) -> None:
        pass

    def propose_new(self, state: InferenceState, t: int, k: int, rng: np.random.Generator) -> None:
        """Redraw auxiliary parameters of column ``k`` at ``t`` (it is inactive there)."""

    def update(self, state: InferenceState, rng: np.random.Generator) -> None:
        """Resample likelihood-owned parameters given ``Z``."""

    def record(self, state: InferenceState) -> dict:
        return {}

    def row_loglik(self, state: InferenceState, t: int, i: int, z: np.ndarray) -> float | None:
        """``log P(D_it | z_i = z, rest)`` between ``begin_row``/``end_row``; ``None`` if not available."""
        return None

    def total_loglik(self, state: InferenceState) -> float | None:
        """``log P(D | Z)`` for whole-column moves; ``None`` if not available."""
        return None


def entry_prob_one(x: float, l0: float, l1: float, x_star0: float = 1.0, x_star1: float = 1.0) -> float:
    """P(z = 1) from odds ``x L1 / x*_1 : (1 - x) L0 / x*_0`` (log-likelihoods in)."""
    if x <= 0.0 or l1 == -math.inf:
        return 0.0
    if x >= 1.0 or l0 == -math.inf:
        return 1.0
    a = math.log(x) + l1 - math.log(x_star1)
    b = math.log1p(-x) + l0 - math.log(x_star0)
    return 1.0 / (1.0 + math.exp(min(b - a, 700.0)))


def _min_active_excluding(x_t: np.ndarray, counts_t: np.ndarray, k: int) -> float:
    m = math.inf
    for j in np.flatnonzero(counts_t):
        if j != k and x_t[j] < m:
            m = x_t[j]
    return m


def gibbs_update_entry(state: InferenceState, i: int, k: int, t: int, hook: LikelihoodHook,
                       rng: np.random.Generator, use_slice: bool = True, counts_t=None,
                       power: float = 1.0) -> int:
    """Resample ``Z[t][i, k]`` from its full conditional and return the new value.

    With ``use_slice`` the odds carry the non-constant ``1 / x*(t)`` factor, where
    ``x*`` is the smallest active mass under each assignment. ``power < 1``
    flattens the likelihood (annealed burn-in only).
    """
    Zt = state.Z[t]
    if counts_t is None:
        counts_t = Zt.sum(axis=0)
    x = float(state.values[t, k])
    z_old = int(Zt[i, k])
    others = counts_t[k] - z_old
    if others == 0 and z_old == 0:
        hook.propose_new(state, t, k, rng)
    l0, l1 = hook.entry_logliks(state, t, i, k)
    if power != 1.0:
        l0, l1 = l0 * power, l1 * power
    xs0 = xs1 = 1.0
    if use_slice:
        m = _min_active_excluding(state.values[t], counts_t, k)
        xs1 = min(m, x)
        xs0 = min(m, x) if others > 0 else m
        if xs0 == math.inf:
            xs0 = 1.0
    p1 = entry_prob_one(x, l0, l1, xs0, xs1)
    z_new = int(rng.random() < p1)
    if z_new != z_old:
        Zt[i, k] = z_new
        counts_t[k] += z_new - z_old
        hook.set_entry(state, t, i, k, z_new)
    return z_new


def gibbs_sweep(state: InferenceState, hook: LikelihoodHook, rng: np.random.Generator,
                use_slice: bool = True, temperature: float = 1.0) -> None:
    """One systematic sweep over every updatable entry of every ``Z_t``.

    With slices only features with ``x_k(t) >= s_t`` are updated; the rest stay
    inactive, which the slice construction guarantees. Columns are visited in a
    fresh random order: column order reflects seen/unseen status, and a scan
    order that depends on the state breaks invariance. ``temperature > 1``
    tempers the likelihood; the sweep is then invariant for the tempered target.
    """
    power = 1.0 / temperature
    hook.sync(state)
    for t in range(state.T1):
        Zt = state.Z[t]
        counts_t = Zt.sum(axis=0).astype(np.int64)
        if use_slice:
            cols = np.flatnonzero(state.values[t] >= state.slices[t])
        else:
            cols = np.arange(state.K)
        if cols.size == 0:
            continue
        cols = rng.permutation(cols)
        for i in range(Zt.shape[0]):
            hook.begin_row(state, t, i)
            for k in cols:
                gibbs_update_entry(state, i, int(k), t, hook, rng, use_slice, counts_t, power)
            hook.end_row(state, t, i)
