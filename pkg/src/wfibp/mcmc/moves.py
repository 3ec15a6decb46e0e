"""Whole-column Metropolis-Hastings moves on the allocation matrices.

Single-entry Gibbs updates cannot leave states where the true features are
re-encoded, e.g. one column on for the union of two features plus a
correction column on for one of them. Replacing column ``a`` by
``a XOR b`` maps such encodings onto each other at nearly equal likelihood.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import xlog1py, xlogy

from .gibbs import LikelihoodHook
from .state import InferenceState


def _bernoulli(x, n, N):
    return float(np.sum(xlogy(n, x) + xlog1py(N - n, -x)))


def _log_slice_factor(state: InferenceState) -> float:
    """``sum_t log[1(s_t < x*_t) / x*_t]``."""
    out = 0.0
    for t in range(state.T1):
        xs = state.x_star(t)
        if state.slices[t] >= xs:
            return -math.inf
        out -= math.log(xs)
    return out


def xor_sweep(state: InferenceState, hook: LikelihoodHook, rng: np.random.Generator,
              use_slice: bool = True, temperature: float = 1.0, prior_weight: float = 1.0) -> int:
    """One pass of ``z_a <- z_a XOR z_b`` proposals over ordered pairs of seen columns.

    Each proposal is a deterministic involution given the pair. Proposals that
    would empty column ``a`` are rejected, so the set of seen columns (and with
    it the list of pairs) is the same before and after every accepted move.
    The log acceptance ratio is ``dL / temperature + prior_weight * d log p(Z | X, S)``;
    the defaults give an exact move. Returns the number of accepted moves.
    """
    cur = hook.total_loglik(state)
    if cur is None:
        return 0
    seen = np.flatnonzero(state.seen_mask())
    if seen.size < 2:
        return 0
    pairs = [(a, b) for a in seen for b in seen if a != b]
    N = state.N
    accepted = 0
    for j in rng.permutation(len(pairs)):
        a, b = pairs[j]
        old = [z[:, a].copy() for z in state.Z]
        new = [o ^ z[:, b] for o, z in zip(old, state.Z)]
        if not any(c.any() for c in new):
            continue
        x = state.values[:, a]
        n_old = np.array([c.sum() for c in old])
        n_new = np.array([c.sum() for c in new])
        if np.any((n_new > 0) & (x <= 0)):
            continue
        d_prior = _bernoulli(x, n_new, N) - _bernoulli(x, n_old, N)
        if not np.isfinite(d_prior):
            continue
        s_old = _log_slice_factor(state) if use_slice else 0.0
        for z, c in zip(state.Z, new):
            z[:, a] = c
        if use_slice:
            s_new = _log_slice_factor(state)
            if s_new == -math.inf:
                for z, c in zip(state.Z, old):
                    z[:, a] = c
                continue
            d_prior += s_new - s_old
        prop = hook.total_loglik(state)
        logr = (prop - cur) / temperature + prior_weight * d_prior
        if math.log(rng.random()) < logr:
            cur = prop
            accepted += 1
        else:
            for z, c in zip(state.Z, old):
                z[:, a] = c
    hook.sync(state)
    return accepted


def _x_star(x_t: np.ndarray, counts_t: np.ndarray) -> float:
    act = counts_t > 0
    return float(x_t[act].min()) if act.any() else 1.0


def swap_sweep(state: InferenceState, hook: LikelihoodHook, rng: np.random.Generator,
               use_slice: bool = True, temperature: float = 1.0) -> int:
    """Metropolis-Hastings swaps ``(z_ia, z_ib) <- (z_ib, z_ia)`` within every row.

    Per-entry Gibbs can only move an object from feature ``a`` to feature ``b``
    through a state with both or neither, which is expensive when the two
    features' loadings overlap; two near-ubiquitous features then settle on
    averaged loadings. The swap is an involution, so the acceptance ratio is
    the target ratio (tempered likelihood, Bernoulli prior and slice factor).
    Needs ``hook.row_loglik``; returns the number of accepted swaps.
    """
    if type(hook).row_loglik is LikelihoodHook.row_loglik:
        return 0
    power = 1.0 / temperature
    accepted = 0
    hook.sync(state)
    for t in range(state.T1):
        Zt = state.Z[t]
        x_t = state.values[t]
        cols = np.flatnonzero(x_t >= state.slices[t]) if use_slice else np.arange(state.K)
        if cols.size < 2:
            continue
        counts_t = Zt.sum(axis=0).astype(np.int64)
        pairs = [(a, b) for j, a in enumerate(cols) for b in cols[j + 1:]]
        for i in range(Zt.shape[0]):
            hook.begin_row(state, t, i)
            for j in rng.permutation(len(pairs)):
                a, b = pairs[j]
                if Zt[i, a] == Zt[i, b]:
                    continue
                on, off = (a, b) if Zt[i, a] else (b, a)   # move the 1 from `on` to `off`
                if x_t[off] <= 0.0 or x_t[on] >= 1.0:
                    continue
                logr = (math.log(x_t[off]) + math.log1p(-x_t[on])
                        - math.log(x_t[on]) - math.log1p(-x_t[off]))
                z = Zt[i].astype(float)
                l_old = hook.row_loglik(state, t, i, z)
                z[on], z[off] = 0.0, 1.0
                logr += power * (hook.row_loglik(state, t, i, z) - l_old)
                if use_slice:
                    xs_old = _x_star(x_t, counts_t)
                    counts_t[on] -= 1
                    counts_t[off] += 1
                    logr += math.log(xs_old) - math.log(_x_star(x_t, counts_t))
                if math.log(rng.random()) < logr:
                    Zt[i, on], Zt[i, off] = 0, 1
                    hook.set_entry(state, t, i, on, 0)
                    hook.set_entry(state, t, i, off, 1)
                    accepted += 1
                elif use_slice:
                    counts_t[on] += 1
                    counts_t[off] -= 1
            hook.end_row(state, t, i)
    hook.sync(state)
    return accepted
