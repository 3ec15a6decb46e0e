"""Thinning samplers for features that are unseen at every grid time.

Every unseen feature whose mass reaches the slice ``s_t`` at some grid time is
materialized exactly once, by the first grid time at which it does so.
"""

from __future__ import annotations

import numpy as np
from scipy.special import xlog1py

from ..diffusion import propagate, propagate_back_grid
from ..measures import sample_truncated_process


def _forward_thin(x, start: int, N, beta, durations, rng, step):
    """Propagate from ``start``, retaining with ``(1 - x_t)^N_t`` at each later time.

    Returns the ``(T1, n_kept)`` values (zero before ``start``) and the indices
    of the kept atoms in ``x``.
    """
    T1 = len(N)
    vals = np.zeros((T1, x.size))
    vals[start] = x
    alive = np.arange(x.size)
    cur = x
    for t in range(start + 1, T1):
        if cur.size == 0:
            break
        cur = propagate(cur, 0.0, beta, durations[t - 1], rng, step)
        keep = rng.random(cur.size) < np.exp(xlog1py(N[t], -np.minimum(cur, 1.0)))
        alive, cur = alive[keep], cur[keep]
        vals[t, alive] = cur
    return vals[:, alive], alive


def thin_unseen_alive(slices, N, alpha: float, beta: float, durations, rng: np.random.Generator,
                      step: float | None = None) -> np.ndarray:
    """Unseen features with mass at least ``s_0`` at the first grid time.

    Atoms come from the truncated posterior process on ``[s_0, 1)`` with
    intensity ``alpha x^-1 (1 - x)^(beta + N_0 - 1)``; each later time keeps a
    feature with probability ``(1 - x_t)^N_t``. Returns ``(T1, n)`` values.
    """
    slices = np.asarray(slices, dtype=float)
    N = np.asarray(N)
    if slices[0] >= 1.0:
        return np.zeros((len(N), 0))
    x = sample_truncated_process(alpha, beta + N[0], max(slices[0], 1e-300), rng)
    return _forward_thin(x, 0, N, beta, durations, rng, step)[0]


def thin_unseen_born(j: int, slices, N, alpha: float, beta: float, durations, rng: np.random.Generator,
                     step: float | None = None) -> np.ndarray:
    """Unseen features that first reach the slice at grid index ``j + 1``.

    Candidates drawn at ``j + 1`` run backward to the first grid time. A
    candidate at or above ``s_t`` at any earlier time belongs to an earlier
    group and is rejected; otherwise it is accepted with
    ``prod_{t <= j} (1 - x_t)^N_t`` (a backward value of zero contributes one).
    Survivors then run forward with the same retention as the alive group.
    """
    slices = np.asarray(slices, dtype=float)
    N = np.asarray(N)
    T1 = len(N)
    if not 0 <= j < T1 - 1:
        raise ValueError(f"interval index {j} outside 0..{T1 - 2}")
    s = slices[j + 1]
    if s >= 1.0:
        return np.zeros((T1, 0))
    x = sample_truncated_process(alpha, beta + N[j + 1], max(s, 1e-300), rng)
    if x.size == 0:
        return np.zeros((T1, 0))
    back = propagate_back_grid(x, beta, durations[: j + 1], rng, step)
    earlier = back[:-1]
    ok = np.all(earlier < slices[: j + 1, None], axis=0)
    logacc = xlog1py(N[: j + 1, None], -np.minimum(earlier, 1.0)).sum(axis=0)
    ok &= rng.random(x.size) < np.exp(logacc)
    x, back = x[ok], back[:, ok]
    vals, kept = _forward_thin(x, j + 1, N, beta, durations, rng, step)
    vals[: j + 1] = back[:-1][:, kept]
    return vals


def thin_unseen(slices, N, alpha: float, beta: float, durations, rng: np.random.Generator,
                step: float | None = None) -> np.ndarray:
    """All materialized unseen features: the alive group plus every born group."""
    T1 = len(N)
    blocks = [thin_unseen_alive(slices, N, alpha, beta, durations, rng, step)]
    for j in range(T1 - 1):
        blocks.append(thin_unseen_born(j, slices, N, alpha, beta, durations, rng, step))
    return np.concatenate(blocks, axis=1)
