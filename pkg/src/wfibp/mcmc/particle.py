"""Conditional SMC (particle Gibbs) for seen-feature trajectories.

Particles for a group of features are stored as ``(T1, F, M)`` arrays; the
reference trajectory always occupies the last slot and is never resampled
away. Weights reset to uniform after each multinomial resampling step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlog1py, xlogy

from ..diffusion import propagate, propagate_back_grid


@dataclass(frozen=True)
class ParticleFilterConfig:
    M: int = 50
    resampling: str = "multinomial"

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("particle Gibbs needs M >= 2")
        if self.resampling != "multinomial":
            raise ValueError(f"unsupported resampling scheme {self.resampling!r}")


def binomial_logweight(x, n, N):
    """``log[x^n (1 - x)^(N - n)]`` with the ``0 log 0 = 0`` convention."""
    return xlogy(n, x) + xlog1py(N - n, -x)


def unseen_logweight(x, N):
    """``log[(1 - x)^N]``."""
    return xlog1py(N, -x)


def _normalize(logw):
    mx = np.max(logw, axis=-1, keepdims=True)
    dead = ~np.isfinite(mx)
    w = np.exp(logw - np.where(dead, 0.0, mx))
    w[np.broadcast_to(dead, w.shape)] = 0.0
    s = w.sum(axis=-1, keepdims=True)
    return w, s[..., 0]


def _categorical_rows(w, s, rng, size, fallback):
    """Draw ``size`` indices per row of ``w``; rows with zero mass pick ``fallback``."""
    F, M = w.shape
    out = np.full((F, size), fallback, dtype=np.int64)
    ok = s > 0
    if ok.any():
        cdf = np.cumsum(w[ok], axis=1)
        cdf /= cdf[:, -1:]
        u = rng.random((int(ok.sum()), size))
        idx = np.array([np.searchsorted(c, uu, side="right") for c, uu in zip(cdf, u)])
        out[ok] = np.minimum(idx, M - 1)
    return out


def conditional_smc(ref: np.ndarray, n: np.ndarray, N: np.ndarray, first: int, init_a, init_b,
                    mu: float, beta: float, durations, config: ParticleFilterConfig,
                    rng: np.random.Generator, step: float | None = None) -> np.ndarray:
    """One particle-Gibbs sweep for ``F`` features that share a first-seen time.

    Args:
        ref: reference trajectories, shape ``(T1, F)``.
        n: per-time counts, shape ``(T1, F)``.
        N: objects per time, shape ``(T1,)``.
        first: grid index where particles are initialized.
        init_a, init_b: Beta parameters of the initial draw at ``first``
            (length ``F``); the likelihood at ``first`` is folded into them.
        mu, beta: diffusion parameters of the prior dynamics.

    Returns:
        New reference trajectories, shape ``(T1, F)``.
    """
    ref = np.asarray(ref, dtype=float)
    T1, F = ref.shape
    M = config.M
    free = M - 1
    P = np.empty((T1, F, M))
    A = np.zeros((T1, F, M), dtype=np.int64)
    P[first, :, :free] = rng.beta(np.asarray(init_a)[:, None], np.asarray(init_b)[:, None], size=(F, free))
    P[first, :, free] = ref[first]
    logw = np.zeros((F, M))
    if first > 0:
        if mu != 0:
            raise ValueError("backward initialization requires WF(0, beta) dynamics")
        back = propagate_back_grid(P[first, :, :free], beta, durations[:first], rng, step)
        P[:first, :, :free] = back[:-1]
        P[:first, :, free] = ref[:first]
        logw = unseen_logweight(P[:first], N[:first, None, None]).sum(axis=0)
    for t in range(first + 1, T1):
        if t - 1 > first or first > 0:
            # weights at the start of an initialization-at-zero run are uniform
            w, s = _normalize(logw)
            anc = _categorical_rows(w, s, rng, free, fallback=free)
        else:
            anc = np.broadcast_to(np.arange(free), (F, free))
        A[t, :, :free] = anc
        A[t, :, free] = free
        prev = np.take_along_axis(P[t - 1], anc, axis=1)
        P[t, :, :free] = propagate(prev, mu, beta, durations[t - 1], rng, step)
        P[t, :, free] = ref[t]
        logw = binomial_logweight(P[t], n[t][:, None], N[t])
    w, s = _normalize(logw)
    pick = _categorical_rows(w, s, rng, 1, fallback=free)[:, 0]
    out = np.empty((T1, F))
    f_idx = np.arange(F)
    idx = pick
    for t in range(T1 - 1, first, -1):
        out[t] = P[t, f_idx, idx]
        idx = A[t, f_idx, idx]
    out[: first + 1] = P[: first + 1, f_idx, idx]
    return out


def pg_update_seen(ref, n, N, beta: float, durations, config: ParticleFilterConfig,
                   rng: np.random.Generator, step: float | None = None) -> np.ndarray:
    """Particle Gibbs for features seen at the first grid time (single or batched).

    Free particles start from ``Beta(n_0, beta + N_0 - n_0)`` and follow
    ``WF(0, beta)``; ``ref`` and ``n`` may be ``(T1,)`` or ``(T1, F)``.
    """
    ref = np.asarray(ref, dtype=float)
    n = np.asarray(n)
    single = ref.ndim == 1
    ref2, n2 = (ref[:, None], n[:, None]) if single else (ref, n)
    N = np.asarray(N)
    if np.any(n2[0] < 1):
        raise ValueError("features must be seen at the first grid time")
    out = conditional_smc(ref2, n2, N, 0, n2[0], beta + N[0] - n2[0], 0.0, beta, durations, config, rng, step)
    return out[:, 0] if single else out


def pg_update_first_seen(ref, first: int, n, N, beta: float, durations, config: ParticleFilterConfig,
                         rng: np.random.Generator, step: float | None = None) -> np.ndarray:
    """Particle Gibbs for features first seen at grid index ``first``.

    Particles start from the posterior beta at ``first``, run backward to the
    first grid time collecting ``(1 - x_t)^N_t`` weights, then forward as usual.
    """
    ref = np.asarray(ref, dtype=float)
    n = np.asarray(n)
    single = ref.ndim == 1
    ref2, n2 = (ref[:, None], n[:, None]) if single else (ref, n)
    N = np.asarray(N)
    if np.any(n2[:first] != 0) or np.any(n2[first] < 1):
        raise ValueError(f"features must be unseen before index {first} and seen at it")
    a = n2[first]
    b = beta + N[first] - n2[first]
    out = conditional_smc(ref2, n2, N, first, a, b, 0.0, beta, durations, config, rng, step)
    return out[:, 0] if single else out


def pg_update_fixed_k(ref, n, N, alpha: float, beta: float, durations, config: ParticleFilterConfig,
                      rng: np.random.Generator, step: float | None = None) -> np.ndarray:
    """Particle Gibbs for all ``K`` features of the fixed-K model.

    Initial draws ``Beta(alpha beta / K + n_0, beta + N_0 - n_0)``; dynamics
    ``WF(alpha beta / K, beta)``.
    """
    ref = np.asarray(ref, dtype=float)
    n = np.asarray(n)
    N = np.asarray(N)
    K = ref.shape[1]
    mu = alpha * beta / K
    return conditional_smc(ref, n, N, 0, mu + n[0], beta + N[0] - n[0], mu, beta, durations, config, rng, step)


def static_update(n, N, alpha: float, beta: float, K: int, rng: np.random.Generator) -> np.ndarray:
    """Time-frozen baseline: one conjugate ``Beta`` draw per feature shared by all times."""
    n = np.asarray(n)
    N = np.asarray(N)
    tot_n = n.sum(axis=0)
    x = rng.beta(alpha * beta / K + tot_n, beta + N.sum() - tot_n)
    return np.broadcast_to(x, n.shape).copy()
