"""Compiled inner loop for the collapsed assignment sweep."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def assignment_sweep(words, doc, assign, nw, nk, ndk, phiz, eta, u):
    """Resample every assignment in order, updating counts in place.

    ``P(a = k) ∝ (nw[k, w] + eta)(ndk[d, k] + phiz[d, k]) / (nk[k] + D eta)``,
    all counts excluding the word being resampled. ``u`` holds one uniform per word.
    """
    K, D = nw.shape
    cum = np.empty(K)
    for j in range(words.size):
        w = words[j]
        d = doc[j]
        k = assign[j]
        nw[k, w] -= 1
        nk[k] -= 1
        ndk[d, k] -= 1
        tot = 0.0
        for c in range(K):
            tot += (nw[c, w] + eta) * (ndk[d, c] + phiz[d, c]) / (nk[c] + D * eta)
            cum[c] = tot
        r = u[j] * tot
        c = 0
        while c < K - 1 and cum[c] <= r:
            c += 1
        assign[j] = c
        nw[c, w] += 1
        nk[c] += 1
        ndk[d, c] += 1
