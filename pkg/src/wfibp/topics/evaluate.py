"""Accuracy summaries against a known truth."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def match_columns(true_cols: np.ndarray, est_cols: np.ndarray) -> np.ndarray:
    """Permutation ``p`` maximizing agreement, so ``est[:, p[k]]`` pairs with ``true[:, k]``.

    Uses the Hungarian algorithm on the column-agreement matrix; extra
    estimated columns are left unmatched.
    """
    t = np.asarray(true_cols, dtype=float)
    e = np.asarray(est_cols, dtype=float)
    score = t.T @ e + (1 - t).T @ (1 - e)
    rows, cols = linear_sum_assignment(-score)
    perm = np.full(t.shape[1], -1, dtype=np.int64)
    perm[rows] = cols
    return perm


def assignment_accuracy(true_assign: list, votes: list, K_est: int) -> np.ndarray:
    """Per-time fraction of words whose majority-vote topic maps to the true topic.

    ``true_assign[t]`` and ``votes[t]`` hold, per word at time ``t``, the true
    topic and an ``(n_words, K_est)`` vote-count array. One global topic
    matching (Hungarian on the word-level confusion matrix) is used for all
    times.
    """
    ta = np.concatenate(true_assign)
    va = np.concatenate(votes).argmax(axis=1)
    K_true = int(ta.max()) + 1 if ta.size else 0
    conf = np.zeros((K_true, K_est))
    np.add.at(conf, (ta, va), 1)
    rows, cols = linear_sum_assignment(-conf)
    mapping = np.full(K_est, -1)
    mapping[cols] = rows
    out = []
    for t_true, v in zip(true_assign, votes):
        out.append(float(np.mean(mapping[v.argmax(axis=1)] == t_true)) if t_true.size else float("nan"))
    return np.array(out)


def frobenius_errors(true_Z: list, mean_Z: list) -> np.ndarray:
    """Per-time ``||Z_t - Zhat_t||_F`` after one global column matching."""
    perm = match_columns(np.vstack(true_Z), np.vstack(mean_Z))
    out = []
    for z, m in zip(true_Z, mean_Z):
        m2 = np.zeros(z.shape)
        ok = perm >= 0
        m2[:, ok] = m[:, perm[ok]]
        out.append(float(np.linalg.norm(z - m2)))
    return np.array(out)
