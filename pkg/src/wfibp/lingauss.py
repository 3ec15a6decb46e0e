"""Linear-Gaussian observation model ``O_t = Z_t A + noise``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .mcmc.gibbs import LikelihoodHook
from .mcmc.state import InferenceState

LOG2PI = math.log(2 * math.pi)


@dataclass
class GaussPosterior:
    mean: np.ndarray   # K x D
    cov: np.ndarray    # K x K, shared by every column of A

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        K, D = self.mean.shape
        L = np.linalg.cholesky(self.cov)
        return self.mean + L @ rng.standard_normal((K, D))


def _finite(*arrs):
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def generate(Z, A, sigmaX: float, rng: np.random.Generator) -> list:
    """``O_t = Z_t A + eps_t`` with iid ``N(0, sigmaX^2)`` noise."""
    A = np.asarray(A, dtype=float)
    out = []
    for z in Z:
        z = np.asarray(z, dtype=float)
        if z.shape[1] != A.shape[0]:
            raise ValueError(f"Z has {z.shape[1]} columns but A has {A.shape[0]} rows")
        out.append(z @ A + sigmaX * rng.standard_normal((z.shape[0], A.shape[1])))
    return out


def posterior_A(Zbar, Obar, sigmaX: float, sigmaA: float) -> GaussPosterior:
    Zbar = np.asarray(Zbar, dtype=float)
    Obar = np.asarray(Obar, dtype=float)
    _finite(Zbar, Obar)
    K = Zbar.shape[1]
    G = Zbar.T @ Zbar + (sigmaX**2 / sigmaA**2) * np.eye(K)
    cf = cho_factor(G, lower=True)
    mean = cho_solve(cf, Zbar.T @ Obar)
    cov = sigmaX**2 * cho_solve(cf, np.eye(K))
    return GaussPosterior(mean, 0.5 * (cov + cov.T))


def posterior_sigmaA(A) -> tuple[float, float]:
    """Shape and scale of the inverse-gamma posterior of ``sigmaA^2`` (prior ``IG(1, 1)``)."""
    A = np.asarray(A, dtype=float)
    return 1.0 + 0.5 * A.size, 1.0 + 0.5 * float(np.sum(A**2))


def collapsed_loglik(Obar, Zbar, sigmaX: float, sigmaA: float) -> float:
    """``log p(O | Z)`` with ``A`` integrated out under ``N(0, sigmaA^2)`` entries."""
    O = np.asarray(Obar, dtype=float)
    Z = np.asarray(Zbar, dtype=float).reshape(O.shape[0], -1)
    _finite(O, Z)
    n, D = O.shape
    K = Z.shape[1]
    r = sigmaX**2 / sigmaA**2
    G = Z.T @ Z + r * np.eye(K)
    L = np.linalg.cholesky(G)
    B = np.linalg.solve(L, Z.T @ O)
    quad = np.sum(O**2) - np.sum(B**2)
    logdet = 2 * np.sum(np.log(np.diag(L)))
    return (-0.5 * n * D * LOG2PI - (n - K) * D * math.log(sigmaX) - K * D * math.log(sigmaA)
            - 0.5 * D * logdet - quad / (2 * sigmaX**2))


class LinGaussHook(LikelihoodHook):
    """Collapsed linear-Gaussian likelihood for the Gibbs sweep.

    Each row's conditional uses the predictive of ``o_i`` given every other
    row: ``o_i | z ~ N(z mean, sigmaX^2 (1 + z' M z))`` per column, with
    ``M = (Z_-i' Z_-i + r I)^-1``. Sufficient statistics ``Z'Z`` and ``Z'O``
    are kept up to date by rank-one corrections.
    """

    def __init__(self, O: list, sigmaX: float, sigmaA: float = 1.0, fix_sigmaA: bool = False):
        self.O = [np.asarray(o, dtype=float) for o in O]
        self.sigmaX = float(sigmaX)
        self.sigmaA = float(sigmaA)
        self.fix_sigmaA = fix_sigmaA
        self.A = None
        self.A_ids = np.zeros(0, dtype=np.int64)
        self.D = self.O[0].shape[1]

    def _stacked(self, state):
        return np.vstack([z.astype(float) for z in state.Z]), np.vstack(self.O)

    def sync(self, state: InferenceState) -> None:
        Z, O = self._stacked(state)
        self.G = Z.T @ Z
        self.H = Z.T @ O
        self.r = self.sigmaX**2 / self.sigmaA**2
        self._eye = np.eye(self.G.shape[0])

    def begin_row(self, state, t, i):
        z = state.Z[t][i].astype(float)
        o = self.O[t][i]
        self.G -= np.outer(z, z)
        self.H -= np.outer(z, o)
        cf = cho_factor(self.G + self.r * self._eye, lower=True)
        self._M = cho_solve(cf, self._eye)
        self._mean = self._M @ self.H   # K x D
        self._z = z
        self._o = o

    def _row_loglik(self, z):
        res = self._o - z @ self._mean
        var = self.sigmaX**2 * (1.0 + z @ self._M @ z)
        return -0.5 * self.D * (LOG2PI + math.log(var)) - 0.5 * (res @ res) / var

    def entry_logliks(self, state, t, i, k):
        z = self._z
        z[k] = 0.0
        l0 = self._row_loglik(z)
        z[k] = 1.0
        l1 = self._row_loglik(z)
        z[k] = state.Z[t][i, k]
        return l0, l1

    def row_loglik(self, state, t, i, z):
        return self._row_loglik(np.asarray(z, dtype=float))

    def set_entry(self, state, t, i, k, value):
        self._z[k] = value

    def end_row(self, state, t, i):
        z = self._z
        self.G += np.outer(z, z)
        self.H += np.outer(z, self._o)

    def update(self, state: InferenceState, rng: np.random.Generator) -> None:
        """Draw ``A`` for the seen features, then ``sigmaA^2`` unless it is fixed."""
        seen = state.seen_mask() if not state.fixed_k else np.ones(state.K, bool)
        Z, O = self._stacked(state)
        post = posterior_A(Z[:, seen], O, self.sigmaX, self.sigmaA)
        self.A = post.sample(rng)
        self.A_ids = state.ids[seen].copy()
        if not self.fix_sigmaA and self.A.size:
            a, b = posterior_sigmaA(self.A)
            self.sigmaA = math.sqrt(b / rng.gamma(a))

    def total_loglik(self, state):
        Z, O = self._stacked(state)
        return collapsed_loglik(O, Z, self.sigmaX, self.sigmaA)

    def record(self, state):
        return {"sigmaA": self.sigmaA, "A": None if self.A is None else self.A.copy(),
                "A_ids": self.A_ids.copy()}
