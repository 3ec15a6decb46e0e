"""Posterior updates for the focused topic model.

The observation-model state lives in :class:`TopicHook`, which plugs into the
generic feature sampler: the Gibbs sweep over ``Z`` asks it for entry
likelihoods, and ``update`` resamples assignments, ``phi`` and ``gamma``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ..mcmc.gibbs import LikelihoodHook
from ..mcmc.state import InferenceState
from .corpus import Corpus
from .kernels import assignment_sweep

LOG2 = math.log(2.0)


def phi_log_target(phi, gamma: float, z, n) -> float:
    """Unnormalized log conditional of one ``phi_kt``.

    ``Gamma(phi; gamma, 1) * prod_i Gamma(phi z_i + n_i) / (Gamma(phi z_i) n_i! 2^(phi z_i + n_i))``
    over the documents at time ``t``; documents with ``z_i = 0`` contribute a
    constant and are skipped.
    """
    z = np.asarray(z, dtype=bool)
    n = np.asarray(n, dtype=float)[z]
    if phi <= 0:
        return -math.inf
    out = (gamma - 1) * math.log(phi) - phi - math.lgamma(gamma)
    out += float(np.sum(gammaln(phi + n) - gammaln(phi) - gammaln(n + 1) - (phi + n) * LOG2))
    return out


def z_entry_prob(x: float, phi: float, n: int, xs0: float = 1.0, xs1: float = 1.0) -> float:
    """``P(z_ikt = 1)``: one if the document uses the topic, otherwise
    ``x xs0 / (x xs0 + 2^phi (1 - x) xs1)``."""
    if n > 0:
        return 1.0
    a = x * xs0
    b = 2.0**phi * (1.0 - x) * xs1
    return a / (a + b) if a + b > 0 else 0.0


class TopicHook(LikelihoodHook):
    """Collapsed topic-model likelihood and its auxiliary state.

    Columns of the count arrays follow the sampler's feature columns and are
    realigned by feature id in ``sync``.
    """

    def __init__(self, corpus: Corpus, eta: float, gamma: float = 5.0, gamma_prior=(5.0, 1.0),
                 rng: np.random.Generator | None = None, phi_sd: float = 0.2, gamma_sd: float = 0.2,
                 fix_gamma: bool = False, record_assignments: bool = False, warm_sweeps: int = 50):
        self.corpus = corpus
        self.D = corpus.D
        self.eta = float(eta)
        self.gamma = float(gamma)
        self.gamma_prior = gamma_prior
        self.rng = rng or np.random.default_rng()
        self.phi_sd = phi_sd
        self.gamma_sd = gamma_sd
        self.fix_gamma = fix_gamma
        self.record_assignments = record_assignments
        self.warm_sweeps = warm_sweeps
        self.words, self.doc, self.offsets = corpus.flat()
        self.words = self.words.astype(np.int64)
        self.doc_time = np.repeat(np.arange(corpus.T1), corpus.N)
        self.n_docs = int(corpus.N.sum())
        self.ids = None
        self.assign = None
        self.accept = {"phi": [0, 0], "gamma": [0, 0]}

    # bookkeeping

    def initialize(self, state: InferenceState, rng: np.random.Generator) -> None:
        """Random assignments within each document's active topics (activating one if none)."""
        K = state.K
        self.ids = state.ids.copy()
        self.phi = rng.gamma(self.gamma, 1.0, size=(state.T1, K))
        self.assign = np.zeros(self.words.size, dtype=np.int64)
        lengths = np.bincount(self.doc, minlength=self.n_docs)
        for d in range(self.n_docs):
            if lengths[d] == 0:
                continue
            t = self.doc_time[d]
            i = d - self.offsets[t]
            act = np.flatnonzero(state.Z[t][i])
            if act.size == 0:
                if K == 0:
                    raise ValueError("documents with words need at least one topic column")
                k = int(np.argmax(state.values[t])) if state.values.size else 0
                state.Z[t][i, k] = 1
                act = np.array([k])
            idx = np.flatnonzero(self.doc == d)
            self.assign[idx] = act[rng.integers(act.size, size=idx.size)]
        self._rebuild_counts(K)
        if self.warm_sweeps and K > 1 and self.words.size:
            self._warm_start(state, rng)

    def _warm_start(self, state: InferenceState, rng: np.random.Generator) -> None:
        # plain collapsed LDA sweeps with every topic switched on, then Z set to the topics in use;
        # only the starting point changes, the chain's target does not
        self.assign = rng.integers(state.K, size=self.words.size)
        self._rebuild_counts(state.K)
        phiz = self.phi[self.doc_time]
        for _ in range(self.warm_sweeps):
            assignment_sweep(self.words, self.doc, self.assign, self.nw, self.nk, self.ndk,
                             phiz, self.eta, rng.random(self.words.size))
        for t in range(state.T1):
            n = self.ndk[self.offsets[t]: self.offsets[t + 1]]
            has = n.sum(axis=1) > 0
            state.Z[t][has] = (n[has] > 0).astype(state.Z[t].dtype)

    def _rebuild_counts(self, K: int) -> None:
        self.nw = np.zeros((K, self.D), dtype=np.int64)
        np.add.at(self.nw, (self.assign, self.words), 1)
        self.nk = self.nw.sum(axis=1)
        self.ndk = np.zeros((self.n_docs, K), dtype=np.int64)
        np.add.at(self.ndk, (self.doc, self.assign), 1)

    def check_counts(self) -> None:
        nw, nk, ndk = self.nw.copy(), self.nk.copy(), self.ndk.copy()
        self._rebuild_counts(nw.shape[0])
        assert np.array_equal(nw, self.nw) and np.array_equal(nk, self.nk) and np.array_equal(ndk, self.ndk)

    def sync(self, state: InferenceState) -> None:
        if self.assign is None:
            self.initialize(state, self.rng)
            return
        if np.array_equal(self.ids, state.ids):
            return
        pos = {int(f): j for j, f in enumerate(state.ids)}
        old_to_new = np.array([pos.get(int(f), -1) for f in self.ids], dtype=np.int64)
        used = np.unique(self.assign)
        if used.size and np.any(old_to_new[used] < 0):
            raise RuntimeError("a topic with assigned words was removed")
        phi = self.rng.gamma(self.gamma, 1.0, size=(state.T1, state.K))
        keep = old_to_new >= 0
        phi[:, old_to_new[keep]] = self.phi[:, keep]
        self.phi = phi
        self.assign = old_to_new[self.assign]
        self.ids = state.ids.copy()
        self._rebuild_counts(state.K)

    def doc_index(self, t: int, i: int) -> int:
        return int(self.offsets[t] + i)

    # Gibbs hooks

    def entry_logliks(self, state, t, i, k):
        if self.ndk[self.offsets[t] + i, k] > 0:
            return -math.inf, 0.0
        return 0.0, -self.phi[t, k] * LOG2

    def propose_new(self, state, t, k, rng):
        self.phi[t, k] = rng.gamma(self.gamma, 1.0)

    # assignment, phi and gamma updates

    def phiz(self, state: InferenceState) -> np.ndarray:
        Z = np.vstack(state.Z).astype(float)
        return Z * self.phi[self.doc_time]

    def assignment_probs(self, state: InferenceState, j: int) -> np.ndarray:
        """Normalized conditional of assignment ``j`` given all the others."""
        w, d, k = self.words[j], self.doc[j], self.assign[j]
        nw = self.nw[:, w].astype(float)
        nk = self.nk.astype(float)
        nd = self.ndk[d].astype(float)
        nw[k] -= 1
        nk[k] -= 1
        nd[k] -= 1
        t = self.doc_time[d]
        z = state.Z[t][d - self.offsets[t]]
        p = (nw + self.eta) * (nd + self.phi[t] * z) / (nk + self.D * self.eta)
        if p.sum() <= 0:
            raise ValueError("document has no active topic")
        return p / p.sum()

    def sample_assignment(self, state: InferenceState, j: int, rng: np.random.Generator) -> int:
        p = self.assignment_probs(state, j)
        k_old = self.assign[j]
        k = int(rng.choice(p.size, p=p))
        if k != k_old:
            w, d = self.words[j], self.doc[j]
            self.nw[k_old, w] -= 1
            self.nk[k_old] -= 1
            self.ndk[d, k_old] -= 1
            self.nw[k, w] += 1
            self.nk[k] += 1
            self.ndk[d, k] += 1
            self.assign[j] = k
        return k

    def sweep_assignments(self, state: InferenceState, rng: np.random.Generator) -> None:
        if self.words.size == 0 or state.K == 0:
            return
        u = rng.random(self.words.size)
        assignment_sweep(self.words, self.doc, self.assign, self.nw, self.nk, self.ndk,
                         self.phiz(state), self.eta, u)

    def _phi_loglik(self, state, phi):
        """Per-(t, k) log target of ``phi`` (shape ``T1 x K``) given ``gamma``, ``Z`` and counts."""
        out = (self.gamma - 1) * np.log(phi) - phi - math.lgamma(self.gamma)
        for t in range(state.T1):
            z = state.Z[t].astype(bool)
            n = self.ndk[self.offsets[t]: self.offsets[t + 1]]
            p = phi[t][None, :]
            term = gammaln(p + n) - gammaln(p) - p * LOG2
            out[t] += np.where(z, term, 0.0).sum(axis=0)
        return out

    def mh_update_phi(self, state: InferenceState, rng: np.random.Generator) -> None:
        """One log-scale random-walk step for every ``phi_kt`` (independent given the rest)."""
        if self.phi.size == 0:
            return
        prop = self.phi * np.exp(self.phi_sd * rng.standard_normal(self.phi.shape))
        logr = self._phi_loglik(state, prop) - self._phi_loglik(state, self.phi) + np.log(prop / self.phi)
        acc = np.log(rng.random(self.phi.shape)) < logr
        self.phi = np.where(acc, prop, self.phi)
        self.accept["phi"][0] += int(acc.sum())
        self.accept["phi"][1] += acc.size

    def _gamma_logtarget(self, g, phi):
        a, b = self.gamma_prior
        return (a - 1) * math.log(g) - b * g + float(np.sum((g - 1) * np.log(phi))) - phi.size * math.lgamma(g)

    def mh_update_gamma(self, state: InferenceState, rng: np.random.Generator) -> None:
        if self.fix_gamma:
            return
        phi = self.phi if state.fixed_k else self.phi[:, state.seen_mask()]
        g = self.gamma
        g2 = g * math.exp(self.gamma_sd * rng.standard_normal())
        logr = self._gamma_logtarget(g2, phi) - self._gamma_logtarget(g, phi) + math.log(g2 / g)
        ok = math.log(rng.random()) < logr
        if ok:
            self.gamma = g2
        self.accept["gamma"][0] += int(ok)
        self.accept["gamma"][1] += 1

    def update(self, state: InferenceState, rng: np.random.Generator) -> None:
        self.sync(state)
        self.sweep_assignments(state, rng)
        self.mh_update_phi(state, rng)
        self.mh_update_gamma(state, rng)

    # estimators

    def estimate_rho(self) -> np.ndarray:
        return (self.nw + self.eta) / (self.nk[:, None] + self.D * self.eta)

    def estimate_theta(self, state: InferenceState) -> np.ndarray:
        """``(n_docs, K)``; a document with an empty active set gets a uniform row."""
        num = self.ndk + self.phiz(state)
        tot = num.sum(axis=1, keepdims=True)
        K = num.shape[1]
        return np.where(tot > 0, num / np.where(tot > 0, tot, 1.0), 1.0 / max(K, 1))

    def record(self, state):
        out = {"gamma": self.gamma, "phi": self.phi.copy(), "rho_hat": self.estimate_rho(),
               "theta_hat": self.estimate_theta(state)}
        if self.record_assignments:
            out["assign_ids"] = self.ids[self.assign].copy()
        return out


def estimate_rho(nw, nk, eta: float) -> np.ndarray:
    nw = np.asarray(nw, dtype=float)
    return (nw + eta) / (np.asarray(nk, dtype=float)[:, None] + nw.shape[1] * eta)


def estimate_theta(ndk, z, phi) -> np.ndarray:
    """Document-topic proportions ``(n + z phi) / sum_k (n + z phi)``; uniform over the active set if empty."""
    ndk = np.asarray(ndk, dtype=float)
    num = ndk + np.asarray(z) * np.asarray(phi)
    tot = num.sum(axis=-1, keepdims=True)
    z = np.asarray(z, dtype=float)
    act = np.where(z.sum(axis=-1, keepdims=True) > 0, z / np.maximum(z.sum(axis=-1, keepdims=True), 1), 1.0 / num.shape[-1])
    return np.where(tot > 0, num / np.where(tot > 0, tot, 1.0), act)


def perplexity(test: Corpus, samples) -> float:
    """``exp(-sum log p(w) / n_words)`` with ``p(w) = mean_s sum_k theta_dk rho_kw``.

    ``samples`` yields ``(rho_hat, theta_hat)`` pairs, ``theta_hat`` indexed by
    document in ``(t, i)`` order. A zero-probability word gives ``inf``.
    """
    words, doc, _ = test.flat()
    if words.size == 0:
        raise ValueError("empty test set")
    acc = np.zeros(words.size)
    S = 0
    for rho, theta in samples:
        acc += np.einsum("jk,kj->j", theta[doc], rho[:, words])
        S += 1
    if S == 0:
        raise ValueError("need at least one sample")
    with np.errstate(divide="ignore"):
        ll = np.log(acc / S).sum()
    return float(np.exp(-ll / words.size))
