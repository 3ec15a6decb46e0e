"""Joint-distribution (Geweke) checks for the samplers.

Marginal-conditional draws come from the generative model; successive-conditional
draws alternate one sampler iteration with a fresh draw of the data given the
parameters. Both chains target the same joint law, so the means of any statistic
must agree. Standard errors use batch means for the correlated chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .generative import TimeGrid, fixed_k_generate, simulate_joint
from .lingauss import LinGaussHook, generate
from .mcmc import InferenceState, MCMCConfig, Sampler
from .measures import PRFParams
from .topics import Corpus, TopicHook, sample_nb
from .validation import batch_means_se


@dataclass
class GewekeResult:
    names: list
    forward: np.ndarray      # rounds x stats
    successive: np.ndarray
    zscores: np.ndarray = field(init=False)

    def __post_init__(self):
        mf, ms = self.forward.mean(axis=0), self.successive.mean(axis=0)
        sf = self.forward.std(axis=0, ddof=1) / np.sqrt(self.forward.shape[0])
        # batches of at least 200 iterations: hyperparameter chains stay correlated over ~100 rounds
        nb = int(np.clip(self.successive.shape[0] // 200, 10, 50))
        ss = np.array([batch_means_se(c, nb) for c in self.successive.T])
        se = np.sqrt(sf**2 + ss**2)
        self.zscores = np.where(se > 0, (mf - ms) / np.where(se > 0, se, 1.0), np.where(mf == ms, 0.0, np.inf))

    def passed(self, limit: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.zscores) <= limit))

    def table(self) -> list:
        return [(n, float(f), float(s), float(z)) for n, f, s, z in
                zip(self.names, self.forward.mean(axis=0), self.successive.mean(axis=0), self.zscores)]


# feature model: nonparametric sampler with the collapsed linear-Gaussian likelihood

FEATURE_STATS = ["sum_Z", "n_seen", "mean_X", "sum_O2", "sum_OZ"]


def _feature_stats(Z, X, O) -> list:
    zs = [np.asarray(z, dtype=float) for z in Z]
    oz = sum(float(o.sum(axis=1) @ z.sum(axis=1)) for o, z in zip(O, zs))
    return [sum(z.sum() for z in zs), X.shape[1], float(X.mean()) if X.size else 0.0,
            sum(float((o**2).sum()) for o in O), oz]


def geweke_feature_model(rounds: int, rng: np.random.Generator, alpha: float = 1.0, beta: float = 1.0,
                         N: int = 2, n_times: int = 2, spacing: float = 0.1, D: int = 1,
                         sigmaX: float = 1.0, sigmaA: float = 1.0, particles: int = 10,
                         step: float | None = None, xor_moves: bool = False) -> "GewekeResult":
    grid = TimeGrid.regular(n_times, spacing)
    Nv = np.full(n_times, N, dtype=np.int64)
    params = PRFParams(alpha, beta)

    def forward():
        fs, Z = simulate_joint(params, grid, Nv, rng, step)
        A = sigmaA * rng.standard_normal((Z.ids.size, D))
        return Z, fs.values, generate(Z.Z, A, sigmaX, rng)

    fwd = []
    for _ in range(rounds):
        Z, X, O = forward()
        fwd.append(_feature_stats(Z.Z, X, O))

    Z, X, O = forward()
    state = InferenceState(grid, Nv, Z.ids, X, Z.Z, next_id=int(Z.ids.max()) + 1 if Z.ids.size else 0)
    hook = LinGaussHook(O, sigmaX, sigmaA, fix_sigmaA=True)
    cfg = MCMCConfig(alpha, beta, iterations=rounds, burn_in=0, n_particles=particles, step=step,
                     xor_moves=xor_moves)
    sampler = Sampler(grid, Nv, hook, cfg, rng, state)
    succ = []
    for _ in range(rounds):
        sampler.step()
        st = sampler.state
        seen = st.seen_mask()
        succ.append(_feature_stats([z[:, seen] for z in st.Z], st.values[:, seen], hook.O))
        # fresh data given the allocations; A is collapsed, so a prior draw suffices
        A = sigmaA * rng.standard_normal((st.K, D))
        hook.O = generate(st.Z, A, sigmaX, rng)
        hook.sync(st)
    return GewekeResult(FEATURE_STATS, np.array(fwd, dtype=float), np.array(succ, dtype=float))


# topic model: fixed-K sampler with the focused topic likelihood

TOPIC_STATS = ["sum_Z", "mean_X", "gamma", "mean_phi", "n_words", "sum_count2"]


def _documents(Z, phi, rho, rng):
    """Words and assignments given allocations, proportions and word distributions."""
    docs, assign = [], []
    D = rho.shape[1]
    for t, z in enumerate(Z):
        dt = []
        for i in range(z.shape[0]):
            act = np.flatnonzero(z[i])
            # per-topic counts are independent NB(phi_k, 1/2): this is W ~ NB(sum phi) with Dirichlet theta
            n = sample_nb(phi[t, act], rng) if act.size else np.zeros(0, np.int64)
            a = np.repeat(act, n)
            w = np.array([rng.choice(D, p=rho[k]) for k in a], dtype=np.int64)
            dt.append(w)
            assign.append(a)
        docs.append(dt)
    a = np.concatenate(assign) if assign else np.zeros(0, np.int64)
    return docs, a.astype(np.int64)


def _topic_stats(Z, X, gamma, phi, corpus: Corpus) -> list:
    c = corpus.word_counts()
    return [sum(float(z.sum()) for z in Z), float(X.mean()), gamma, float(phi.mean()),
            float(c.sum()), float(c @ c)]


def _load_documents(hook: TopicHook, docs, assign, K: int) -> None:
    hook.corpus = Corpus(docs, hook.D)
    words, hook.doc, hook.offsets = hook.corpus.flat()
    hook.words = words.astype(np.int64)
    hook.assign = assign
    hook._rebuild_counts(K)


def geweke_topic_model(rounds: int, rng: np.random.Generator, K: int = 2, D: int = 5, N: int = 1,
                       n_times: int = 2, spacing: float = 0.1, alpha: float = 1.0, beta: float = 1.0,
                       eta: float = 0.5, gamma_prior=(5.0, 1.0), particles: int = 10,
                       step: float | None = None) -> "GewekeResult":
    grid = TimeGrid.regular(n_times, spacing)
    Nv = np.full(n_times, N, dtype=np.int64)
    ga, gb = gamma_prior

    def forward():
        X, Z = fixed_k_generate(alpha, beta, K, grid, Nv, rng, step)
        gamma = rng.gamma(ga, 1.0 / gb)
        phi = rng.gamma(gamma, 1.0, size=(n_times, K))
        rho = rng.dirichlet(np.full(D, eta), size=K)
        docs, assign = _documents(Z.Z, phi, rho, rng)
        return X, Z.Z, gamma, phi, docs, assign

    fwd = []
    for _ in range(rounds):
        X, Z, gamma, phi, docs, _ = forward()
        fwd.append(_topic_stats(Z, X, gamma, phi, Corpus(docs, D)))

    X, Z, gamma, phi, docs, assign = forward()
    state = InferenceState(grid, Nv, np.arange(K), X, Z, fixed_k=True)
    hook = TopicHook(Corpus(docs, D), eta, gamma, gamma_prior, rng=rng, warm_sweeps=0)
    hook.ids = np.arange(K)
    hook.phi = phi.copy()
    _load_documents(hook, docs, assign, K)
    cfg = MCMCConfig(alpha, beta, iterations=rounds, burn_in=0, n_particles=particles, step=step, K=K)
    sampler = Sampler(grid, Nv, hook, cfg, rng, state)
    succ = []
    for _ in range(rounds):
        sampler.step()
        st = sampler.state
        succ.append(_topic_stats(st.Z, st.values, hook.gamma, hook.phi, hook.corpus))
        # word distributions from their Dirichlet posterior, then fresh documents
        rho = np.array([rng.dirichlet(hook.nw[k] + eta) for k in range(K)])
        docs, assign = _documents(st.Z, hook.phi, rho, rng)
        _load_documents(hook, docs, assign, K)
    return GewekeResult(TOPIC_STATS, np.array(fwd, dtype=float), np.array(succ, dtype=float))


__all__ = ["FEATURE_STATS", "GewekeResult", "TOPIC_STATS", "geweke_feature_model", "geweke_topic_model"]
