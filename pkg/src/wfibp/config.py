"""Run configuration: one JSON document per experiment.

Defaults reproduce the linear-Gaussian synthetic experiment (3 features,
30 dimensions, 50 objects at 40 times, 0.01 diffusion units apart). Errors
point at the offending line of the JSON file.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .generative import TimeGrid
from .mcmc import MCMCConfig


class ConfigError(ValueError):
    pass


@dataclass
class LinGaussConfig:
    sigmaX: float = 0.5
    sigmaA: float = 1.0          # initial value; inverse-gamma(1, 1) prior unless fixed
    fix_sigmaA: bool = False
    D: int = 30
    p_A: float = 0.5             # synthetic data: binary factor entries

    def validate(self):
        if self.sigmaX <= 0 or self.sigmaA <= 0 or self.D < 1 or not 0 < self.p_A < 1:
            raise ValueError("need sigmaX, sigmaA > 0, D >= 1 and 0 < p_A < 1")


@dataclass
class TopicConfig:
    D: int = 100
    eta: float = 0.1
    gamma: float = 5.0
    gamma_prior: tuple = (5.0, 1.0)
    fix_gamma: bool = False
    warm_sweeps: int = 50

    def validate(self):
        a, b = self.gamma_prior
        if self.D < 2 or self.eta <= 0 or self.gamma <= 0 or a <= 0 or b <= 0 or self.warm_sweeps < 0:
            raise ValueError("need D >= 2, eta > 0, gamma > 0, positive gamma prior and warm_sweeps >= 0")


@dataclass
class RunConfig:
    alpha: float = 3.0
    beta: float = 1.0
    n_times: int = 40
    duration: float = 0.01        # diffusion time units between consecutive grid times
    times: list | None = None     # explicit grid (diffusion units); overrides n_times/duration
    N: int = 50                   # objects (documents) per time
    step: float | None = None     # integration step; None picks the default
    K: int = 3                    # 0 = nonparametric
    particles: int = 50
    iterations: int = 2000
    burn_in: int = 200
    thin: int = 1
    anneal: int = 0
    anneal_start: float = 10.0
    xor_moves: bool = False
    anneal_prior_weight: float = 1.0
    swap_moves: bool = False
    static: bool = False
    seed: int = 0
    checkpoint_every: int = 100
    truth_K: int | None = None    # synthetic data; defaults to K
    truth_alpha: float | None = None
    truth_beta: float | None = None
    holdout: list = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8])
    likelihood: str = "lingauss"
    lingauss: LinGaussConfig = field(default_factory=LinGaussConfig)
    topic: TopicConfig = field(default_factory=TopicConfig)

    def __post_init__(self):
        if isinstance(self.lingauss, dict):
            self.lingauss = _build(LinGaussConfig, self.lingauss, "lingauss")
        if isinstance(self.topic, dict):
            self.topic = _build(TopicConfig, self.topic, "topic")
        self.topic.gamma_prior = tuple(self.topic.gamma_prior)

    def validate(self) -> "RunConfig":
        if self.likelihood not in ("lingauss", "topic"):
            raise ValueError(f"likelihood must be 'lingauss' or 'topic', got {self.likelihood!r}")
        if self.alpha <= 0 or self.beta <= 0 or self.duration <= 0:
            raise ValueError("alpha, beta and duration must be positive")
        if self.n_times < 1 or self.N < 1 or self.K < 0:
            raise ValueError("need n_times >= 1, N >= 1 and K >= 0")
        if self.burn_in >= self.iterations and self.iterations > 0:
            raise ValueError("burn_in must be smaller than iterations")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if any(not 0 < f < 1 for f in self.holdout):
            raise ValueError("holdout fractions must lie in (0, 1)")
        self.grid()
        self.mcmc()
        (self.lingauss if self.likelihood == "lingauss" else self.topic).validate()
        return self

    def grid(self) -> TimeGrid:
        if self.times is not None:
            return TimeGrid(self.times)
        return TimeGrid.regular(self.n_times, self.duration)

    def mcmc(self) -> MCMCConfig:
        return MCMCConfig(alpha=self.alpha, beta=self.beta, iterations=self.iterations, burn_in=self.burn_in,
                          thin=self.thin, n_particles=self.particles, step=self.step, K=self.K,
                          static=self.static, anneal=self.anneal, anneal_start=self.anneal_start,
                          xor_moves=self.xor_moves, anneal_prior_weight=self.anneal_prior_weight,
                          swap_moves=self.swap_moves)

    def truth(self) -> tuple:
        K = self.K if self.truth_K is None else self.truth_K
        # fixed-K truth with alpha = K gives WF(1, beta) features unless overridden
        alpha = self.truth_alpha if self.truth_alpha is not None else (float(K) if K else self.alpha)
        beta = self.truth_beta if self.truth_beta is not None else self.beta
        return K, alpha, beta

    def to_dict(self) -> dict:
        d = asdict(self)
        d["topic"]["gamma_prior"] = list(d["topic"]["gamma_prior"])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise TypeError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise KeyError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    return cls(**data)


def _key_line(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{source}:{_key_line(text, key)}: unknown key {key!r}")
    try:
        cfg = RunConfig(**data)
    except (TypeError, KeyError, ValueError) as e:
        msg = str(e).strip("'\"")
        key = next((k for k in data if isinstance(data[k], dict) and k in msg), None)
        line = _key_line(text, key) if key else 1
        raise ConfigError(f"{source}:{line}: {msg}") from None
    try:
        cfg.validate()
    except (TypeError, ValueError) as e:
        line = _blame(text, data, str(e))
        raise ConfigError(f"{source}:{line}: {e}") from None
    return cfg


def _blame(text: str, data: dict, msg: str) -> int:
    """Best-effort line of the key an error message refers to."""
    keys = list(data) + [k for v in data.values() if isinstance(v, dict) for k in v]
    hits = []
    for k in keys:
        m = re.search(r"\b%s\b" % re.escape(k), msg)
        if m:
            hits.append((m.start(), -len(k), k))
    # the key named first in the message is the one being complained about
    for _, _, k in sorted(hits):
        line = _key_line(text, k)
        if line:
            return line
    return 1


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


__all__ = ["ConfigError", "LinGaussConfig", "RunConfig", "TopicConfig", "load_config", "parse_config"]
