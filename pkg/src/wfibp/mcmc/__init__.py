from .gibbs import LikelihoodHook, entry_prob_one, gibbs_sweep, gibbs_update_entry
from .particle import (
    ParticleFilterConfig,
    binomial_logweight,
    conditional_smc,
    pg_update_first_seen,
    pg_update_fixed_k,
    pg_update_seen,
    static_update,
    unseen_logweight,
)
from .moves import swap_sweep, xor_sweep
from .sampler import MCMCConfig, Sample, Sampler, run_fixed_k, run_mcmc
from .state import InferenceState, sample_slice, sample_slices
from .thinning import thin_unseen, thin_unseen_alive, thin_unseen_born

__all__ = [
    "InferenceState",
    "LikelihoodHook",
    "MCMCConfig",
    "ParticleFilterConfig",
    "Sample",
    "Sampler",
    "binomial_logweight",
    "conditional_smc",
    "entry_prob_one",
    "gibbs_sweep",
    "gibbs_update_entry",
    "pg_update_first_seen",
    "pg_update_fixed_k",
    "pg_update_seen",
    "run_fixed_k",
    "run_mcmc",
    "sample_slice",
    "sample_slices",
    "static_update",
    "thin_unseen",
    "thin_unseen_alive",
    "thin_unseen_born",
    "unseen_logweight",
    "swap_sweep",
    "xor_sweep",
]
