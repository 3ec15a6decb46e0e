from .corpus import Corpus, holdout_split, prune_vocabulary, read_jsonl, write_jsonl
from .evaluate import assignment_accuracy, frobenius_errors, match_columns
from .generate import generate_corpus, nb_logpmf, sample_nb
from .model import TopicHook, estimate_rho, estimate_theta, perplexity, phi_log_target, z_entry_prob

__all__ = [
    "Corpus",
    "TopicHook",
    "assignment_accuracy",
    "estimate_rho",
    "estimate_theta",
    "frobenius_errors",
    "generate_corpus",
    "holdout_split",
    "match_columns",
    "nb_logpmf",
    "perplexity",
    "phi_log_target",
    "prune_vocabulary",
    "read_jsonl",
    "sample_nb",
    "write_jsonl",
    "z_entry_prob",
]
