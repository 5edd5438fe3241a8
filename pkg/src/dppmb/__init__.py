"""Diverse mini-batch selection for sequence-generation RL with k-DPPs."""

from .dpp import brute_force_pmf, diverse_minibatch, prepare, sample
from .estimators import KDPPSelector, MaxMinPicker
from .fingerprints import DEFAULT_ALPHABET, Molecule, TokenAlphabet
from .harness import Experiment, RunConfig, load_config, make_config, run_experiment
from .kernels import KernelVariant, build_kernel
from .oracle import Oracle, OracleSpec

__version__ = "0.1.0"

__all__ = [
    "brute_force_pmf", "diverse_minibatch", "prepare", "sample",
    "KDPPSelector", "MaxMinPicker",
    "DEFAULT_ALPHABET", "Molecule", "TokenAlphabet",
    "Experiment", "RunConfig", "load_config", "make_config", "run_experiment",
    "KernelVariant", "build_kernel", "Oracle", "OracleSpec",
]
