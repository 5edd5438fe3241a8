import numpy as np

from dppmb.fingerprints import DEFAULT_ALPHABET, Molecule


def random_psd(rng, n, rank=None):
    a = rng.normal(size=(rank or n, n))
    return a.T @ a


def random_molecule(rng, low=5, high=40, alphabet=DEFAULT_ALPHABET):
    length = int(rng.integers(low, high + 1))
    return Molecule(tuple(int(t) for t in rng.choice(alphabet.emittable, size=length)), alphabet)


def total_variation(counts, pmf, draws):
    keys = set(counts) | set(pmf)
    return 0.5 * sum(abs(counts.get(y, 0) / draws - pmf.get(y, 0.0)) for y in keys)
