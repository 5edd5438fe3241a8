"""Exact k-DPP sampling from an L-ensemble.

Sampling is the two-phase spectral algorithm: first pick k eigenvectors with
the elementary-symmetric-polynomial recursion, then draw items one at a time
from the projection DPP they span, contracting the span after each draw.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .kernels import KernelMatrix, apply_quality, build_kernel
from .numerics import (
    NEG_EIG_TOL,
    EigenDecomposition,
    NumericalError,
    as_symmetric,
    det,
    elem_sym_polys,
    sym_eig,
)
from .streams import as_generator

log = logging.getLogger(__name__)

RIDGE = 1e-8
RANK_TOL = 1e-12
ORTHO_TOL = 1e-8
BRUTE_FORCE_MAX_N = 15


class KernelNotPSDError(ValueError):
    pass


class RankError(ValueError):
    pass


@dataclass(frozen=True)
class KdppSampler:
    decomposition: EigenDecomposition
    esp: np.ndarray
    k: int
    ridge: float = RIDGE

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.decomposition.eigenvalues

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @classmethod
    def from_eigen(cls, eigenvalues, eigenvectors, k: int, ridge: float = 0.0) -> KdppSampler:
        lam = np.maximum(np.asarray(eigenvalues, dtype=np.float64), 0.0)
        if k < 1 or k > lam.size:
            raise ValueError(f"k={k} must lie in [1, {lam.size}]")
        if np.count_nonzero(lam > RANK_TOL) < k:
            raise RankError(f"kernel rank is below k={k}")
        dec = EigenDecomposition(lam, np.asarray(eigenvectors, dtype=np.float64))
        return cls(dec, elem_sym_polys(lam, k), k, ridge)


def _matrix(l) -> np.ndarray:
    return l.matrix if isinstance(l, KernelMatrix) else as_symmetric(l, "kernel")


def prepare(l, k: int, ridge: float = RIDGE, method: str = "lapack") -> KdppSampler:
    """Decompose ``L + ridge*I`` and tabulate the k-DPP normaliser."""
    m = _matrix(l)
    n = m.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    dec = sym_eig(m + ridge * np.eye(n), method=method)
    if dec.eigenvalues[0] - ridge < -NEG_EIG_TOL:
        raise KernelNotPSDError(
            f"kernel min eigenvalue {dec.eigenvalues[0] - ridge:.3e} < -{NEG_EIG_TOL:g}"
        )
    return KdppSampler.from_eigen(dec.eigenvalues, dec.eigenvectors, k, ridge)


def select_eigenvector_subset(s: KdppSampler, rng) -> list[int]:
    """Phase one: choose which k eigenvectors define the elementary DPP."""
    rng = as_generator(rng)
    lam, e = s.eigenvalues, s.esp
    remaining = s.k
    chosen = []
    for n in range(s.n, 0, -1):
        if remaining == 0:
            break
        if n == remaining:
            chosen.extend(range(n - 1, -1, -1))
            break
        p = lam[n - 1] * e[n - 1, remaining - 1] / e[n, remaining]
        if rng.random() < p:
            chosen.append(n - 1)
            remaining -= 1
    return chosen


def _orthonormality_error(v: np.ndarray) -> float:
    if v.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(v.T @ v - np.eye(v.shape[1]))))


def _orthonormalize(v: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(v)
    if np.min(np.abs(np.diag(r)), initial=np.inf) < 1e-12:
        raise NumericalError("span collapsed during projection sampling")
    return q


def sample_projection_dpp(vectors, rng) -> tuple[int, ...]:
    """Draw one set from the projection DPP onto span(``vectors`` columns)."""
    rng = as_generator(rng)
    v = np.array(vectors, dtype=np.float64, copy=True)
    if v.ndim != 2:
        raise ValueError("vectors must be a 2-d array of columns")
    err = _orthonormality_error(v)
    if err > ORTHO_TOL:
        raise NumericalError(f"input columns are not orthonormal (error {err:.2e})")
    chosen = []
    for remaining in range(v.shape[1], 0, -1):
        weights = np.einsum("ij,ij->i", v, v)
        cdf = np.cumsum(weights)
        i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        i = min(i, v.shape[0] - 1)
        chosen.append(i)
        if remaining == 1:
            break
        j = int(np.argmax(np.abs(v[i])))
        pivot = v[:, j].copy()
        v = np.delete(v, j, axis=1)
        v -= np.outer(pivot, v[i] / pivot[i])
        v[i] = 0.0
        v = _orthonormalize(v)
        err = _orthonormality_error(v)
        if err > ORTHO_TOL:
            raise NumericalError(f"lost orthonormality during contraction (error {err:.2e})")
    return tuple(sorted(chosen))


def sample(s: KdppSampler, rng) -> tuple[int, ...]:
    """Draw a size-k subset; indices are zero-based and sorted."""
    rng = as_generator(rng)
    picked = select_eigenvector_subset(s, rng)
    return sample_projection_dpp(s.decomposition.eigenvectors[:, picked], rng)


def brute_force_pmf(l, k: int) -> dict[tuple[int, ...], float]:
    """Exact k-DPP probabilities by enumerating every size-k minor."""
    m = _matrix(l)
    n = m.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"refusing brute force over N={n} > {BRUTE_FORCE_MAX_N} items")
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    subsets = list(itertools.combinations(range(n), k))
    dets = np.array([det(m[np.ix_(y, y)]) for y in subsets])
    z = dets.sum()
    # Hadamard: det(L_Y) <= prod(diag L_Y) for PSD L, so this bounds the normaliser.
    hadamard = elem_sym_polys(np.maximum(np.diag(m), 0.0), k)[n, k]
    if not z > RANK_TOL * max(hadamard, RANK_TOL):
        raise RankError(f"kernel rank is below k={k}; all size-k minors vanish")
    return {y: float(d / z) for y, d in zip(subsets, dets)}


def diverse_minibatch(batch, k: int, variant, rng, quality=None, ridge: float = RIDGE) -> list[int]:
    """Indices of ``k`` molecules from ``batch`` chosen by a k-DPP.

    Duplicates (identical token sequences) are collapsed before the kernel is
    built; each distinct molecule is represented by its first occurrence. If
    fewer than ``k`` distinct molecules exist, all are taken and the quota is
    filled uniformly from the leftover duplicates.
    """
    rng = as_generator(rng)
    first: dict = {}
    for idx, mol in enumerate(batch):
        first.setdefault(mol.tokens, idx)
    reps = list(first.values())
    if len(batch) < k:
        raise ValueError(f"batch of {len(batch)} cannot supply k={k}")
    if len(reps) <= k:
        if len(reps) < k:
            log.warning("only %d distinct molecules for k=%d; filling with duplicates", len(reps), k)
        rest = np.setdiff1d(np.arange(len(batch)), reps)
        fill = rng.choice(rest, size=k - len(reps), replace=False) if k > len(reps) else []
        return sorted(reps + [int(i) for i in fill])
    kernel = build_kernel([batch[i] for i in reps], variant)
    if quality is not None:
        kernel = apply_quality(kernel, np.asarray(quality, dtype=np.float64)[reps])
    sampler = prepare(kernel, k, ridge=ridge)
    return [reps[i] for i in sample(sampler, rng)]
