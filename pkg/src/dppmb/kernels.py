"""L-ensemble kernels over a batch of molecules."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fingerprints import AP_BUCKETS, Molecule, counts_to_dense
from .numerics import as_symmetric


class KernelVariant(enum.Enum):
    DPP_T = "dpp-t"
    DPP_A = "dpp-a"
    DPP_P = "dpp-p"
    DPP_D = "dpp-d"

    @classmethod
    def parse(cls, value) -> KernelVariant:
        if isinstance(value, cls):
            return value
        text = str(value).lower().replace("_", "-")
        for v in cls:
            if v.value == text:
                return v
        raise ValueError(f"unknown kernel variant {value!r}")


@dataclass(frozen=True)
class KernelMatrix:
    matrix: np.ndarray
    variant: KernelVariant | None = None
    ridge: float = 0.0

    def __post_init__(self):
        m = as_symmetric(self.matrix, "kernel")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def tanimoto_gram(fps) -> np.ndarray:
    """Pairwise Tanimoto similarities of boolean fingerprint rows."""
    x = np.asarray(fps, dtype=np.float64)
    inter = x @ x.T
    pop = np.diag(inter)
    union = pop[:, None] + pop[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / union, 1.0)
    return sim


def dice_gram(counts) -> np.ndarray:
    """Pairwise Dice coefficients of dense count rows."""
    c = np.asarray(counts, dtype=np.int64)
    totals = c.sum(axis=1)
    # sum_b min(a_b, c_b) == sum_t <[a >= t], [c >= t]>
    overlap = np.zeros((c.shape[0], c.shape[0]))
    for t in range(1, int(c.max(initial=0)) + 1):
        level = (c >= t).astype(np.float64)
        overlap += level @ level.T
    denom = totals[:, None] + totals[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(denom > 0, 2.0 * overlap / denom, 1.0)
    return sim


def tanimoto_matrix(batch: list[Molecule]) -> KernelMatrix:
    if not batch:
        raise ValueError("batch must be non-empty")
    fps = np.stack([m.bit_fp for m in batch])
    return KernelMatrix(tanimoto_gram(fps), KernelVariant.DPP_T)


def dice_matrix(batch: list[Molecule]) -> KernelMatrix:
    if not batch:
        raise ValueError("batch must be non-empty")
    counts = np.stack([counts_to_dense(m.scaffold_counts, AP_BUCKETS) for m in batch])
    return KernelMatrix(dice_gram(counts), KernelVariant.DPP_D)


def combine(variant, lt: KernelMatrix, ld: KernelMatrix) -> KernelMatrix:
    variant = KernelVariant.parse(variant)
    if lt.matrix.shape != ld.matrix.shape:
        raise ValueError(f"kernel shapes differ: {lt.matrix.shape} vs {ld.matrix.shape}")
    if variant is KernelVariant.DPP_T:
        m = lt.matrix
    elif variant is KernelVariant.DPP_D:
        m = ld.matrix
    elif variant is KernelVariant.DPP_A:
        m = lt.matrix + ld.matrix
    else:
        m = lt.matrix * ld.matrix
    return KernelMatrix(m, variant)


def build_kernel(batch: list[Molecule], variant) -> KernelMatrix:
    variant = KernelVariant.parse(variant)
    if variant is KernelVariant.DPP_T:
        return tanimoto_matrix(batch)
    if variant is KernelVariant.DPP_D:
        return dice_matrix(batch)
    return combine(variant, tanimoto_matrix(batch), dice_matrix(batch))


def apply_quality(l: KernelMatrix, q) -> KernelMatrix:
    """Quality weighting: entry (i, j) becomes q_i * L_ij * q_j."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (l.n,):
        raise ValueError(f"need {l.n} quality values, got shape {q.shape}")
    if np.any(~(q > 0)):
        raise ValueError("quality values must be positive")
    return KernelMatrix(q[:, None] * l.matrix * q[None, :], l.variant, l.ridge)


def write_kernel(path, l) -> None:
    m = l.matrix if isinstance(l, KernelMatrix) else np.asarray(l, dtype=np.float64)
    lines = [str(m.shape[0])]
    lines += [" ".join(repr(float(x)) for x in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel(path) -> KernelMatrix:
    """Parse a kernel dump: first token N, then N*N reals row by row."""
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"{path}: empty kernel file")
    try:
        n = int(tokens[0])
        values = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if n < 1 or len(values) != n * n:
        raise ValueError(f"{path}: expected {n}x{n} entries, found {len(values)}")
    m = np.array(values).reshape(n, n)
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise ValueError(f"{path}: kernel is not symmetric")
    return KernelMatrix(m)
