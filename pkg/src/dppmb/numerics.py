"""Dense symmetric linear algebra used by the k-DPP sampler.

Two eigensolvers are available: a cyclic Jacobi solver written here, and
LAPACK's ``syevd`` through :func:`numpy.linalg.eigh`. They share one contract
(ascending eigenvalues, orthonormal eigenvector columns) and are checked
against each other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEG_EIG_TOL = 1e-8
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class NumericalError(ArithmeticError):
    """An iterative routine failed to reach its tolerance."""


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # (n,), ascending
    eigenvectors: np.ndarray  # (n, n), column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    """Validate a square finite matrix and return an exactly symmetric copy.

    Small asymmetries from floating point assembly are averaged away; the
    returned array satisfies ``a[i, j] == a[j, i]`` bit for bit.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    a = 0.5 * (a + a.T)
    return a


def jacobi_eigh(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    a = as_symmetric(m)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    target = tol * scale

    def off_norm(x):
        return np.sqrt(max(np.sum(x * x) - np.sum(np.diag(x) ** 2), 0.0))

    for _ in range(max_sweeps):
        if off_norm(a) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        residual = off_norm(a)
        if residual > target:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps: off-diagonal norm {residual:.3e}"
            )

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def sym_eig(m, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix, eigenvalues ascending.

    ``method="jacobi"`` runs the cyclic Jacobi solver; ``"lapack"`` (default)
    defers to :func:`numpy.linalg.eigh`, which is orders of magnitude faster
    for the batch sizes the harness uses.
    """
    if method == "jacobi":
        return jacobi_eigh(m)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    a = as_symmetric(m)
    w, v = np.linalg.eigh(a)
    return EigenDecomposition(w, v)


def min_eigenvalue(m, method: str = "lapack") -> float:
    return float(sym_eig(m, method=method).eigenvalues[0])


def det(m) -> float:
    """Determinant by Gaussian elimination with partial pivoting."""
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"det needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    result = 1.0
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if a[piv, col] == 0.0:
            return 0.0
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            result = -result
        result *= a[col, col]
        if col + 1 < n:
            factors = a[col + 1:, col] / a[col, col]
            a[col + 1:, col:] -= np.outer(factors, a[col, col:])
    return float(result)


def clamp_eigenvalues(eigenvalues, tol: float = NEG_EIG_TOL) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size and lam.min() < -tol:
        raise ValueError(f"eigenvalue {lam.min():.3e} is below -{tol:g}; kernel is not PSD")
    return np.maximum(lam, 0.0)


def elem_sym_polys(eigenvalues, k: int) -> np.ndarray:
    """Table ``E`` with ``E[m, j]`` = e_j of the first ``m`` eigenvalues.

    Built with e_j^(m) = e_j^(m-1) + lam_m * e_{j-1}^(m-1). Shape (n+1, k+1).
    """
    lam = clamp_eigenvalues(eigenvalues)
    n = lam.size
    if k < 0 or k > n:
        raise ValueError(f"k={k} must lie in [0, {n}]")
    table = np.zeros((n + 1, k + 1))
    table[:, 0] = 1.0
    for m in range(1, n + 1):
        table[m, 1:] = table[m - 1, 1:] + lam[m - 1] * table[m - 1, :-1]
    return table
