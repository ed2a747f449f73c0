"""Symmetric-matrix vectorization and eigenvalue splitting.

Symmetric matrices are stored in svec coordinates: the upper triangle read
row by row, with off-diagonal entries scaled by sqrt(2) so that the
Frobenius inner product of two matrices equals the dot product of their
svec images.  All adjoints in the package are then plain transposes.
"""

from dataclasses import dataclass

import numpy as np

SQRT2 = float(np.sqrt(2.0))


class EigenDecompositionError(RuntimeError):
    """Raised when the symmetric eigensolver fails to converge."""


def svec_dim(order: int) -> int:
    return order * (order + 1) // 2


def svec_order(dim: int) -> int:
    """Matrix order m with m(m+1)/2 == dim."""
    m = int(round((np.sqrt(8 * dim + 1) - 1) / 2))
    if svec_dim(m) != dim:
        raise ValueError(f"{dim} is not a triangular number")
    return m


def svec_indices(order: int) -> list[tuple[int, int]]:
    """Coordinate order: (0,0), (0,1), ..., (0,m-1), (1,1), ..., (m-1,m-1)."""
    return [(i, j) for i in range(order) for j in range(i, order)]


def svec(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    out = np.empty(svec_dim(m))
    k = 0
    for i in range(m):
        out[k] = A[i, i]
        k += 1
        for j in range(i + 1, m):
            out[k] = SQRT2 * 0.5 * (A[i, j] + A[j, i])
            k += 1
    return out


def smat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = svec_order(v.size)
    A = np.zeros((m, m))
    k = 0
    for i in range(m):
        A[i, i] = v[k]
        k += 1
        for j in range(i + 1, m):
            A[i, j] = A[j, i] = v[k] / SQRT2
            k += 1
    return A


def conjugation_matrix(P: np.ndarray) -> np.ndarray:
    """Matrix K with svec(P S P^T) = K svec(S); orthogonal when P is."""
    m = P.shape[0]
    d = svec_dim(m)
    K = np.empty((d, d))
    for k, (i, j) in enumerate(svec_indices(m)):
        E = np.zeros((m, m))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / SQRT2
        K[:, k] = svec(P @ E @ P.T)
    return K


@dataclass
class SpectralSplit:
    """Eigendecomposition of a symmetric matrix with index partition.

    Eigenvalues are sorted in descending order and clamped to exactly zero
    on the beta set.  Sigma holds the coupling coefficients
    (lam_i^+ + lam_j^+) / (|lam_i| + |lam_j|) with the convention 0/0 := 1.
    """

    P: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tol_eig: float
    Sigma: np.ndarray

    @property
    def order(self) -> int:
        return self.lam.size


def default_eig_tol(A: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.linalg.norm(A, 2)))


def eig_split(A: np.ndarray, tol_eig: float | None = None) -> SpectralSplit:
    """Split a symmetric matrix into positive / zero / negative eigenspaces.

    Parameters
    ----------
    A : ndarray
        Symmetric matrix; asymmetry beyond 1e-12 * max(1, ||A||) is rejected.
    tol_eig : float, optional
        Absolute threshold deciding the zero set; defaults to
        1e-8 * max(1, ||A||_2).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.linalg.norm(A)))
    if np.linalg.norm(A - A.T) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric within 1e-12 * ||A||")
    S = 0.5 * (A + A.T)
    if tol_eig is None:
        tol_eig = default_eig_tol(S)
    try:
        w, P = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.norm(S)) / max(tol_eig, 1e-300)
        raise EigenDecompositionError(
            f"eigendecomposition failed for {S.shape[0]}x{S.shape[1]} matrix "
            f"(condition estimate {cond:.3e})"
        ) from exc
    order = np.argsort(w)[::-1]
    lam = w[order]
    P = P[:, order]
    alpha = np.where(lam > tol_eig)[0]
    beta = np.where(np.abs(lam) <= tol_eig)[0]
    gamma = np.where(lam < -tol_eig)[0]
    lam = lam.copy()
    lam[beta] = 0.0
    pos = np.maximum(lam, 0.0)
    num = pos[:, None] + pos[None, :]
    den = np.abs(lam)[:, None] + np.abs(lam)[None, :]
    with np.errstate(invalid="ignore"):
        Sigma = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 1.0)
    return SpectralSplit(P=P, lam=lam, alpha=alpha, beta=beta, gamma=gamma,
                         tol_eig=float(tol_eig), Sigma=Sigma)
