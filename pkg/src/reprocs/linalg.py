"""Dense linear-algebra kernels: QR, ordered symmetric EVD, projection-PCA,
subspace error and denseness coefficients.

A *basis matrix* is an ``(n, r)`` float array with orthonormal columns. The
empty basis is an ``(n, 0)`` array and is accepted everywhere a basis is.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricMatrixError,
    DegenerateInputError,
    EnumerationTooLargeError,
    RankDeficientError,
)

BASIS_TOL = 1e-10
KAPPA_MAX_N = 24
_KAPPA_CHUNK = 1 << 15


def empty_basis(n: int) -> np.ndarray:
    return np.zeros((n, 0))


def as_basis(P: np.ndarray, n: int | None = None) -> np.ndarray:
    """Coerce ``P`` to a 2-D float array; ``None`` or ``[]`` give the empty basis."""
    if P is None or (np.ndim(P) == 1 and np.size(P) == 0):
        if n is None:
            raise ValueError("row dimension needed for an empty basis")
        return empty_basis(n)
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    return P


def basis_defect(P: np.ndarray) -> float:
    """Spectral norm of ``P'P - I``."""
    if P.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(P.T @ P - np.eye(P.shape[1]), 2))


def is_basis(P: np.ndarray, tol: float = BASIS_TOL) -> bool:
    return basis_defect(P) <= tol


def _fix_column_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    if V.shape[1] == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def qr_decompose(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with ``diag(R) > 0``.

    Raises :class:`RankDeficientError` when the smallest singular value of
    ``M`` is below ``1e-12`` times the largest.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise RankDeficientError(f"cannot have full column rank with shape {M.shape}")
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0)), np.zeros((0, 0))
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficientError(
            f"matrix is rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})"
        )
    Q, R = np.linalg.qr(M)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d, R * d[:, None]


def orthonormalize(M: np.ndarray) -> np.ndarray:
    return qr_decompose(M)[0]


@dataclass(frozen=True)
class Evd:
    vectors: np.ndarray
    values: np.ndarray


def sym_evd(A: np.ndarray, sym_tol: float = 1e-10) -> Evd:
    """Eigendecomposition of a symmetric matrix, eigenvalues non-increasing.

    Eigenvector signs are fixed so that each column's largest-magnitude entry
    is positive.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise AsymmetricMatrixError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(A, 2) if A.size else 0.0
    if np.linalg.norm(A - A.T, 2) > sym_tol * max(scale, np.finfo(float).tiny):
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w, kind="stable")[::-1]
    return Evd(vectors=_fix_column_signs(V[:, order]), values=w[order])


@dataclass(frozen=True)
class PcaResult:
    """Output of :func:`proj_pca`.

    ``values`` holds the leading eigenvalues of the projected sample
    covariance (at most ``min(n, alpha)`` of them), non-increasing.
    """

    basis: np.ndarray
    values: np.ndarray
    ambiguous_cut: bool = False
    rank_deficient: bool = False

    @property
    def warnings(self) -> tuple[str, ...]:
        out = []
        if self.ambiguous_cut:
            out.append("ambiguous_cut")
        if self.rank_deficient:
            out.append("rank_deficient")
        return tuple(out)


def project_out(P: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Apply ``I - PP'`` to a vector or to the columns of a matrix."""
    if P.shape[1] == 0:
        return np.array(X, dtype=float, copy=True)
    return X - P @ (P.T @ X)


def proj_pca(D: np.ndarray, P: np.ndarray | None, r: int) -> PcaResult:
    """Top-``r`` eigenvectors of ``(1/alpha) Dp Dp'`` with ``Dp = (I - PP')D``.

    An empty ``P`` reduces this to standard PCA. The eigenvectors are taken
    from a thin SVD of ``Dp`` (same vectors, squared singular values over
    ``alpha`` as eigenvalues), then re-projected against ``P`` so the output
    is orthogonal to ``span(P)`` to working precision.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim == 1:
        D = D[:, None]
    n, alpha = D.shape
    P = as_basis(P, n)
    if P.shape[0] != n:
        raise ValueError(f"P has {P.shape[0]} rows, data has {n}")
    if r < 0 or r > n or r > alpha:
        raise ValueError(f"r={r} must satisfy 0 <= r <= min(n={n}, alpha={alpha})")
    Dp = project_out(P, D)
    U, sv, _ = np.linalg.svd(Dp, full_matrices=False)
    values = sv**2 / alpha
    if r == 0:
        return PcaResult(basis=empty_basis(n), values=values)
    top = values[0] if values.size else 0.0
    ref = top if top > 0 else 1.0
    ambiguous = r < values.size and abs(values[r - 1] - values[r]) <= 1e-12 * ref
    if r >= values.size and r < n and values[r - 1] <= 1e-12 * ref:
        # the implicit (r+1)-th eigenvalue of an alpha < n covariance is zero
        ambiguous = True
    deficient = values[r - 1] < 1e-14 * ref or top == 0.0
    Q = U[:, :r]
    if P.shape[1]:
        Q = project_out(P, Q)
    if deficient:
        Q, _ = np.linalg.qr(Q)
    else:
        Q = qr_decompose(Q)[0]
    return PcaResult(
        basis=_fix_column_signs(Q),
        values=values,
        ambiguous_cut=bool(ambiguous),
        rank_deficient=bool(deficient),
    )


def subspace_error(Phat: np.ndarray, P: np.ndarray) -> float:
    """Directed subspace error ``||(I - Phat Phat') P||_2``."""
    P = np.asarray(P, dtype=float)
    Phat = as_basis(Phat, P.shape[0])
    if Phat.shape[0] != P.shape[0]:
        raise ValueError(f"row dimension mismatch: {Phat.shape[0]} vs {P.shape[0]}")
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[1] == 0:
        return 0.0
    return float(min(1.0, np.linalg.norm(project_out(Phat, P), 2)))


def _span_basis(B: np.ndarray) -> np.ndarray:
    U, sv, _ = np.linalg.svd(B, full_matrices=False)
    keep = sv > max(B.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    return U[:, keep]


def kappa_proxy(B: np.ndarray, T) -> float:
    """``||I_T' B||_2 / ||B||_2`` for a single index set ``T`` (0-based)."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    norm = np.linalg.norm(B, 2) if B.size else 0.0
    if norm < 1e-14:
        raise DegenerateInputError(f"||B||_2 = {norm:.3e} is numerically zero")
    T = np.asarray(sorted(T), dtype=int)
    if T.size == 0:
        return 0.0
    return float(min(1.0, np.linalg.norm(B[T], 2) / norm))


def kappa_s_exact(B: np.ndarray, s: int, span_basis: bool = False, max_n: int = KAPPA_MAX_N) -> float:
    """Denseness coefficient ``max_{|T| = s} ||I_T' B||_2 / ||B||_2`` by enumeration.

    With ``span_basis=True`` the coefficient is evaluated on an orthonormal
    basis of ``span(B)`` instead of ``B`` itself. Inputs with more than
    ``max_n`` rows are refused; raise it deliberately to pay for a larger
    enumeration.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    n = B.shape[0]
    if n > max_n:
        raise EnumerationTooLargeError(
            f"n={n} exceeds the enumeration cap of {max_n}; use kappa_proxy or raise max_n"
        )
    if s < 1:
        raise ValueError("s must be >= 1")
    if span_basis:
        B = _span_basis(B)
    norm = np.linalg.norm(B, 2) if B.size else 0.0
    if norm < 1e-14:
        raise DegenerateInputError(f"||B||_2 = {norm:.3e} is numerically zero")
    s = min(s, n)
    if s == n:
        return 1.0
    m = B.shape[1]
    best = 0.0
    combos = itertools.combinations(range(n), s)
    if s <= m:
        G = B @ B.T
    else:
        outer = np.einsum("ia,ib->iab", B, B)
    while True:
        chunk = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _KAPPA_CHUNK)),
            dtype=np.intp,
        )
        if chunk.size == 0:
            break
        idx = chunk.reshape(-1, s)
        if s <= m:
            grams = G[idx[:, :, None], idx[:, None, :]]
        else:
            grams = outer[idx].sum(axis=1)
        best = max(best, float(np.linalg.eigvalsh(grams)[:, -1].max()))
    return float(min(1.0, math.sqrt(max(best, 0.0)) / norm))


def ric_complement(P: np.ndarray, s: int, max_n: int = KAPPA_MAX_N) -> float:
    """Restricted isometry constant of ``I - PP'`` for a basis ``P``.

    For a basis matrix this equals the squared denseness coefficient, so no
    isometry enumeration is needed beyond :func:`kappa_s_exact`.
    """
    P = as_basis(P)
    if P.shape[1] == 0:
        return 0.0
    return kappa_s_exact(P, s, max_n=max_n) ** 2
