import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from reprocs.errors import (
    AsymmetricMatrixError,
    DegenerateInputError,
    EnumerationTooLargeError,
    RankDeficientError,
)
from reprocs.linalg import (
    basis_defect,
    kappa_proxy,
    kappa_s_exact,
    proj_pca,
    qr_decompose,
    ric_complement,
    subspace_error,
    sym_evd,
)

from conftest import random_basis


def count_below(A, x):
    """Eigenvalues of symmetric A below x, from the signs of LDL' pivots."""
    B = [list(map(float, row)) for row in A]
    n = len(B)
    for i in range(n):
        B[i][i] -= x
    neg = 0
    for k in range(n):
        piv = B[k][k]
        if piv == 0.0:
            piv = -1e-300
        if piv < 0:
            neg += 1
        for i in range(k + 1, n):
            f = B[i][k] / piv
            for j in range(k + 1, n):
                B[i][j] -= f * B[k][j]
    return neg


def charpoly_roots(A, tol=1e-12):
    """All eigenvalues by bisection on the inertia count."""
    bound = sum(abs(v) for v in np.ravel(A)) + 1.0
    roots = []
    n = len(A)
    for k in range(n):
        lo, hi = -bound, bound
        while hi - lo > tol * bound:
            mid = 0.5 * (lo + hi)
            if count_below(A, mid) > k:
                hi = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + hi))
    return sorted(roots, reverse=True)


def brute_ric(P, s):
    n = P.shape[0]
    Phi = np.eye(n) - P @ P.T
    worst = 0.0
    for T in itertools.combinations(range(n), s):
        cols = Phi[:, T]
        ev = np.linalg.eigvalsh(cols.T @ cols)
        worst = max(worst, 1 - ev[0], ev[-1] - 1)
    return worst


def brute_kappa(B, s):
    norm = np.linalg.norm(B, 2)
    return max(np.linalg.norm(B[list(T)], 2) for T in itertools.combinations(range(B.shape[0]), s)) / norm


# -- QR ------------------------------------------------------------------------

def test_qr_identity():
    Q, R = qr_decompose(np.eye(3))
    assert np.allclose(Q, np.eye(3)) and np.allclose(R, np.eye(3))


def test_qr_diagonal_positive_convention():
    Q, R = qr_decompose(np.diag([2.0, 3.0]))
    assert np.allclose(Q, np.eye(2))
    assert np.allclose(R, np.diag([2.0, 3.0]))


def test_qr_reconstruction(rng):
    for _ in range(20):
        U, _, Vt = np.linalg.svd(rng.standard_normal((6, 3)), full_matrices=False)
        M = U @ np.diag(rng.uniform(1, 50, 3)) @ Vt
        Q, R = qr_decompose(M)
        assert basis_defect(Q) <= 1e-12
        assert np.linalg.norm(Q @ R - M) <= 1e-10 * np.linalg.norm(M)
        assert np.all(np.diag(R) > 0)


def test_qr_rank_deficient_raises():
    M = np.ones((4, 2))
    with pytest.raises(RankDeficientError):
        qr_decompose(M)


# -- symmetric EVD -------------------------------------------------------------

def test_sym_evd_diagonal():
    evd = sym_evd(np.diag([1.0, 5.0, 3.0]))
    assert np.allclose(evd.values, [5, 3, 1])
    assert np.allclose(np.abs(evd.vectors), np.eye(3)[:, [1, 2, 0]])


def test_sym_evd_rank_one(rng):
    v = rng.standard_normal(5)
    v /= np.linalg.norm(v)
    evd = sym_evd(np.outer(v, v))
    assert evd.values[0] == pytest.approx(1.0)
    assert np.allclose(evd.values[1:], 0, atol=1e-14)
    assert abs(abs(evd.vectors[:, 0] @ v) - 1) < 1e-12


def test_sym_evd_matches_charpoly_bisection(rng):
    for _ in range(5):
        X = rng.standard_normal((5, 5))
        A = X + X.T
        evd = sym_evd(A)
        assert np.allclose(evd.values, charpoly_roots(A), atol=1e-8)


def test_sym_evd_reconstruction_and_order(rng):
    X = rng.standard_normal((7, 7))
    A = X @ X.T
    evd = sym_evd(A)
    V, w = evd.vectors, evd.values
    assert np.all(np.diff(w) <= 0)
    assert basis_defect(V) <= 1e-10
    assert np.linalg.norm(V @ np.diag(w) @ V.T - A) <= 1e-9 * np.linalg.norm(A)


def test_sym_evd_rejects_asymmetric():
    with pytest.raises(AsymmetricMatrixError):
        sym_evd(np.array([[1.0, 2.0], [0.0, 1.0]]))


# -- projection-PCA ------------------------------------------------------------

def test_proj_pca_rank_one_data(rng):
    v = rng.standard_normal(6)
    v /= np.linalg.norm(v)
    res = proj_pca(np.column_stack([v, 2 * v, -v]), None, 1)
    assert subspace_error(res.basis, v) <= 1e-12


def test_proj_pca_annihilates_known_span():
    e1, e2 = np.eye(4)[:, 0], np.eye(4)[:, 1]
    D = np.column_stack([a * e1 + b * e2 for a, b in [(3, 1), (-1, 0), (2, -2), (5, 0.5)]])
    res = proj_pca(D, e1[:, None], 1)
    assert subspace_error(res.basis, e2) <= 1e-12
    assert abs(res.basis[:, 0] @ e1) <= 1e-14


def test_proj_pca_matches_explicit_evd(rng):
    n, alpha, r = 8, 50, 2
    P = random_basis(rng, n, 2)
    D = rng.standard_normal((n, alpha)) * np.linspace(3, 0.5, n)[:, None]
    Dp = (np.eye(n) - P @ P.T) @ D
    w, V = np.linalg.eigh(Dp @ Dp.T / alpha)
    oracle = V[:, np.argsort(w)[::-1][:r]]
    res = proj_pca(D, P, r)
    assert subspace_error(res.basis, oracle) <= 1e-9
    assert np.allclose(res.values[:r], np.sort(w)[::-1][:r])
    assert basis_defect(res.basis) <= 1e-10


def test_proj_pca_invariant_to_permutation_and_rotation(rng):
    D = rng.standard_normal((10, 30)) * np.linspace(5, 1, 10)[:, None]
    base = proj_pca(D, None, 3).basis
    perm = proj_pca(D[:, rng.permutation(30)], None, 3).basis
    Q = np.linalg.qr(rng.standard_normal((30, 30)))[0]
    rot = proj_pca(D @ Q, None, 3).basis
    assert subspace_error(perm, base) <= 1e-9
    assert subspace_error(rot, base) <= 1e-9


def test_proj_pca_flags():
    tie = proj_pca(np.eye(4), None, 2)
    assert tie.ambiguous_cut
    low = proj_pca(np.outer(np.ones(4), np.ones(3)), None, 2)
    assert low.rank_deficient
    assert basis_defect(low.basis) <= 1e-10


def test_proj_pca_r_zero_is_empty():
    assert proj_pca(np.ones((3, 2)), None, 0).basis.shape == (3, 0)


# -- subspace error ------------------------------------------------------------

def test_subspace_error_examples():
    e1, e2 = np.eye(2)
    assert subspace_error(e1[:, None], e1[:, None]) == 0.0
    assert subspace_error(e1[:, None], e2[:, None]) == pytest.approx(1.0)
    assert subspace_error(e1[:, None], ((e1 + e2) / np.sqrt(2))[:, None]) == pytest.approx(2**-0.5)


def test_subspace_error_matches_principal_angles(rng):
    for _ in range(10):
        A, B = random_basis(rng, 9, 3), random_basis(rng, 9, 3)
        assert subspace_error(A, B) == pytest.approx(np.sin(subspace_angles(A, B).max()), abs=1e-12)


def test_subspace_error_symmetry_and_projector_bound(rng):
    for _ in range(50):
        n, r = rng.integers(3, 12), rng.integers(1, 3)
        A, B = random_basis(rng, n, r), random_basis(rng, n, r)
        se = subspace_error(A, B)
        assert se == pytest.approx(subspace_error(B, A), abs=1e-9)
        assert np.linalg.norm(A @ A.T - B @ B.T, 2) <= 2 * se + 1e-12


def test_subspace_error_dimension_mismatch():
    with pytest.raises(ValueError):
        subspace_error(np.eye(3)[:, :1], np.eye(4)[:, :1])


def test_sin_theta_bound(rng):
    # perturbed block-diagonal matrix; the top eigenvectors F stay near E
    violations = 0
    for _ in range(100):
        n, r = rng.integers(4, 9), rng.integers(1, 3)
        Q = random_basis(rng, n, n)
        E, E_perp = Q[:, :r], Q[:, r:]
        a, a_perp = rng.uniform(5, 10, r), rng.uniform(0, 3, n - r)
        X = rng.standard_normal((n, n))
        H = X + X.T
        H *= rng.uniform(0.01, 0.9) * (a.min() - a_perp.max()) / np.linalg.norm(H, 2)
        gap = a.min() - a_perp.max() - np.linalg.norm(H, 2)
        assert gap > 0
        F = sym_evd(E @ np.diag(a) @ E.T + E_perp @ np.diag(a_perp) @ E_perp.T + H).vectors[:, :r]
        if subspace_error(F, E) > np.linalg.norm(H, 2) / gap:
            violations += 1
    assert violations == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_subspace_error_in_unit_interval(n, r, seed):
    r = min(r, n)
    g = np.random.default_rng(seed)
    se = subspace_error(random_basis(g, n, r), random_basis(g, n, r))
    assert 0.0 <= se <= 1.0


# -- denseness and RIC ---------------------------------------------------------

def test_kappa_examples():
    assert kappa_s_exact(np.eye(5)[:, :1], 1) == pytest.approx(1.0)
    assert kappa_s_exact(np.ones(4) / 2, 2) == pytest.approx(np.sqrt(0.5))


def test_kappa_matches_enumeration(rng):
    B = random_basis(rng, 8, 2)
    assert kappa_s_exact(B, 3) == pytest.approx(brute_kappa(B, 3), abs=1e-12)
    W = rng.standard_normal((9, 3))
    assert kappa_s_exact(W, 4) == pytest.approx(brute_kappa(W, 4), abs=1e-12)


def test_kappa_monotone_in_s_and_projector_invariant(rng):
    P = random_basis(rng, 9, 2)
    values = [kappa_s_exact(P, s) for s in range(1, 10)]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))
    assert kappa_s_exact(P @ P.T, 3) == pytest.approx(kappa_s_exact(P, 3), abs=1e-12)


def test_kappa_span_basis_option(rng):
    P = random_basis(rng, 8, 2)
    B = P @ np.array([[3.0, 1.0], [0.0, 0.2]])
    assert kappa_s_exact(B, 3, span_basis=True) == pytest.approx(kappa_s_exact(P, 3), abs=1e-12)


def test_kappa_size_cap_and_degenerate():
    with pytest.raises(EnumerationTooLargeError):
        kappa_s_exact(np.ones((25, 1)), 2)
    with pytest.raises(DegenerateInputError):
        kappa_s_exact(np.zeros((4, 1)), 2)
    assert kappa_s_exact(np.ones((25, 1)), 1, max_n=25) == pytest.approx(0.2)


def test_kappa_proxy_examples(rng):
    assert kappa_proxy(np.eye(3)[:, :2], [0]) == pytest.approx(1.0)
    assert kappa_proxy(np.ones(2) / np.sqrt(2), [1]) == pytest.approx(2**-0.5)
    B = rng.standard_normal((10, 2))
    T = [0, 3, 6]
    oracle = np.linalg.svd(B[T], compute_uv=False)[0] / np.linalg.svd(B, compute_uv=False)[0]
    assert kappa_proxy(B, T) == pytest.approx(oracle, abs=1e-12)
    with pytest.raises(DegenerateInputError):
        kappa_proxy(np.zeros((3, 1)), [0])


def test_ric_examples():
    assert ric_complement(np.eye(2)[:, :1], 1) == pytest.approx(1.0)
    assert ric_complement((np.ones(2) / np.sqrt(2))[:, None], 1) == pytest.approx(0.5)
    assert ric_complement(np.zeros((3, 0)), 2) == 0.0


def test_ric_matches_brute_force(rng):
    P = random_basis(rng, 10, 3)
    assert ric_complement(P, 2) == pytest.approx(brute_ric(P, 2), abs=1e-10)
    assert ric_complement(P, 2) == kappa_s_exact(P, 2) ** 2
