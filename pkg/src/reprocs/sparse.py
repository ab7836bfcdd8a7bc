"""Projected compressive sensing: l1 recovery under a projector, support
thresholding and least-squares debiasing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DegenerateInputError, RankDeficientError
from .linalg import as_basis


class ProjectorOperator:
    """The map ``x -> (I - PP')x`` for a basis ``P``, never formed densely."""

    def __init__(self, basis: np.ndarray, n: int | None = None):
        self.basis = as_basis(basis, n)
        self.n = self.basis.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        P = self.basis
        if P.shape[1] == 0:
            return np.array(x, dtype=float, copy=True)
        return x - P @ (P.T @ x)

    def columns(self, T) -> np.ndarray:
        """The ``n x |T|`` column restriction ``(I - PP')[:, T]``."""
        T = np.asarray(T, dtype=int)
        out = -self.basis @ self.basis[T].T
        out[T, np.arange(T.size)] += 1.0
        return out

    def dense(self) -> np.ndarray:
        return self.columns(np.arange(self.n))


@dataclass
class CsSolution:
    x_cs: np.ndarray
    iterations: int
    primal_residual: float
    converged: bool
    duality_gap: float = float("nan")
    objective_history: list[float] = field(default_factory=list, repr=False)


@numba.njit(cache=True)
def _admm(P, y, radius, rho, scale, tol, max_iter, history):
    # in-place loops over the n x r basis; Phi v = v - P (P'v)
    n, r = P.shape
    x = np.zeros(n)
    w = np.zeros(n)
    u = np.zeros(n)
    d = np.zeros(n)
    c = np.zeros(r)
    best_x = np.zeros(n)
    best_obj = np.inf
    rp = np.inf
    gap = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        # x <- projection of (w - u) onto {x : ||Phi(x - y)|| <= radius}
        for i in range(n):
            d[i] = w[i] - u[i] - y[i]
        c[:] = 0.0
        for i in range(n):
            for k in range(r):
                c[k] += P[i, k] * d[i]
        nd = 0.0
        for i in range(n):
            v = d[i]
            for k in range(r):
                v -= P[i, k] * c[k]
            d[i] = v
            nd += v * v
        nd = math.sqrt(nd)
        shrink = 1.0 - radius / nd if nd > radius else 0.0
        thresh = 1.0 / rho
        rp = 0.0
        rd = 0.0
        obj = 0.0
        xnorm = 0.0
        unorm = 0.0
        for i in range(n):
            xi_ = w[i] - u[i] - shrink * d[i]
            x[i] = xi_
            z = xi_ + u[i]
            wn = z - min(max(z, -thresh), thresh)
            rd += (wn - w[i]) ** 2
            w[i] = wn
            u[i] = z - wn
            rp += (xi_ - wn) ** 2
            obj += abs(xi_)
            xnorm += xi_ * xi_
            unorm += u[i] * u[i]
        rp = math.sqrt(rp)
        rd = rho * math.sqrt(rd)
        if obj < best_obj:
            best_obj = obj
            best_x[:] = x
        history[it - 1] = best_obj
        if rp <= tol * (scale + math.sqrt(xnorm)) and rd <= tol * (1.0 + rho * math.sqrt(unorm)) * scale:
            gap = best_obj - _dual_value(P, u, rho, y, radius)
            if gap <= tol * (scale + best_obj):
                converged = True
                break
        if rp > 10.0 * rd:
            rho *= 2.0
            u /= 2.0
        elif rd > 10.0 * rp:
            rho /= 2.0
            u *= 2.0
    if not converged:
        gap = best_obj - _dual_value(P, u, rho, y, radius)
    return best_x, it, rp, converged, gap


@numba.njit(cache=True)
def _dual_value(P, u, rho, y, radius):
    # v = Phi(rho u) is a dual direction; any v = Phi v with ||v||_inf <= 1
    # gives the lower bound v'y - radius ||v|| on the optimal l1 norm, where
    # radius bounds ||Phi(x - y)|| once the out-of-range part of y is removed
    lam = rho * u
    v = lam - P @ (P.T @ lam)
    vmax = np.abs(v).max()
    if vmax == 0.0:
        return 0.0
    val = (v @ y - radius * math.sqrt(v @ v)) / vmax
    return max(val, 0.0)


def solve_bpdn(
    phi: ProjectorOperator,
    y: np.ndarray,
    xi: float,
    tol: float = 1e-7,
    max_iter: int = 5000,
    record_history: bool = False,
) -> CsSolution:
    """Solve ``min ||x||_1  s.t.  ||y - Phi x||_2 <= xi`` by ADMM.

    The splitting is ``x = w`` with ``x`` confined to the constraint set and
    ``w`` carrying the l1 term. Because ``Phi`` is an orthogonal projector the
    constraint set is a cylinder whose projection is closed form, so every
    ``x`` iterate is exactly feasible. The penalty is rescaled by residual
    balancing. Iteration stops once the split residual and the duality gap
    (from the scaled multiplier) are both below ``tol`` relative to the
    solution size.

    The returned ``x_cs`` is the feasible iterate with the smallest l1 norm
    seen; ``objective_history`` records that running value per iteration.
    """
    if xi < 0:
        raise ValueError(f"xi must be nonnegative, got {xi}")
    y = np.ascontiguousarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y has non-finite entries")
    n = y.shape[0]
    if xi >= math.sqrt(y @ y):
        return CsSolution(np.zeros(n), 0, 0.0, True, 0.0, [0.0] if record_history else [])

    # ||Phi x - y||^2 = ||Phi(x - y)||^2 + ||(I - Phi) y||^2
    P = np.ascontiguousarray(phi.basis)
    y_out = y - phi.apply(y)
    out_sq = float(y_out @ y_out)
    if out_sq <= (1e-12 * math.sqrt(y @ y)) ** 2:
        out_sq = 0.0  # round-off from forming y = Phi(...)
    slack = xi**2 - out_sq
    if slack < 0:
        raise ValueError("constraint set is empty: xi < ||(I - Phi) y||")
    radius = math.sqrt(slack)

    scale = float(np.abs(y).max())
    history = np.empty(max_iter)
    x, it, rp, converged, gap = _admm(P, y, radius, 10.0 / scale, scale, tol, max_iter, history)
    hist = history[:it].tolist() if record_history else []
    return CsSolution(x, int(it), float(rp), bool(converged), float(gap), hist)


def estimate_support(x: np.ndarray, omega: float) -> np.ndarray:
    """Indices ``i`` (0-based, sorted) with ``|x_i| > omega``."""
    return np.flatnonzero(np.abs(np.asarray(x, dtype=float)) > omega)


def energy_threshold(v: np.ndarray, fraction: float = 0.99) -> float:
    """Largest magnitude ``m`` such that ``{i : |v_i| >= m}`` holds at least
    ``fraction`` of the energy of ``v``."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    mags = np.sort(np.abs(np.asarray(v, dtype=float)))[::-1]
    if mags.size == 0 or mags[0] == 0.0:
        raise DegenerateInputError("energy threshold of a zero vector")
    # normalized so tiny entries do not underflow when squared
    rel = mags / mags[0]
    cum = np.cumsum(rel**2)
    total = cum[-1]
    k = int(np.searchsorted(cum, fraction * total, side="left"))
    k = min(k, mags.size - 1)
    return float(mags[k])


def ls_debias(phi: ProjectorOperator, y: np.ndarray, T) -> np.ndarray:
    """Least squares on the support ``T``, zero elsewhere.

    Uses ``(Phi_T)'Phi_T = I - P_T P_T'``, which holds because ``Phi`` is a
    symmetric idempotent, so only a ``|T| x |T|`` system is solved.
    """
    y = np.asarray(y, dtype=float)
    T = np.asarray(T, dtype=int)
    out = np.zeros(phi.n)
    if T.size == 0:
        return out
    PT = phi.basis[T]
    gram = np.eye(T.size) - PT @ PT.T
    evals = np.linalg.eigvalsh(gram)
    if evals[0] <= 1e-20:
        raise RankDeficientError(
            f"columns of Phi on the support are dependent (sigma_min^2 = {evals[0]:.3e})"
        )
    rhs = phi.apply(y)[T]
    out[T] = np.linalg.solve(gram, rhs)
    return out
