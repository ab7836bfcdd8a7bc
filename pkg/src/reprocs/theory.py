"""Closed-form bound quantities and the checkable hypotheses of the
ReProCS-cPCA performance guarantee.

All formulas are evaluated in float64 except :func:`k_of_zeta`, whose
ceiling is taken on a 50-digit evaluation so exact integer ratios (for
example ``c = 1, zeta = 0.6``) are not pushed over by rounding. Logs are
natural logs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from .errors import RegimeError

PHI_PLUS = 1.1735
G_PLUS = math.sqrt(2.0)


@dataclass
class TheoryParams:
    """Model and bound constants.

    ``r`` is the maximum rank ``r0 + c`` and ``c`` the maximum number of
    directions added at a change. ``kappa_s_e`` has no prescribed value and
    defaults to 0.15.
    """

    n: int
    J: int
    r: int
    c: int
    zeta: float
    gamma_star: float
    gamma_new: float
    lambda_minus: float
    lambda_plus: float
    S_min: float = 2.0
    rho: float = 1.0
    kappa_2s_star: float = 0.3
    kappa_2s_new: float = 0.15
    kappa_s: float = 0.15
    kappa_2s_tilde: float = 0.15
    kappa_s_e: float = 0.15
    g_plus: float = G_PLUS
    phi_plus: float = PHI_PLUS
    g_tilde_max: float = 1.0
    h_tilde_max: float = 0.0
    c_tilde_min: int = 1
    theta_max: int = 1
    r0: int | None = None

    def __post_init__(self):
        positive = ("n", "J", "r", "c", "zeta", "gamma_star", "gamma_new", "lambda_minus",
                    "lambda_plus", "phi_plus", "g_plus", "c_tilde_min", "theta_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.r0 is not None and not 0 < self.r0 <= self.r:
            raise ValueError("need 0 < r0 <= r")
        if self.r * self.zeta >= 1:
            raise ValueError(f"r * zeta = {self.r * self.zeta:g} must be below 1")
        if self.lambda_plus < self.lambda_minus:
            raise ValueError("lambda_plus must be >= lambda_minus")
        if self.g_tilde_max < 1:
            raise ValueError("g_tilde_max must be >= 1")
        if not 0 <= self.h_tilde_max < 1:
            raise ValueError("h_tilde_max must lie in [0, 1)")

    @property
    def f(self) -> float:
        return self.lambda_plus / self.lambda_minus


def zeta_bound(r: int, c: int, f: float, gamma_star: float) -> dict[str, float]:
    """The three branches of the admissible-zeta bound, keyed by name."""
    rc = r + c
    return {
        "accuracy": 1e-4 / rc**2,
        "condition_number": 1.5e-4 / (rc**2 * f),
        "magnitude": 1.0 / (rc**3 * gamma_star**2),
    }


def max_zeta(r: int, c: int, f: float, gamma_star: float) -> float:
    return min(zeta_bound(r, c, f, gamma_star).values())


def k_of_zeta(zeta: float, c: float) -> int:
    """Number of addition steps ``ceil(log(0.6 c zeta) / log 0.6)``."""
    arg = 0.6 * c * zeta
    if not 0 < arg < 1:
        raise ValueError(f"0.6*c*zeta = {arg} must lie in (0, 1)")
    with mpmath.workdps(50):
        q = mpmath.log(mpmath.mpf("0.6") * mpmath.mpf(repr(float(c))) * mpmath.mpf(repr(float(zeta))))
        q /= mpmath.log(mpmath.mpf("0.6"))
        nearest = mpmath.nint(q)
        if abs(q - nearest) < mpmath.mpf("1e-30"):
            return int(nearest)
        return int(mpmath.ceil(q))


def xi0(zeta: float, c: float, gamma_new: float) -> float:
    if zeta < 0 or c < 0 or gamma_new < 0:
        raise ValueError("xi0 arguments must be nonnegative")
    return math.sqrt(c) * gamma_new + 1.06 * math.sqrt(zeta)


def alpha_add(p: TheoryParams) -> int:
    K = k_of_zeta(p.zeta, p.c)
    lead = math.log(6 * K * p.J) + 11 * math.log(p.n)
    worst = max(
        min(1.2 ** (4 * K) * p.gamma_new**4, p.gamma_star**4),
        16.0 / p.c**2,
        4.0 * (0.186 * p.gamma_new**2 + 0.0034 * p.gamma_new + 2.3) ** 2,
    )
    return max(1, math.ceil(lead * 8 * 24**2 / (p.zeta * p.lambda_minus) ** 2 * worst))


def alpha_del(p: TheoryParams) -> int:
    lead = math.log(6 * p.theta_max * p.J) + 11 * math.log(p.n)
    b7 = (math.sqrt(p.r) * p.gamma_star + p.phi_plus * math.sqrt(p.zeta)) ** 2
    worst = max(4.2**2, 4.0 * b7**2)
    return max(1, math.ceil(lead * 8 * 10**2 / (p.zeta * p.lambda_minus) ** 2 * worst))


def zeta_plus_series(p: TheoryParams, K: int | None = None) -> list[float]:
    """``zeta_k^+`` for ``k = 0..K`` (default ``K = k_of_zeta``).

    Raises :class:`RegimeError` naming the first step whose denominator is
    not positive.
    """
    if K is None:
        K = k_of_zeta(p.zeta, p.c)
    kap, g, phi, f, c, zeta = p.kappa_s, p.g_plus, p.phi_plus, p.f, p.c, p.zeta
    zs = p.r * zeta
    root = math.sqrt(1.0 - zs**2)
    C = 2 * kap * phi / root + phi
    C_prime = phi**2 + 2 * phi / root + 1 + phi + kap * phi / root + kap * phi**2 / root
    C_tilde = phi**2 + kap * phi**2 / root
    series = [1.0]
    for k in range(1, K + 1):
        prev = series[-1]
        b = C * kap * g * prev + C_tilde * kap**2 * g * prev**2 + C_prime * f * zs**2
        denom = 1.0 - zs**2 - zs**2 * f - 0.25 * c * zeta - b
        if denom <= 0:
            raise RegimeError(f"denominator of zeta_{k}^+ is {denom:.3e} <= 0", step=k)
        series.append((b + 0.125 * c * zeta) / denom)
    return series


def f_inc(g_tilde: float, h_tilde: float, p: TheoryParams) -> float:
    r, c, zeta, kap, phi, f = p.r, p.c, p.zeta, p.kappa_s_e, p.phi_plus, p.f
    rz2 = (r * zeta) ** 2
    h_coef = kap * phi + kap * (1 + 2 * phi) * rz2 / math.sqrt(1 - rz2)
    f_coef = r**2 / (r + c) * zeta + 4 * r * zeta * kap * phi + 2 * (r + c) * zeta * (1 + kap**2) * phi**2
    return (r + c) * zeta * (3 * kap * phi * g_tilde + h_coef * h_tilde + f_coef * f + 0.2 / (r + c))


def f_dec(g_tilde: float, h_tilde: float, p: TheoryParams) -> float:
    r, zeta = p.r, p.zeta
    return 1 - h_tilde - 0.2 * zeta - r**2 * zeta**2 * p.f - r**2 * zeta**2 - f_inc(g_tilde, h_tilde, p)


def f_inc_dec(g_tilde: float, h_tilde: float, p: TheoryParams) -> tuple[float, float, float]:
    """``(f_inc, f_dec, zeta_tilde_plus)``; raises :class:`RegimeError` if ``f_dec <= 0``."""
    inc = f_inc(g_tilde, h_tilde, p)
    dec = f_dec(g_tilde, h_tilde, p)
    if dec <= 0:
        raise RegimeError(f"f_dec({g_tilde}, {h_tilde}) = {dec:.3e} <= 0")
    return inc, dec, inc / dec


@dataclass
class Measurements:
    """Optional empirical inputs to :func:`check_conditions`.

    Anything left ``None`` is reported as not evaluated.
    """

    alpha: int | None = None
    alpha_tilde: int | None = None
    K: int | None = None
    xi: float | None = None
    omega: float | None = None
    change_gap_min: int | None = None
    kappa_2s_P_prev: float | None = None
    kappa_2s_P_new: float | None = None
    kappa_2s_D_new: float | None = None
    kappa_2s_Q_new: float | None = None
    kappa_s_e: float | None = None
    a_new_max_by_k: list[float] | None = None
    g_jk_max: float | None = None
    g_tilde: list[float] | None = None
    h_tilde: list[float] | None = None


@dataclass
class Condition:
    name: str
    passed: bool | None
    margin: float | None = None
    detail: str = ""


@dataclass
class BoundReport:
    K: int
    xi0: float
    alpha_add: int
    alpha_del: int
    zeta_plus: list[float]
    zeta_tilde_plus: list[float]
    f_inc: float
    f_dec: float
    kappa_s_e: float
    conditions: list[Condition] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.conditions if c.passed is not None)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict
        return out

    def format(self) -> str:
        lines = [
            f"K = {self.K}",
            f"xi0 = {self.xi0:.6g}",
            f"alpha_add = {self.alpha_add:.6g}",
            f"alpha_del = {self.alpha_del:.6g}",
            f"kappa_s_e+ = {self.kappa_s_e:g}",
            f"f_inc(g_max, h_max) = {self.f_inc:.6g}",
            f"f_dec(g_max, h_max) = {self.f_dec:.6g}",
            "zeta_k+ = " + ", ".join(f"{z:.4g}" for z in self.zeta_plus),
        ]
        if self.zeta_tilde_plus:
            lines.append("zeta~_k+ = " + ", ".join(f"{z:.4g}" for z in self.zeta_tilde_plus))
        for cond in self.conditions:
            mark = {True: "PASS", False: "FAIL", None: "n/a "}[cond.passed]
            margin = "" if cond.margin is None else f"  margin={cond.margin:.4g}"
            lines.append(f"[{mark}] {cond.name}{margin}  {cond.detail}".rstrip())
        lines.append(f"verdict: {'holds' if self.verdict else 'violated'}")
        return "\n".join(lines)


def _upper(name, value, bound, detail=""):
    if value is None:
        return Condition(name, None, detail="not measured")
    return Condition(name, value <= bound, bound - value, detail or f"{value:.4g} <= {bound:.4g}")


def check_conditions(p: TheoryParams, m: Measurements | None = None) -> BoundReport:
    """Evaluate every checkable hypothesis; never raises on a failed condition."""
    m = m or Measurements()
    conds: list[Condition] = []

    branches = zeta_bound(p.r, p.c, p.f, p.gamma_star)
    worst = min(branches, key=branches.get)
    violated = [k for k, v in branches.items() if p.zeta > v]
    conds.append(Condition(
        "zeta_bound",
        not violated,
        branches[worst] - p.zeta,
        "violates " + ", ".join(violated) if violated else f"tightest branch: {worst}",
    ))

    K = k_of_zeta(p.zeta, p.c)
    x0 = xi0(p.zeta, p.c, p.gamma_new)
    a_add, a_del = alpha_add(p), alpha_del(p)

    if m.xi is not None:
        conds.append(Condition("xi_equals_xi0", math.isclose(m.xi, x0, rel_tol=1e-9), m.xi - x0))
    lo, hi = 7 * p.rho * x0, p.S_min - 7 * p.rho * x0
    if m.omega is None:
        conds.append(Condition("omega_window", None, detail=f"needs {lo:.4g} <= omega <= {hi:.4g}"))
    else:
        conds.append(Condition("omega_window", lo <= m.omega <= hi, min(m.omega - lo, hi - m.omega)))
    if m.K is not None:
        conds.append(Condition("K_at_least_K_zeta", m.K >= K, m.K - K, f"K(zeta) = {K}"))
    if m.alpha is not None:
        conds.append(Condition("alpha_at_least_alpha_add", m.alpha >= a_add, m.alpha - a_add))
    if m.alpha_tilde is not None:
        conds.append(Condition("alpha_tilde_at_least_alpha_del", m.alpha_tilde >= a_del, m.alpha_tilde - a_del))

    conds.append(_upper("denseness_P_prev", m.kappa_2s_P_prev, p.kappa_2s_star))
    conds.append(_upper("denseness_P_new", m.kappa_2s_P_new, p.kappa_2s_new))
    conds.append(_upper("denseness_D_new", m.kappa_2s_D_new, p.kappa_s))
    conds.append(_upper("denseness_Q_new", m.kappa_2s_Q_new, p.kappa_2s_tilde))
    conds.append(_upper("denseness_residual", m.kappa_s_e, p.kappa_s_e))

    if m.change_gap_min is not None and m.alpha is not None and m.alpha_tilde is not None:
        need = (m.K if m.K is not None else K) * m.alpha + p.theta_max * m.alpha_tilde
        conds.append(Condition("change_spacing", m.change_gap_min > need, m.change_gap_min - need))
    if m.a_new_max_by_k is not None:
        margins = [
            min(1.2**k * p.gamma_new, p.gamma_star) - a for k, a in enumerate(m.a_new_max_by_k)
        ]
        conds.append(Condition("slow_new_coefficients", min(margins) >= 0, min(margins)))
    margin = p.S_min - 14 * p.rho * x0
    conds.append(Condition("support_magnitude", margin >= 0, margin, "14 rho xi0 <= S_min"))
    conds.append(_upper("new_coefficient_conditioning", m.g_jk_max, p.g_plus))

    inc = f_inc(p.g_tilde_max, p.h_tilde_max, p)
    dec = f_dec(p.g_tilde_max, p.h_tilde_max, p)
    clus = dec - inc / (p.c_tilde_min * p.zeta)
    conds.append(Condition("eigenvalue_clustering", clus > 0, clus))
    if p.theta_max == 1:
        small_f = f_dec(p.f, 0.0, p) * p.c_tilde_min * p.zeta - f_inc(p.f, 0.0, p)
        conds.append(Condition("small_f_shortcut", small_f >= 0, small_f, "single-cluster case"))

    try:
        zp = zeta_plus_series(p, K)
        lemma_ok = all(z <= 0.6**k + 0.4 * p.c * p.zeta for k, z in enumerate(zp) if k > 0)
        conds.append(Condition("zeta_plus_decay", lemma_ok, detail="zeta_k+ <= 0.6^k + 0.4 c zeta"))
    except RegimeError as err:
        zp = []
        conds.append(Condition("zeta_plus_decay", False, detail=str(err)))

    tilde = []
    g_list = m.g_tilde if m.g_tilde is not None else [p.g_tilde_max]
    h_list = m.h_tilde if m.h_tilde is not None else [p.h_tilde_max]
    for g, h in zip(g_list, h_list):
        d = f_dec(g, h, p)
        tilde.append(f_inc(g, h, p) / d if d > 0 else math.inf)

    return BoundReport(K, x0, a_add, a_del, zp, tilde, inc, dec, p.kappa_s_e, conds)


def params_for_preset(preset, zeta: float | None = None) -> TheoryParams:
    """Bound constants implied by a :class:`~reprocs.presets.Preset`.

    ``lambda_minus`` and ``lambda_plus`` come from the stable coefficient
    tables, clustering metrics from the first post-change spectrum, and
    ``zeta`` defaults to the largest admissible value.
    """
    from .clustering import partition_metrics

    model, coeffs = preset.model, preset.coeffs
    c = max(model.c_new) if model.c_new else 1
    r = model.r0 + c
    bounds = [g for table in coeffs.existing for g in table]
    lam_minus = min(bounds) ** 2 / 3.0
    lam_plus = max(bounds) ** 2 / 3.0
    gamma_star = min(coeffs.gamma_star, max(bounds))
    if zeta is None:
        zeta = max_zeta(r, c, lam_plus / lam_minus, gamma_star)
    clusters = preset.tracker.clusters
    g_max, h_max, c_min, theta = 1.0, 0.0, r, 1
    if clusters:
        spectrum = np.sort(np.asarray(coeffs.existing[1], dtype=float) ** 2 / 3.0)[::-1]
        new = [coeffs.gamma_star if np.isinf(coeffs.gamma_star) else
               min(coeffs.ratio ** (coeffs.ramp_steps[0] - 1) * coeffs.gamma_new, coeffs.gamma_star)]
        spectrum = np.sort(np.concatenate([spectrum, np.square(new) / 3.0]))[::-1]
        if sum(clusters[0]) == spectrum.size:
            part = partition_metrics(spectrum, clusters[0])
            g_max, h_max = part.g_max, part.h_max
        c_min = min(min(sizes) for sizes in clusters)
        theta = max(len(sizes) for sizes in clusters)
    return TheoryParams(
        n=model.n,
        J=max(len(model.change_times), 1),
        r=r,
        c=c,
        r0=model.r0,
        zeta=zeta,
        gamma_star=gamma_star,
        gamma_new=coeffs.gamma_new,
        lambda_minus=lam_minus,
        lambda_plus=lam_plus,
        S_min=preset.support.low,
        g_tilde_max=g_max,
        h_tilde_max=h_max,
        c_tilde_min=c_min,
        theta_max=theta,
    )
