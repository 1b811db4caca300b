"""Closed-form constants and exponents of the observability estimates.

Everything here is a pure function of the growth parameters. Constants that
only have an existence proof behind them are collected in
:class:`FreeConstants` and default to 1, except ``C3`` which defaults to half
the first-eigenvalue lower bound ``mu_star``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .potential import Assumption

__all__ = [
    "AssumptionParams",
    "Branch",
    "ExponentTable",
    "FreeConstants",
    "ConstantsReport",
    "HypothesisError",
    "log_plus",
    "bbl_lower_bound",
    "bbl_closed_form",
    "localization_radius",
    "localization_factor",
    "eigencount_bound",
    "spectral_exponent",
    "exponent_table",
    "proof_epsilon",
    "critical_power",
    "cobs_formula",
    "cobs_sup_bounds",
    "transfer_cobs",
    "sup_power_exponential",
    "build_report",
]

EPSILON_FALLBACK = 1e-2


class HypothesisError(ValueError):
    """A parameter violates a hypothesis of the estimate being evaluated."""


def log_plus(x):
    return np.maximum(np.log(np.maximum(x, np.finfo(float).tiny)), 0.0)


@dataclass(frozen=True)
class AssumptionParams:
    assumption: Assumption
    c1: float
    c2: float
    beta1: float
    beta2: float
    sigma: float = 0.0
    gamma: float = 0.25
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "assumption", Assumption(self.assumption))
        if min(self.c1, self.c2, self.beta1, self.beta2) <= 0:
            raise ValueError("c1, c2, beta1, beta2 must be positive")
        if self.beta2 < self.beta1:
            raise ValueError("beta2 must be >= beta1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not (0 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (0, 1/2)")
        if self.n < 1:
            raise ValueError("dimension must be positive")

    @property
    def zeta(self) -> float:
        return (self.beta2 + 2 * self.sigma) / (2 * self.beta1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["assumption"] = self.assumption.value
        return d


class Branch(str, enum.Enum):
    A1_CASE = "A1_case"
    A2_BETA_STAR_NONPOS = "A2_beta_star_nonpos"
    A2_BETA_STAR_POS = "A2_beta_star_pos"


@dataclass(frozen=True)
class ExponentTable:
    """Small-r exponents ``(a_minus, b_minus)`` and large-r exponents ``(a_plus, b_plus)``.

    ``degenerate`` records whether the product that selects the first line of
    the piecewise ``b`` formula vanished: ``(beta1 - beta2) sigma`` in the A1
    case, ``beta_star * sigma`` when ``beta_star <= 0``, and ``sigma`` when
    ``beta_star > 0``.
    """

    zeta: float
    a_minus: float
    b_minus: float
    a_plus: float
    b_plus: float
    epsilon: float
    branch: Branch
    beta_star: float
    degenerate: bool

    def nu(self, s: float) -> float:
        return max(self.a_plus, s / (s - self.zeta) * self.b_plus)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["branch"] = self.branch.value
        return d


@dataclass(frozen=True)
class FreeConstants:
    """Constants known to exist but not quantified; all default to 1.

    ``C3 = None`` means ``mu_star / 2``, the value fixed by the decay argument.
    """

    C_hat: float = 1.0
    kappa_n: float = 1.0
    C_spec: float = 1.0
    C0: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    C3: Optional[float] = None
    C4: float = 1.0
    C5: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    kappa3: float = 1.0

    def resolved_C3(self, params: AssumptionParams) -> float:
        if self.C3 is not None:
            return self.C3
        return 0.5 * bbl_lower_bound(params.c1, params.beta1, params.n)["mu_star"]

    def with_overrides(self, **kw) -> "FreeConstants":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------- first eigenvalue


def _bbl_functional(u, c, beta, n):
    # t [n + (n/2) log(pi/t) - log I(1/t)] with t = exp(u)
    log_sigma_n = math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n)
    log_I = log_sigma_n + gammaln(n / beta) - math.log(beta) - (n / beta) * (math.log(c) - u)
    return math.exp(u) * (n + 0.5 * n * (math.log(math.pi) - u) - log_I)


def bbl_closed_form(c: float, beta: float, n: int) -> float:
    """``B exp(A/B - 1)`` with ``B = n (1/2 + 1/beta)``.

    ``A = n + log(beta Gamma(n/2) / (2 Gamma(n/beta))) + (n/beta) log c``.
    """
    B = n * (0.5 + 1.0 / beta)
    A = n + math.log(beta) + gammaln(0.5 * n) - math.log(2.0) - gammaln(n / beta) + (n / beta) * math.log(c)
    return B * math.exp(A / B - 1.0)


def bbl_lower_bound(c: float, beta: float, n: int) -> dict:
    """Lower bound ``mu_star`` for the first eigenvalue of ``-Laplace + c|x|^beta``.

    The supremum over ``t > 0`` is located numerically in ``log t``;
    ``lambda_star = mu_star / c^(2/(beta+2))`` is the normalized value.
    """
    if not (beta > 0):
        raise HypothesisError("beta must be positive for the Gaussian-type integral to converge")
    if not (c > 0):
        raise HypothesisError("c must be positive")
    guess = math.log(bbl_closed_form(c, beta, n) / (n * (0.5 + 1.0 / beta)))
    res = minimize_scalar(lambda u: -_bbl_functional(u, c, beta, n),
                          bracket=(guess - 1.0, guess, guess + 1.0), method="brent", tol=1e-12)
    mu = -float(res.fun)
    return {"mu_star": mu, "lambda_star": mu / c ** (2.0 / (beta + 2.0)), "t_star": math.exp(res.x)}


# ----------------------------------------------------------------- localization / counting


def localization_factor(lam, c, beta, n) -> np.ndarray:
    """Bracketed factor of the localization radius (the radius with ``C_hat = 1``)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    return ((n / beta + (n + 2) / 2) * log_plus((lam + 1) / c)
            + (n + 2) / 2 * log_plus(c)
            + ((lam + 2) / c) ** (1.0 / beta) + 1.0)


def localization_radius(lam, c, beta, n=1, C_hat=1.0):
    out = C_hat * localization_factor(lam, c, beta, n)
    return float(out) if np.ndim(out) == 0 else out


def eigencount_bound(lam, c, beta, n=1, kappa_n=1.0):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    out = kappa_n * c ** ((n + 2) / 2) * ((lam + 1) / c) ** (n / beta + (n + 2) / 2)
    return float(out) if np.ndim(out) == 0 else out


def spectral_exponent(params: AssumptionParams, c1_eff: float, c2_eff: float, lam) -> dict:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    b1, b2, n = params.beta1, params.beta2, params.n
    J = (1 + ((lam + 2) / c1_eff) ** (1 / b1) + (n + 2) / 2 * log_plus(c1_eff)) ** (b2 / 2)
    J_hat = np.sqrt(lam) + math.sqrt(c2_eff) * J
    script_J = J ** (2 * params.sigma / b2) * J_hat
    f = (lambda a: float(a)) if lam.ndim == 0 else (lambda a: a)
    return {"J": f(J), "J_hat": f(J_hat), "script_J": f(script_J)}


# ----------------------------------------------------------------- exponent tables


def exponent_table(params: AssumptionParams, epsilon: float) -> ExponentTable:
    if not (epsilon > 0):
        raise ValueError("epsilon must be positive")
    b1, b2, sg = params.beta1, params.beta2, params.sigma
    z = params.zeta
    bstar = 3 * b2 - 4 * b1 - 2
    if params.assumption is Assumption.A1:
        branch = Branch.A1_CASE
        degenerate = (b1 - b2) * sg == 0
        a_m = b_m = 0.5 - z
        a_p = 0.5
        if degenerate:
            b_p = (1 - sg - 2 * z) / (b1 + 2)
        else:
            b_p = max(0.5 - sg / (b1 + 2), 1 / (b1 + 2)) - 2 * z / (b1 + 2)
    elif bstar <= 0:
        branch = Branch.A2_BETA_STAR_NONPOS
        degenerate = bstar * sg == 0
        a_m = 2 / 3 - z
        if degenerate:
            b_m = -(sg / b1 + (b2 - b1) / ((b1 + 2) * b1))
        else:
            b_m = min(2 / 3 - b2 / (2 * b1) - sg / (b1 + 2), 1 / (b1 + 2) - sg / b1) - 2 * z / (b1 + 2)
        a_p = 2 / 3
        b_p = -sg / (b1 + 2) + 2 / 3 - b2 / (2 * b1) - 2 * z / (b1 + 2)
    else:
        branch = Branch.A2_BETA_STAR_POS
        degenerate = sg == 0
        a_m = 2 / 3 - z
        b_m = -(bstar / (2 * (b1 + 2)) + sg / (b1 + 2) + (2 * z - 1) / (b1 + 2))
        a_p = 2 / 3
        if degenerate:
            b_p = -(b2 - b1) / ((b1 + 2) * b1)
        else:
            b_p = max(2 / 3 - sg / (b1 + 2), 1 / (b1 + 2)) - 2 * z / (b1 + 2)
    return ExponentTable(z, a_m, b_m, a_p, b_p, float(epsilon), branch, float(bstar), bool(degenerate))


def proof_epsilon(params: AssumptionParams, s: float) -> float:
    """``(2s/(beta1+2) - nu)(s - zeta)/(2s)``, or a small fallback when that is not positive."""
    _require_s_above_zeta(s, params.zeta)
    t = exponent_table(params, 1.0)
    eps = (2 * s / (params.beta1 + 2) - t.nu(s)) * (s - t.zeta) / (2 * s)
    return eps if eps > 0 else EPSILON_FALLBACK


def critical_power(assumption, beta1: float) -> float:
    if not (beta1 > 0):
        raise ValueError("beta1 must be positive")
    if Assumption(assumption) is Assumption.A1:
        return (beta1 + 2) / 4
    return (beta1 + 2) / 3


def _require_s_above_zeta(s, zeta):
    if not (s > zeta):
        raise HypothesisError(
            f"the observability estimate requires s > zeta; got s={s:g}, zeta={zeta:g}")


# ----------------------------------------------------------------- observability constants


def _log_cobs(T, s, r, params, table, fc):
    _require_s_above_zeta(s, table.zeta)
    if T <= 0 or r <= 0:
        raise ValueError("T and r must be positive")
    z = table.zeta
    L = math.log(1 / params.gamma)
    if r < 1:
        a, b = table.a_minus, table.b_minus
    else:
        a, b = table.a_plus + table.epsilon, table.b_plus + table.epsilon
    q = s / (s - z)
    return (math.log(fc.C0) + fc.C1 * L * r**a
            + fc.C2 * T ** (-z / (s - z)) * L**q * r ** (q * b)
            - fc.resolved_C3(params) * T * r ** (2 * s / (params.beta1 + 2)))


def cobs_formula(T: float, s: float, r: float, params: AssumptionParams, table: ExponentTable,
                 free_constants: Optional[FreeConstants] = None, log: bool = False) -> float:
    """Observability constant of ``H_{rV}^s`` on a distributed set, with configured constants.

    ``log=True`` returns the natural logarithm, which stays finite when the
    constant itself overflows.
    """
    fc = free_constants or FreeConstants()
    v = _log_cobs(T, s, r, params, table, fc)
    if log:
        return v
    return math.exp(v) if v < 709.0 else math.inf


def transfer_cobs(T: float, s: float, zeta: float, alpha0: float, alpha1: float,
                  free_constants: Optional[FreeConstants] = None) -> float:
    """``kappa1 alpha0^kappa2 exp(kappa3 alpha1^(s/(s-zeta)) T^(-zeta/(s-zeta)))``."""
    _require_s_above_zeta(s, zeta)
    if alpha0 < 1 or alpha1 < 0:
        raise HypothesisError("need alpha0 >= 1 and alpha1 >= 0")
    fc = free_constants or FreeConstants()
    q = s / (s - zeta)
    return fc.kappa1 * alpha0**fc.kappa2 * math.exp(fc.kappa3 * alpha1**q * T ** (-zeta / (s - zeta)))


def sup_power_exponential(A: float, B: float, u: float, v: float, r_min: float = 1.0) -> float:
    """``sup_{r >= r_min} (A r^u - B r^v)`` for ``A, B > 0`` and ``0 < u < v``.

    The interior maximum is ``A (v-u)/v (A u/(B v))^(u/(v-u))``; if the maximizer
    falls below ``r_min`` the supremum is attained at ``r_min``.
    """
    if not (0 < u < v) or A < 0 or B <= 0:
        raise ValueError("need A >= 0, B > 0 and 0 < u < v")
    if A == 0:
        return -B * r_min**v
    r_star = (A * u / (B * v)) ** (1 / (v - u))
    if r_star <= r_min:
        return A * r_min**u - B * r_min**v
    return A * (v - u) / v * (A * u / (B * v)) ** (u / (v - u))


def cobs_sup_bounds(T: float, s: float, params: AssumptionParams, table: ExponentTable,
                    free_constants: Optional[FreeConstants] = None) -> dict:
    """Uniform-in-r bounds ``A0`` (small r), ``A1_bound`` (large r) and ``B_minus``/``B_plus``.

    Infinite suprema are reported as ``inf`` with every violated condition
    listed in ``reason``.
    """
    _require_s_above_zeta(s, table.zeta)
    fc = free_constants or FreeConstants()
    z, b1 = table.zeta, params.beta1
    L = math.log(1 / params.gamma)
    q = s / (s - z)
    decay = 2 * s / (b1 + 2)
    nu = table.nu(s)

    reasons = []
    if table.a_minus < 0:
        reasons.append("a₋<0")
    if table.b_minus < 0:
        reasons.append("b₋<0")
    small_ok = not reasons
    large_ok = decay > nu
    if not large_ok:
        reasons.append(f"2s/(β₁+2)={decay:.6g} ≤ ν={nu:.6g}")

    if small_ok:
        log_A0 = math.log(fc.C0) + fc.C1 * L + fc.C2 * T ** (-z / (s - z)) * L**q
    else:
        log_A0 = math.inf

    if large_ok:
        delta = 1 / (s / (b1 + 2) - nu / 2)
        if T <= 1:
            log_A1 = math.log(fc.C0) + fc.C4 * T ** (-(delta + z / (s - z) * (1 + delta))) * L ** (q * (1 + delta))
        else:
            log_A1 = math.log(fc.C0) + fc.C5 * T ** (-delta) * L ** (q * (1 + delta))
    else:
        delta = math.nan
        log_A1 = math.inf

    s_A = critical_power(params.assumption, b1)
    corollary = params.beta1 == params.beta2 and params.sigma == 0 and s > s_A
    if corollary:
        dB = 2 * (b1 + 2) / (s - s_A)
        p = 2 * s / (2 * s - 1)
        log_head = fc.C1 * L + fc.C2 * T ** (-1 / (2 * s - 1)) * L**p
        log_B_minus = float(np.logaddexp(log_head, fc.C4 * T ** (-dB - (1 + dB) / (2 * s - 1)) * L ** (p * (1 + dB))))
        log_B_plus = float(np.logaddexp(log_head, fc.C4 * T ** (-dB) * L ** (p * (1 + dB))))
    else:
        dB = math.nan
        log_B_minus = log_B_plus = math.inf
        if not reasons:
            reasons.append("uniform bound needs β₁=β₂, σ=0 and s>s*")

    def _exp(x):
        return math.exp(x) if x < 709.0 else math.inf

    A0, A1, B_minus, B_plus = map(_exp, (log_A0, log_A1, log_B_minus, log_B_plus))
    return {
        "A0": A0,
        "A1_bound": A1,
        "B_minus": B_minus,
        "B_plus": B_plus,
        "B_regime": "B_minus" if T <= 1 else "B_plus",
        "sup_is_finite": small_ok and large_ok,
        "reason": "; ".join(reasons),
        "nu": nu,
        "delta_A1": delta,
        "delta_B": dB,
        "epsilon": table.epsilon,
        "log_A0": log_A0,
        "log_A1_bound": log_A1,
        "log_B_minus": log_B_minus,
        "log_B_plus": log_B_plus,
    }


# ----------------------------------------------------------------- report


DEFAULT_LAMBDA_GRID = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
DEFAULT_R_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 16.0, 64.0)


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


@dataclass(frozen=True, eq=False)
class ConstantsReport:
    params: AssumptionParams
    mu_star: float
    lambda_star: float
    rho_of_lambda: Callable
    N_bound: Callable
    J: Callable
    J_hat: Callable
    script_J: Callable
    exponents: ExponentTable
    s_critical: float
    s: Optional[float]
    T: float
    cobs: Optional[Callable]
    A0: Optional[float]
    A1_bound: Optional[float]
    B_minus: Optional[float]
    B_plus: Optional[float]
    sup_is_finite: Optional[bool]
    sup_reason: str
    free_constants: FreeConstants
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    r_grid: tuple = DEFAULT_R_GRID
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        lam = list(self.lambda_grid)

        def table(fn):
            return {"lambda": lam, "values": [float(fn(x)) for x in lam]}

        out = {
            "params": self.params.to_dict(),
            "mu_star": self.mu_star,
            "lambda_star": self.lambda_star,
            "rho_of_lambda": table(self.rho_of_lambda),
            "N_bound": table(self.N_bound),
            "J": table(self.J),
            "J_hat": table(self.J_hat),
            "script_J": table(self.script_J),
            "exponents": self.exponents.to_dict(),
            "s_critical": self.s_critical,
            "s": self.s,
            "T": self.T,
            "cobs": None,
            "A0": _finite_or_none(self.A0),
            "A1_bound": _finite_or_none(self.A1_bound),
            "B_minus": _finite_or_none(self.B_minus),
            "B_plus": _finite_or_none(self.B_plus),
            "sup_is_finite": self.sup_is_finite,
            "sup_reason": self.sup_reason,
            "free_constants": self.free_constants.to_dict(),
        }
        if self.cobs is not None:
            out["cobs"] = {"T": self.T, "r": list(self.r_grid),
                           "log_values": [self.cobs(self.T, self.s, r, log=True) for r in self.r_grid]}
        out.update(self.extras)
        return out


def build_report(params: AssumptionParams, s: Optional[float] = None, T: float = 1.0,
                 free_constants: Optional[FreeConstants] = None,
                 epsilon: Optional[float] = None) -> ConstantsReport:
    """Evaluate every constant for one parameter set.

    Without ``s`` the observability constants are left empty. With ``s`` the
    hypothesis ``s > zeta`` is enforced and ``epsilon`` defaults to the proof's
    choice.
    """
    fc = free_constants or FreeConstants()
    p = params
    bbl = bbl_lower_bound(p.c1, p.beta1, p.n)

    def rho(lam):
        return localization_radius(lam, p.c1, p.beta1, p.n, fc.C_hat)

    def nb(lam):
        return eigencount_bound(lam, p.c1, p.beta1, p.n, fc.kappa_n)

    def sx(key):
        return lambda lam: spectral_exponent(p, p.c1, p.c2, lam)[key]

    eps = epsilon if epsilon is not None else (proof_epsilon(p, s) if s is not None else EPSILON_FALLBACK)
    tbl = exponent_table(p, eps)
    fields = dict(cobs=None, A0=None, A1_bound=None, B_minus=None, B_plus=None,
                  sup_is_finite=None, sup_reason="")
    if s is not None:
        _require_s_above_zeta(s, tbl.zeta)
        sup = cobs_sup_bounds(T, s, p, tbl, fc)
        fields.update(
            cobs=lambda T_, s_, r_, log=False: cobs_formula(T_, s_, r_, p, tbl, fc, log=log),
            A0=sup["A0"], A1_bound=sup["A1_bound"], B_minus=sup["B_minus"], B_plus=sup["B_plus"],
            sup_is_finite=sup["sup_is_finite"], sup_reason=sup["reason"],
            extras={"log_bounds": {k: _finite_or_none(sup["log_" + k]) for k in
                                   ("A0", "A1_bound", "B_minus", "B_plus")},
                    "epsilon": tbl.epsilon},
        )
    return ConstantsReport(
        params=p, mu_star=bbl["mu_star"], lambda_star=bbl["lambda_star"],
        rho_of_lambda=rho, N_bound=nb, J=sx("J"), J_hat=sx("J_hat"), script_J=sx("script_J"),
        exponents=tbl, s_critical=critical_power(p.assumption, p.beta1), s=s, T=T,
        free_constants=fc, **fields,
    )
