"""Audits of spectral, localization, decay and observability inequalities.

Each audit is exact on the span of the computed eigenvectors: worst cases over
that span are small symmetric eigenvalue problems.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .constants import (AssumptionParams, FreeConstants, eigencount_bound, localization_factor,
                        spectral_exponent)
from .control_sets import SetIndicator
from .spectral import InsufficientSpectrumError, SpectralData

__all__ = [
    "AuditError",
    "VerificationReport",
    "GramianBundle",
    "build_gramian",
    "spectral_ratio",
    "localization_audit",
    "weighted_norm_audit",
    "caccioppoli_audit",
    "harmonic_lift_audit",
    "harmonic_lift_quadrature",
    "gramian_observability",
    "observation_ratio",
    "synthesize_control",
    "calibrate_free_constants",
    "grid_gradient",
    "write_jsonl",
]

TRUNCATION_LEVEL = 1e-16


class AuditError(ValueError):
    pass


@dataclass
class VerificationReport:
    """One audited inequality. ``kind`` is ``upper`` (empirical <= bound) or ``lower``."""

    quantity: str
    empirical: float
    bound: float
    tolerance: float = 0.0
    kind: str = "upper"
    metadata: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        if self.kind == "upper":
            return self.bound - self.empirical
        return self.empirical - self.bound

    @property
    def passed(self) -> bool:
        if math.isnan(self.empirical) or math.isnan(self.bound):
            return False
        if self.kind == "upper":
            return self.empirical <= self.bound * (1 + self.tolerance)
        return self.empirical >= self.bound * (1 - self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        d["pass"] = self.passed
        for key in ("empirical", "bound", "margin"):
            if isinstance(d[key], float) and not math.isfinite(d[key]):
                d[key] = "inf" if d[key] > 0 else "-inf" if d[key] < 0 else "nan"
        return d


def write_jsonl(reports, path, header: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        if header is not None:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for r in reports:
            fh.write(json.dumps(r.to_dict(), sort_keys=True, default=float) + "\n")


# ----------------------------------------------------------------- helpers


def _window(S: SpectralData, lam: float, positive_only: bool = False) -> np.ndarray:
    if lam > S.cutoff * (1 + 1e-12):
        raise InsufficientSpectrumError(
            f"spectrum known up to {S.cutoff:.6g}; window at {lam:.6g} needs recomputation")
    idx = S.window(lam)
    if positive_only:
        idx = idx[S.values[idx] > 0]
    if idx.size == 0:
        raise AuditError("empty spectral subspace")
    if S.vectors is None:
        raise AuditError("spectral data carries no eigenvectors")
    return idx


def _overlap(S: SpectralData, idx, weights) -> np.ndarray:
    V = S.vectors[:, idx]
    G = S.grid.cell_volume * (V.T @ (weights[:, None] * V))
    return 0.5 * (G + G.T)


def grid_gradient(S: SpectralData, u: np.ndarray) -> np.ndarray:
    """Centered differences of a grid function, zero outside the box; shape ``(n, N^n)``."""
    g = S.grid
    U = u.reshape(g.shape)
    out = []
    for ax in range(g.n):
        pad = [(0, 0)] * g.n
        pad[ax] = (1, 1)
        P = np.pad(U, pad)
        hi = np.take(P, np.arange(2, g.N + 2), axis=ax)
        lo = np.take(P, np.arange(0, g.N), axis=ax)
        out.append(((hi - lo) / (2 * g.h)).reshape(-1))
    return np.array(out)


def _forward_gradient(S: SpectralData, u: np.ndarray) -> np.ndarray:
    # forward differences over N+1 edges, so that sum |D u|^2 h^n = <-Lap_h u, u>
    g = S.grid
    U = u.reshape(g.shape)
    out = []
    for ax in range(g.n):
        pad = [(0, 0)] * g.n
        pad[ax] = (1, 1)
        out.append((np.diff(np.pad(U, pad), axis=ax) / g.h).reshape(-1))
    return out


# ----------------------------------------------------------------- spectral inequality


def spectral_ratio(S: SpectralData, lam: float, mask: SetIndicator) -> dict:
    """Worst ratio ``||phi|| / ||phi||_omega`` over the spectral subspace below ``lam``."""
    idx = _window(S, lam)
    G = _overlap(S, idx, mask.weights)
    w, v = np.linalg.eigh(G)
    floor = 1e-14 * max(1.0, float(np.abs(w).max()))
    ratio = math.inf if w[0] <= floor else float(w[0] ** -0.5)
    return {"ratio": ratio, "minimizer": v[:, 0], "indices": idx, "min_eigenvalue": float(w[0])}


def localization_audit(S: SpectralData, lam: float, c: float, beta: float,
                       mass_fraction: float = 0.25, center=None) -> dict:
    """Smallest ball radius holding ``mass_fraction`` of the squared norm of every unit
    function in the window, and the implied localization constant.

    The minimum eigenvalue of the ball overlap matrix is monotone in the radius,
    so an integer bisection over the sorted node radii gives the exact grid
    minimum.
    """
    if not (0 < mass_fraction < 1):
        raise ValueError("mass_fraction must lie in (0, 1)")
    idx = _window(S, lam)
    radii = S.grid.radii(center)
    levels = np.unique(radii)

    def holds(j):
        G = _overlap(S, idx, (radii <= levels[j]).astype(float))
        return np.linalg.eigvalsh(G)[0] >= mass_fraction

    lo, hi = 0, levels.size - 1
    if not holds(hi):
        raise AuditError("the whole box does not hold the requested mass; enlarge the domain")
    while lo < hi:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid + 1
    rho = float(levels[lo])
    factor = float(localization_factor(lam, c, beta, S.grid.n))
    return {"rho_min": rho, "C_hat_min": rho / factor, "factor": factor, "h": S.grid.h,
            "mass_fraction": mass_fraction}


def weighted_norm_audit(S: SpectralData, lam: float, c: float, beta: float,
                        tail_tol: float = 1e-8) -> dict:
    """Exponentially weighted norms of eigenfunctions and their gradients.

    For each eigenfunction below ``lam`` the ratios ``||e^{|x|/2} phi||^2`` and
    ``||e^{|x|/2} grad phi||^2`` (over ``||phi||^2``) are compared with
    ``7 exp(R^{1/beta} + 1)``, ``R = max((lam_k + 2)/c, 1)``.
    """
    idx = _window(S, lam)
    g = S.grid
    r = g.radii()
    w2 = np.exp(r)
    boundary = np.isclose(np.abs(g.points()).max(axis=1), g.axis[-1])
    rows = []
    for k in idx:
        phi = S.vectors[:, k]
        weighted = np.exp(r / 2) * np.abs(phi)
        tail = float(weighted[boundary].max() / weighted.max())
        if tail > tail_tol:
            raise AuditError(
                f"weighted eigenfunction {k} is not resolved (boundary/peak {tail:.2e} > {tail_tol:g}); "
                f"increase L beyond {g.L:g}, e.g. to {1.5 * g.L:g}")
        norm2 = g.cell_volume * float(phi @ phi)
        val = g.cell_volume * float(w2 @ phi**2) / norm2
        grad = grid_gradient(S, phi)
        gval = g.cell_volume * float(w2 @ (grad**2).sum(axis=0)) / norm2
        R = max((S.values[k] + 2) / c, 1.0)
        bound = 7 * math.exp(R ** (1 / beta) + 1)
        rows.append({"k": int(k), "lambda": float(S.values[k]), "weighted": val,
                     "weighted_gradient": gval, "bound": bound,
                     "constant": val / bound, "gradient_constant": gval / math.exp(R ** (1 / beta))})
    return {
        "rows": rows,
        "max_constant": max(row["constant"] for row in rows),
        "max_gradient_constant": max(row["gradient_constant"] for row in rows),
        "all_within_explicit_bound": all(row["weighted"] <= row["bound"] for row in rows),
    }


def caccioppoli_audit(S: SpectralData, k: int, rho: float, z=None) -> dict:
    """``||grad phi_k||^2_{B_rho(z)}`` against ``(1 + lam_k) ||phi_k||^2_{B_2rho(z)}``."""
    g = S.grid
    z = np.zeros(g.n) if z is None else np.asarray(z, dtype=float)
    if np.any(np.abs(z) + 2 * rho > g.L):
        raise AuditError(f"ball of radius {2 * rho:g} about {z.tolist()} leaves the box [-{g.L:g}, {g.L:g}]")
    phi = S.vectors[:, k]
    r = g.radii(z)
    grad2 = (grid_gradient(S, phi) ** 2).sum(axis=0)
    lhs = g.cell_volume * float(grad2[r <= rho].sum())
    rhs = (1 + S.values[k]) * g.cell_volume * float((phi[r <= 2 * rho] ** 2).sum())
    const = lhs / rhs if rhs > 0 else math.inf
    bound = 1 + 8 / rho**2
    return {"lhs": float(lhs), "rhs": float(rhs), "constant_min": float(const), "bound": bound,
            "holds": bool(const <= bound)}


# ----------------------------------------------------------------- harmonic lift


def _sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 + x**2 / 6, np.sinh(safe) / safe)


def _lift_integrals(a, rho):
    """Integrals over ``(-rho, rho)`` of ``s_j s_k`` and ``c_j^2``, ``s = sinh(a t)/a``, ``c = cosh(a t)``."""
    A, B = np.meshgrid(a, a, indexing="ij")
    plus = 2 * rho * _sinhc((A + B) * rho)
    minus = 2 * rho * _sinhc((A - B) * rho)
    Sm = 0.5 * (plus - minus) / (A * B)
    Cc = np.sinh(2 * a * rho) / (2 * a) + rho
    return Sm, Cc


def harmonic_lift_audit(S: SpectralData, coeffs: np.ndarray, rho: float,
                        lam: Optional[float] = None) -> dict:
    """Squared ``H^1`` norm on ``R^n x (-rho, rho)`` of ``sum a_k phi_k(x) sinh(sqrt(lam_k) t)/sqrt(lam_k)``.

    ``coeffs`` runs over the eigenvalues in ``(0, lam]`` (all stored positive
    eigenvalues when ``lam`` is omitted). The x-gradient enters through
    ``<grad phi_j, grad phi_k> = lam_j delta_jk - <V phi_j, phi_k>``.
    """
    if lam is None:
        lam = float(S.values.max())
    if np.any(S.values[S.window(lam)] <= 0):
        raise AuditError("the lift is defined on strictly positive eigenvalues only")
    idx = _window(S, lam, positive_only=True)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size != idx.size:
        raise ValueError(f"expected {idx.size} coefficients, got {coeffs.size}")
    lam_k = S.values[idx]
    a = np.sqrt(lam_k)
    Sm, Cc = _lift_integrals(a, rho)
    V = S.vectors[:, idx]
    pot = S.potential_values if S.potential_values is not None else np.zeros(S.grid.size)
    W = np.diag(lam_k) - S.grid.cell_volume * (V.T @ (pot[:, None] * V))
    W = 0.5 * (W + W.T)
    h1 = float(np.sum(coeffs**2 * (np.diag(Sm) + Cc)) + coeffs @ ((W * Sm) @ coeffs))
    norm2 = float(coeffs @ coeffs)
    lam_top = float(lam)
    lower = 2 * rho * norm2
    upper = 2 * rho * (1 + rho**2 * (1 + lam_top) * math.exp(2 * rho * math.sqrt(lam_top)) / 3) * norm2
    return {"H1_norm_sq": h1, "lower": lower, "upper": upper, "holds": bool(lower <= h1 <= upper),
            "indices": idx}


def harmonic_lift_quadrature(S: SpectralData, coeffs: np.ndarray, rho: float,
                             lam: Optional[float] = None, nodes: int = 80) -> float:
    """Same norm as :func:`harmonic_lift_audit` by direct summation in x and Gauss-Legendre in t."""
    if lam is None:
        lam = float(S.values.max())
    idx = _window(S, lam, positive_only=True)
    a = np.sqrt(S.values[idx])
    t, wt = np.polynomial.legendre.leggauss(nodes)
    t, wt = rho * t, rho * wt
    V = S.vectors[:, idx]
    g = S.grid
    total = 0.0
    for ti, wi in zip(t, wt):
        phi = V @ (coeffs * np.sinh(a * ti) / a)
        dphi = V @ (coeffs * np.cosh(a * ti))
        grad = sum(float(d @ d) for d in _forward_gradient(S, phi))
        total += wi * g.cell_volume * (float(phi @ phi) + float(dphi @ dphi) + grad)
    return total


# ----------------------------------------------------------------- Gramian observability


@dataclass(frozen=True, eq=False)
class GramianBundle:
    """Finite-span observability data on the modes ``indices`` of ``spectral``.

    ``M`` is the observation Gramian, ``D`` the terminal weights, ``mu`` the
    fractional eigenvalues ``lam^s``.
    """

    spectral: SpectralData
    mask: SetIndicator
    T: float
    s: float
    indices: np.ndarray
    mu: np.ndarray
    G: np.ndarray
    M: np.ndarray
    D: np.ndarray
    truncation_error: float

    @property
    def dim(self) -> int:
        return int(self.indices.size)


def build_gramian(S: SpectralData, mask: SetIndicator, T: float, s: float,
                  truncate: bool = True, modes: Optional[int] = None) -> GramianBundle:
    """Assemble ``G``, ``M`` and ``D`` for horizon ``T`` and power ``s``.

    Modes whose terminal weight ``exp(-2 T lam^s)`` falls below ``1e-16`` of the
    largest are dropped when ``truncate`` is set; ``modes`` caps the count.
    """
    if T <= 0 or s <= 0:
        raise ValueError("T and s must be positive")
    if S.vectors is None:
        raise AuditError("spectral data carries no eigenvectors")
    mu_all = np.maximum(S.values, 0.0) ** s
    idx = np.arange(S.K)
    if modes is not None:
        idx = idx[:modes]
    trunc_err = 0.0
    if truncate and idx.size:
        logw = -2 * T * mu_all[idx]
        keep = logw >= logw.max() + math.log(TRUNCATION_LEVEL)
        if not keep.all():
            trunc_err = float(math.exp(logw[~keep].max() - logw.max()))
        idx = idx[keep]
    if idx.size == S.K and idx.size:
        # relative weight of the first uncomputed mode
        trunc_err = float(math.exp(-2 * T * (max(S.cutoff, 0.0) ** s - mu_all[0])))
    mu = mu_all[idx]
    G = _overlap(S, idx, mask.weights)
    ssum = mu[:, None] + mu[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = np.where(ssum > 0, -np.expm1(-ssum * T) / np.where(ssum > 0, ssum, 1.0), T)
    M = G * kernel
    D = np.exp(-2 * T * mu)
    return GramianBundle(S, mask, float(T), float(s), idx, mu, G, 0.5 * (M + M.T), D, trunc_err)


def observation_ratio(bundle: GramianBundle, coeffs: np.ndarray) -> float:
    """``||e^{-T H^s} f||^2 / int_0^T ||e^{-t H^s} f||_omega^2 dt`` for ``f`` given by coefficients."""
    num = float(np.sum(bundle.D * coeffs**2))
    den = float(coeffs @ bundle.M @ coeffs)
    return math.inf if den <= 0 else num / den


def gramian_observability(bundle: GramianBundle, singular_tol: float = 1e-13,
                          indefinite_tol: float = 1e-10) -> dict:
    """Smallest ``C`` with ``||e^{-T H^s} f||^2 <= (C/T) int_0^T ||e^{-t H^s} f||_omega^2 dt`` on the span.

    Computed as ``T`` times the largest generalized eigenvalue of ``(D, M)``
    after diagonal scaling and a Cholesky factorization of ``M``.
    """
    M, D, T = bundle.M, bundle.D, bundle.T
    K = bundle.dim
    if K == 0:
        raise AuditError("no modes in the Gramian")
    d = np.sqrt(np.clip(np.diag(M), 0.0, None))
    if np.any(d <= 0):
        j = int(np.argmin(d))
        f = np.zeros(K)
        f[j] = 1.0
        return {"C_emp": math.inf, "worst_initial_state": f, "condition": math.inf,
                "reason": f"mode {int(bundle.indices[j])} is invisible on the control set"}
    Ms = M / np.outer(d, d)
    w, v = np.linalg.eigh(Ms)
    if w[0] < -indefinite_tol * w[-1]:
        raise AuditError(
            f"observation Gramian is indefinite: min/max eigenvalue {w[0]:.3e}/{w[-1]:.3e}, "
            f"dimension {K}; reduce the mode count or refine the grid")
    if w[0] <= singular_tol * w[-1]:
        f = v[:, 0] / d
        return {"C_emp": math.inf, "worst_initial_state": f / np.linalg.norm(f),
                "condition": math.inf, "reason": "observation Gramian is singular"}
    L = np.linalg.cholesky(Ms)
    X = sla.solve_triangular(L, np.diag(np.sqrt(D) / d), lower=True)
    U, sv, _ = np.linalg.svd(X)
    g = sla.solve_triangular(L.T, U[:, 0], lower=False)
    f = g / d
    f /= np.linalg.norm(f)
    return {"C_emp": float(T * sv[0] ** 2), "worst_initial_state": f,
            "condition": float(w[-1] / w[0]), "reason": ""}


def synthesize_control(bundle: GramianBundle, u0: np.ndarray, eps: Optional[float] = None,
                       coefficients: bool = False, n_times: int = 21) -> dict:
    """HUM control ``h(t) = 1_omega e^{-(T-t) H^s} eta`` steering ``u0`` toward zero.

    ``eta`` solves ``(M + eps I) eta = -e^{-T H^s} u0`` on the span. The terminal
    state is ``e^{-T H^s} u0 + M eta`` and the cost is ``eta^T M eta``, both
    exact for the diagonalized dynamics.
    """
    S = bundle.spectral
    M = bundle.M
    K = bundle.dim
    u0 = np.asarray(u0, dtype=float)
    if coefficients:
        a0 = u0
        if a0.size != K:
            raise ValueError(f"expected {K} coefficients")
    else:
        a0 = S.grid.cell_volume * (S.vectors[:, bundle.indices].T @ u0)
    if eps is None:
        eps = 1e-10 * float(np.trace(M)) / K
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    b = np.exp(-bundle.T * bundle.mu) * a0
    A = M + eps * np.eye(K)
    if eps == 0:
        w = np.linalg.eigvalsh(M)
        if w[0] <= 1e-14 * max(w[-1], 1e-300):
            raise AuditError("eps = 0 needs a nonsingular Gramian")
    try:
        cf = sla.cho_factor(A)
        eta = -sla.cho_solve(cf, b)
    except np.linalg.LinAlgError:
        eta = -np.linalg.solve(A, b)
    terminal = b + M @ eta
    cost = float(eta @ M @ eta)
    times = np.linspace(0.0, bundle.T, n_times)
    V = S.vectors[:, bundle.indices]
    w = bundle.mask.weights
    control = np.array([w * (V @ (np.exp(-(bundle.T - t) * bundle.mu) * eta)) for t in times])
    return {
        "eta": eta,
        "times": times,
        "control": control,
        "terminal_coefficients": terminal,
        "terminal_norm": float(np.linalg.norm(terminal)),
        "initial_norm": float(np.linalg.norm(a0)),
        "free_terminal_norm": float(np.linalg.norm(b)),
        "cost": cost,
        "eps": eps,
    }


# ----------------------------------------------------------------- calibration


def calibrate_free_constants(S: SpectralData, c: float, beta: float, lambdas, masks: dict,
                             params: Optional[AssumptionParams] = None,
                             mass_fraction: float = 0.25,
                             base: Optional[FreeConstants] = None) -> dict:
    """Smallest free constants consistent with a sweep.

    ``masks`` maps ``gamma`` to a set indicator. The localization constant is the
    largest minimal ratio over ``lambdas``; the counting constant is the largest
    ``N(lam) / bound`` at the computed eigenvalues; the spectral-inequality
    constant is the largest ``log ratio / (script_J log(1/gamma))``.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise ValueError("empty sweep")
    n = S.grid.n
    C_hat = max(localization_audit(S, lam, c, beta, mass_fraction)["C_hat_min"] for lam in lambdas
                if lam >= S.values[0])
    top = max(lambdas)
    ev = S.values[S.values <= top]
    counts = np.arange(1, ev.size + 1)
    kappa = float(np.max(counts / eigencount_bound(ev, c, beta, n, 1.0))) if ev.size else 0.0
    per_gamma = {}
    for gamma, mask in masks.items():
        worst = 0.0
        for lam in lambdas:
            if lam < S.values[0]:
                continue
            ratio = spectral_ratio(S, lam, mask)["ratio"]
            if params is not None:
                expo = spectral_exponent(params, params.c1, params.c2, lam)["script_J"]
            else:
                expo = 1.0
            worst = max(worst, math.log(ratio) / (expo * math.log(1 / gamma)) if ratio > 1 else 0.0)
        per_gamma[float(gamma)] = worst
    C_spec = max(per_gamma.values()) if per_gamma else 1.0
    fc = (base or FreeConstants()).with_overrides(C_hat=C_hat, kappa_n=kappa, C_spec=C_spec)
    return {"C_hat_fit": C_hat, "kappa_n_fit": kappa, "C_spec_fit": C_spec,
            "C_spec_by_gamma": per_gamma, "free_constants": fc}
