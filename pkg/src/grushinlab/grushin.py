"""Fractional Baouendi-Grushin heat flow on ``R^n x T^m`` by Fourier decoupling in ``y``.

Fourier mode ``k`` of the ``y``-variable evolves under ``-Laplace_x + |k|^2 V (+ V~)``,
so the flow is a family of Schrödinger semigroups indexed by ``|k|^2``. The
direct oracle assembles the coupled operator on an ``x``-``y`` grid instead.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .constants import AssumptionParams, FreeConstants, cobs_formula, exponent_table, proof_epsilon
from .control_sets import SetIndicator, thickness
from .potential import PotentialSpec, scale
from .spectral import DENSE_LIMIT, Grid, SpectralData, discretize, eigensolve, semigroup_apply
from .verify import AuditError, build_gramian, gramian_observability

__all__ = [
    "ModeFamily",
    "GrushinState",
    "ObservabilityReport",
    "ModeError",
    "build_modes",
    "evolve",
    "direct_oracle",
    "periodic_second_derivative",
    "grushin_observability",
    "scan_scaled_observability",
    "ORACLE_CAP",
]

ORACLE_CAP = 10_000


class ModeError(RuntimeError):
    pass


def _mode_potential(V, Vt, r2):
    if r2 == 0:
        return Vt
    return scale(V, float(r2), Vt)


def _solve_mode(V, Vt, r2, grid, count, cutoff):
    try:
        op = discretize(_mode_potential(V, Vt, r2), grid)
        if count is None and cutoff is None:
            if grid.size > DENSE_LIMIT:
                raise ValueError("give count or cutoff for grids above the dense limit")
            return eigensolve(op, count=grid.size)
        return eigensolve(op, count=count, cutoff=cutoff)
    except Exception as exc:
        raise ModeError(f"eigensolve failed for mode |k|^2={r2}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class ModeFamily:
    """Spectra of ``-Laplace_x + |k|^2 V (+ V~)`` for the modes ``k`` in ``{-M..M}^m``.

    Spectra are stored once per value of ``|k|^2``.
    """

    V: PotentialSpec
    Vt: Optional[PotentialSpec]
    modes: tuple
    spectra: dict
    grid: Grid
    s: float
    m: int

    def spectrum(self, k) -> SpectralData:
        k = np.atleast_1d(k)
        return self.spectra[int(np.dot(k, k))]

    @property
    def max_mode(self) -> int:
        return max((max(abs(c) for c in k) for k in self.modes), default=0)


def build_modes(V: PotentialSpec, x_grid: Grid, max_mode: int = 6, s: float = 1.0,
                Vt: Optional[PotentialSpec] = None, m: int = 1, count: Optional[int] = None,
                cutoff: Optional[float] = None, threads: Optional[int] = None) -> ModeFamily:
    """Eigensolve every distinct ``|k|^2`` with ``k`` in ``{-max_mode..max_mode}^m``.

    Without ``count`` or ``cutoff`` the full grid spectrum is computed.
    """
    if max_mode < 0:
        raise ValueError("max_mode must be >= 0")
    modes = tuple(itertools.product(range(-max_mode, max_mode + 1), repeat=m))
    radii = sorted({sum(c * c for c in k) for k in modes})
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda r2: _solve_mode(V, Vt, r2, x_grid, count, cutoff), radii))
    return ModeFamily(V, Vt, modes, dict(zip(radii, results)), x_grid, float(s), m)


@dataclass(frozen=True, eq=False)
class GrushinState:
    """Partial Fourier coefficients ``u_hat[i, x]`` for mode ``modes[i]`` at node ``x``.

    The norm is ``h^n sum |u_hat|^2``, which equals the physical ``L^2`` norm on
    ``R^n x T^m`` for fields band-limited to the stored modes.
    """

    modes: tuple
    coeffs: np.ndarray
    grid: Grid
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.coeffs) ** 2)))

    @classmethod
    def from_physical(cls, u: np.ndarray, grid: Grid, modes, t: float = 0.0) -> "GrushinState":
        """Coefficients of ``u`` sampled at ``y_j = 2 pi j / Ny`` (shape ``(N^n, Ny, ..., Ny)``)."""
        u = np.asarray(u)
        m = u.ndim - 1
        Ny = u.shape[1]
        if any(abs(c) >= Ny / 2 for k in modes for c in k):
            raise ValueError(f"modes must satisfy |k_i| < Ny/2 = {Ny / 2:g} to avoid aliasing")
        F = np.fft.fftn(u, axes=tuple(range(1, m + 1)))
        F *= (2 * np.pi) ** (-m / 2) * (2 * np.pi / Ny) ** m
        coeffs = np.array([F[(slice(None),) + tuple(c % Ny for c in k)] for k in modes])
        return cls(tuple(modes), coeffs, grid, t)

    def to_physical(self, Ny: int) -> np.ndarray:
        m = len(self.modes[0])
        F = np.zeros((self.grid.size,) + (Ny,) * m, dtype=complex)
        for k, c in zip(self.modes, self.coeffs):
            F[(slice(None),) + tuple(j % Ny for j in k)] += c
        u = np.fft.ifftn(F, axes=tuple(range(1, m + 1))) * Ny**m
        return u * (2 * np.pi) ** (-m / 2)

    def physical_norm(self, Ny: int) -> float:
        u = self.to_physical(Ny)
        m = u.ndim - 1
        return float(np.sqrt(self.grid.cell_volume * (2 * np.pi / Ny) ** m * np.sum(np.abs(u) ** 2)))


def evolve(fam: ModeFamily, state: GrushinState, t: float) -> GrushinState:
    if t < 0:
        raise ValueError("evolution time must be nonnegative")
    known = set(fam.modes)
    missing = [k for k in state.modes if tuple(k) not in known]
    if missing:
        raise ValueError(f"modes {missing} are not in the family")
    out = np.empty_like(state.coeffs, dtype=complex)
    for i, k in enumerate(state.modes):
        out[i] = semigroup_apply(fam.spectrum(k), t, fam.s, state.coeffs[i])
    return GrushinState(state.modes, out, state.grid, state.t + t)


def periodic_second_derivative(Ny: int) -> np.ndarray:
    """Fourier spectral second-derivative matrix on ``Ny`` equispaced points of ``[0, 2 pi)``.

    Its eigenvalues are ``-k^2`` on the resolved frequencies.
    """
    if Ny % 2:
        raise ValueError("use an even number of y points")
    h = 2 * np.pi / Ny
    j = np.arange(1, Ny)
    col = np.empty(Ny)
    col[0] = -np.pi**2 / (3 * h**2) - 1 / 6
    col[1:] = -0.5 * (-1.0) ** j / np.sin(j * h / 2) ** 2
    return sla.toeplitz(col)


def direct_oracle(V: PotentialSpec, x_grid: Grid, Ny: int, t: float, s: float, u0: np.ndarray,
                  Vt: Optional[PotentialSpec] = None, cap: int = ORACLE_CAP) -> np.ndarray:
    """``exp(-t L^s) u0`` for the coupled operator ``-d_xx - V(x) d_yy (+ V~)`` by dense eigendecomposition.

    ``u0`` has shape ``(N, Ny)``; the ``y``-derivative is the Fourier spectral one.
    """
    if x_grid.n != 1:
        raise ValueError("the direct oracle handles n = m = 1")
    size = x_grid.N * Ny
    if size > cap:
        raise ValueError(f"{size} unknowns exceed the oracle cap of {cap}; reduce N or Ny")
    if t < 0:
        raise ValueError("evolution time must be nonnegative")
    op = discretize(None, x_grid)
    Tx = op.laplacian_1d.toarray()
    vx = np.asarray(V(x_grid.points()), dtype=float).reshape(-1)
    A = np.kron(Tx, np.eye(Ny)) + np.kron(np.diag(vx), -periodic_second_derivative(Ny))
    if Vt is not None:
        A += np.kron(np.diag(np.asarray(Vt(x_grid.points()), dtype=float).reshape(-1)), np.eye(Ny))
    w, Q = np.linalg.eigh(0.5 * (A + A.T))
    decay = np.exp(-t * np.clip(w, 0.0, None) ** s)
    u = np.asarray(u0).reshape(-1)
    return (Q @ (decay * (Q.T @ u))).reshape(x_grid.N, Ny)


@dataclass
class ObservabilityReport:
    T: float
    s: float
    rows: list
    C_agg: float
    argmax_mode: tuple
    thickness: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def per_mode(self) -> dict:
        return {tuple(r["k"]): r["C_emp"] for r in self.rows}

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            return x

        return {
            "T": self.T,
            "s": self.s,
            "C_agg": clean(self.C_agg),
            "argmax_mode": list(self.argmax_mode),
            "thickness": self.thickness,
            "metadata": self.metadata,
            "rows": [{k: clean(v) for k, v in r.items()} for r in self.rows],
        }


def _mode_audit(S, mask, T, s, modes_cap):
    try:
        res = gramian_observability(build_gramian(S, mask, T, s, modes=modes_cap))
        return res["C_emp"], res["reason"]
    except AuditError as exc:
        return math.nan, str(exc)


def grushin_observability(fam: ModeFamily, mask_x: SetIndicator, T: float, s: Optional[float] = None,
                          params: Optional[AssumptionParams] = None,
                          free_constants: Optional[FreeConstants] = None,
                          thickness_scale: float = 1.0, modes_cap: Optional[int] = None,
                          threads: Optional[int] = None) -> ObservabilityReport:
    """Per-mode observability constants on ``omega x T^m`` and their supremum.

    ``params`` adds the closed-form bound at ``r = |k|^2`` for ``k != 0``. The
    ``k = 0`` row is flagged and accompanied by a thickness audit of ``omega``.
    """
    s = fam.s if s is None else s
    radii = sorted(fam.spectra)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        audits = dict(zip(radii, pool.map(
            lambda r2: _mode_audit(fam.spectra[r2], mask_x, T, s, modes_cap), radii)))

    table = None
    if params is not None:
        table = exponent_table(params, proof_epsilon(params, s))
    rows = []
    for k in fam.modes:
        r2 = int(np.dot(k, k))
        C, reason = audits[r2]
        flags = []
        if r2 == 0:
            flags.append("thickness fallback")
        if reason:
            flags.append(reason)
        bound = log_bound = None
        if table is not None and r2 > 0:
            log_bound = cobs_formula(T, s, r2, params, table, free_constants, log=True)
            bound = math.exp(log_bound) if log_bound < 709 else math.inf
        rows.append({"k": list(k), "k2": r2, "C_emp": C, "lambda0": float(fam.spectra[r2].values[0]),
                     "explicit_bound": bound, "log_explicit_bound": log_bound, "flags": flags})
    finite = [r for r in rows if not math.isnan(r["C_emp"])]
    best = max(finite, key=lambda r: r["C_emp"]) if finite else rows[0]
    thick = thickness(mask_x, thickness_scale)
    thick["scale"] = thickness_scale
    return ObservabilityReport(float(T), float(s), rows, float(best["C_emp"]), tuple(best["k"]), thick,
                               {"grid": fam.grid.to_dict(), "max_mode": fam.max_mode, "m": fam.m})


def scan_scaled_observability(V: PotentialSpec, r_values, mask: SetIndicator, T: float, s: float,
                              Vt: Optional[PotentialSpec] = None, count: Optional[int] = None,
                              params: Optional[AssumptionParams] = None,
                              free_constants: Optional[FreeConstants] = None,
                              threads: Optional[int] = None) -> list:
    """Observability constant of ``-Laplace + r V (+ V~)`` over a list of scale factors.

    Each row holds ``r``, the empirical constant and, with ``params``, the
    closed-form bound evaluated at ``r`` (``r + 1`` when ``V~`` is present).
    """
    r_values = [float(r) for r in r_values]
    if any(r <= 0 for r in r_values):
        raise ValueError("scale factors must be positive")
    grid = mask.grid
    table = exponent_table(params, proof_epsilon(params, s)) if params is not None else None

    def one(r):
        S = _solve_mode(V, Vt, r, grid, count, None)
        C, reason = _mode_audit(S, mask, T, s, None)
        row = {"r": r, "C_emp": C, "lambda0": float(S.values[0]), "bound": None, "log_bound": None,
               "note": reason}
        if table is not None:
            r_eff = r + 1.0 if Vt is not None else r
            lb = cobs_formula(T, s, r_eff, params, table, free_constants, log=True)
            row["log_bound"] = lb
            row["bound"] = math.exp(lb) if lb < 709 else math.inf
        return row

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, r_values))
