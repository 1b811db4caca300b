"""Potentials on R^n and numerical audits of their growth assumptions.

A potential is stored together with the parameters ``(c1, c2, beta1, beta2)``
of the growth assumption it is claimed to satisfy:

* ``A1``: ``c1 |x|^beta1 <= V(x)`` and ``|V| + |grad V| <= c2 (|x| + 1)^beta2``
* ``A2``: same lower bound, and ``V = V1 + V2`` with
  ``|V1| + |grad V1| + |V2|^(4/3) <= c2 (|x| + 1)^beta2``.

The A1 upper bound is audited with the ``(|x| + 1)`` weight; with a bare
``|x|^beta2`` weight no potential with a nonzero gradient near the origin
could satisfy it.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Assumption",
    "PotentialSpec",
    "ScaledPotential",
    "AssumptionReport",
    "make_power_potential",
    "make_table_potential",
    "smooth_cutoff",
    "check_assumption",
    "scale",
    "potential_from_config",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

AUDIT_RTOL = 1e-9


class Assumption(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != n:
        raise ValueError(f"expected points with trailing dimension {n}, got {x.shape}")
    return x


def smooth_cutoff(radius):
    """C^2 bump equal to 1 on ``|x| <= 1`` and 0 on ``|x| >= 2``.

    Uses the quintic smoothstep ``6t^5 - 15t^4 + 10t^3`` on the transition shell.
    """
    t = np.clip(np.asarray(radius, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


@dataclass(frozen=True)
class PotentialSpec:
    """A nonnegative potential with its declared growth parameters.

    ``evaluator`` maps an array of points with shape ``(..., n)`` to values with
    shape ``(...)``. ``separable`` optionally lists one-dimensional evaluators
    ``v_i`` with ``V(x) = sum_i v_i(x_i)``; the eigensolver exploits it.
    """

    evaluator: Evaluator
    c1: float
    c2: float
    beta1: float
    beta2: float
    assumption: Assumption = Assumption.A1
    n: int = 1
    gradient_evaluator: Optional[Evaluator] = None
    split: Optional[tuple[Evaluator, Evaluator]] = None
    separable: Optional[tuple[Callable[[np.ndarray], np.ndarray], ...]] = None
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if not (self.beta1 > 0 and self.beta2 >= self.beta1):
            raise ValueError("need beta2 >= beta1 > 0")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "assumption", Assumption(self.assumption))

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.c1, self.c2, self.beta1, self.beta2)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(_as_points(x, self.n)), dtype=float)

    def gradient(self, x) -> np.ndarray:
        x = _as_points(x, self.n)
        if self.gradient_evaluator is not None:
            return np.asarray(self.gradient_evaluator(x), dtype=float)
        return _fd_gradient(self.evaluator, x)


def _fd_gradient(f: Evaluator, x: np.ndarray) -> np.ndarray:
    # central differences, step 1e-5 (1 + |x|)
    step = 1e-5 * (1.0 + np.linalg.norm(x, axis=-1))
    grad = np.empty_like(x)
    for d in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[d] = 1.0
        xp = x + step[..., None] * e
        xm = x - step[..., None] * e
        grad[..., d] = (f(xp) - f(xm)) / (2.0 * step)
    return grad


def make_power_potential(c: float, beta: float, n: int = 1) -> PotentialSpec:
    """``V(x) = c |x|^beta`` with parameters ``(c, c, beta, beta)``.

    For ``beta >= 1`` the potential is declared under A1. For ``beta < 1`` the
    gradient blows up at the origin, so the potential is declared under A2 with
    the cutoff split ``V1 = V (1 - eta)``, ``V2 = V eta``; ``c2`` is then the
    smallest constant the split admits (never below ``c``).
    """
    if not (c > 0):
        raise ValueError(f"power potential needs c > 0, got {c}")
    if not (beta > 0):
        raise ValueError(f"power potential needs beta > 0, got {beta}")

    def V(x):
        return c * np.linalg.norm(x, axis=-1) ** beta

    desc = {"kind": "power", "c": c, "beta": beta, "n": n}
    separable = None
    if beta == 2:
        separable = tuple(lambda t: c * np.asarray(t, dtype=float) ** 2 for _ in range(n))

    if beta >= 1:

        def gradV(x):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                g = c * beta * np.where(r > 0, r ** (beta - 2.0), 0.0) * x
            return g

        return PotentialSpec(V, c, c, beta, beta, Assumption.A1, n, gradV,
                             separable=separable, description=desc)

    def V1(x):
        r = np.linalg.norm(x, axis=-1)
        return c * r**beta * (1.0 - smooth_cutoff(r))

    def V2(x):
        r = np.linalg.norm(x, axis=-1)
        return c * r**beta * smooth_cutoff(r)

    c2 = max(c, _induced_c2(V1, V2, beta, n))
    return PotentialSpec(V, c, c2, beta, beta, Assumption.A2, n,
                         split=(V1, V2), description=desc)


def _induced_c2(V1, V2, beta2, n, rmax=50.0, samples=20001):
    # V1, V2 radial: scan along the first axis; V1 == V(1 - eta) has its
    # gradient supported in |x| >= 1 so the FD audit is well posed there.
    r = np.linspace(0.0, rmax, samples)
    x = np.zeros((samples, n))
    x[:, 0] = r
    lhs = np.abs(V1(x)) + np.linalg.norm(_fd_gradient(V1, x), axis=-1) + np.abs(V2(x)) ** (4.0 / 3.0)
    return float(np.max(lhs / (r + 1.0) ** beta2)) * (1.0 + 1e-6)


def make_table_potential(path, c1, c2, beta1, beta2, assumption="A2") -> PotentialSpec:
    """One-dimensional tabulated potential read from a two-column CSV ``x,V``.

    Values are interpolated piecewise linearly and extrapolated flat.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                vs.append(float(row[1]))
            except ValueError:
                continue  # header line
    xs = np.asarray(xs)
    order = np.argsort(xs)
    xs, vs = xs[order], np.asarray(vs)[order]

    def V(x):
        return np.interp(x[..., 0], xs, vs)

    return PotentialSpec(V, c1, c2, beta1, beta2, assumption, 1,
                         description={"kind": "table", "file": str(path)})


@dataclass(frozen=True)
class AssumptionReport:
    holds: bool
    worst_margin: float
    worst_point: np.ndarray
    failed_condition: Optional[str] = None


def check_assumption(p, sample_box_halfwidth: float = 5.0, samples_per_dim: int = 201,
                     tolerance: float = AUDIT_RTOL) -> AssumptionReport:
    """Audit the declared assumption of ``p`` on a uniform sample grid.

    Every inequality is turned into a relative slack ``(rhs - lhs) / (1 + |rhs|)``;
    ``worst_margin`` is the smallest slack over all points and conditions.
    """
    if isinstance(p, ScaledPotential):
        p = p.as_spec()
    if samples_per_dim < 1:
        raise ValueError("sample grid is empty")
    axis = np.linspace(-sample_box_halfwidth, sample_box_halfwidth, samples_per_dim)
    pts = np.stack(np.meshgrid(*([axis] * p.n), indexing="ij"), axis=-1).reshape(-1, p.n)
    r = np.linalg.norm(pts, axis=-1)
    V = p(pts)

    slacks = {}
    lower = p.c1 * r**p.beta1
    slacks["lower bound c1|x|^beta1 <= V"] = (V - lower) / (1.0 + np.abs(V))

    weight = p.c2 * (r + 1.0) ** p.beta2
    if p.assumption is Assumption.A1 or p.split is None:
        lhs = np.abs(V) + np.linalg.norm(p.gradient(pts), axis=-1)
        name = "upper bound |V| + |grad V|"
    else:
        V1, V2 = p.split
        lhs = (np.abs(V1(pts)) + np.linalg.norm(_fd_gradient(V1, pts), axis=-1)
               + np.abs(V2(pts)) ** (4.0 / 3.0))
        name = "upper bound |V1| + |grad V1| + |V2|^(4/3)"
        recon = V1(pts) + V2(pts)
        slacks["split V1 + V2 == V"] = -np.abs(recon - V) / (1.0 + np.abs(V))
    slacks[name] = (weight - lhs) / (1.0 + weight)

    worst_margin, worst_point, failed = np.inf, pts[0], None
    for cond, s in slacks.items():
        i = int(np.argmin(s))
        if s[i] < worst_margin:
            worst_margin, worst_point, failed = float(s[i]), pts[i], cond
    holds = worst_margin >= -tolerance
    return AssumptionReport(holds, worst_margin, worst_point, None if holds else failed)


@dataclass(frozen=True)
class ScaledPotential:
    """``r V + V~`` with the transformed assumption parameters.

    Under A1 the constants scale as ``(r c1, r c2)``. Under A2 the ``|V2|^(4/3)``
    term scales like ``r^(4/3)`` so ``c2`` picks up ``max(r, r^(4/3))``. A second
    potential adds its own constants, which gives ``(r + 1) c1`` and ``(r + 1) c2``
    when both share the parameters.
    """

    base: PotentialSpec
    r: float = 1.0
    additive: Optional[PotentialSpec] = None

    def __post_init__(self):
        if not (self.r > 0):
            raise ValueError("scale factor must be positive")
        if self.additive is not None:
            a, b = self.additive, self.base
            if (a.beta1, a.beta2) != (b.beta1, b.beta2):
                raise ValueError("additive potential must share (beta1, beta2) with the base")
            if a.n != b.n:
                raise ValueError("dimension mismatch between base and additive potentials")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def effective_r(self) -> float:
        return self.r + 1.0 if self.additive is not None else self.r

    @property
    def params(self) -> tuple[float, float, float, float]:
        b, r = self.base, self.r
        if self.additive is None:
            c1 = r * b.c1
            c2 = r * b.c2 if b.assumption is Assumption.A1 else max(r, r ** (4 / 3)) * b.c2
        else:
            a = self.additive
            c1 = r * b.c1 + a.c1
            c2 = (r if b.assumption is Assumption.A1 else max(r, r ** (4 / 3))) * b.c2 + a.c2
        return (c1, c2, b.beta1, b.beta2)

    def __call__(self, x) -> np.ndarray:
        v = self.r * self.base(x)
        if self.additive is not None:
            v = v + self.additive(x)
        return v

    def as_spec(self) -> PotentialSpec:
        b, r, a = self.base, self.r, self.additive
        c1, c2, beta1, beta2 = self.params

        def V(x):
            out = r * b.evaluator(x)
            return out if a is None else out + a.evaluator(x)

        grad = None
        if b.gradient_evaluator is not None and (a is None or a.gradient_evaluator is not None):
            def _grad(x):
                g = r * b.gradient_evaluator(x)
                return g if a is None else g + a.gradient_evaluator(x)

            grad = _grad

        split = None
        if b.assumption is Assumption.A2:
            b1, b2 = b.split if b.split is not None else (b.evaluator, lambda x: 0.0 * x[..., 0])
            if a is None:
                split = (lambda x: r * b1(x), lambda x: r * b2(x))
            else:
                a1, a2 = a.split if a.split is not None else (a.evaluator, lambda x: 0.0 * x[..., 0])
                split = (lambda x: r * b1(x) + a1(x), lambda x: r * b2(x) + a2(x))

        separable = None
        if b.separable is not None and (a is None or a.separable is not None):
            if a is None:
                separable = tuple((lambda f: lambda t: r * f(t))(f) for f in b.separable)
            else:
                separable = tuple((lambda f, g: lambda t: r * f(t) + g(t))(f, g)
                                  for f, g in zip(b.separable, a.separable))

        desc = {"kind": "scaled", "r": r, "base": b.description,
                "additive": None if a is None else a.description}
        return PotentialSpec(V, c1, c2, beta1, beta2, b.assumption, b.n, grad, split,
                             separable, desc)


def scale(p, r: float, additive: Optional[PotentialSpec] = None) -> ScaledPotential:
    """Scale ``p`` by ``r`` and optionally add a second potential.

    Scaling an already scaled potential without an additive term composes the
    factors, so ``scale(scale(p, r1), r2)`` equals ``scale(p, r1 * r2)``.
    """
    if isinstance(p, ScaledPotential):
        if p.additive is None:
            return ScaledPotential(p.base, p.r * r, additive)
        p = p.as_spec()
    return ScaledPotential(p, r, additive)


def potential_from_config(cfg: dict, n: int = 1) -> PotentialSpec:
    """Build a potential from ``{"kind": "power", "c": .., "beta": ..}`` or
    ``{"kind": "table", "file": .., "c1": .., ...}``."""
    kind = cfg.get("kind")
    if kind == "power":
        return make_power_potential(float(cfg["c"]), float(cfg["beta"]), int(cfg.get("n", n)))
    if kind == "table":
        return make_table_potential(cfg["file"], float(cfg.get("c1", 1.0)), float(cfg.get("c2", 1.0)),
                                    float(cfg.get("beta1", 1.0)), float(cfg.get("beta2", cfg.get("beta1", 1.0))),
                                    cfg.get("assumption", "A2"))
    raise ValueError(f"unknown potential kind {kind!r}")

