"""Distributed control sets, their grid indicators and a thickness audit."""

from __future__ import annotations

import enum
import itertools
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import Grid

__all__ = [
    "Placement",
    "DistributedSet",
    "SetIndicator",
    "make_distributed",
    "make_equidistributed",
    "indicator",
    "full_indicator",
    "empty_indicator",
    "mask_from_array",
    "thickness",
    "ResolutionWarning",
]


class ResolutionWarning(UserWarning):
    pass


class Placement(str, enum.Enum):
    CELL_CENTER = "cell_center"
    SEEDED_RANDOM = "seeded_random"


def _radius(gamma: float, sigma: float, k: np.ndarray) -> float:
    norm = float(np.linalg.norm(k))
    # 0**0 == 1 in Python, which gives the uniform radius gamma**2 when sigma == 0
    return gamma ** (1.0 + norm**sigma)


@dataclass(frozen=True, eq=False)
class DistributedSet:
    """One Euclidean ball per unit lattice cell ``k + [-1/2, 1/2]^n``.

    Radii follow ``gamma^(1 + |k|^sigma)`` unless ``equidistributed`` is set,
    in which case every ball has radius ``gamma``.
    """

    n: int
    gamma: float
    sigma: float
    box: tuple[int, int]
    cells: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    placement: Placement = Placement.CELL_CENTER
    seed: Optional[int] = None
    equidistributed: bool = False

    def __len__(self):
        return int(self.cells.shape[0])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "equidistributed": self.equidistributed,
            "placement": self.placement.value,
            "seed": self.seed,
            "box": list(self.box),
            "centers": [
                {"k": [int(v) for v in k], "z": [float(v) for v in z], "radius": float(r)}
                for k, z, r in zip(self.cells, self.centers, self.radii)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DistributedSet":
        cells = np.array([c["k"] for c in d["centers"]], dtype=int).reshape(-1, d["n"])
        centers = np.array([c["z"] for c in d["centers"]], dtype=float).reshape(-1, d["n"])
        radii = np.array([c["radius"] for c in d["centers"]], dtype=float)
        return cls(d["n"], d["gamma"], d["sigma"], tuple(d["box"]), cells, centers, radii,
                   Placement(d["placement"]), d.get("seed"), d.get("equidistributed", False))


def _lattice(n, box):
    lo, hi = box
    axis = range(int(lo), int(hi) + 1)
    return np.array(list(itertools.product(axis, repeat=n)), dtype=int).reshape(-1, n)


def _place(cells, radii, placement, seed):
    placement = Placement(placement)
    if placement is Placement.CELL_CENTER:
        return cells.astype(float)
    rng = np.random.default_rng(seed)
    slack = np.maximum(0.5 - radii, 0.0)[:, None]
    return cells + rng.uniform(-1.0, 1.0, size=cells.shape) * slack


def make_distributed(gamma: float, sigma: float, bounding_box: tuple[int, int], n: int = 1,
                     placement="cell_center", seed: Optional[int] = None) -> DistributedSet:
    """A ``(gamma, sigma)``-distributed set on the lattice cells ``bounding_box[0]..bounding_box[1]``.

    Seeded placement moves each center uniformly inside its cell while keeping
    the ball inside the cell.
    """
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0, 1)")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    cells = _lattice(n, bounding_box)
    radii = np.array([_radius(gamma, sigma, k) for k in cells])
    centers = _place(cells, radii, placement, seed)
    return DistributedSet(n, gamma, sigma, tuple(bounding_box), cells, centers, radii,
                          Placement(placement), seed, False)


def make_equidistributed(gamma: float, bounding_box: tuple[int, int], n: int = 1,
                         placement="cell_center", seed: Optional[int] = None) -> DistributedSet:
    """A ``gamma``-equidistributed set: a ball of radius ``gamma`` in every cell."""
    if not (0 < gamma < 0.5):
        raise ValueError("gamma must lie in (0, 1/2)")
    cells = _lattice(n, bounding_box)
    radii = np.full(len(cells), float(gamma))
    centers = _place(cells, radii, placement, seed)
    return DistributedSet(n, gamma, 0.0, tuple(bounding_box), cells, centers, radii,
                          Placement(placement), seed, True)


@dataclass(frozen=True, eq=False)
class SetIndicator:
    grid: Grid
    mask: np.ndarray

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.grid.cell_volume * self.count

    @property
    def weights(self) -> np.ndarray:
        return self.mask.astype(float)

    def nested_in(self, other: "SetIndicator") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def to_csv(self, path) -> None:
        idx = np.flatnonzero(self.mask)
        with open(path, "w") as fh:
            fh.write("# grid " + json.dumps(self.grid.to_dict(), sort_keys=True) + "\n")
            fh.write("node_index\n")
            for i in idx:
                fh.write(f"{i}\n")


def mask_from_array(grid: Grid, mask) -> SetIndicator:
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size != grid.size:
        raise ValueError("mask size does not match grid")
    return SetIndicator(grid, mask)


def full_indicator(grid: Grid) -> SetIndicator:
    return SetIndicator(grid, np.ones(grid.size, dtype=bool))


def empty_indicator(grid: Grid) -> SetIndicator:
    return SetIndicator(grid, np.zeros(grid.size, dtype=bool))


def indicator(dset: DistributedSet, grid: Grid) -> SetIndicator:
    """Nodes of ``grid`` inside any ball of ``dset``.

    Warns when a ball is narrower than the grid spacing, since it may then
    contain no node at all.
    """
    if dset.n != grid.n:
        raise ValueError("set and grid dimensions differ")
    mask = np.zeros(grid.size, dtype=bool)
    if len(dset) == 0:
        return SetIndicator(grid, mask)
    small = np.flatnonzero(dset.radii < grid.h)
    if small.size:
        j = small[np.argmin(dset.radii[small])]
        warnings.warn(
            f"grid spacing {grid.h:.3g} exceeds ball radius {dset.radii[j]:.3g} in cell {tuple(int(v) for v in dset.cells[j])}",
            ResolutionWarning, stacklevel=2)
    axis = grid.axis
    shape = grid.shape
    for z, r in zip(dset.centers, dset.radii):
        lo = np.searchsorted(axis, z - r, side="left")
        hi = np.searchsorted(axis, z + r, side="right")
        if np.any(hi <= lo):
            continue
        sub = np.meshgrid(*[axis[a:b] - c for a, b, c in zip(lo, hi, z)], indexing="ij")
        inside = sum(s**2 for s in sub) <= r * r
        idx = np.nonzero(inside)
        flat = np.ravel_multi_index(tuple(i + a for i, a in zip(idx, lo)), shape)
        mask[flat] = True
    return SetIndicator(grid, mask)


def thickness(ind: SetIndicator, scale: float) -> dict:
    """Smallest fraction of a grid-aligned cube of side ``scale`` covered by the set.

    Cubes contain ``m = round(scale / h)`` nodes per side and are translated one
    node at a time; the result carries the discretization error ``2 h sqrt(n) / scale``.
    """
    g = ind.grid
    if not (0 < scale <= 2 * g.L):
        raise ValueError("scale must lie in (0, 2L]")
    m = max(1, min(g.N, int(round(scale / g.h))))
    counts = ind.mask.reshape(g.shape).astype(np.int64)
    for ax in range(g.n):
        c = np.cumsum(counts, axis=ax)
        pad = [(0, 0)] * g.n
        pad[ax] = (1, 0)
        c = np.pad(c, pad)
        upper = np.take(c, np.arange(m, g.N + 1), axis=ax)
        lower = np.take(c, np.arange(0, g.N + 1 - m), axis=ax)
        counts = upper - lower
    frac = counts / float(m**g.n)
    flat = int(np.argmin(frac))
    corner = np.unravel_index(flat, frac.shape)
    center = [float(g.axis[c] + 0.5 * (m - 1) * g.h) for c in corner]
    return {
        "gamma_est": float(frac.reshape(-1)[flat]),
        "worst_cube_center": center,
        "nodes_per_side": m,
        "discretization_error": float(2 * g.h * np.sqrt(g.n) / scale),
    }
