"""Finite-difference Schrödinger operators ``-Laplace + V`` on a box and their spectra.

Grid functions are stored as flat arrays in C order over the ``N^n`` interior
nodes, and the inner product is ``h^n * sum(u * v)``. Eigenvectors in
:class:`SpectralData` are normalized for that inner product.
"""

from __future__ import annotations

import enum
import heapq
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Boundary",
    "Grid",
    "DiscreteOperator",
    "SpectralData",
    "EigensolveError",
    "InsufficientSpectrumError",
    "InsufficientSpectrumWarning",
    "discretize",
    "eigensolve",
    "spectral_project",
    "semigroup_apply",
    "default_halfwidth",
    "export_spectrum",
    "load_spectrum_vectors",
]

DENSE_LIMIT = 3000
MAX_UNKNOWNS = 5_000_000


class EigensolveError(RuntimeError):
    """Iterative eigensolver failed to converge."""


class InsufficientSpectrumError(ValueError):
    """The computed part of the spectrum does not reach the requested level."""


class InsufficientSpectrumWarning(UserWarning):
    pass


class Boundary(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on ``[-L, L]^n`` with ``N`` unknowns per dimension.

    Dirichlet grids place the unknowns at ``-L + (i + 1) h`` with
    ``h = 2L / (N + 1)``; periodic grids at ``-L + i h`` with ``h = 2L / N``.
    """

    n: int
    L: float
    N: int
    boundary: Boundary = Boundary.DIRICHLET

    def __post_init__(self):
        if self.n < 1 or self.N < 3 or not (self.L > 0):
            raise ValueError("grid needs n >= 1, N >= 3 and L > 0")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def h(self) -> float:
        if self.boundary is Boundary.PERIODIC:
            return 2.0 * self.L / self.N
        return 2.0 * self.L / (self.N + 1)

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def axis(self) -> np.ndarray:
        off = 0 if self.boundary is Boundary.PERIODIC else 1
        return -self.L + self.h * (np.arange(self.N) + off)

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(N^n, n)``."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.n)

    def radii(self, center=None) -> np.ndarray:
        pts = self.points()
        if center is not None:
            pts = pts - np.asarray(center, dtype=float)
        return np.linalg.norm(pts, axis=-1)

    def inner(self, u, v) -> float:
        return float(self.cell_volume * np.vdot(u, v).real)

    def norm(self, u) -> float:
        return float(np.sqrt(self.cell_volume * np.vdot(u, u).real))

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N, "boundary": self.boundary.value, "h": self.h}


def default_halfwidth(lam_max: float, c: float, beta: float, n: int = 1, C_hat: float = 1.0) -> float:
    """Box half-width large enough to hold eigenfunctions below ``lam_max``."""
    from .constants import localization_radius

    rho = localization_radius(lam_max, c, beta, n, C_hat)
    turning = ((lam_max + 2.0) / c) ** (1.0 / beta)
    return float(max(2.0 * rho, 2.0 * turning))


def _laplacian_1d(N: int, h: float, boundary: Boundary) -> sp.csr_matrix:
    main = np.full(N, 2.0 / h**2)
    off = np.full(N - 1, -1.0 / h**2)
    T = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if boundary is Boundary.PERIODIC:
        T[0, N - 1] = -1.0 / h**2
        T[N - 1, 0] = -1.0 / h**2
    return T.tocsr()


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Second-order FD discretization of ``-Laplace + V``.

    ``potential_values`` holds V at the nodes; ``separable_terms`` holds the
    one-dimensional potential samples when ``V`` is a sum of coordinate terms.
    """

    grid: Grid
    potential_values: np.ndarray
    separable_terms: Optional[tuple[np.ndarray, ...]] = None
    description: dict = field(default_factory=dict)

    @property
    def laplacian_1d(self) -> sp.csr_matrix:
        return _laplacian_1d(self.grid.N, self.grid.h, self.grid.boundary)

    @property
    def matrix(self) -> sp.csr_matrix:
        g = self.grid
        T = self.laplacian_1d
        eye = sp.identity(g.N, format="csr")
        A = sp.csr_matrix((g.size, g.size))
        for d in range(g.n):
            factors = [eye] * g.n
            factors[d] = T
            term = factors[0]
            for f in factors[1:]:
                term = sp.kron(term, f, format="csr")
            A = A + term
        return (A + sp.diags(self.potential_values)).tocsr()

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def quadratic_form(self, u: np.ndarray) -> float:
        return self.grid.inner(u, self.apply(u))


def discretize(p, grid: Grid, max_unknowns: int = MAX_UNKNOWNS) -> DiscreteOperator:
    """Sample ``p`` (a potential or scaled potential, or ``None`` for V = 0) on ``grid``."""
    if grid.size > max_unknowns:
        raise MemoryError(f"{grid.size} unknowns exceed the cap of {max_unknowns}")
    if p is None:
        return DiscreteOperator(grid, np.zeros(grid.size),
                                tuple(np.zeros(grid.N) for _ in range(grid.n)), {"kind": "zero"})
    spec = p.as_spec() if hasattr(p, "as_spec") else p
    if spec.n != grid.n:
        raise ValueError(f"potential dimension {spec.n} does not match grid dimension {grid.n}")
    values = np.asarray(spec(grid.points()), dtype=float).reshape(-1)
    sep = None
    if spec.separable is not None:
        sep = tuple(np.asarray(f(grid.axis), dtype=float) for f in spec.separable)
    return DiscreteOperator(grid, values, sep, dict(spec.description))


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Lowest eigenpairs of a discrete operator.

    ``cutoff`` is the level up to which the spectrum is known to be complete.
    ``vectors`` has shape ``(N^n, K)`` (or is ``None`` when only eigenvalues
    were requested).
    """

    grid: Grid
    values: np.ndarray
    vectors: Optional[np.ndarray]
    cutoff: float
    potential_values: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.K

    def window(self, lam: float) -> np.ndarray:
        """Indices of eigenvalues ``<= lam``."""
        return np.flatnonzero(self.values <= lam * (1 + 1e-12) + 1e-12)

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        return self.grid.cell_volume * (self.vectors.T @ f)

    def synthesize(self, coeffs: np.ndarray, idx=None) -> np.ndarray:
        V = self.vectors if idx is None else self.vectors[:, idx]
        return V @ coeffs


def _tridiagonal_eigs(diag, off, request, vectors):
    kw = {}
    if "count" in request:
        kw = dict(select="i", select_range=(0, request["count"] - 1))
    else:
        kw = dict(select="v", select_range=(-np.inf, request["cutoff"]))
    if vectors:
        w, v = sla.eigh_tridiagonal(diag, off, **kw)
        return w, v
    return sla.eigh_tridiagonal(diag, off, eigvals_only=True, **kw), None


def _dense_eigs(A, request, vectors):
    A = A.toarray()
    if "count" in request:
        kw = dict(subset_by_index=(0, request["count"] - 1))
    else:
        kw = dict(subset_by_value=(-np.inf, request["cutoff"]))
    if vectors:
        return sla.eigh(A, **kw)
    return sla.eigh(A, eigvals_only=True, **kw), None


def _sparse_eigs(A, request, vectors, sigma, maxiter):
    N = A.shape[0]

    def solve(k):
        try:
            return spla.eigsh(A, k=k, sigma=sigma, which="LM", maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            w, v = exc.eigenvalues, exc.eigenvectors
            res = np.linalg.norm(A @ v - v * w, axis=0) if w.size else np.array([])
            raise EigensolveError(
                f"ARPACK did not converge for k={k}; achieved residuals {res}") from exc

    if "count" in request:
        w, v = solve(min(request["count"], N - 2))
    else:
        k = 16
        while True:
            w, v = solve(min(k, N - 2))
            if w.max() > request["cutoff"] or k >= N - 2:
                break
            k *= 2
        keep = w <= request["cutoff"]
        w, v = w[keep], v[:, keep]
    order = np.argsort(w)
    return w[order], (v[:, order] if vectors else None)


def _tensor_eigs(op: DiscreteOperator, request, vectors):
    g = op.grid
    T = op.laplacian_1d
    factors = []
    for v1 in op.separable_terms:
        diag = T.diagonal() + v1
        off = T.diagonal(1)
        if g.boundary is Boundary.PERIODIC:
            w, V = sla.eigh((T + sp.diags(v1)).toarray())
        else:
            w, V = sla.eigh_tridiagonal(diag, off)
        factors.append((w, V))

    # enumerate index tuples in increasing order of eigenvalue sums
    start = (0,) * g.n
    heap = [(sum(f[0][0] for f in factors), start)]
    seen = {start}
    out = []
    limit = request.get("count", np.inf)
    cutoff = request.get("cutoff", np.inf)
    while heap and len(out) < limit:
        val, idx = heapq.heappop(heap)
        if val > cutoff:
            break
        out.append((val, idx))
        for d in range(g.n):
            if idx[d] + 1 < g.N:
                nxt = idx[:d] + (idx[d] + 1,) + idx[d + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (sum(factors[e][0][nxt[e]] for e in range(g.n)), nxt))
    w = np.array([v for v, _ in out])
    if not vectors:
        return w, None
    vecs = np.empty((g.size, len(out)))
    for j, (_, idx) in enumerate(out):
        col = factors[0][1][:, idx[0]]
        for d in range(1, g.n):
            col = np.kron(col, factors[d][1][:, idx[d]])
        vecs[:, j] = col
    return w, vecs


def eigensolve(op: DiscreteOperator, count: Optional[int] = None, cutoff: Optional[float] = None,
               vectors: bool = True, method: str = "auto", maxiter: Optional[int] = None) -> SpectralData:
    """Lowest eigenpairs of ``op``, either the first ``count`` or all below ``cutoff``.

    ``method`` is one of ``auto``, ``tridiagonal`` (n = 1 Dirichlet), ``tensor``
    (separable potentials), ``dense`` or ``sparse`` (shift-invert ARPACK
    Lanczos). ``auto`` picks the cheapest exact route and only falls back to
    ARPACK above :data:`DENSE_LIMIT` unknowns.
    """
    if (count is None) == (cutoff is None):
        raise ValueError("give exactly one of count or cutoff")
    g = op.grid
    if count is not None:
        if not (1 <= count <= g.size):
            raise ValueError(f"count must lie in [1, {g.size}]")
        request = {"count": int(count)}
    else:
        if not np.isfinite(cutoff):
            raise ValueError("cutoff must be finite")
        request = {"cutoff": float(cutoff)}

    if method == "auto":
        if g.n == 1 and g.boundary is Boundary.DIRICHLET:
            method = "tridiagonal"
        elif op.separable_terms is not None and g.n > 1:
            method = "tensor"
        elif g.size <= DENSE_LIMIT:
            method = "dense"
        else:
            method = "sparse"

    if method == "tridiagonal":
        T = op.laplacian_1d
        w, v = _tridiagonal_eigs(T.diagonal() + op.potential_values, T.diagonal(1), request, vectors)
    elif method == "tensor":
        if op.separable_terms is None:
            raise ValueError("tensor method needs a separable potential")
        w, v = _tensor_eigs(op, request, vectors)
    elif method == "dense":
        w, v = _dense_eigs(op.matrix, request, vectors)
    elif method == "sparse":
        sigma = float(min(op.potential_values.min(), 0.0)) - 1.0
        w, v = _sparse_eigs(op.matrix, request, vectors, sigma, maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")

    w = np.asarray(w, dtype=float)
    if v is not None:
        v = np.asarray(v, dtype=float) / np.sqrt(g.cell_volume)
    if "count" in request:
        known = float(w[-1]) if w.size else -np.inf
    else:
        known = request["cutoff"]
    return SpectralData(g, w, v, known, op.potential_values)


def spectral_project(S: SpectralData, lam: float, f: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``f`` onto the span of eigenvectors with eigenvalue ``<= lam``."""
    if lam > S.cutoff * (1 + 1e-12):
        raise InsufficientSpectrumError(
            f"spectrum known up to {S.cutoff:.6g} only; recompute with cutoff >= {lam:.6g}")
    idx = S.window(lam)
    V = S.vectors[:, idx]
    return V @ (S.grid.cell_volume * (V.T @ f))


def semigroup_apply(S: SpectralData, t: float, s: float, f: np.ndarray,
                    tail_tol: float = 1e-10) -> np.ndarray:
    """``exp(-t H^s) f`` computed on the span of ``S``.

    When ``f`` has a component outside the span, the neglected part is bounded
    by ``exp(-t lam_max^s) ||f||``; a warning reports that bound if it exceeds
    ``tail_tol``.
    """
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    if s <= 0:
        raise ValueError("fractional power must be positive")
    c = S.coefficients(f)
    mu = np.maximum(S.values, 0.0) ** s
    out = S.vectors @ (np.exp(-t * mu) * c)
    fnorm = S.grid.norm(f)
    outside = S.grid.norm(f - S.vectors @ c)
    if outside > tail_tol * max(fnorm, 1.0):
        tail = np.exp(-t * mu[-1]) * fnorm if S.K else fnorm
        if tail > tail_tol:
            warnings.warn(f"truncated spectrum: neglected tail bounded by {tail:.3e}",
                          InsufficientSpectrumWarning, stacklevel=2)
    return out


def export_spectrum(S: SpectralData, csv_path, vectors_path=None) -> None:
    """Write eigenvalues as CSV and, optionally, eigenvectors as a binary sidecar.

    The sidecar starts with one line of JSON (grid metadata, ``K``, dtype),
    followed by the vectors as little-endian float64, eigenvector-major.
    """
    with open(csv_path, "w") as fh:
        fh.write("index,eigenvalue\n")
        for k, lam in enumerate(S.values):
            fh.write(f"{k},{lam:.17g}\n")
    if vectors_path is not None:
        if S.vectors is None:
            raise ValueError("spectral data carries no eigenvectors")
        header = {"grid": S.grid.to_dict(), "K": S.K, "dtype": "<f8", "layout": "K x N^n",
                  "normalization": "h^n * sum(phi^2) = 1"}
        with open(vectors_path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
            fh.write(np.ascontiguousarray(S.vectors.T, dtype="<f8").tobytes())


def load_spectrum_vectors(vectors_path) -> tuple[dict, np.ndarray]:
    with open(vectors_path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    g = header["grid"]
    return header, data.reshape(header["K"], g["N"] ** g["n"]).T
