"""Finite-difference discretization of a box domain (0, L1) [x (0, L2)].

Dirichlet grids use interior nodes ``x_i = i*h`` (boundary values are zero
and never stored); Neumann grids use cell centres ``x_i = (i + 1/2)*h`` with
mirror ghosts. Both closures give an M-matrix for ``I - dt*D*Lap``.

A field with ``d`` components is a plain ``(d, n_nodes)`` float array. Nodes
of a 2D grid are flattened in C order (x index major).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARY_CONDITIONS = (DIRICHLET, NEUMANN)


def _normalize_bc(bc: str) -> str:
    key = str(bc).strip().lower()
    if key not in BOUNDARY_CONDITIONS:
        raise GridError(
            f"unsupported boundary condition {bc!r}; expected one of {', '.join(BOUNDARY_CONDITIONS)}"
        )
    return key


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    lengths: tuple[float, ...]
    n_cells: tuple[int, ...]
    bc: str
    spacing: tuple[float, ...] = field(init=False)
    axes: tuple[np.ndarray, ...] = field(init=False, repr=False)
    axis_weights: tuple[np.ndarray, ...] = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        spacing, axes, weights = [], [], []
        for L, n in zip(self.lengths, self.n_cells):
            if self.bc == DIRICHLET:
                h = L / (n + 1)
                x = h * np.arange(1, n + 1)
                w = np.full(n, h)
                # end nodes also own the half cell next to the wall
                w[0] += 0.5 * h
                w[-1] += 0.5 * h
            else:
                h = L / n
                x = h * (np.arange(n) + 0.5)
                w = np.full(n, h)
            for arr in (x, w):
                arr.setflags(write=False)
            spacing.append(h)
            axes.append(x)
            weights.append(w)
        qw = weights[0] if self.dim == 1 else np.outer(weights[0], weights[1]).ravel()
        qw.setflags(write=False)
        object.__setattr__(self, "spacing", tuple(spacing))
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "axis_weights", tuple(weights))
        object.__setattr__(self, "quad_weights", qw)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n_cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.n_cells))

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def h_max(self) -> float:
        return max(self.spacing)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, n_nodes)``."""
        if self.dim == 1:
            out = self.axes[0][None, :].copy()
        else:
            X, Y = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
            out = np.vstack([X.ravel(), Y.ravel()])
        out.setflags(write=False)
        return out

    def laplacian_1d(self, axis: int) -> sp.csr_matrix:
        return _laplacian_1d(self.n_cells[axis], self.spacing[axis], self.bc)

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Discrete Laplacian acting on flattened single-component node values."""
        if self.dim == 1:
            return self.laplacian_1d(0)
        nx, ny = self.n_cells
        Lx, Ly = self.laplacian_1d(0), self.laplacian_1d(1)
        return (sp.kron(Lx, sp.identity(ny)) + sp.kron(sp.identity(nx), Ly)).tocsr()

    def summary(self) -> str:
        dims = "x".join(str(n) for n in self.n_cells)
        ext = "x".join(f"{L:g}" for L in self.lengths)
        return f"{self.bc} {dims} nodes on {ext}"


def _laplacian_1d(n: int, h: float, bc: str) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    if bc == NEUMANN:
        main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return (sp.diags([off, main, off], [-1, 0, 1]) / h**2).tocsr()


def build_grid(lengths, n_cells, bc=DIRICHLET) -> SpatialGrid:
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    n_cells = tuple(int(n) for n in np.atleast_1d(n_cells))
    if len(lengths) not in (1, 2):
        raise GridError(f"only 1D and 2D boxes are supported, got dim={len(lengths)}")
    if len(n_cells) != len(lengths):
        raise GridError(f"lengths has {len(lengths)} axes but n_cells has {len(n_cells)}")
    if any(not np.isfinite(L) or L <= 0 for L in lengths):
        raise GridError(f"lengths must be positive, got {lengths}")
    if any(n < 3 for n in n_cells):
        raise GridError(f"need at least 3 cells per axis, got {n_cells}")
    return SpatialGrid(lengths, n_cells, _normalize_bc(bc))


def as_field(grid: SpatialGrid, values, d: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a ``(d, n_nodes)`` float array, checking its size."""
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != grid.n_nodes:
        raise GridError(f"field of shape {arr.shape} does not match {grid.n_nodes} nodes")
    if d is not None and arr.shape[0] != d:
        raise GridError(f"field has {arr.shape[0]} components, expected {d}")
    return arr


def constant_field(grid: SpatialGrid, values) -> np.ndarray:
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return np.repeat(values[:, None], grid.n_nodes, axis=1)


def sine_field(grid: SpatialGrid, amplitudes) -> np.ndarray:
    """``a_i * prod_axis sin(pi x / L)``: the principal Dirichlet mode per component."""
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    mode = np.ones(grid.n_nodes)
    for a in range(grid.dim):
        mode = mode * np.sin(np.pi * grid.nodes[a] / grid.lengths[a])
    return amplitudes[:, None] * mode[None, :]


def apply_diffusion(grid: SpatialGrid, component_values, D: float) -> np.ndarray:
    """Return ``D * Lap_h u`` for one component."""
    if D <= 0:
        raise GridError(f"diffusion coefficient must be positive, got {D}")
    u = np.asarray(component_values, dtype=float)
    if u.shape != (grid.n_nodes,):
        raise GridError(f"expected {grid.n_nodes} node values, got shape {u.shape}")
    return D * (grid.laplacian @ u)


def principal_eigenvalue(grid: SpatialGrid) -> float:
    """Smallest eigenvalue of -Lap on the box (continuous operator, closed form)."""
    if grid.bc == NEUMANN:
        return 0.0
    return float(sum((np.pi / L) ** 2 for L in grid.lengths))


def integrate_nodes(grid: SpatialGrid, values) -> np.ndarray:
    """Quadrature of node values; works on the last axis."""
    return np.asarray(values) @ grid.quad_weights


def gradient_sq(grid: SpatialGrid, fld) -> float:
    """Sum over components of the discrete Dirichlet energy ``int |grad u|^2``.

    Differences live on cell edges; wall edges see the zero ghost under
    Dirichlet and carry no flux under Neumann.
    """
    u = np.atleast_2d(np.asarray(fld, dtype=float))
    total = 0.0
    for comp in u:
        arr = comp.reshape(grid.shape)
        for a in range(grid.dim):
            h = grid.spacing[a]
            if grid.bc == DIRICHLET:
                pad = [(0, 0)] * grid.dim
                pad[a] = (1, 1)
                diffs = np.diff(np.pad(arr, pad), axis=a)
            else:
                diffs = np.diff(arr, axis=a)
            sq = (diffs / h) ** 2 * h
            if grid.dim == 2:
                other = grid.axis_weights[1 - a]
                sq = sq @ other if a == 0 else other @ sq
            total += float(np.sum(sq))
    return total


def field_norm(grid: SpatialGrid, fld, kind: str = "L2", p=None):
    """Discrete norms of a field.

    ``kind`` is one of ``L2``, ``Linf``, ``H1`` (seminorm) or ``Lp``; for ``Lp``
    the return value is the vector of per-component integrals ``int |u_i|^p_i``.
    """
    u = np.atleast_2d(np.asarray(fld, dtype=float))
    kind = kind.upper()
    if kind == "L2":
        return float(np.sqrt(np.sum(integrate_nodes(grid, u**2))))
    if kind == "LINF":
        return float(np.max(np.abs(u))) if u.size else 0.0
    if kind in ("H1", "H1-SEMINORM"):
        return float(np.sqrt(gradient_sq(grid, u)))
    if kind == "LP":
        if p is None:
            raise GridError("Lp norm needs exponents p")
        p = np.broadcast_to(np.asarray(p, dtype=float), (u.shape[0],))
        if np.any(p < 1):
            raise GridError(f"Lp exponents must be >= 1, got {p}")
        return integrate_nodes(grid, np.abs(u) ** p[:, None])
    raise GridError(f"unknown norm kind {kind!r}")
