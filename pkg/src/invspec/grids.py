"""Uniform rectangle grids with boundary bookkeeping.

The domain is a rectangle [0, Lx] x [0, Ly] with an (nx, ny) node grid and
equal spacing h in both directions.  Boundary functions live on the
non-corner boundary nodes in a fixed edge-major order (bottom, right, top,
left; nodes by increasing coordinate).  Corner nodes are excluded from all
quadratures and trace extraction; the only place corner values enter is the
Dirichlet-value coupling of the fourth-order solver, so `BoundaryData`
carries them in a side channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# edge order and outward normals; nodes on each edge run by increasing coordinate
EDGE_NAMES = ("bottom", "right", "top", "left")
EDGE_NORMALS = {"bottom": (0.0, -1.0), "right": (1.0, 0.0), "top": (0.0, 1.0), "left": (-1.0, 0.0)}

# one-sided stencils on layers 0,1,2,... inward from the boundary, O(h^2):
#   outward normal derivative d_nu = -d_inward
D1_IN = np.array([-1.5, 2.0, -0.5])                 # d_in / h
D2_IN = np.array([2.0, -5.0, 4.0, -1.0])            # d_in^2 / h^2
D3_IN = np.array([-2.5, 9.0, -12.0, 7.0, -1.5])     # d_in^3 / h^3
D1_IN_OFFSET = np.array([0.0, -2.5, 4.0, -1.5])     # d_in / h from layers 1..3 only


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RectGrid:
    """Tensor grid on [0, lx] x [0, ly] with square cells."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError("need at least 3 nodes per direction")
        hx = self.lx / (self.nx - 1)
        hy = self.ly / (self.ny - 1)
        if abs(hx - hy) > 1e-14 * max(hx, hy):
            raise GridError(f"cells must be square: hx={hx}, hy={hy}")

    @property
    def h(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.lx, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.ly, self.ny)

    @property
    def n_interior(self) -> int:
        return (self.nx - 2) * (self.ny - 2)

    # -- node sets -------------------------------------------------------

    def interior_mesh(self):
        """Coordinate arrays (X, Y) of interior nodes, shape (nx-2, ny-2)."""
        return np.meshgrid(self.x[1:-1], self.y[1:-1], indexing="ij")

    def full_mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def corners(self):
        """Corner (i, j) indices in the order bl, br, tr, tl."""
        return ((0, 0), (self.nx - 1, 0), (self.nx - 1, self.ny - 1), (0, self.ny - 1))

    def edge_nodes(self, edge: str):
        """(i, j) index arrays of the non-corner nodes of one edge."""
        nx, ny = self.nx, self.ny
        ii = np.arange(1, nx - 1)
        jj = np.arange(1, ny - 1)
        if edge == "bottom":
            return ii, np.zeros_like(ii)
        if edge == "top":
            return ii, np.full_like(ii, ny - 1)
        if edge == "left":
            return np.zeros_like(jj), jj
        if edge == "right":
            return np.full_like(jj, nx - 1), jj
        raise GridError(f"unknown edge {edge!r}")

    @property
    def n_boundary(self) -> int:
        """Number of non-corner boundary nodes."""
        return 2 * (self.nx - 2) + 2 * (self.ny - 2)

    def boundary_nodes(self):
        """(i, j) arrays over all non-corner boundary nodes, edge-major order."""
        iis, jjs = [], []
        for edge in EDGE_NAMES:
            ii, jj = self.edge_nodes(edge)
            iis.append(ii)
            jjs.append(jj)
        return np.concatenate(iis), np.concatenate(jjs)

    def boundary_coords(self):
        ii, jj = self.boundary_nodes()
        return self.x[ii], self.y[jj]

    def edge_slices(self):
        """Edge name -> slice into the flat boundary vector."""
        out = {}
        start = 0
        for edge in EDGE_NAMES:
            n = (self.nx - 2) if edge in ("bottom", "top") else (self.ny - 2)
            out[edge] = slice(start, start + n)
            start += n
        return out

    def boundary_normals(self):
        """Outward unit normals per boundary node, shape (2, n_boundary)."""
        cols = []
        for edge in EDGE_NAMES:
            n = (self.nx - 2) if edge in ("bottom", "top") else (self.ny - 2)
            nv = np.array(EDGE_NORMALS[edge])
            cols.append(np.tile(nv[:, None], (1, n)))
        return np.concatenate(cols, axis=1)

    def inward_layers(self, edge: str, depth: int):
        """(i, j) index arrays of shape (depth, n_edge): layer 0 is the edge itself."""
        ii, jj = self.edge_nodes(edge)
        nxm, nym = self.nx - 1, self.ny - 1
        layers_i, layers_j = [], []
        di, dj = -int(EDGE_NORMALS[edge][0]), -int(EDGE_NORMALS[edge][1])
        for s in range(depth):
            layers_i.append(ii + s * di)
            layers_j.append(jj + s * dj)
        li, lj = np.array(layers_i), np.array(layers_j)
        if li.min() < 0 or lj.min() < 0 or li.max() > nxm or lj.max() > nym:
            raise GridError("grid too coarse for the requested stencil depth")
        return li, lj

    def boundary_quadrature(self, values: np.ndarray) -> complex:
        """Trapezoid rule over the boundary with zero weight at corners."""
        v = np.asarray(values)
        if v.shape[-1] != self.n_boundary:
            raise GridError("boundary vector length mismatch")
        return self.h * v.sum(axis=-1)

    def interior_integral(self, field: np.ndarray) -> complex:
        """h^2-weighted sum over interior nodes of an (nx-2, ny-2) field."""
        return self.h**2 * np.asarray(field).sum()

    def interior_norm(self, field: np.ndarray) -> float:
        """Discrete L2 norm over interior nodes."""
        return float(np.sqrt(self.h**2 * np.sum(np.abs(field) ** 2)))

    def descriptor(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly}

    @staticmethod
    def from_descriptor(d: dict) -> "RectGrid":
        return RectGrid(nx=int(d["nx"]), ny=int(d["ny"]), lx=float(d["lx"]), ly=float(d["ly"]))


@dataclass
class BoundaryData:
    """Dirichlet-side data (f_0, ..., f_{m-1}) on non-corner boundary nodes.

    f_i approximates the i-th outward normal derivative.  `corners` holds the
    component values at the four corner nodes (bl, br, tr, tl); only the
    0-th component's corner values are consumed (by the fourth-order
    Dirichlet coupling).
    """

    values: np.ndarray  # (m, n_boundary)
    corners: np.ndarray = None  # (m, 4)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values))
        if self.corners is None:
            self.corners = np.zeros((self.values.shape[0], 4), dtype=self.values.dtype)
        else:
            self.corners = np.atleast_2d(np.asarray(self.corners))
        if self.corners.shape != (self.values.shape[0], 4):
            raise GridError("corner block must have shape (m, 4)")
        if not np.all(np.isfinite(self.values.view(float))):
            raise GridError("boundary data must be finite")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def from_function(grid: RectGrid, m: int, fn):
        """Sample gamma(u) = (u, d_nu u, ..., d_nu^{m-1} u) of a closed-form field.

        `fn(x, y, order, normal)` returns the order-th outward normal
        derivative at (x, y) for the given outward normal.
        """
        bx, by = grid.boundary_coords()
        normals = grid.boundary_normals()
        vals = np.empty((m, grid.n_boundary), dtype=complex)
        for i in range(m):
            vals[i] = fn(bx, by, i, normals)
        (x0, x1), (y0, y1) = (0.0, grid.lx), (0.0, grid.ly)
        cx = np.array([x0, x1, x1, x0])
        cy = np.array([y0, y0, y1, y1])
        corners = np.empty((m, 4), dtype=complex)
        dummy_normal = np.zeros((2, 4))
        for i in range(m):
            corners[i] = fn(cx, cy, i, dummy_normal) if i == 0 else 0.0
        return BoundaryData(vals, corners)


@dataclass
class TraceSet:
    """Neumann-side traces (d_nu^m u, ..., d_nu^{2m-1} u) on non-corner boundary nodes."""

    values: np.ndarray  # (m, n_boundary), orders m .. 2m-1

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values))
        if not np.all(np.isfinite(self.values.view(float))):
            raise GridError("traces must be finite")

    @property
    def m(self) -> int:
        return self.values.shape[0]


def plane_wave_boundary_data(grid: RectGrid, m: int, zeta) -> BoundaryData:
    """gamma(e^{i zeta . x}): normal derivatives are (i zeta . nu)^k e^{i zeta . x}."""
    zeta = np.asarray(zeta, dtype=complex)

    def fn(x, y, order, normals):
        phase = np.exp(1j * (zeta[0] * x + zeta[1] * y))
        if order == 0:
            return phase
        fac = (1j * (zeta[0] * normals[0] + zeta[1] * normals[1])) ** order
        return fac * phase

    return BoundaryData.from_function(grid, m, fn)


def extract_traces(grid: RectGrid, field: np.ndarray, orders) -> np.ndarray:
    """One-sided normal-derivative traces of a full-grid field.

    `field` has shape (nx, ny) (boundary values included); `orders` is a list
    of derivative orders from {1, 2, 3}.  Returns (len(orders), n_boundary).
    Accuracy is O(h^2) on smooth fields.
    """
    h = grid.h
    stencils = {1: (D1_IN, 1), 2: (D2_IN, 2), 3: (D3_IN, 3)}
    out = np.zeros((len(orders), grid.n_boundary), dtype=field.dtype)
    sl = grid.edge_slices()
    for edge in EDGE_NAMES:
        depth = max(len(stencils[r][0]) for r in orders)
        li, lj = grid.inward_layers(edge, depth)
        layer_vals = field[li, lj]  # (depth, n_edge)
        for k, r in enumerate(orders):
            coeffs, hpow = stencils[r]
            d_in = coeffs @ layer_vals[: len(coeffs)] / h**hpow
            out[k, sl[edge]] = (-1.0) ** r * d_in
    return out


def boundary_laplacian_traces(grid: RectGrid, field: np.ndarray):
    """(Laplacian, d_nu Laplacian) of a smooth full-grid field on the boundary.

    The boundary Laplacian splits into d_in^2 + d_tan^2 with one-sided
    normal and in-edge tangential stencils (one-sided next to corners).  The
    normal derivative of the Laplacian is taken from interior 5-point
    Laplacian layers 1..3 to keep a single smooth error field.
    """
    h = grid.h
    lap_b = np.zeros(grid.n_boundary, dtype=field.dtype)
    dnu_lap = np.zeros(grid.n_boundary, dtype=field.dtype)
    sl = grid.edge_slices()

    lap_full = np.full_like(field, np.nan)
    lap_full[1:-1, 1:-1] = (
        field[:-2, 1:-1] + field[2:, 1:-1] + field[1:-1, :-2] + field[1:-1, 2:] - 4.0 * field[1:-1, 1:-1]
    ) / h**2

    for edge in EDGE_NAMES:
        li, lj = grid.inward_layers(edge, 4)
        layers = field[li, lj]
        d2_in = D2_IN @ layers / h**2
        edge_vals = layers[0]
        d2_tan = _tangential_second(edge_vals, h)
        lap_b[sl[edge]] = d2_in + d2_tan
        lap_layers = lap_full[li[1:], lj[1:]]  # interior layers 1..3
        d_in_lap = D1_IN_OFFSET[1:] @ lap_layers / h
        dnu_lap[sl[edge]] = -d_in_lap
    return lap_b, dnu_lap


def _tangential_second(vals: np.ndarray, h: float) -> np.ndarray:
    """Second derivative along an edge; one-sided at the nodes next to corners."""
    n = len(vals)
    out = np.empty_like(vals)
    if n >= 4:
        out[1:-1] = (vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / h**2
        out[0] = (2.0 * vals[0] - 5.0 * vals[1] + 4.0 * vals[2] - vals[3]) / h**2
        out[-1] = (2.0 * vals[-1] - 5.0 * vals[-2] + 4.0 * vals[-3] - vals[-4]) / h**2
    elif n == 3:
        out[:] = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
    else:
        raise GridError("edge too short for tangential stencils")
    return out
