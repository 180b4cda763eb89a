"""Finite-difference forward solver for (-Laplace)^m + q on a rectangle.

m = 1 uses the 5-point Laplacian with Dirichlet elimination.  m = 2 squares
the 5-point stencil; the clamped conditions u = d_nu u = 0 enter through
mirror ghost values, which keeps the matrix symmetric and adds +2/h^4 to the
diagonal per adjacent edge.  Inhomogeneous Dirichlet-side data is imposed by
eliminating the same boundary/ghost couplings into the right-hand side, so a
boundary-value solve is consistent with the assembled matrix by
construction.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .grids import (
    EDGE_NAMES,
    EDGE_NORMALS,
    BoundaryData,
    GridError,
    RectGrid,
    TraceSet,
    boundary_laplacian_traces,
    extract_traces,
)
from .symbols import laplacian_symbol, polyharmonic_symbol

DENSE_EIGEN_CUTOFF = 3000  # below this, take the full dense decomposition


class ResolventError(RuntimeError):
    """lambda is not safely below the bottom of the discrete spectrum."""


class NumericalError(RuntimeError):
    pass


@dataclass
class EigenPair:
    index: int          # 1-based
    lam: float
    phi: np.ndarray     # interior grid function (nx-2, ny-2), unit discrete-L2 norm


@dataclass
class DiscreteOperator:
    m: int
    grid: RectGrid
    q: np.ndarray                      # interior potential (nx-2, ny-2)
    matrix: sp.csr_matrix              # symmetric, interior unknowns
    certified_lambda0: float | None = None
    _factors: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def symbol(self):
        return laplacian_symbol(2) if self.m == 1 else polyharmonic_symbol(2, self.m)

    @property
    def kind(self) -> str:
        return "laplacian" if self.m == 1 else "polyharmonic"

    def factorization(self, lam: float):
        """Cached sparse LU of (A - lam I); shared across solves at one lambda."""
        key = float(lam)
        with self._lock:
            if key not in self._factors:
                shifted = (self.matrix - lam * sp.identity(self.n, format="csr")).tocsc()
                self._factors[key] = spla.splu(shifted)
            return self._factors[key]

    def ensure_lambda0(self) -> float:
        """Certified value below the smallest eigenvalue (lambda_1 - 1)."""
        if self.certified_lambda0 is None:
            if self.n <= DENSE_EIGEN_CUTOFF:
                lam1 = float(np.min(eigh(self.matrix.toarray(), eigvals_only=True, subset_by_index=[0, 0])))
            else:
                sigma = float(self.q.min()) - 1.0
                lam1 = float(spla.eigsh(self.matrix, k=1, sigma=sigma, which="LM", return_eigenvectors=False)[0])
            self.certified_lambda0 = lam1 - 1.0
        return self.certified_lambda0


def _interior_index(grid: RectGrid, i, j):
    return (i - 1) * (grid.ny - 2) + (j - 1)


def _negative_laplacian(grid: RectGrid) -> sp.csr_matrix:
    nxi, nyi = grid.nx - 2, grid.ny - 2
    h2 = grid.h**2
    tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nxi, nxi))
    ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nyi, nyi))
    return (sp.kron(tx, sp.identity(nyi)) + sp.kron(sp.identity(nxi), ty)).tocsr() / h2


def assemble(m: int, q, grid: RectGrid) -> DiscreteOperator:
    """Discretize (-Laplace)^m + q with homogeneous Dirichlet-side conditions."""
    if m not in (1, 2):
        raise ValueError("only m = 1 and m = 2 are discretized (API reserves larger m)")
    if grid.nx < 2 * m + 3 or grid.ny < 2 * m + 3:
        raise GridError(f"grid too coarse for m={m}: need at least {2 * m + 3} nodes per side")
    q = np.asarray(q, dtype=float)
    if q.shape != (grid.nx - 2, grid.ny - 2):
        raise ValueError("potential must be given on interior nodes")
    lap = _negative_laplacian(grid)
    if m == 1:
        a = lap + sp.diags(q.ravel())
    else:
        corr = np.zeros((grid.nx - 2, grid.ny - 2))
        corr[0, :] += 1.0
        corr[-1, :] += 1.0
        corr[:, 0] += 1.0
        corr[:, -1] += 1.0
        a = (lap @ lap) + sp.diags(2.0 * corr.ravel() / grid.h**4) + sp.diags(q.ravel())
    a = a.tocsr()
    asym = abs(a - a.T)
    if asym.nnz and asym.max() != 0.0:
        raise NumericalError("assembled matrix is not symmetric")
    return DiscreteOperator(m=m, grid=grid, q=q, matrix=a)


def boundary_rhs(op: DiscreteOperator, f: BoundaryData) -> np.ndarray:
    """Right-hand side vector so that (A - lam) u = rhs imposes gamma(u) = f.

    Scatters each known boundary/ghost value into the interior rows whose
    stencil touches it; this mirrors the eliminations used in `assemble`.
    """
    grid = op.grid
    if f.m != op.m:
        raise ValueError(f"boundary data has {f.m} components, operator needs {op.m}")
    if f.values.shape[1] != grid.n_boundary:
        raise ValueError("boundary data length mismatch")
    dtype = complex if np.iscomplexobj(f.values) or np.iscomplexobj(f.corners) else float
    rhs = np.zeros(op.n, dtype=dtype)
    h = grid.h
    sl = grid.edge_slices()
    nyi = grid.ny - 2

    for edge in EDGE_NAMES:
        bi, bj = grid.edge_nodes(edge)
        d = (-int(EDGE_NORMALS[edge][0]), -int(EDGE_NORMALS[edge][1]))
        t = (abs(d[1]), abs(d[0]))  # unit tangent along the edge
        f0 = f.values[0, sl[edge]]
        if op.m == 1:
            idx = _interior_index(grid, bi + d[0], bj + d[1])
            np.add.at(rhs, idx, f0 / h**2)
        else:
            f1 = f.values[1, sl[edge]]
            h4 = h**4
            idx1 = _interior_index(grid, bi + d[0], bj + d[1])
            np.add.at(rhs, idx1, 8.0 * f0 / h4 - 2.0 * f1 / h**3)
            idx2 = _interior_index(grid, bi + 2 * d[0], bj + 2 * d[1])
            np.add.at(rhs, idx2, -f0 / h4)
            for s in (+1, -1):
                ri, rj = bi + d[0] + s * t[0], bj + d[1] + s * t[1]
                inside = (ri >= 1) & (ri <= grid.nx - 2) & (rj >= 1) & (rj <= grid.ny - 2)
                idx3 = _interior_index(grid, ri[inside], rj[inside])
                np.add.at(rhs, idx3, -2.0 * f0[inside] / h4)

    if op.m == 2:
        # corner Dirichlet values are diagonal neighbors of one interior node each
        corner_rows = ((1, 1), (grid.nx - 2, 1), (grid.nx - 2, grid.ny - 2), (1, grid.ny - 2))
        for c, (ri, rj) in enumerate(corner_rows):
            rhs[_interior_index(grid, ri, rj)] += -2.0 * f.corners[0, c] / h**4
    return rhs


def _solve_factored(factor, rhs: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(rhs):
        return factor.solve(rhs.real) + 1j * factor.solve(rhs.imag)
    return factor.solve(rhs)


def solve_bvp(op: DiscreteOperator, lam: float, f: BoundaryData) -> np.ndarray:
    """Solve (P + q - lam) u = 0 with gamma(u) = f; returns the full-grid field.

    Boundary nodes of the returned array carry the prescribed values f_0 so
    that traces can be extracted directly.
    """
    lam0 = op.ensure_lambda0()
    if lam > lam0:
        raise ResolventError(f"lambda={lam} is above the certified bound {lam0}")
    rhs = boundary_rhs(op, f)
    u_int = _solve_factored(op.factorization(lam), rhs)
    grid = op.grid
    full = np.zeros((grid.nx, grid.ny), dtype=u_int.dtype)
    full[1:-1, 1:-1] = u_int.reshape(grid.nx - 2, grid.ny - 2)
    bi, bj = grid.boundary_nodes()
    full[bi, bj] = f.values[0]
    for c, (ci, cj) in enumerate(grid.corners):
        full[ci, cj] = f.corners[0, c]
    return full


def interior_residual(op: DiscreteOperator, lam: float, u_full: np.ndarray, f: BoundaryData, collar: int = 2) -> float:
    """Relative residual of (A - lam) u = rhs at interior nodes away from a collar."""
    grid = op.grid
    u_int = u_full[1:-1, 1:-1].ravel()
    res = (op.matrix @ u_int - lam * u_int - boundary_rhs(op, f)).reshape(grid.nx - 2, grid.ny - 2)
    core = res[collar:-collar or None, collar:-collar or None]
    denom = np.linalg.norm(u_int) * (abs(lam) + op.matrix.max()) + 1e-300
    return float(np.linalg.norm(core) / denom)


def eigen_decompose(op: DiscreteOperator, K: int) -> list[EigenPair]:
    """First K Dirichlet eigenpairs, ascending, discrete-L2 orthonormal.

    Dense decomposition for small problems; shift-invert Lanczos when only a
    thin slice of a large spectrum is needed.  Sets `certified_lambda0`.
    """
    if K < 1 or K > op.n:
        raise ValueError(f"K must be in [1, {op.n}]")
    use_dense = op.n <= DENSE_EIGEN_CUTOFF or K > op.n // 6
    if use_dense:
        vals, vecs = eigh(op.matrix.toarray(), subset_by_index=[0, K - 1])
    else:
        sigma = float(op.q.min()) - 1.0
        try:
            vals, vecs = spla.eigsh(op.matrix, k=K, sigma=sigma, which="LM")
        except spla.ArpackNoConvergence as exc:  # pragma: no cover
            raise NumericalError(f"shift-invert iteration did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    h = op.grid.h
    pairs = []
    for k in range(K):
        v = vecs[:, k]
        # canonical sign: largest-magnitude interior component positive
        v = v * np.sign(v[np.argmax(np.abs(v))] or 1.0)
        phi = (v / h).reshape(op.grid.nx - 2, op.grid.ny - 2)
        res = np.linalg.norm(op.matrix @ v - vals[k] * v)
        if res > 1e-8 * (1.0 + abs(vals[k])):
            raise NumericalError(f"eigen residual {res:.2e} too large at k={k + 1}")
        pairs.append(EigenPair(index=k + 1, lam=float(vals[k]), phi=phi))
    op.certified_lambda0 = pairs[0].lam - 1.0
    return pairs


def neumann_traces(u_full: np.ndarray, grid: RectGrid, m: int) -> TraceSet:
    """Traces (d_nu^m u, ..., d_nu^{2m-1} u) at non-corner boundary nodes."""
    orders = list(range(m, 2 * m))
    return TraceSet(extract_traces(grid, u_full, orders))


def full_field(grid: RectGrid, interior: np.ndarray, f: BoundaryData | None = None) -> np.ndarray:
    """Embed an interior field in a full-grid array (zero boundary by default)."""
    full = np.zeros((grid.nx, grid.ny), dtype=np.asarray(interior).dtype)
    full[1:-1, 1:-1] = interior
    if f is not None:
        bi, bj = grid.boundary_nodes()
        full[bi, bj] = f.values[0]
        for c, (ci, cj) in enumerate(grid.corners):
            full[ci, cj] = f.corners[0, c]
    return full


def green_pairing(m: int, u_full: np.ndarray, v_full: np.ndarray, grid: RectGrid) -> complex:
    """Boundary form matching (P u, v) - (u, P v) for the rectangle.

    m = 1:  integral of (-d_nu u) conj(v) + u conj(d_nu v).
    m = 2:  integral of d_nu(Lap u) conj(v) - Lap u conj(d_nu v)
            + d_nu u conj(Lap v) - u conj(d_nu Lap v),
    with boundary Laplacians split into normal and tangential stencils.
    Trapezoid weights vanish at corners.
    """
    bi, bj = grid.boundary_nodes()
    ub, vb = u_full[bi, bj], v_full[bi, bj]
    du = extract_traces(grid, u_full, [1])[0]
    dv = extract_traces(grid, v_full, [1])[0]
    if m == 1:
        integrand = -du * np.conj(vb) + ub * np.conj(dv)
    elif m == 2:
        lap_u, dnu_lap_u = boundary_laplacian_traces(grid, u_full)
        lap_v, dnu_lap_v = boundary_laplacian_traces(grid, v_full)
        integrand = (
            dnu_lap_u * np.conj(vb)
            - lap_u * np.conj(dv)
            + du * np.conj(lap_v)
            - ub * np.conj(dnu_lap_v)
        )
    else:
        raise ValueError("green_pairing implemented for m in {1, 2}")
    return complex(grid.boundary_quadrature(integrand))


def weyl_fit(eigenvalues, k_range) -> float:
    """Least-squares slope of log(lambda_k) against log(k) over k in k_range."""
    lo, hi = k_range
    ks = np.arange(lo, hi + 1)
    if len(ks) < 5:
        raise ValueError("need at least 5 eigenvalues for a slope fit")
    if hi > len(eigenvalues):
        raise ValueError("k_range exceeds the computed spectrum")
    lam = np.asarray([eigenvalues[k - 1] for k in ks], dtype=float)
    if np.any(lam <= 0):
        raise ValueError("slope fit requires positive eigenvalues")
    slope, _ = np.polyfit(np.log(ks), np.log(lam), 1)
    return float(slope)
