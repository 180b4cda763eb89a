"""Dirichlet-to-Neumann maps at spectral parameters below the spectrum.

`dtn_direct` assembles the discrete map column by column from boundary-value
solves.  `dtn_difference_from_spectra` evaluates the same object as a
difference of two truncated partial-fraction series driven purely by
measured spectral data

    u_{q,f} = sum_k (lambda_k - lambda)^(-1) c_k(f) phi_k,
    c_k(f) = sum_i integral N_{2m-1-i}(phi_k) f_i dS,

where the boundary operators N reduce on flat edges to signed normal
derivatives reconstructed from the stored traces.  Only differences of two
datasets are ever formed; the individual series is not exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import BoundaryData, RectGrid, TraceSet
from .operators import DiscreteOperator, ResolventError, full_field, neumann_traces, solve_bvp
from .dataset import SpectralDataset


@dataclass
class DtNMatrix:
    lam: float
    m: int
    matrix: np.ndarray       # (m * n_boundary) x (m * n_boundary)
    provenance: str = "direct"

    @property
    def norm(self) -> float:
        """Largest singular value in the h-weighted discrete boundary norm.

        The weight is uniform over non-corner nodes, so it cancels between
        domain and range and the plain spectral norm is returned.
        """
        return float(np.linalg.norm(self.matrix, 2))

    def apply(self, f: BoundaryData) -> TraceSet:
        stacked = self.matrix @ f.values.ravel()
        nb = self.matrix.shape[0] // self.m
        return TraceSet(stacked.reshape(self.m, nb))


def dtn_direct(op: DiscreteOperator, lam: float) -> DtNMatrix:
    """Columns are traces of boundary-value solves over the nodal hat basis."""
    grid = op.grid
    nb = grid.n_boundary
    cols = np.zeros((op.m * nb, op.m * nb))
    lam0 = op.ensure_lambda0()
    if lam > lam0:
        raise ResolventError(f"lambda={lam} above certified bound {lam0}")
    for comp in range(op.m):
        for b in range(nb):
            vals = np.zeros((op.m, nb))
            vals[comp, b] = 1.0
            u = solve_bvp(op, lam, BoundaryData(vals))
            tr = neumann_traces(u, grid, op.m)
            cols[:, comp * nb + b] = tr.values.ravel()
    return DtNMatrix(lam=float(lam), m=op.m, matrix=cols, provenance="direct")


# -- spectral series -------------------------------------------------------

def boundary_operator_traces(traces: np.ndarray, m: int) -> np.ndarray:
    """N_{2m-1-i}(phi) for i = 0..m-1 from stored traces, flat-edge reductions.

    m = 1: N_1(phi) = -d_nu phi.
    m = 2: N_3(phi) = d_nu^3 phi, N_2(phi) = -d_nu^2 phi.
    Returns rows indexed by i (the Dirichlet component the operator pairs
    with), shape matching the input.
    """
    if m == 1:
        return -traces[..., 0:1, :]
    if m == 2:
        n3 = traces[..., 1:2, :]
        n2 = -traces[..., 0:1, :]
        return np.concatenate([n3, n2], axis=-2)
    raise ValueError("flat-edge boundary operators implemented for m in {1, 2}")


def series_coefficients(ds: SpectralDataset, f: BoundaryData) -> np.ndarray:
    """c_k(f) = sum_i integral N_{2m-1-i}(phi_k) f_i dS for every record."""
    if f.m != ds.m:
        raise ValueError("boundary data component count mismatch")
    h = ds.grid.h
    tr = ds.trace_tensor()                       # (K, m, B)
    nops = boundary_operator_traces(tr, ds.m)    # (K, m, B), row i pairs with f_i
    return h * np.einsum("kib,ib->k", nops, f.values)


def _check_compatible(ds1: SpectralDataset, ds2: SpectralDataset):
    if ds1.m != ds2.m:
        raise ValueError("datasets have different m")
    if ds1.grid.descriptor() != ds2.grid.descriptor():
        raise ValueError("datasets live on different grids")
    if ds1.mask != ds2.mask:
        raise ValueError(f"incomplete-data masks differ: {ds1.mask} vs {ds2.mask}")


def dtn_difference_from_spectra(ds1: SpectralDataset, ds2: SpectralDataset, lam: float, f: BoundaryData, K: int | None = None) -> TraceSet:
    """Traces of u_{q1,f} - u_{q2,f} from the two spectral series.

    Evaluates the truncated partial-fraction sum for each dataset and
    returns the difference; K limits the number of modes used (default: the
    spec-side choice of 4x the stacked boundary unknown count, capped by the
    available records).
    """
    _check_compatible(ds1, ds2)
    lam_min = min(ds1.min_lambda, ds2.min_lambda)
    if lam > lam_min - 1.0:
        raise ResolventError(f"lambda={lam} must be at most {lam_min - 1.0}")
    if K is None:
        K = 4 * ds1.m * ds1.grid.n_boundary
    out = None
    for sign, ds in ((1.0, ds1), (-1.0, ds2)):
        use = min(K, len(ds.records))
        lams = ds.lambdas()[:use]
        coeff = series_coefficients(ds, f)[:use]
        weights = coeff / (lams - lam)
        tr = ds.trace_tensor()[:use]
        part = np.einsum("k,kib->ib", weights, tr)
        out = sign * part if out is None else out + sign * part
    return TraceSet(out)


@dataclass
class DecayRow:
    lam: float
    norm: float
    slope_so_far: float


@dataclass
class DecayTable:
    m: int
    epsilon: float
    rows: list

    @property
    def fitted_slope(self) -> float:
        return self.rows[-1].slope_so_far

    @property
    def expected_rate(self) -> float:
        """Reference decay exponent epsilon / (2m) for the log-log slope."""
        return -self.epsilon / (2.0 * self.m)

    def norms(self):
        return [r.norm for r in self.rows]

    def to_csv(self) -> str:
        lines = ["lambda,norm,slope_so_far"]
        for r in self.rows:
            lines.append(f"{r.lam:.17g},{r.norm:.17g},{r.slope_so_far:.17g}")
        return "\n".join(lines) + "\n"


def decay_study(op1: DiscreteOperator, op2: DiscreteOperator, lambda_schedule, epsilon: float = 0.1) -> DecayTable:
    """Operator-norm proxy of the direct DtN difference along a lambda schedule."""
    lams = [float(l) for l in lambda_schedule]
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda schedule must be strictly decreasing")
    if op1.m != op2.m:
        raise ValueError("operators have different m")
    rows = []
    logs = []
    for lam in lams:
        diff = dtn_direct(op1, lam).matrix - dtn_direct(op2, lam).matrix
        norm = float(np.linalg.norm(diff, 2))
        logs.append((math.log(abs(lam)), math.log(norm) if norm > 0 else float("-inf")))
        if len(logs) >= 2 and all(np.isfinite(v) for _, v in logs):
            slope = float(np.polyfit([a for a, _ in logs], [b for _, b in logs], 1)[0])
        else:
            slope = float("nan")
        rows.append(DecayRow(lam=lam, norm=norm, slope_so_far=slope))
    return DecayTable(m=op1.m, epsilon=epsilon, rows=rows)
