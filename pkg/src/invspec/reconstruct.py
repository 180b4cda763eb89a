"""Potential reconstruction from spectral boundary data.

The pipeline: CGO boundary pairing -> Fourier samples of q1 - q2 ->
band-limited synthesis.  The pairing identity

    integral (q1 - q2) u_{q1,f} conj(v) dx
        = boundary pairing of the trace difference against gamma(v)

holds at every admissible lambda, not only in the limit, with f the
Dirichlet data of exp(i zeta_1 . x) and v the reference solution with data
gamma(exp(i zeta_2 . x)).  Only the Dirichlet traces of v enter the
boundary form, so each sample is evaluated from the spectral series and
closed-form plane-wave data alone; as lambda -> -infinity it tends to the
Fourier transform of q1 - q2 at xi = zeta_1 - conj(zeta_2).

The incomplete-data machinery: boundary functionals of finitely many
withheld eigenpairs become linear constraints, a shift family supplies one
more CGO candidate than scalar constraints, and the null-space combination
annihilates the withheld modes in the series; the certificate exercises
every formula on a known potential pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cgo import (
    make_pair,
    make_shift_family,
    min_lambda_magnitude,
    pad_potential,
    solve_correction_fixed_point,
)
from .dataset import SpectralDataset, mask_low_modes, simulate_measurement
from .dtn import boundary_operator_traces, series_coefficients
from .grids import BoundaryData, RectGrid, plane_wave_boundary_data
from .operators import DiscreteOperator


@dataclass
class FourierSample:
    xi: np.ndarray
    lam: float
    value: complex


@dataclass
class ConstraintSet:
    """Boundary functionals h_{k,i}, k = 1..N groups, i = 0..m-1 components."""

    functionals: np.ndarray  # (N, m, n_boundary)

    @property
    def n_groups(self) -> int:
        return self.functionals.shape[0]

    @property
    def m(self) -> int:
        return self.functionals.shape[1]

    @property
    def n_scalar(self) -> int:
        return self.n_groups * self.m


@dataclass
class ExtrapolationResult:
    value: complex        # sample at the most negative lambda (normative)
    extrapolant: complex  # fitted a in a + b |lambda|^(-1/(2m))
    spread: float         # |value - extrapolant|, reported as uncertainty


@dataclass
class ReconstructionResult:
    q_estimate: np.ndarray           # full-grid real field on the domain
    samples: list                    # FourierSample at the normative lambda
    sweeps: dict                     # lattice index -> list of (lam, value)
    spreads: dict                    # lattice index -> extrapolation spread
    imag_residue: float
    error_rel_l2: float | None = None


# -- single-sample machinery -------------------------------------------------


def _series_sample_batch(ds1: SpectralDataset, ds2: SpectralDataset, lam: float, f1_stack, f2_stack, K=None):
    """Fourier samples for a batch of frequencies at one lambda.

    f1_stack, f2_stack: (n_xi, m, B) plane-wave Dirichlet data for zeta_1
    and zeta_2.  The boundary form with vanishing Dirichlet difference data
    reads, per frequency,

        m = 1: h sum_b d_nu(u_diff) conj(f2_0),
        m = 2: h sum_b d_nu^2(u_diff) conj(f2_1) - d_nu^3(u_diff) conj(f2_0),

    and is factorized through the series modes: value(xi) =
    sum_k coef_k(f1) pair_k(f2) / (lambda_k - lambda), as the difference of
    the two datasets' sums.
    """
    h = ds1.grid.h
    m = ds1.m
    out = np.zeros(f1_stack.shape[0], dtype=complex)
    for sign, ds in ((1.0, ds1), (-1.0, ds2)):
        use = len(ds.records) if K is None else min(K, len(ds.records))
        tr = ds.trace_tensor()[:use]                      # (K, m, B)
        nops = boundary_operator_traces(tr, m)            # (K, m, B)
        coef = h * np.einsum("kib,xib->kx", nops, f1_stack)
        if m == 1:
            pw = np.conj(f2_stack[:, 0:1, :])
        else:
            pw = np.stack([np.conj(f2_stack[:, 1, :]), -np.conj(f2_stack[:, 0, :])], axis=1)
        pair = h * np.einsum("kib,xib->kx", tr, pw)
        weights = 1.0 / (ds.lambdas()[:use] - lam)
        out += sign * np.einsum("k,kx,kx->x", weights, coef, pair)
    return out


def reference_dataset(op_ref: DiscreteOperator, like: SpectralDataset) -> SpectralDataset:
    """Simulated dataset of the reference operator matching K and mask."""
    ds = simulate_measurement(op_ref, like.K)
    if like.mask > 0:
        ds = mask_low_modes(ds, like.mask)
    return ds


def fourier_sample(ds_unknown: SpectralDataset, op_ref: DiscreteOperator, xi, lam: float, ds_ref: SpectralDataset | None = None, K=None) -> FourierSample:
    """One CGO boundary-pairing sample of the Fourier data of q1 - q2.

    Equals the volume integral of (q1 - q2) u_{q1,f} conj(v) at every
    admissible lambda up to series truncation, and tends to the Fourier
    transform at xi as lambda -> -infinity.  Pass a precomputed `ds_ref`
    when sampling repeatedly; building it is the only expensive step.
    """
    xi = np.asarray(xi, dtype=float)
    m = ds_unknown.m
    pair = make_pair(m, xi, lam)
    if ds_ref is None:
        ds_ref = reference_dataset(op_ref, ds_unknown)
    grid = ds_unknown.grid
    f1 = plane_wave_boundary_data(grid, m, pair.zeta1)
    f2 = plane_wave_boundary_data(grid, m, pair.zeta2)
    value = _series_sample_batch(
        ds_unknown, ds_ref, lam, f1.values[None, :, :], f2.values[None, :, :], K=K
    )[0]
    return FourierSample(xi=xi, lam=float(lam), value=complex(value))


def lambda_extrapolate(samples, m: int = 1) -> ExtrapolationResult:
    """Endpoint value plus a fitted a + b |lambda|^(-1/(2m)) extrapolant.

    `samples` is a sequence of (lambda, value) or FourierSample, at least 3
    entries.  The endpoint (most negative lambda) is the normative value;
    the fit and the spread between the two are diagnostics.
    """
    pts = [(s.lam, s.value) if isinstance(s, FourierSample) else (float(s[0]), complex(s[1])) for s in samples]
    if len(pts) < 3:
        raise ValueError("need at least 3 schedule points")
    pts.sort(key=lambda t: t[0])  # most negative first
    lams = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    design = np.stack([np.ones_like(lams), np.abs(lams) ** (-1.0 / (2 * m))], axis=1)
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    return ExtrapolationResult(value=complex(vals[0]), extrapolant=complex(coef[0]), spread=float(abs(vals[0] - coef[0])))


# -- synthesis ----------------------------------------------------------------


def _lattice_step(grid: RectGrid) -> tuple[float, float]:
    """Frequency lattice step on the doubled periodic box."""
    return math.pi / grid.lx, math.pi / grid.ly


def lattice_points(grid: RectGrid, freq_cap: float):
    """Half-lattice representatives (including 0) with |xi| <= freq_cap."""
    sx, sy = _lattice_step(grid)
    jmax_x = int(freq_cap / sx) + 1
    jmax_y = int(freq_cap / sy) + 1
    pts = []
    for jx in range(0, jmax_x + 1):
        for jy in range(-jmax_y, jmax_y + 1):
            if jx == 0 and jy < 0:
                continue
            xi = np.array([jx * sx, jy * sy])
            if np.linalg.norm(xi) <= freq_cap:
                pts.append(((jx, jy), xi))
    return pts


def invert_fourier(samples, grid: RectGrid):
    """Band-limited synthesis of Fourier samples on the doubled box.

    `samples` maps integer lattice indices (jx, jy) to complex values (or is
    an iterable of FourierSample with on-lattice xi).  Conjugate symmetry is
    enforced: missing -j entries are filled with conjugates, and providing
    both j and -j with non-conjugate values is an error.  Returns the real
    synthesis restricted to the domain grid and the relative size of the
    discarded imaginary residue.
    """
    sx, sy = _lattice_step(grid)
    table = {}
    if isinstance(samples, dict):
        items = samples.items()
    else:
        items = []
        for s in samples:
            xi = np.asarray(s.xi, dtype=float)
            j = (round(xi[0] / sx), round(xi[1] / sy))
            if abs(j[0] * sx - xi[0]) > 1e-9 or abs(j[1] * sy - xi[1]) > 1e-9:
                raise ValueError(f"sample frequency {xi} is not on the lattice")
            items.append((j, s.value))
    for j, v in items:
        if j in table and abs(table[j] - v) > 1e-9 * (1.0 + abs(v)):
            raise ValueError(f"conflicting duplicate sample at {j}")
        table[j] = complex(v)
    for j, v in list(table.items()):
        nj = (-j[0], -j[1])
        if nj in table:
            if abs(table[nj] - np.conj(v)) > 1e-8 * (1.0 + abs(v)):
                raise ValueError(f"samples at {j} and {nj} are not conjugate-symmetric")
        else:
            table[nj] = complex(np.conj(v))
    xx, yy = grid.full_mesh()
    area_box = (2.0 * grid.lx) * (2.0 * grid.ly)
    out = np.zeros_like(xx, dtype=complex)
    for (jx, jy), v in table.items():
        out += v * np.exp(-1j * (jx * sx * xx + jy * sy * yy))
    out /= area_box
    scale = float(np.max(np.abs(out))) or 1.0
    residue = float(np.max(np.abs(out.imag)) / scale)
    return out.real, residue


# -- full pipeline ------------------------------------------------------------


@dataclass
class ReconstructConfig:
    freq_cap: float
    lambda_schedule: list
    series_modes: int | None = None   # None: every record in the dataset

    def validated(self, m: int) -> "ReconstructConfig":
        lams = [float(l) for l in self.lambda_schedule]
        if len(lams) < 1 or any(l >= 0 for l in lams):
            raise ValueError("lambda schedule must be negative")
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda schedule must be strictly decreasing")
        if m >= 2:
            need = min_lambda_magnitude(m, self.freq_cap)
            if abs(lams[0]) < need:
                raise ValueError(
                    f"least-negative lambda {lams[0]} violates the admissibility margin; "
                    f"need |lambda| >= {need:.6g} for freq_cap {self.freq_cap}"
                )
        return ReconstructConfig(self.freq_cap, lams, self.series_modes)


def default_lambda_schedule(m: int, freq_cap: float, points: int = 3) -> list:
    """Schedule derived from the frequency cap via the admissibility margin.

    For m = 1 the closed forms need no margin; the base sits at the edge of
    the double-precision dynamic range of the CGO exponential instead.
    """
    if m == 1:
        base = 1000.0 / 2.0 ** (points - 1)
    else:
        base = max(min_lambda_magnitude(m, freq_cap), 1000.0)
    return [-base * 2.0**p for p in range(points)]


def reconstruct_full(ds_unknown: SpectralDataset, op_ref: DiscreteOperator, config: ReconstructConfig, q_truth=None) -> ReconstructionResult:
    """Run the sampling lattice and schedule, extrapolate, synthesize.

    `q_truth` (interior field of q1 - q2) attaches a relative L2 error to
    the result when the ground truth is known.
    """
    m = ds_unknown.m
    config = config.validated(m)
    grid = ds_unknown.grid
    ds_ref = reference_dataset(op_ref, ds_unknown)
    pts = lattice_points(grid, config.freq_cap)
    sweeps = {j: [] for j, _ in pts}
    for lam in config.lambda_schedule:
        f1 = np.empty((len(pts), m, grid.n_boundary), dtype=complex)
        f2 = np.empty_like(f1)
        for idx, (_, xi) in enumerate(pts):
            pair = make_pair(m, xi, lam)
            f1[idx] = plane_wave_boundary_data(grid, m, pair.zeta1).values
            f2[idx] = plane_wave_boundary_data(grid, m, pair.zeta2).values
        values = _series_sample_batch(ds_unknown, ds_ref, lam, f1, f2, K=config.series_modes)
        for idx, (j, _) in enumerate(pts):
            sweeps[j].append((lam, complex(values[idx])))
    table, spreads, samples = {}, {}, []
    for (j, xi) in pts:
        ext = lambda_extrapolate(sweeps[j], m=m)
        table[j] = ext.value
        spreads[j] = ext.spread
        samples.append(FourierSample(xi=xi, lam=config.lambda_schedule[-1], value=ext.value))
    q_est, residue = invert_fourier(table, grid)
    err = None
    if q_truth is not None:
        diff = q_est[1:-1, 1:-1] - q_truth
        err = float(np.linalg.norm(diff) / (np.linalg.norm(q_truth) + 1e-300))
    return ReconstructionResult(
        q_estimate=q_est, samples=samples, sweeps=sweeps, spreads=spreads, imag_residue=residue, error_rel_l2=err
    )


# -- incomplete-data machinery -----------------------------------------------


def nullspace_vector(H: np.ndarray) -> np.ndarray:
    """Unit-norm right-singular vector of the smallest singular value.

    Ties break toward the smallest index; the first significant entry is
    made real-positive so repeated runs agree.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    _, _, vh = np.linalg.svd(H)
    c = np.conj(vh[-1])
    c = c / np.linalg.norm(c)
    mags = np.abs(c)
    lead = int(np.argmax(mags > 1e-12 * mags.max()))
    phase = c[lead] / abs(c[lead])
    return c / phase


def constrained_coefficients(candidate_traces: np.ndarray, constraints: ConstraintSet, grid: RectGrid) -> np.ndarray:
    """Null-space combination of candidates under the boundary constraints.

    `candidate_traces` has shape (L, m, n_boundary): the Dirichlet-side
    traces of each candidate solution.  Requires L = N m + 1 (one more
    candidate than scalar constraints).
    """
    L = candidate_traces.shape[0]
    if L != constraints.n_scalar + 1:
        raise ValueError(f"need exactly {constraints.n_scalar + 1} candidates, got {L}")
    h = grid.h
    # rows: (group k, component i); columns: candidate l
    H = h * np.einsum("lib,nib->nil", candidate_traces, np.conj(constraints.functionals))
    H = H.reshape(constraints.n_scalar, L)
    return nullspace_vector(H)


def constraints_from_withheld(ds_full_1: SpectralDataset, ds_full_2: SpectralDataset, M: int) -> ConstraintSet:
    """The 2mM orthogonality functionals N_{2m-1-i}(phi_k), k <= M, both datasets."""
    if M < 1:
        raise ValueError("M must be positive")
    rows = []
    for ds in (ds_full_1, ds_full_2):
        tr = ds.trace_tensor()[:M]
        rows.append(boundary_operator_traces(tr, ds.m))
    return ConstraintSet(np.concatenate(rows, axis=0))


@dataclass
class CertificateRow:
    lam: float
    c: np.ndarray
    constraint_residual: float
    annihilation_residual: float
    volume_pairing: complex
    series_tail: complex
    rel_mismatch: float


@dataclass
class CertificateReport:
    m: int
    M: int
    rows: list
    c_step_norms: list
    deconvolution: dict | None = None

    def to_jsonable(self) -> dict:
        return {
            "m": self.m,
            "M": self.M,
            "rows": [
                {
                    "lambda": r.lam,
                    "c": [[z.real, z.imag] for z in r.c],
                    "constraint_residual": r.constraint_residual,
                    "annihilation_residual": r.annihilation_residual,
                    "volume_pairing": [r.volume_pairing.real, r.volume_pairing.imag],
                    "series_k_gt_M": [r.series_tail.real, r.series_tail.imag],
                    "rel_mismatch": r.rel_mismatch,
                }
                for r in self.rows
            ],
            "c_step_norms": self.c_step_norms,
            "deconvolution": self.deconvolution,
        }


def _candidate_fields(op: DiscreteOperator, lam: float, targets):
    """Correction fields w_l for candidates u_l = exp(i t_l . x)(1 + w_l).

    Returns the box corrections and the candidates' Dirichlet traces with
    shape (L, m, n_boundary).
    """
    grid = op.grid
    q_box, _ = pad_potential(grid, op.q)
    sym = op.symbol
    w_boxes, traces = [], []
    for t in targets:
        w_box, _, _, _ = solve_correction_fixed_point(q_box, grid.h, sym, lam, t)
        w_boxes.append(w_box)
        traces.append(_cgo_boundary_data(grid, op.m, t, w_box).values)
    return w_boxes, np.array(traces)


def _combo_volume_pairing(grid: RectGrid, q_diff, c, targets, w_fields, zeta2, w2_box):
    """integral (q1 - q2) (sum_l c_l u_l) conj(u_2) with analytic phase products.

    The exponential factors are combined symbolically per candidate, so no
    intermediate exceeds the dynamic range even for very negative lambda.
    """
    xx, yy = grid.interior_mesh()
    w2 = w2_box[: grid.nx, : grid.ny][1:-1, 1:-1]
    total = 0.0 + 0.0j
    for cl, t, w_box in zip(c, targets, w_fields):
        expo = t - np.conj(zeta2)
        phase = np.exp(1j * (expo[0] * xx + expo[1] * yy))
        w_l = w_box[: grid.nx, : grid.ny][1:-1, 1:-1]
        total += cl * grid.h**2 * np.sum(q_diff * phase * (1.0 + w_l) * np.conj(1.0 + w2))
    return total


def _series_against_combo(ds1: SpectralDataset, ds2: SpectralDataset, lam, f: BoundaryData, combo_traces, k_min: int):
    """sum_{k > k_min} of the partial-fraction difference paired against the combo.

    Terms are (lambda_k - lambda)^(-1) c_k(f) g_k where g_k pairs the
    record's boundary operators against the conjugated combo Dirichlet
    traces.  Returns (tail sum, magnitude of the k <= k_min part).
    """
    h = ds1.grid.h
    total_tail = 0.0 + 0.0j
    total_head = 0.0 + 0.0j
    for sign, ds in ((1.0, ds1), (-1.0, ds2)):
        tr = ds.trace_tensor()
        nops = boundary_operator_traces(tr, ds.m)
        coef = series_coefficients(ds, f)
        g = h * np.einsum("kib,ib->k", nops, np.conj(combo_traces))
        weights = coef * g / (ds.lambdas() - lam)
        ks = np.array([r.k for r in ds.records])
        total_tail += sign * weights[ks > k_min].sum()
        total_head += sign * weights[ks <= k_min].sum()
    return total_tail, abs(total_head)


def incomplete_certificate(
    op1: DiscreteOperator,
    op2: DiscreteOperator,
    M: int,
    lambda_schedule,
    deconvolve: bool = False,
    deconv_cap: int = 2,
) -> CertificateReport:
    """Exercise the finitely-many-missing-modes formulas on a known pair.

    Both potentials are known to the harness (the constraints involve the
    withheld modes of the unknown side, so a blind version is not defined);
    the certificate checks, per integer lambda in the schedule:

    * the null-space combination satisfies all 2 m M constraints,
    * the k <= M series terms are annihilated by those constraints,
    * the k > M series tail matches the brute-force volume pairing
      integral (q1 - q2) u_combo conj(u_2).
    """
    if op1.m != op2.m or op1.grid.descriptor() != op2.grid.descriptor():
        raise ValueError("operators must share m and grid")
    m, grid = op1.m, op1.grid
    lams = [float(int(l)) for l in lambda_schedule]
    if any(b >= a for a, b in zip(lams, lams[1:])) or lams[0] >= 0:
        raise ValueError("schedule must be strictly decreasing negative integers")
    K_full = op1.n
    ds1 = simulate_measurement(op1, K_full)
    ds2 = simulate_measurement(op2, K_full)
    constraints = constraints_from_withheld(ds1, ds2, M)
    L = constraints.n_scalar + 1  # 2 m M + 1 candidates
    q_diff = op1.q - op2.q
    q1_box, _ = pad_potential(grid, op1.q)
    q2_box, _ = pad_potential(grid, op2.q)
    sym = op1.symbol

    rows = []
    cs = []
    xi0 = np.zeros(2)
    for lam in lams:
        fam = make_shift_family(m, xi0, lam, L)
        targets = fam.targets
        w_boxes, cand_traces = _candidate_fields(op1, lam, targets)
        c = constrained_coefficients(cand_traces, constraints, grid)
        H = grid.h * np.einsum("lib,nib->nil", cand_traces, np.conj(constraints.functionals)).reshape(
            constraints.n_scalar, L
        )
        resid = float(np.linalg.norm(H @ c) / max(1.0, np.linalg.norm(H)))
        combo_traces = np.einsum("l,lib->ib", c, cand_traces)

        pair0 = make_pair(m, xi0, lam)
        w2_box, _, _, _ = solve_correction_fixed_point(q2_box, grid.h, sym, lam, pair0.zeta2)
        # Dirichlet data of u2 = exp(i zeta2 . x)(1 + w2): modulus grows toward
        # one edge; the phase is closed-form so products stay relative-accurate
        f_u2 = _cgo_boundary_data(grid, m, pair0.zeta2, w2_box)
        series_tail, head = _series_against_combo(ds1, ds2, lam, f_u2, combo_traces, M)
        volume = _combo_volume_pairing(grid, q_diff, c, targets, w_boxes, pair0.zeta2, w2_box)
        # identity: integral (q1-q2) u_{q2,f} conj(combo) = series; the
        # certificate's pairing conjugates it (real potential difference)
        series_value = np.conj(series_tail)
        mism = abs(volume - series_value) / max(abs(volume), 1e-300)
        rows.append(
            CertificateRow(
                lam=lam,
                c=c,
                constraint_residual=resid,
                annihilation_residual=float(head / max(abs(series_tail), 1e-300)),
                volume_pairing=complex(volume),
                series_tail=complex(series_value),
                rel_mismatch=float(mism),
            )
        )
        cs.append(c)
    steps = [float(np.linalg.norm(a - b)) for a, b in zip(cs, cs[1:])]

    deconv = None
    if deconvolve:
        deconv = _deconvolution_demo(grid, q_diff, cs[-1], lams[-1], op1, op2, sym, deconv_cap)
    return CertificateReport(m=m, M=M, rows=rows, c_step_norms=steps, deconvolution=deconv)


def _cgo_boundary_data(grid: RectGrid, m: int, zeta, w_box) -> BoundaryData:
    """gamma of exp(i zeta . x)(1 + w) with spectral derivatives of w."""
    bi, bj = grid.boundary_nodes()
    bx, by = grid.boundary_coords()
    normals = grid.boundary_normals()
    phase = np.exp(1j * (zeta[0] * bx + zeta[1] * by))
    w_dom = w_box[: grid.nx, : grid.ny]
    w_b = w_dom[bi, bj]
    rows = [phase * (1.0 + w_b)]
    if m >= 2:
        nbx, nby = w_box.shape
        kx = 2.0 * math.pi * np.fft.fftfreq(nbx, d=grid.h)
        ky = 2.0 * math.pi * np.fft.fftfreq(nby, d=grid.h)
        w_hat = np.fft.fft2(w_box)
        wx = np.fft.ifft2(1j * kx[:, None] * w_hat)[: grid.nx, : grid.ny][bi, bj]
        wy = np.fft.ifft2(1j * ky[None, :] * w_hat)[: grid.nx, : grid.ny][bi, bj]
        it_nu = 1j * (zeta[0] * normals[0] + zeta[1] * normals[1])
        dw_nu = normals[0] * wx + normals[1] * wy
        rows.append(phase * (it_nu * (1.0 + w_b) + dw_nu))
    cx = np.array([0.0, grid.lx, grid.lx, 0.0])
    cy = np.array([0.0, 0.0, grid.ly, grid.ly])
    cphase = np.exp(1j * (zeta[0] * cx + zeta[1] * cy))
    ci = np.array([c[0] for c in grid.corners])
    cj = np.array([c[1] for c in grid.corners])
    corners = np.zeros((m, 4), dtype=complex)
    corners[0] = cphase * (1.0 + w_dom[ci, cj])
    return BoundaryData(np.stack(rows) if m >= 2 else np.array(rows), corners)


def _deconvolution_demo(grid: RectGrid, q_diff, c_tilde, lam, op1, op2, sym, cap: int) -> dict:
    """Re-extract windowed Fourier data of q1 - q2 from the limiting factor.

    The constrained products converge to (q1 - q2) Phi(x1) exp(i xi/2 . x)
    with Phi = sum_l c~_l exp(i l x1); dividing the synthesized field by Phi
    on nodes where |Phi| is not small recovers the difference there.
    """
    L = len(c_tilde)
    targets = [t for t in make_shift_family(op1.m, np.zeros(2), lam, L).targets]
    q1_box, _ = pad_potential(grid, op1.q)
    q2_box, _ = pad_potential(grid, op2.q)
    w_fields = []
    for t in targets:
        w_box, _, _, _ = solve_correction_fixed_point(q1_box, grid.h, sym, lam, t)
        w_fields.append(w_box)
    sx, sy = _lattice_step(grid)
    table = {}
    for jx in range(-cap, cap + 1):
        for jy in range(-cap, cap + 1):
            xi = 2.0 * np.array([jx * sx, jy * sy])  # doubled so xi/2 is on the lattice
            pair = make_pair(op1.m, xi, lam)
            w2_box, _, _, _ = solve_correction_fixed_point(q2_box, grid.h, sym, lam, pair.zeta2)
            val = 0.0 + 0.0j
            xx, yy = grid.interior_mesh()
            w2 = w2_box[: grid.nx, : grid.ny][1:-1, 1:-1]
            for cl, t, w_box in zip(c_tilde, targets, w_fields):
                ph = xi + (t - pair.zeta1)  # product phase xi + eta_l
                phase = np.exp(1j * (ph[0] * xx + ph[1] * yy))
                w_l = w_box[: grid.nx, : grid.ny][1:-1, 1:-1]
                val += cl * grid.h**2 * np.sum(q_diff * phase * (1.0 + w_l) * np.conj(1.0 + w2))
            table[(jx, jy)] = val
    # synthesize (q1 - q2) Phi on the xi/2 lattice, i.e. the standard lattice
    field, residue = _synthesize_complex(table, grid)
    x = grid.x[1:-1]
    phi = np.zeros(len(x), dtype=complex)
    for l, cl in enumerate(c_tilde, start=1):
        phi += cl * np.exp(1j * l * x)
    phi_grid = np.broadcast_to(phi[:, None], q_diff.shape)
    mask = np.abs(phi_grid) >= 0.05 * np.max(np.abs(phi_grid))
    recovered = np.zeros_like(q_diff, dtype=complex)
    recovered[mask] = field[1:-1, 1:-1][mask] / phi_grid[mask]
    err = float(
        np.linalg.norm((recovered.real - q_diff)[mask]) / max(np.linalg.norm(q_diff[mask]), 1e-300)
    )
    return {
        "windowed_rel_error": err,
        "excluded_nodes": int(mask.size - mask.sum()),
        "synthesis_imag_residue": residue,
    }


def _synthesize_complex(table: dict, grid: RectGrid):
    sx, sy = _lattice_step(grid)
    xx, yy = grid.full_mesh()
    area_box = 4.0 * grid.lx * grid.ly
    out = np.zeros_like(xx, dtype=complex)
    for (jx, jy), v in table.items():
        out += v * np.exp(-1j * (jx * sx * xx + jy * sy * yy))
    out /= area_box
    return out, 0.0
