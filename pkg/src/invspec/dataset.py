"""The measurement data model: eigenvalues plus Neumann-side eigen-traces.

A dataset is the simulated measurement {lambda_k, traces of phi_k} with an
optional incomplete-data mask (the first M records withheld) and optional
relative Gaussian noise on the traces.  Serialization is a single
self-describing JSON text document with a content checksum; floats are
written as decimal strings with 17 significant digits, which round-trips
IEEE doubles exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .grids import RectGrid, TraceSet
from .operators import DiscreteOperator, eigen_decompose, full_field, neumann_traces

FORMAT_VERSION = 1
DEGENERACY_TOL = 1e-6


class FormatError(ValueError):
    """Corrupted, truncated, or unsupported dataset file."""


@dataclass
class SpectralRecord:
    k: int                 # 1-based mode index
    lam: float
    traces: TraceSet       # traces of phi_k, orders m..2m-1


@dataclass
class SpectralDataset:
    m: int
    grid: RectGrid
    records: list
    mask: int = 0
    noise_sigma: float = 0.0
    seed: int = 0
    degenerate_groups: list = field(default_factory=list)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        ks = [r.k for r in self.records]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise FormatError("record indices must be strictly increasing")
        lams = [r.lam for r in self.records]
        if any(b < a - 1e-9 * (1.0 + abs(a)) for a, b in zip(lams, lams[1:])):
            raise FormatError("eigenvalues must be non-decreasing")
        for r in self.records:
            if r.traces.m != self.m:
                raise FormatError("trace component count must equal m")

    @property
    def K(self) -> int:
        return self.records[-1].k if self.records else 0

    @property
    def min_lambda(self) -> float:
        return self.records[0].lam

    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    def trace_tensor(self) -> np.ndarray:
        """All traces stacked, shape (n_records, m, n_boundary)."""
        return np.array([r.traces.values for r in self.records])


def _degenerate_groups(lams) -> list:
    groups, current = [], [1]
    for idx in range(1, len(lams)):
        if abs(lams[idx] - lams[idx - 1]) < DEGENERACY_TOL * (1.0 + abs(lams[idx])):
            current.append(idx + 1)
        else:
            if len(current) > 1:
                groups.append(current)
            current = [idx + 1]
    if len(current) > 1:
        groups.append(current)
    return groups


def simulate_measurement(op: DiscreteOperator, K: int, noise_sigma: float = 0.0, seed: int = 0) -> SpectralDataset:
    """Forward model: eigen-decompose, trace each eigenfunction, optionally add noise.

    Noise is i.i.d. relative Gaussian on the trace values only; eigenvalues
    stay exact.  Eigenvector signs are canonical, so repeat runs are
    deterministic.
    """
    pairs = eigen_decompose(op, K)
    rng = np.random.default_rng(seed)
    records = []
    for p in pairs:
        traces = neumann_traces(full_field(op.grid, p.phi), op.grid, op.m)
        vals = traces.values
        if noise_sigma > 0.0:
            vals = vals * (1.0 + noise_sigma * rng.standard_normal(vals.shape))
        records.append(SpectralRecord(k=p.index, lam=p.lam, traces=TraceSet(vals)))
    return SpectralDataset(
        m=op.m,
        grid=op.grid,
        records=records,
        mask=0,
        noise_sigma=noise_sigma,
        seed=seed,
        degenerate_groups=_degenerate_groups([p.lam for p in pairs]),
    )


def mask_low_modes(ds: SpectralDataset, M: int) -> SpectralDataset:
    """Withhold the records with k <= M; masking is idempotent in max(M, old)."""
    if M >= ds.K:
        raise ValueError(f"mask M={M} must be smaller than the mode count K={ds.K}")
    kept = [r for r in ds.records if r.k > M]
    return SpectralDataset(
        m=ds.m,
        grid=ds.grid,
        records=kept,
        mask=max(M, ds.mask),
        noise_sigma=ds.noise_sigma,
        seed=ds.seed,
        degenerate_groups=ds.degenerate_groups,
        version=ds.version,
    )


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _payload(ds: SpectralDataset) -> dict:
    return {
        "m": ds.m,
        "n": 2,
        "grid": {"nx": ds.grid.nx, "ny": ds.grid.ny, "lx": _fmt(ds.grid.lx), "ly": _fmt(ds.grid.ly)},
        "mode_count": ds.K,
        "mask": ds.mask,
        "noise_sigma": _fmt(ds.noise_sigma),
        "seed": ds.seed,
        "degenerate_groups": ds.degenerate_groups,
        "records": [
            {
                "k": r.k,
                "lambda": _fmt(r.lam),
                "traces": [[_fmt(v) for v in comp] for comp in np.asarray(r.traces.values, dtype=float)],
            }
            for r in ds.records
        ],
    }


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def save(ds: SpectralDataset, path) -> None:
    payload = _payload(ds)
    doc = {"format": "invspec-spectral-dataset", "version": ds.version, "checksum": _checksum(payload), **payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load(path) -> SpectralDataset:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not a parseable dataset file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "invspec-spectral-dataset":
        raise FormatError("missing dataset format marker")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {doc.get('version')!r}")
    stated = doc.get("checksum")
    payload = {k: v for k, v in doc.items() if k not in ("format", "version", "checksum")}
    if stated != _checksum(payload):
        raise FormatError("checksum mismatch: file corrupted or edited")
    try:
        grid = RectGrid(
            nx=int(payload["grid"]["nx"]),
            ny=int(payload["grid"]["ny"]),
            lx=float(payload["grid"]["lx"]),
            ly=float(payload["grid"]["ly"]),
        )
        records = [
            SpectralRecord(
                k=int(rec["k"]),
                lam=float(rec["lambda"]),
                traces=TraceSet(np.array([[float(v) for v in comp] for comp in rec["traces"]])),
            )
            for rec in payload["records"]
        ]
        return SpectralDataset(
            m=int(payload["m"]),
            grid=grid,
            records=records,
            mask=int(payload["mask"]),
            noise_sigma=float(payload["noise_sigma"]),
            seed=int(payload["seed"]),
            degenerate_groups=[list(map(int, g)) for g in payload["degenerate_groups"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed dataset payload: {exc}") from exc
