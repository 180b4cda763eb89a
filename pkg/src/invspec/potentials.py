"""Named analytic potential recipes, sampled on interior grid nodes."""

from __future__ import annotations

import numpy as np

from .grids import RectGrid


def zero(grid: RectGrid) -> np.ndarray:
    return np.zeros((grid.nx - 2, grid.ny - 2))


def constant(grid: RectGrid, value: float = 1.0) -> np.ndarray:
    return np.full((grid.nx - 2, grid.ny - 2), float(value))


def sine(grid: RectGrid, amplitude: float = 1.0, kx: int = 1, ky: int = 1) -> np.ndarray:
    """amplitude * sin(kx pi x / lx) sin(ky pi y / ly); vanishes on the boundary."""
    xx, yy = grid.interior_mesh()
    return amplitude * np.sin(kx * np.pi * xx / grid.lx) * np.sin(ky * np.pi * yy / grid.ly)


def bump(grid: RectGrid, amplitude: float = 1.0, x0: float = None, y0: float = None, radius: float = None) -> np.ndarray:
    """Smooth compactly supported bump, identically zero outside the radius."""
    x0 = grid.lx / 2.0 if x0 is None else x0
    y0 = grid.ly / 2.0 if y0 is None else y0
    radius = 0.35 * min(grid.lx, grid.ly) if radius is None else radius
    xx, yy = grid.interior_mesh()
    r2 = ((xx - x0) ** 2 + (yy - y0) ** 2) / radius**2
    out = np.zeros_like(xx)
    inside = r2 < 1.0
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def gaussian(grid: RectGrid, amplitude: float = 1.0, x0: float = None, y0: float = None, sigma: float = 0.15) -> np.ndarray:
    x0 = grid.lx / 2.0 if x0 is None else x0
    y0 = grid.ly / 2.0 if y0 is None else y0
    xx, yy = grid.interior_mesh()
    return amplitude * np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2.0 * sigma**2))


RECIPES = {
    "zero": zero,
    "constant": constant,
    "sine": sine,
    "bump": bump,
    "gaussian": gaussian,
}


def resolve(grid: RectGrid, spec: dict | None) -> np.ndarray:
    """Build a potential from {"name": ..., other kwargs}; None means zero."""
    if spec is None:
        return zero(grid)
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in RECIPES:
        raise ValueError(f"unknown potential recipe {name!r}; known: {sorted(RECIPES)}")
    return RECIPES[name](grid, **spec)
