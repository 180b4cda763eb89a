"""Sparse multivariate polynomial symbols with complex evaluation.

A symbol is a constant-coefficient polynomial p(xi) = sum_a c_a xi^a on R^n,
holomorphically continued to C^n by evaluating monomials factor-wise.  The
module provides the handful of operations the characteristic-vector and
correction-equation machinery needs: evaluation (scalars and lattices),
multi-index derivatives, the Hormander weight

    weight(p, xi) = ( sum_{|a| <= order} |p^(a)(xi)|^2 )^(1/2),

and the shifted symbol p(. + zeta) - p(zeta), which has zero constant term
by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

COEFF_DROP = 1e-300  # coefficients below this magnitude are not stored
EQ_TOL = 1e-12       # coefficient-wise tolerance for symbol equality


@dataclass(frozen=True)
class MultiIndex:
    """Exponent tuple a = (a_1, ..., a_n) of non-negative integers."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if len(self.exponents) < 1:
            raise ValueError("multi-index needs at least one entry")
        if any(e < 0 or int(e) != e for e in self.exponents):
            raise ValueError(f"multi-index entries must be non-negative integers: {self.exponents}")
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))

    @property
    def dimension(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if self.dimension != other.dimension:
            raise ValueError("dimension mismatch in multi-index addition")
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def factorial(self) -> int:
        out = 1
        for e in self.exponents:
            out *= math.factorial(e)
        return out


class Symbol:
    """Constant-coefficient polynomial symbol on R^n, order-bounded.

    Coefficients are stored sparsely as a sorted association list keyed by
    exponent tuple.  Instances are immutable; all operations return new
    symbols.
    """

    __slots__ = ("dimension", "order", "_coeffs")

    def __init__(self, dimension: int, order: int, coeffs: dict):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if order < 0:
            raise ValueError("order must be >= 0")
        clean = {}
        for key, val in coeffs.items():
            exps = key.exponents if isinstance(key, MultiIndex) else tuple(int(e) for e in key)
            if len(exps) != dimension:
                raise ValueError(f"multi-index {exps} does not match dimension {dimension}")
            if sum(exps) > order:
                raise ValueError(f"multi-index {exps} exceeds order {order}")
            val = complex(val)
            if abs(val) < COEFF_DROP:
                continue
            clean[exps] = clean.get(exps, 0.0) + val
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_coeffs", tuple(sorted(clean.items())))

    def __setattr__(self, name, value):
        raise AttributeError("Symbol is immutable")

    def items(self):
        """Sorted (exponent tuple, coefficient) pairs."""
        return self._coeffs

    @property
    def constant_term(self) -> complex:
        zero = (0,) * self.dimension
        for exps, c in self._coeffs:
            if exps == zero:
                return c
        return 0.0 + 0.0j

    def is_real(self, tol: float = EQ_TOL) -> bool:
        return all(abs(c.imag) <= tol for _, c in self._coeffs)

    def is_zero(self, tol: float = EQ_TOL) -> bool:
        return all(abs(c) <= tol for _, c in self._coeffs)

    def __repr__(self):
        terms = ", ".join(f"{exps}: {c:g}" for exps, c in self._coeffs[:6])
        more = " ..." if len(self._coeffs) > 6 else ""
        return f"Symbol(n={self.dimension}, order={self.order}, {{{terms}{more}}})"


def symbols_close(a: Symbol, b: Symbol, tol: float = EQ_TOL) -> bool:
    """Coefficient-wise comparison with absolute tolerance."""
    if a.dimension != b.dimension:
        return False
    keys = {k for k, _ in a.items()} | {k for k, _ in b.items()}
    da, db = dict(a.items()), dict(b.items())
    return all(abs(da.get(k, 0.0) - db.get(k, 0.0)) <= tol for k in keys)


def evaluate(sym: Symbol, zeta) -> complex:
    """Evaluate the symbol at a complex n-vector, monomials computed factor-wise."""
    z = np.asarray(zeta, dtype=complex)
    if z.shape != (sym.dimension,):
        raise ValueError(f"expected a vector of length {sym.dimension}, got shape {z.shape}")
    total = 0.0 + 0.0j
    for exps, c in sym.items():
        term = c
        for zi, e in zip(z, exps):
            if e:
                term = term * zi**e
        total += term
    return complex(total)


def evaluate_grid(sym: Symbol, coords) -> np.ndarray:
    """Vectorized evaluation at many points.

    `coords` has shape (n, ...); the result has the trailing shape.  Power
    tables are built per coordinate so each monomial costs one multiply per
    point.
    """
    coords = np.asarray(coords, dtype=complex)
    if coords.shape[0] != sym.dimension:
        raise ValueError("leading axis of coords must equal the symbol dimension")
    max_exp = [0] * sym.dimension
    for exps, _ in sym.items():
        for i, e in enumerate(exps):
            max_exp[i] = max(max_exp[i], e)
    powers = []
    for i in range(sym.dimension):
        tab = [np.ones_like(coords[i])]
        for _ in range(max_exp[i]):
            tab.append(tab[-1] * coords[i])
        powers.append(tab)
    out = np.zeros(coords.shape[1:], dtype=complex)
    for exps, c in sym.items():
        term = np.full(coords.shape[1:], c, dtype=complex)
        for i, e in enumerate(exps):
            if e:
                term = term * powers[i][e]
        out += term
    return out


def derivative(sym: Symbol, alpha) -> Symbol:
    """Iterated partial derivative d^alpha applied to the coefficient map."""
    a = alpha.exponents if isinstance(alpha, MultiIndex) else tuple(int(e) for e in alpha)
    if len(a) != sym.dimension:
        raise ValueError("multi-index dimension mismatch")
    out = {}
    for exps, c in sym.items():
        if any(e < ai for e, ai in zip(exps, a)):
            continue
        fac = 1
        new = []
        for e, ai in zip(exps, a):
            # falling factorial e (e-1) ... (e-ai+1)
            for k in range(ai):
                fac *= e - k
            new.append(e - ai)
        out[tuple(new)] = out.get(tuple(new), 0.0) + c * fac
    return Symbol(sym.dimension, sym.order, out)


def all_multiindices(dimension: int, max_degree: int):
    """All exponent tuples with total degree <= max_degree, sorted."""
    out = []
    for total in range(max_degree + 1):
        for comb in itertools.combinations_with_replacement(range(dimension), total):
            exps = [0] * dimension
            for i in comb:
                exps[i] += 1
            out.append(tuple(exps))
    return sorted(set(out))


def derivative_table(sym: Symbol):
    """All non-zero derivatives p^(a) for |a| <= order, as (a, Symbol) pairs.

    Degrees above the polynomial order vanish identically, so the cap is
    exact; includes a = 0 (the symbol itself).
    """
    table = []
    for a in all_multiindices(sym.dimension, sym.order):
        d = derivative(sym, a)
        if d.items():
            table.append((a, d))
    return table


def tilde_norm(sym: Symbol, xi) -> float:
    """Hormander weight: l2 norm over all derivative evaluations at real xi."""
    total = 0.0
    for _, d in derivative_table(sym):
        total += abs(evaluate(d, xi)) ** 2
    return math.sqrt(total)


def tilde_norm_grid(sym: Symbol, coords) -> np.ndarray:
    """Vectorized Hormander weight over a point cloud of shape (n, ...)."""
    coords = np.asarray(coords, dtype=complex)
    total = np.zeros(coords.shape[1:], dtype=float)
    for _, d in derivative_table(sym):
        total += np.abs(evaluate_grid(d, coords)) ** 2
    return np.sqrt(total)


def shifted_symbol(sym: Symbol, zeta) -> Symbol:
    """The shifted symbol xi -> p(xi + zeta) - p(zeta).

    Built from the Leibniz expansion sum_{|a| >= 1} p^(a)(zeta) / a! xi^a, so
    the constant term is exactly zero.
    """
    z = np.asarray(zeta, dtype=complex)
    if z.shape != (sym.dimension,):
        raise ValueError("shift vector dimension mismatch")
    out = {}
    for a, d in derivative_table(sym):
        if sum(a) == 0:
            continue
        c = evaluate(d, z) / MultiIndex(a).factorial()
        out[a] = c
    return Symbol(sym.dimension, sym.order, out)


def laplacian_symbol(dimension: int = 2) -> Symbol:
    """Symbol |xi|^2 of the (negative) Laplacian."""
    coeffs = {}
    for i in range(dimension):
        exps = [0] * dimension
        exps[i] = 2
        coeffs[tuple(exps)] = 1.0
    sym = Symbol(dimension, 2, coeffs)
    _check_elliptic(sym)
    return sym


def polyharmonic_symbol(dimension: int = 2, m: int = 2) -> Symbol:
    """Symbol |xi|^(2m) of the m-th power of the negative Laplacian."""
    if m < 1:
        raise ValueError("m must be >= 1")
    coeffs = {}
    for comb in itertools.combinations_with_replacement(range(dimension), m):
        # multinomial expansion of (sum_i xi_i^2)^m
        counts = [0] * dimension
        for i in comb:
            counts[i] += 1
        coef = math.factorial(m)
        for c in counts:
            coef //= math.factorial(c)
        exps = tuple(2 * c for c in counts)
        coeffs[exps] = coeffs.get(exps, 0.0) + coef
    sym = Symbol(dimension, 2 * m, coeffs)
    _check_elliptic(sym)
    return sym


def operator_symbol(kind: str, dimension: int = 2, m: int = 1) -> Symbol:
    if kind == "laplacian":
        return laplacian_symbol(dimension)
    if kind == "polyharmonic":
        return polyharmonic_symbol(dimension, m)
    raise ValueError(f"unknown operator kind {kind!r}")


def principal_part(sym: Symbol) -> Symbol:
    top = {a: c for a, c in sym.items() if sum(a) == sym.order}
    return Symbol(sym.dimension, sym.order, top)


def _check_elliptic(sym: Symbol, samples: int = 32) -> None:
    """Positivity of the principal part on a sample of unit vectors."""
    top = principal_part(sym)
    rng = np.random.default_rng(7)
    for _ in range(samples):
        v = rng.standard_normal(sym.dimension)
        v /= np.linalg.norm(v)
        val = evaluate(top, v)
        if val.real <= 0 or abs(val.imag) > 1e-10 * abs(val):
            raise ValueError("principal symbol is not positive on the unit sphere")
