"""Power sums, Jacobians, Schur polynomials, and dense recovery.

Schur values come from the Jacobi-Trudi determinant in complete homogeneous
symmetric polynomials, so points with repeated coordinates need no limiting
arguments. Dense recovery converts power sums to elementary symmetric
values by the Newton identities (in exact rational arithmetic whenever the
input is rational) and reads the multiset off the roots of the associated
monic polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (ExponentSet, InvalidInputError, Measurement,
                   NumericalError, as_point)
from .poly import cpow
from .roots import univariate_roots

__all__ = [
    "Partition",
    "eval_powersums",
    "jacobian",
    "complete_homogeneous",
    "schur_eval",
    "minor_factorization",
    "newton_identities",
    "newton_dense_recover",
    "ramification_profile",
]


@dataclass(frozen=True)
class Partition:
    """Weakly decreasing nonnegative integer parts; trailing zeros allowed."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 0 for p in parts):
            raise InvalidInputError("partition parts must be nonnegative")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise InvalidInputError("partition parts must be weakly decreasing")
        object.__setattr__(self, "parts", parts)

    @property
    def nonzero(self):
        return tuple(p for p in self.parts if p > 0)

    @property
    def size(self):
        return sum(self.parts)

    def is_zero(self):
        return all(p == 0 for p in self.parts)


def eval_powersums(x, A: ExponentSet, weights=None) -> Measurement:
    """Measurement vector with entries sum_i w_i * x_i**a_j.

    Weights default to all ones; powers are computed by repeated squaring.
    """
    x = as_point(x)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise InvalidInputError("weights must have one entry per coordinate")
        if np.any(w <= 0):
            raise InvalidInputError("weights must be positive")
    else:
        w = np.ones(len(x))
    vals = [complex(np.sum(w * cpow(x, a))) for a in A.exponents]
    if np.all(x.imag == 0):
        field = "nonnegative" if np.all(x.real >= 0) else "real"
        return Measurement(tuple(v.real for v in vals), field)
    return Measurement(tuple(vals), "complex")


def powersum_values(x, A: ExponentSet, weights=None) -> np.ndarray:
    """Like eval_powersums but returns a bare complex array (batched rows ok)."""
    X = np.atleast_2d(np.asarray(x, dtype=complex))
    w = np.ones(X.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    out = np.stack([np.sum(w * cpow(X, a), axis=1) for a in A.exponents], axis=1)
    return out[0] if np.asarray(x).ndim == 1 else out


def jacobian(x, A: ExponentSet, weights=None) -> np.ndarray:
    """m x n matrix with entry (j, i) equal to a_j * w_i * x_i**(a_j - 1)."""
    x = as_point(x)
    w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float)
    return np.stack([a * w * cpow(x, a - 1) for a in A.exponents])


def complete_homogeneous(x, kmax: int) -> np.ndarray:
    """Values h_0(x), ..., h_kmax(x) of the complete homogeneous polynomials."""
    x = as_point(x)
    h = np.zeros(kmax + 1, dtype=complex)
    h[0] = 1.0
    # one variable at a time: H_j(k) = H_{j-1}(k) + x_j * H_j(k-1)
    for xi in x:
        for k in range(1, kmax + 1):
            h[k] = h[k] + xi * h[k - 1]
    return h


def schur_eval(lam: Partition, x) -> complex:
    """Schur polynomial value s_lambda(x_1, ..., x_n) by Jacobi-Trudi."""
    x = as_point(x)
    parts = lam.nonzero
    ell = len(parts)
    if ell == 0:
        return 1.0 + 0.0j
    if ell > len(x):
        raise InvalidInputError("partition is longer than the point")
    kmax = parts[0] + ell
    h = complete_homogeneous(x, kmax)

    def hval(k):
        return h[k] if 0 <= k <= kmax else 0.0

    mat = np.array([[hval(parts[i] - (i + 1) + (j + 1)) for j in range(ell)]
                    for i in range(ell)], dtype=complex)
    return complex(np.linalg.det(mat))


def minor_factorization(x, A: ExponentSet, rows, cols):
    """A Jacobian minor and its closed-form factorization, both evaluated.

    rows are exponent indices and cols coordinate indices (1-based, strictly
    increasing). The factored form is
    prod(a_rows) * (prod x_cols)**(a_min-1) * Vandermonde(x_cols) * s_lambda,
    with lambda read off the selected exponents minus the staircase. The two
    values must agree to 1e-8 relative.
    """
    x = as_point(x)
    rows = tuple(int(r) for r in rows)
    cols = tuple(int(c) for c in cols)
    mu = len(rows)
    if mu != len(cols):
        raise InvalidInputError("need as many rows as columns")
    if any(b <= a for a, b in zip(rows, rows[1:])) or any(
            b <= a for a, b in zip(cols, cols[1:])):
        raise InvalidInputError("row and column indices must be strictly increasing")
    if rows[0] < 1 or rows[-1] > A.m or cols[0] < 1 or cols[-1] > len(x):
        raise InvalidInputError("index out of range")

    J = jacobian(x, A)
    sub = J[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])]
    minor_value = complex(np.linalg.det(sub))

    sel = [A.exponents[r - 1] for r in rows]
    xs = x[[c - 1 for c in cols]]
    lam = Partition(tuple(sel[mu - k] - sel[0] - (mu - k) for k in range(1, mu + 1)))
    vander = 1.0 + 0.0j
    for i in range(mu):
        for j in range(i + 1, mu):
            vander *= (xs[j] - xs[i])
    factored = (math.prod(sel)
                * cpow(np.prod(xs), sel[0] - 1)
                * vander
                * schur_eval(lam, xs))
    factored = complex(factored)
    scale = max(abs(minor_value), abs(factored), 1e-300)
    if abs(minor_value - factored) / scale > 1e-8:
        raise NumericalError(
            "minor and factorization disagree",
            {"minor": minor_value, "factored": factored, "lambda": lam.parts})
    return minor_value, factored


def newton_identities(powersums):
    """Elementary symmetric values e_1..e_n from power sums p_1..p_n.

    Uses Fractions exactly when every input is rational (int, Fraction, or
    a float that is exactly representable), otherwise complex arithmetic.
    """
    ps = list(powersums)
    n = len(ps)
    exact = all(isinstance(p, (int, float, Fraction)) and
                not isinstance(p, bool) for p in ps) \
        and all(math.isfinite(p) if isinstance(p, float) else True for p in ps)
    if exact:
        ps = [Fraction(p) for p in ps]
        e = [Fraction(0)] * (n + 1)
        e[0] = Fraction(1)
    else:
        ps = [complex(p) for p in ps]
        e = [0j] * (n + 1)
        e[0] = 1.0 + 0j
    for k in range(1, n + 1):
        acc = e[0] * 0
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * ps[i - 1]
        e[k] = acc / k
    return e[1:]


def newton_dense_recover(c: Measurement) -> np.ndarray:
    """Recover the coordinate multiset from the dense power sums p_1..p_n.

    Only valid when the exponents are exactly 1..n; the result reproduces
    the input power sums to 1e-8 relative.
    """
    n = c.m
    vals = list(c.values)
    if all(v.imag == 0 for v in vals):
        e = newton_identities([v.real for v in vals])
    else:
        e = newton_identities(vals)
    e = [complex(v) for v in e]
    # monic polynomial t^n - e1 t^{n-1} + e2 t^{n-2} - ...
    coeffs = [(-1) ** (n - k) * e[n - k - 1] for k in range(n)] + [1.0 + 0j]
    try:
        pairs = univariate_roots(coeffs, tol=1e-12, max_iters=600)
    except NumericalError as err:
        raise NumericalError("dense recovery root finding failed",
                             err.diagnostics) from err
    roots = []
    for r, mult in pairs:
        roots.extend([r] * mult)
    out = np.array(sorted(roots, key=lambda z: (z.real, z.imag)), dtype=complex)
    # verify the round trip
    A = ExponentSet(tuple(range(1, n + 1)))
    back = powersum_values(out, A)
    scale = np.maximum(np.abs(np.array([complex(v) for v in vals])), 1.0)
    resid = np.max(np.abs(back - np.array([complex(v) for v in vals])) / scale)
    if resid > 1e-8:
        raise NumericalError("dense recovery residual too large",
                             {"residual": float(resid), "roots": out})
    return out


def ramification_profile(A: ExponentSet, n: int):
    """Degree of the nontrivial ramification factor and whether it is constant.

    degree = sum(a_i - 1) - n(n-1)/2 - n(a_1 - 1); the Schur factor of the
    full Jacobian minor is constant exactly when the induced partition is
    zero, which coincides with degree 0.
    """
    if A.m != n:
        raise InvalidInputError("profile requires as many exponents as coordinates")
    exps = A.exponents
    degree = sum(a - 1 for a in exps) - n * (n - 1) // 2 - n * (exps[0] - 1)
    lam = Partition(tuple(exps[n - k] - exps[0] - (n - k) for k in range(1, n + 1)))
    return {"schur_constant": lam.is_zero(), "degree": degree, "partition": lam}
