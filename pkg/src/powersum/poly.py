"""Polynomial helpers shared by the solver modules.

``cpow`` is exponentiation by squaring (works on arrays), ``MPoly`` is a
sparse multivariate polynomial with exact normalized-derivative evaluation,
and ``BiPoly`` is a dense bivariate polynomial used by the resultant code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError

__all__ = ["cpow", "MPoly", "BiPoly", "polyval_ascending"]


def cpow(x, a: int):
    """x**a for a nonnegative integer a, by repeated squaring.

    Accepts scalars or arrays; exact power chains keep complex rounding
    error at O(log a) multiplications.
    """
    if a < 0:
        raise InvalidInputError("cpow expects a nonnegative exponent")
    x = np.asarray(x)
    result = np.ones_like(x)
    base = x.copy()
    while a:
        if a & 1:
            result = result * base
        a >>= 1
        if a:
            base = base * base
    return result


def polyval_ascending(coeffs, t):
    """Evaluate sum_k coeffs[k] * t**k (Horner, ascending coefficients)."""
    t = np.asarray(t)
    acc = np.zeros_like(t, dtype=complex) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * t + c
    return acc


@dataclass(frozen=True)
class MPoly:
    """Sparse multivariate polynomial: {exponent tuple: coefficient}."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], complex], ...]

    @classmethod
    def from_dict(cls, nvars, d):
        terms = tuple(sorted((tuple(int(e) for e in exps), complex(c))
                             for exps, c in d.items() if c != 0))
        for exps, _ in terms:
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise InvalidInputError(f"bad exponent tuple {exps} for {nvars} variables")
        return cls(nvars, terms)

    @classmethod
    def monomial_sum(cls, nvars, entries):
        """Build from (coeff, exps) pairs, summing repeats."""
        d = {}
        for c, exps in entries:
            key = tuple(int(e) for e in exps)
            d[key] = d.get(key, 0) + complex(c)
        return cls.from_dict(nvars, d)

    def shift(self, p):
        """The polynomial q(u) = self(p + u), recentered at the point p."""
        p = np.asarray(p, dtype=complex)
        d = {}
        for exps, c in self.terms:
            # expand prod_i (p_i + u_i)^{e_i} one variable at a time
            partial = {(): c}
            for i, e in enumerate(exps):
                nxt = {}
                pw = 1.0 + 0j
                binom = [math.comb(e, k) for k in range(e + 1)]
                powers = [cpow(p[i], e - k) for k in range(e + 1)]
                for k in range(e + 1):
                    coeff = binom[k] * powers[k]
                    for pref, pc in partial.items():
                        key = pref + (k,)
                        nxt[key] = nxt.get(key, 0) + pc * coeff
                partial = nxt
                del pw
            for key, pc in partial.items():
                d[key] = d.get(key, 0) + pc
        return MPoly.from_dict(self.nvars, d)

    def eval(self, X):
        """Evaluate at rows of X (B, nvars) -> (values, magnitude scales)."""
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        vals = np.zeros(X.shape[0], dtype=complex)
        scale = np.zeros(X.shape[0], dtype=float)
        for exps, c in self.terms:
            term = np.full(X.shape[0], c, dtype=complex)
            for i, e in enumerate(exps):
                if e:
                    term = term * cpow(X[:, i], e)
            vals += term
            scale += np.abs(term)
        return vals, scale

    def grad(self, X):
        """Gradient rows at X: (B, nvars)."""
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        g = np.zeros(X.shape, dtype=complex)
        for exps, c in self.terms:
            for i, e in enumerate(exps):
                if e == 0:
                    continue
                term = np.full(X.shape[0], c * e, dtype=complex)
                for j, ej in enumerate(exps):
                    pw = ej - 1 if j == i else ej
                    if pw:
                        term = term * cpow(X[:, j], pw)
                g[:, i] += term
        return g

    def normalized_derivatives(self, p, max_order):
        """All normalized derivatives (1/alpha!) d^alpha f at p, |alpha| <= max_order.

        Returns a dense array indexed by alpha via ``np.ravel_multi_index``
        with shape (max_order+1,) * nvars; entries with |alpha| > max_order
        are present but unused by callers.
        """
        # normalized derivatives are the coefficients of the shifted polynomial
        shifted = self.shift(p)
        out = np.zeros((max_order + 1,) * self.nvars, dtype=complex)
        for exps, c in shifted.terms:
            if all(e <= max_order for e in exps):
                out[exps] = c
        return out

    @property
    def total_degree(self):
        return max((sum(e) for e, _ in self.terms), default=0)


class BiPoly:
    """Dense bivariate polynomial, coeffs[i, j] multiplying x**i * y**j."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2:
            raise InvalidInputError("bivariate coefficients must be a 2-d array")
        self.coeffs = c

    @classmethod
    def from_terms(cls, entries):
        dx = max(i for _, (i, _) in entries)
        dy = max(j for _, (_, j) in entries)
        c = np.zeros((dx + 1, dy + 1), dtype=complex)
        for coeff, (i, j) in entries:
            c[i, j] += coeff
        return cls(c)

    @property
    def deg_x(self):
        nz = np.nonzero(np.any(self.coeffs != 0, axis=1))[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def deg_y(self):
        nz = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def total_degree(self):
        idx = np.nonzero(self.coeffs)
        if idx[0].size == 0:
            return 0
        return int(np.max(idx[0] + idx[1]))

    def is_zero(self, tol=0.0):
        m = np.max(np.abs(self.coeffs)) if self.coeffs.size else 0.0
        return m <= tol

    def eval(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        # Horner in y of Horner-in-x rows
        acc = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for j in range(self.coeffs.shape[1] - 1, -1, -1):
            row = np.zeros_like(acc)
            col = self.coeffs[:, j]
            for i in range(self.coeffs.shape[0] - 1, -1, -1):
                row = row * x + col[i]
            acc = acc * y + row
        return acc

    def eval_scale(self, x, y):
        """Magnitude of the evaluation, term by term (for relative residuals)."""
        x = np.abs(np.asarray(x, dtype=complex))
        y = np.abs(np.asarray(y, dtype=complex))
        acc = np.zeros(np.broadcast(x, y).shape, dtype=float)
        for j in range(self.coeffs.shape[1] - 1, -1, -1):
            row = np.zeros_like(acc)
            col = np.abs(self.coeffs[:, j])
            for i in range(self.coeffs.shape[0] - 1, -1, -1):
                row = row * x + col[i]
            acc = acc * y + row
        return acc

    def grad(self, x, y):
        dx_coeffs = self.coeffs[1:, :] * np.arange(1, self.coeffs.shape[0])[:, None]
        dy_coeffs = self.coeffs[:, 1:] * np.arange(1, self.coeffs.shape[1])[None, :]
        fx = BiPoly(dx_coeffs).eval(x, y) if dx_coeffs.size else np.zeros_like(np.asarray(x, dtype=complex))
        fy = BiPoly(dy_coeffs).eval(x, y) if dy_coeffs.size else np.zeros_like(np.asarray(x, dtype=complex))
        return fx, fy

    def y_coefficients(self, x):
        """Coefficients in y after substituting numeric x: shape (..., deg_y+1)."""
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape + (self.coeffs.shape[1],), dtype=complex)
        for j in range(self.coeffs.shape[1]):
            col = self.coeffs[:, j]
            acc = np.zeros_like(x)
            for i in range(self.coeffs.shape[0] - 1, -1, -1):
                acc = acc * x + col[i]
            out[..., j] = acc
        return out
