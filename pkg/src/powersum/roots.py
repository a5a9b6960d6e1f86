"""Univariate root finding and bivariate system solving via resultants.

The Aberth-Ehrlich simultaneous iteration handles every univariate solve;
bivariate systems are reduced by a Sylvester resultant in y, sampled on the
unit circle and interpolated by FFT, with every claimed root polished by
Newton against the original pair.

``solve_si_n3`` solves the three-exponent chart system
``x**a + y**a + 1 = 0`` shared by all exponents. Its solutions can be
highly singular (the defining curves are mutually tangent to high order),
so location accuracy is intrinsically limited to roughly
``residual_tol ** (1/multiplicity)``; the solver therefore anchors each
solution cluster to an exactly-verifiable special point whenever one lies
inside the cluster, and reports anything else as a first-class finding.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DEFAULT_CONFIG, ExponentSet, InvalidInputError,
                   NumericalError, TrackerConfig)
from .poly import BiPoly, cpow

__all__ = [
    "UniPoly",
    "univariate_roots",
    "sylvester_matrix",
    "resultant_wrt_y",
    "bivariate_common_roots",
    "solve_si_n3",
    "SIResult",
    "ZETA",
]

ZETA = complex(-0.5, math.sqrt(3.0) / 2.0)  # primitive cube root of unity


@dataclass(frozen=True)
class UniPoly:
    """Univariate polynomial, coefficients ascending in degree."""

    coefficients: tuple[complex, ...]

    def __post_init__(self):
        c = [complex(v) for v in self.coefficients]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c or all(v == 0 for v in c):
            raise InvalidInputError("polynomial is identically zero")
        object.__setattr__(self, "coefficients", tuple(c))

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def as_array(self):
        return np.array(self.coefficients, dtype=complex)


def _horner(coeffs, z):
    acc = np.zeros_like(z) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _eval_scale(abs_coeffs, z):
    az = np.abs(z)
    acc = np.zeros_like(az) + abs_coeffs[-1]
    for c in abs_coeffs[-2::-1]:
        acc = acc * az + c
    return acc


def _bini_start(coeffs):
    """Initial root guesses from the Newton polygon of the coefficients."""
    d = len(coeffs) - 1
    mags = np.abs(coeffs)
    pts = [(i, math.log(m)) for i, m in enumerate(mags) if m > 0]
    # upper convex hull, left to right
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) >= (y2 - y1) * (p[0] - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    radii = np.empty(d)
    pos = 0
    for (i1, l1), (i2, l2) in zip(hull, hull[1:]):
        r = math.exp((l1 - l2) / (i2 - i1))
        radii[pos:pos + (i2 - i1)] = r
        pos += i2 - i1
    angles = 2.0 * np.pi * (np.arange(d) + 0.5) / d + 0.4
    return radii * np.exp(1j * angles)


def _aberth(coeffs, tol, max_iters):
    """Raw Aberth-Ehrlich sweep. Returns (roots, residual/scale, converged)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    d = len(coeffs) - 1
    if d == 1:
        r = np.array([-coeffs[0] / coeffs[1]])
        return r, np.zeros(1), np.ones(1, dtype=bool)
    dcoeffs = coeffs[1:] * np.arange(1, d + 1)
    abs_coeffs = np.abs(coeffs)
    z = _bini_start(coeffs)
    rel = np.full(d, np.inf)
    idx = np.arange(d)
    for _ in range(max_iters):
        # evaluate only roots not yet converged; repulsion still sees all
        zi = z[idx]
        p = _horner(coeffs, zi)
        scale = _eval_scale(abs_coeffs, zi) + np.abs(coeffs[-1])
        rel[idx] = np.abs(p) / scale
        good = rel[idx] <= tol
        if good.any():
            p = p[~good]
            idx = idx[~good]
            zi = zi[~good]
        if idx.size == 0:
            break
        dp = _horner(dcoeffs, zi)
        bad = np.abs(dp) == 0
        dp = np.where(bad, 1.0, dp)
        w = p / dp
        w = np.where(bad, (0.01 + 0.017j) * (1.0 + np.abs(zi)), w)
        diff = zi[:, None] - z[None, :]
        rows = np.arange(len(idx))
        diff[rows, idx] = 1.0
        inv = 1.0 / np.where(diff == 0, 1e-300, diff)
        inv[rows, idx] = 0.0
        s = inv.sum(axis=1)
        denom = 1.0 - w * s
        denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
        z[idx] = zi - w / denom
    if idx.size:
        p = _horner(coeffs, z[idx])
        scale = _eval_scale(abs_coeffs, z[idx]) + np.abs(coeffs[-1])
        rel[idx] = np.abs(p) / scale
    return z, rel, rel <= tol


def _cluster_scalars(z, tol):
    """Single-linkage clusters of complex scalars; returns (centroids, sizes)."""
    z = np.asarray(z)
    n = len(z)
    if n == 0:
        return np.zeros(0, dtype=complex), []
    order = np.argsort(z.real, kind="stable")
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    zs = z[order]
    for a in range(n):
        b = a + 1
        while b < n and zs[b].real - zs[a].real <= tol:
            if abs(zs[b] - zs[a]) <= tol:
                ra, rb = find(order[a]), find(order[b])
                if ra != rb:
                    parent[ra] = rb
            b += 1
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    cents, sizes = [], []
    for members in groups.values():
        cents.append(z[members].mean())
        sizes.append(len(members))
    idx = sorted(range(len(cents)), key=lambda i: (cents[i].real, cents[i].imag))
    return np.array([cents[i] for i in idx]), [sizes[i] for i in idx]


def _cluster_roots(coeffs, z, cluster_tol):
    """Merge root approximations into multiple roots.

    Two approximations are linked when they sit inside each other's
    Newton-correction inclusion disks (radius d*|p/p'|) or within
    cluster_tol; cluster centroids of size k are then polished against the
    (k-1)-st derivative, where the multiple root is simple.
    """
    d = len(coeffs) - 1
    dcoeffs = coeffs[1:] * np.arange(1, d + 1)
    p = _horner(coeffs, z)
    dp = _horner(dcoeffs, z)
    dp = np.where(np.abs(dp) == 0, 1e-300, dp)
    radius = d * np.abs(p / dp)
    n = len(z)
    dist = np.abs(z[:, None] - z[None, :])
    linked = dist <= np.maximum(cluster_tol, 3.0 * (radius[:, None] + radius[None, :]))
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in np.argwhere(linked):
        if i < j:
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[ri] = rj
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    roots, mults = [], []
    for members in groups.values():
        k = len(members)
        center = z[members].mean()
        if k >= 2:
            # Newton on the (k-1)-st derivative pins the multiple root
            dk = coeffs
            for _ in range(k - 1):
                dk = dk[1:] * np.arange(1, len(dk))
            dk1 = dk[1:] * np.arange(1, len(dk)) if len(dk) > 1 else np.array([1.0 + 0j])
            spread = float(np.max(np.abs(z[members] - center))) + cluster_tol
            c = center
            for _ in range(6):
                der = _horner(dk1, np.array([c]))[0]
                if abs(der) == 0:
                    break
                c = c - _horner(dk, np.array([c]))[0] / der
            if abs(c - center) <= 3.0 * spread:
                center = c
        roots.append(center)
        mults.append(k)
    return roots, mults


def univariate_roots(p, tol=1e-13, cluster_tol=1e-6, max_iters=400):
    """All roots of p with multiplicity estimates from cluster merging.

    Returned roots r satisfy |p(r)| <= tol * scale(p, r); approximations
    whose Newton inclusion disks overlap (or that sit within cluster_tol)
    are merged into one root whose multiplicity is the cluster size.
    Raises NumericalError with the best residuals if the iteration cap is
    exceeded before every root meets the tolerance.
    """
    if not isinstance(p, UniPoly):
        p = UniPoly(tuple(np.asarray(p, dtype=complex)))
    coeffs = p.as_array()
    if p.degree < 1:
        raise InvalidInputError("root finding needs degree >= 1")
    # peel off exact roots at the origin
    nzero = 0
    while coeffs[nzero] == 0:
        nzero += 1
    coeffs = coeffs[nzero:]
    if len(coeffs) == 1:
        roots, mults = [], []
    else:
        z, rel, conv = _aberth(coeffs, tol, max_iters)
        if not conv.all():
            raise NumericalError(
                "root iteration cap exceeded",
                {"roots": z, "relative_residuals": rel, "converged": conv})
        roots, mults = _cluster_roots(coeffs, z, cluster_tol)
    if nzero:
        roots.append(0.0 + 0.0j)
        mults.append(nzero)
    pairs = sorted(zip(roots, mults), key=lambda rm: (rm[0].real, rm[0].imag))
    return pairs


def sylvester_matrix(acoeffs, bcoeffs):
    """Sylvester matrix of two y-polynomials with (batched) coefficients.

    acoeffs: (..., p+1), bcoeffs: (..., q+1), ascending in y. Returns
    (..., p+q, p+q) whose determinant is the resultant in y.
    """
    a = np.asarray(acoeffs, dtype=complex)
    b = np.asarray(bcoeffs, dtype=complex)
    p = a.shape[-1] - 1
    q = b.shape[-1] - 1
    n = p + q
    out = np.zeros(a.shape[:-1] + (n, n), dtype=complex)
    for i in range(q):
        out[..., i, i:i + p + 1] = a[..., ::-1]
    for i in range(p):
        out[..., q + i, i:i + q + 1] = b[..., ::-1]
    return out


def resultant_wrt_y(f: BiPoly, g: BiPoly, zero_tol=1e-11):
    """Coefficients (ascending) of Res_y(f, g) as a polynomial in x.

    Sampled at roots of unity and interpolated by FFT. Raises
    NumericalError("common component") when the resultant vanishes
    identically, which signals a common factor of positive degree.
    """
    if f.is_zero() or g.is_zero():
        raise InvalidInputError("resultant of a zero polynomial")
    bound = f.total_degree * g.total_degree
    if f.deg_y == 0 or g.deg_y == 0:
        # one input is y-free: the resultant is a power of it
        base = f if f.deg_y == 0 else g
        other_degy = g.deg_y if f.deg_y == 0 else f.deg_y
        coeffs = base.coeffs[:, 0]
        out = np.ones(1, dtype=complex)
        for _ in range(other_degy):
            out = np.convolve(out, coeffs)
        return out
    nsamp = max(bound + 1, 4)
    theta = 0.37
    samples = np.exp(1j * (2 * np.pi * np.arange(nsamp) / nsamp + theta))
    av = f.y_coefficients(samples)
    bv = g.y_coefficients(samples)
    mats = sylvester_matrix(av, bv)
    vals = np.linalg.det(mats)
    # scale reference: Hadamard-style bound on the sampled matrices
    rownorms = np.linalg.norm(mats, axis=-1)
    hadamard = np.exp(np.sum(np.log(rownorms + 1e-300), axis=-1))
    ref = float(np.max(hadamard))
    if np.max(np.abs(vals)) <= zero_tol * max(ref, 1e-300):
        raise NumericalError("common component",
                             {"max_det": float(np.max(np.abs(vals))), "reference": ref})
    # v_k = sum_j (c_j e^{ij theta}) omega^{jk}, so the forward DFT recovers c
    spect = np.fft.fft(vals) / nsamp
    ks = np.arange(nsamp)
    coeffs = spect * np.exp(-1j * theta * ks)
    # trim numerically-zero leading coefficients (degree drop at infinity)
    mags = np.abs(coeffs)
    keep = np.nonzero(mags > 1e-12 * mags.max())[0]
    return np.array(coeffs[: keep[-1] + 1]) if keep.size else np.zeros(1, dtype=complex)


def _newton_polish_pairs(f: BiPoly, g: BiPoly, xy, iters=25):
    """Batched Newton on the 2x2 system (f, g) from rows of xy."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _newton_polish_pairs_impl(f, g, xy, iters)


def _newton_polish_pairs_impl(f, g, xy, iters):
    x = xy[:, 0].copy()
    y = xy[:, 1].copy()
    for _ in range(iters):
        fv = f.eval(x, y)
        gv = g.eval(x, y)
        fx, fy = f.grad(x, y)
        gx, gy = g.grad(x, y)
        det = fx * gy - fy * gx
        ok = np.abs(det) > 1e-300
        det = np.where(ok, det, 1.0)
        dx = (-fv * gy + gv * fy) / det
        dy = (-gv * fx + fv * gx) / det
        dx = np.where(ok, dx, 0.0)
        dy = np.where(ok, dy, 0.0)
        # guard against wild steps
        stepmag = np.maximum(np.abs(dx), np.abs(dy))
        cap = 1.0 + np.maximum(np.abs(x), np.abs(y))
        shrink = np.where(stepmag > cap, cap / np.where(stepmag == 0, 1.0, stepmag), 1.0)
        x = x + dx * shrink
        y = y + dy * shrink
    return np.stack([x, y], axis=1)


def _pair_residual(f, g, xy):
    fv = np.abs(f.eval(xy[:, 0], xy[:, 1])) / (f.eval_scale(xy[:, 0], xy[:, 1]) + 1e-300)
    gv = np.abs(g.eval(xy[:, 0], xy[:, 1])) / (g.eval_scale(xy[:, 0], xy[:, 1]) + 1e-300)
    return np.maximum(fv, gv)


def _dedup_xy(xy, tol):
    reps = []
    for row in xy:
        if not any(max(abs(row[0] - r[0]), abs(row[1] - r[1])) <= tol for r in reps):
            reps.append(row)
    reps.sort(key=lambda r: (r[0].real, r[0].imag, r[1].real, r[1].imag))
    return np.array(reps) if reps else np.zeros((0, 2), dtype=complex)


def bivariate_common_roots(f: BiPoly, g: BiPoly, tol=1e-8, dedup_tol=1e-6):
    """Isolated common roots of two bivariate polynomials.

    Eliminates y by a Sylvester resultant, extracts y-candidates from
    f(x, .), and Newton-polishes every pair against (f, g); a returned pair
    has both relative residuals below tol. Raises
    NumericalError("common component") when the inputs share a factor.
    """
    rcoeffs = resultant_wrt_y(f, g)
    if len(rcoeffs) == 1:
        return np.zeros((0, 2), dtype=complex)
    try:
        xroots = [r for r, _ in univariate_roots(rcoeffs, tol=1e-9, cluster_tol=dedup_tol)]
    except NumericalError as err:
        xroots = list(err.diagnostics["roots"])
    # extract y-candidates from whichever input has y-degree to offer
    sources = sorted((f, g), key=lambda p: p.deg_y, reverse=True)
    pairs = []
    for xr in xroots:
        yroots = []
        for src in sources:
            ycoeffs = src.y_coefficients(np.array([xr]))[0]
            mags = np.abs(ycoeffs)
            if mags.max() == 0:
                continue
            keep = np.nonzero(mags > 1e-10 * mags.max())[0]
            ycoeffs = ycoeffs[: keep[-1] + 1]
            if len(ycoeffs) < 2:
                continue
            try:
                yroots = [r for r, _ in univariate_roots(ycoeffs, tol=1e-9, cluster_tol=dedup_tol)]
            except NumericalError as err:
                yroots = list(err.diagnostics["roots"])
            break
        for yr in yroots:
            pairs.append((xr, yr))
    if not pairs:
        return np.zeros((0, 2), dtype=complex)
    xy = np.array(pairs, dtype=complex)
    # loose prefilter before polishing
    xy = xy[_pair_residual(f, g, xy) <= 1e-2]
    if xy.shape[0] == 0:
        return np.zeros((0, 2), dtype=complex)
    xy = _newton_polish_pairs(f, g, xy)
    res = _pair_residual(f, g, xy)
    xy = xy[res <= tol]
    return _dedup_xy(xy, dedup_tol)


# ---------------------------------------------------------------------------
# the n=3 system at infinity
# ---------------------------------------------------------------------------

_CHART_CANDIDATES = (
    (-1.0 + 0.0j, 0.0 + 0.0j),      # (1 : -1 : 0)
    (0.0 + 0.0j, -1.0 + 0.0j),      # (1 : 0 : -1)
    (ZETA, ZETA ** 2),              # (1 : zeta : zeta^2)
    (ZETA ** 2, ZETA),              # (1 : zeta^2 : zeta)
)


@dataclass
class SIResult:
    """Chart solutions of the common-vanishing system for three exponents."""

    exponents: ExponentSet
    points: list[np.ndarray]            # projective points (1 : x : y)
    count: int
    expected_count: int
    candidate_flags: list[bool]         # per detected point: matches a special point
    conjecture_violation: bool
    diagnostics: dict = field(default_factory=dict)


def expected_si_count(A: ExponentSet) -> int:
    """Predicted chart-solution count from the exponent residues mod 2 and 3."""
    two = 0 in A.residues2
    three = 0 in A.residues3
    if two and three:
        return 0
    if two != three:
        return 2
    return 4


def _powersum_chart_eval(A, x, y):
    """Values and scales of x**a + y**a + 1 for each exponent, batched."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    vals, scales = [], []
    for a in A.exponents:
        xa = cpow(x, a)
        ya = cpow(y, a)
        vals.append(xa + ya + 1.0)
        scales.append(np.abs(xa) + np.abs(ya) + 1.0)
    return np.stack(vals, axis=-1), np.stack(scales, axis=-1)


def _triple_gauss_newton(A, xy, iters=250, rtol=1e-8):
    """Damped Gauss-Newton on all three chart equations (batched).

    Paths leave the active set once their relative residual is safely
    below rtol or once a full line search fails to improve them.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _triple_gauss_newton_impl(A, xy, iters, rtol)


def _triple_gauss_newton_impl(A, xy, iters, rtol):
    x = xy[:, 0].copy()
    y = xy[:, 1].copy()
    exps = A.exponents
    idx = np.arange(len(x))
    for _ in range(iters):
        xi, yi = x[idx], y[idx]
        vals, scales = _powersum_chart_eval(A, xi, yi)
        rel = np.max(np.abs(vals) / scales, axis=-1)
        keep = ~(rel <= 0.2 * rtol)  # keeps nan (wandered-off) paths active
        idx = idx[keep]
        if idx.size == 0:
            break
        xi, yi, vals = xi[keep], yi[keep], vals[keep]
        obj = np.sum(np.abs(vals) ** 2, axis=-1)
        obj = np.where(np.isfinite(obj), obj, np.inf)
        jx = np.stack([a * cpow(xi, a - 1) for a in exps], axis=-1)
        jy = np.stack([a * cpow(yi, a - 1) for a in exps], axis=-1)
        # normal equations of the 3x2 least-squares step
        h11 = np.sum(np.conj(jx) * jx, axis=-1).real + 1e-300
        h22 = np.sum(np.conj(jy) * jy, axis=-1).real + 1e-300
        h12 = np.sum(np.conj(jx) * jy, axis=-1)
        b1 = -np.sum(np.conj(jx) * vals, axis=-1)
        b2 = -np.sum(np.conj(jy) * vals, axis=-1)
        det = h11 * h22 - np.abs(h12) ** 2
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dx = (b1 * h22 - h12 * b2) / det
        dy = (h11 * b2 - np.conj(h12) * b1) / det
        alpha = np.ones(len(xi))
        improved = np.zeros(len(xi), dtype=bool)
        xn, yn = xi.copy(), yi.copy()
        for _ in range(8):
            pend = ~improved
            trial_x = xi[pend] + alpha[pend] * dx[pend]
            trial_y = yi[pend] + alpha[pend] * dy[pend]
            tvals, _ = _powersum_chart_eval(A, trial_x, trial_y)
            tobj = np.sum(np.abs(tvals) ** 2, axis=-1)
            better = tobj < obj[pend]
            sub = np.nonzero(pend)[0][better]
            xn[sub] = trial_x[better]
            yn[sub] = trial_y[better]
            improved[sub] = True
            alpha *= 0.5
            if improved.all():
                break
        if not improved.any():
            break
        x[idx], y[idx] = xn, yn
        idx = idx[improved]  # paths that stopped improving are done
        if idx.size == 0:
            break
    return np.stack([x, y], axis=1)


def _triple_rel_residual(A, xy):
    vals, scales = _powersum_chart_eval(A, xy[:, 0], xy[:, 1])
    return np.max(np.abs(vals) / scales, axis=-1)


def solve_si_n3(A: ExponentSet, cfg: TrackerConfig = DEFAULT_CONFIG) -> SIResult:
    """All chart solutions (x1 = 1) of the three-exponent vanishing system.

    Combines exact evaluation at the four special chart points, exhaustive
    y-enumeration above their x-coordinates, and a full resultant sweep for
    anything else. Solution clusters anchored by an exactly-verified special
    point are reported at that point; any other accepted cluster is a
    conjecture violation and is flagged, never raised.
    """
    if A.m != 3:
        raise InvalidInputError("the chart system is defined for exactly three exponents")
    if A.gcd != 1:
        raise InvalidInputError("exponents must be coprime")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _solve_si_n3_impl(A, cfg)


def _solve_si_n3_impl(A, cfg):
    a1, a2, a3 = A.exponents
    verify_tol = 1e-10

    cand = np.array(_CHART_CANDIDATES, dtype=complex)
    cvals, cscales = _powersum_chart_eval(A, cand[:, 0], cand[:, 1])
    cand_ok = np.all(np.abs(cvals) <= verify_tol * cscales, axis=-1)

    starts = [cand]

    # exhaustive y-enumeration above each special x-coordinate
    special_x = np.array([-1.0, 0.0, ZETA, ZETA ** 2], dtype=complex)
    for v in special_x:
        w = -(1.0 + cpow(v, a1))
        if abs(w) > 1e-14:
            r = abs(w) ** (1.0 / a1)
            ang = cmath.phase(w) / a1
            ys = r * np.exp(1j * (ang + 2 * np.pi * np.arange(a1) / a1))
            xs = np.full(a1, v)
            vals, scales = _powersum_chart_eval(A, xs, ys)
            keep = np.all(np.abs(vals) <= 1e-6 * scales, axis=-1)
            if keep.any():
                starts.append(np.stack([xs[keep], ys[keep]], axis=1))

    # resultant sweep over the first two equations
    f = BiPoly.from_terms([(1.0, (a1, 0)), (1.0, (0, a1)), (1.0, (0, 0))])
    g = BiPoly.from_terms([(1.0, (a2, 0)), (1.0, (0, a2)), (1.0, (0, 0))])
    rcoeffs = resultant_wrt_y(f, g)
    aberth_converged = True
    if len(rcoeffs) > 1:
        try:
            xroots = np.array([r for r, _ in univariate_roots(
                rcoeffs, tol=1e-9, cluster_tol=0.0 + cfg.dedup_tol, max_iters=120)])
        except NumericalError as err:
            xroots = np.asarray(err.diagnostics["roots"])
            aberth_converged = False
        # y-candidates above every resultant root, from the first equation;
        # the loose double filter feeds anything plausibly common to all
        # three equations into the least-squares refinement
        w = -(1.0 + cpow(xroots, a1))
        r = np.abs(w) ** (1.0 / a1)
        ang = np.angle(w) / a1
        ks = 2 * np.pi * np.arange(a1) / a1
        ys = (r[:, None] * np.exp(1j * (ang[:, None] + ks[None, :]))).ravel()
        xs = np.repeat(xroots, a1)
        vals, scales = _powersum_chart_eval(A, xs, ys)
        keep = (np.abs(vals[:, 1]) <= 1e-2 * scales[:, 1]) \
            & (np.abs(vals[:, 2]) <= 1e-2 * scales[:, 2])
        if keep.any():
            starts.append(np.stack([xs[keep], ys[keep]], axis=1))

    allstarts = np.vstack(starts)
    refined = _triple_gauss_newton(A, allstarts, iters=250)
    resid = _triple_rel_residual(A, refined)
    accepted = refined[resid <= cfg.polish_tol]
    accepted_res = resid[resid <= cfg.polish_tol]

    # cluster accepted points; anchor clusters to verified special points
    link = 0.45
    clusters = []
    for row, rr in sorted(zip(accepted.tolist(), accepted_res.tolist()),
                          key=lambda t: (t[0][0].real, t[0][0].imag, t[0][1].real)):
        row = np.asarray(row)
        placed = False
        for cl in clusters:
            if any(max(abs(row[0] - q[0]), abs(row[1] - q[1])) <= link for q, _ in cl):
                cl.append((row, rr))
                placed = True
                break
        if not placed:
            clusters.append([(row, rr)])

    points, flags, dists = [], [], []
    for cl in clusters:
        anchor = None
        for ci, ok in enumerate(cand_ok):
            if not ok:
                continue
            dmin = min(max(abs(q[0] - cand[ci, 0]), abs(q[1] - cand[ci, 1])) for q, _ in cl)
            if dmin <= link:
                anchor = cand[ci]
                dists.append(dmin)
                break
        if anchor is not None:
            points.append(np.array([1.0, anchor[0], anchor[1]], dtype=complex))
            flags.append(True)
        else:
            best = min(cl, key=lambda t: t[1])[0]
            points.append(np.array([1.0, best[0], best[1]], dtype=complex))
            dcand = min(max(abs(best[0] - c[0]), abs(best[1] - c[1])) for c in cand)
            dists.append(dcand)
            flags.append(dcand <= 1e-6)

    # every exactly-verified special point must have been recovered
    missing = []
    for ci, ok in enumerate(cand_ok):
        if not ok:
            continue
        found = any(abs(p[1] - cand[ci, 0]) <= link and abs(p[2] - cand[ci, 1]) <= link
                    for p in points)
        if not found:
            missing.append(ci)
            points.append(np.array([1.0, cand[ci, 0], cand[ci, 1]], dtype=complex))
            flags.append(True)

    count = len(points)
    expected = expected_si_count(A)
    violation = (count != expected) or (not all(flags))
    return SIResult(
        exponents=A,
        points=points,
        count=count,
        expected_count=expected,
        candidate_flags=flags,
        conjecture_violation=violation,
        diagnostics={
            "candidate_verified": cand_ok.tolist(),
            "anchor_distances": dists,
            "resultant_degree": len(rcoeffs) - 1,
            "aberth_converged": aberth_converged,
            "clusters_missing_anchor": missing,
        },
    )
