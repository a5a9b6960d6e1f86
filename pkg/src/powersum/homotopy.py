"""Total-degree homotopy continuation for square polynomial systems.

All paths of one system are tracked together as numpy batches: explicit
Euler prediction on the Davidenko ODE, Newton correction with a relative
residual test, and per-path adaptive steps (halve on failure, grow 1.5x
after four straight successes). Paths are classified finite / diverged /
failed so that every start path is accounted for.

Divergence cannot be read off a fixed norm bound alone in double
precision: a path absorbed by a solution at infinity grows like
(1-s)**(-1/k), which stays modest for k above 2 in the trackable range of
s. The classifier therefore also compares path norms across late
checkpoints and flags sustained growth once the finite-solution polish has
failed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DEFAULT_CONFIG, ExponentSet, InvalidInputError, Solution,
                   SolutionSet, TrackerConfig, dedup_points)
from .poly import MPoly, cpow, polyval_ascending
from .symfun import powersum_values

__all__ = [
    "PowerSumEquation",
    "DensePolyEquation",
    "SquareSystem",
    "solve_square",
    "CountResult",
    "generic_count",
    "fiber_points",
    "image_degree",
    "branch_curve_degree",
    "powersum_system",
]

_S_FINAL = 1.0 - 1e-9
_CHECKPOINTS = (1.0 - 1e-4, 1.0 - 1e-5, 1.0 - 1e-6, 1.0 - 1e-7, 1.0 - 1e-8)


@dataclass(frozen=True)
class PowerSumEquation:
    """sum_i w_i x_i**a = rhs(t), rhs a polynomial in the shared parameter.

    ``rhs`` is ascending in t; a single coefficient means a constant
    right-hand side. The x block occupies the first ``nx`` unknowns and t,
    when any equation needs it, is the last unknown.
    """

    exponent: int
    rhs: tuple[complex, ...]
    weights: tuple[float, ...] | None = None

    @property
    def degree(self):
        return max(self.exponent, len(self.rhs) - 1)

    def eval(self, X, nx):
        x = X[:, :nx]
        w = np.ones(nx) if self.weights is None else np.asarray(self.weights)
        xa = cpow(x, self.exponent)
        val = xa @ w
        scale = np.abs(xa) @ np.abs(w)
        rhs = np.asarray(self.rhs, dtype=complex)
        if len(rhs) == 1:
            val = val - rhs[0]
            scale = scale + abs(rhs[0])
        else:
            t = X[:, nx]
            val = val - polyval_ascending(rhs, t)
            scale = scale + polyval_ascending(np.abs(rhs), np.abs(t)).real
        return val, scale

    def grad(self, X, nx):
        x = X[:, :nx]
        w = np.ones(nx) if self.weights is None else np.asarray(self.weights)
        g = np.zeros(X.shape, dtype=complex)
        g[:, :nx] = self.exponent * w * cpow(x, self.exponent - 1)
        rhs = np.asarray(self.rhs, dtype=complex)
        if len(rhs) > 1:
            drhs = rhs[1:] * np.arange(1, len(rhs))
            g[:, nx] = -polyval_ascending(drhs, X[:, nx])
        return g

    def anchor(self, X, nx):
        """Right-hand-side magnitude, the scale a true residual must beat."""
        rhs = np.asarray(self.rhs, dtype=complex)
        if len(rhs) == 1:
            return np.full(X.shape[0], 1.0 + abs(rhs[0]))
        return 1.0 + np.abs(polyval_ascending(rhs, X[:, nx]))


@dataclass(frozen=True)
class DensePolyEquation:
    """A dense polynomial equation, for systems beyond power-sum shape."""

    poly: MPoly

    @property
    def degree(self):
        return self.poly.total_degree

    def eval(self, X, nx):
        return self.poly.eval(X)

    def grad(self, X, nx):
        return self.poly.grad(X)

    def anchor(self, X, nx):
        const = sum(abs(c) for e, c in self.poly.terms if sum(e) == 0)
        return np.full(X.shape[0], 1.0 + const)


@dataclass(frozen=True)
class SquareSystem:
    """n equations in n unknowns; x block first, optional parameter t last."""

    nx: int
    equations: tuple
    has_param: bool = False

    def __post_init__(self):
        if len(self.equations) != self.n:
            raise InvalidInputError(
                f"square system needs {self.n} equations, got {len(self.equations)}")

    @property
    def n(self):
        return self.nx + (1 if self.has_param else 0)

    @property
    def degrees(self):
        return tuple(eq.degree for eq in self.equations)

    @property
    def bezout(self):
        return math.prod(self.degrees)

    def eval(self, X):
        vals, scales = zip(*(eq.eval(X, self.nx) for eq in self.equations))
        return np.stack(vals, axis=1), np.stack(scales, axis=1) + 1e-300

    def jac(self, X):
        return np.stack([eq.grad(X, self.nx) for eq in self.equations], axis=1)

    def anchors(self, X):
        return np.stack([eq.anchor(X, self.nx) for eq in self.equations], axis=1)


def powersum_system(A: ExponentSet, c, weights=None, n=None) -> SquareSystem:
    """Square power-sum system phi_j(x) = c_j for the first n exponents."""
    n = A.m if n is None else n
    w = None if weights is None else tuple(float(v) for v in weights)
    eqs = tuple(PowerSumEquation(A.exponents[j], (complex(c[j]),), w)
                for j in range(n))
    return SquareSystem(nx=n, equations=eqs)


def _start_points(degrees, rng):
    roots = []
    for d in degrees:
        r = np.exp(2j * np.pi * rng.uniform())
        roots.append(r ** (1.0 / d) * np.exp(2j * np.pi * np.arange(d) / d))
    combos = np.array(list(itertools.product(*roots)), dtype=complex)
    start_rhs = np.array([rt[0] ** d for rt, d in zip(roots, degrees)], dtype=complex)
    return combos, start_rhs


def _solve_batched(mats, rhs):
    try:
        return np.linalg.solve(mats, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for i in range(mats.shape[0]):
            try:
                out[i] = np.linalg.solve(mats[i], rhs[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.lstsq(mats[i], rhs[i], rcond=None)[0]
        return out


class _Tracker:
    """Batched tracking state for one homotopy run."""

    ACTIVE, AT_END, DIVERGED, FAILED = 0, 1, 2, 3

    def __init__(self, system: SquareSystem, cfg: TrackerConfig, rng):
        self.S = system
        self.cfg = cfg
        degrees = system.degrees
        self.x, self.start_rhs = _start_points(degrees, rng)
        self.gamma = np.exp(2j * np.pi * rng.uniform())
        npaths = self.x.shape[0]
        self.n = system.n
        self.degrees = np.array(degrees)
        self.s = np.zeros(npaths)
        self.h = np.full(npaths, 0.05)
        self.streak = np.zeros(npaths, dtype=int)
        self.steps = np.zeros(npaths, dtype=int)
        self.status = np.full(npaths, self.ACTIVE, dtype=np.int8)
        self.chk_norms = np.full((npaths, len(_CHECKPOINTS)), np.nan)

    def _g_eval(self, X):
        xa = np.stack([cpow(X[:, j], int(d)) for j, d in enumerate(self.degrees)], axis=1)
        vals = xa - self.start_rhs
        scales = np.abs(xa) + np.abs(self.start_rhs) + 1e-300
        return vals, scales

    def _g_jac(self, X):
        J = np.zeros(X.shape[:1] + (self.n, self.n), dtype=complex)
        for j, d in enumerate(self.degrees):
            J[:, j, j] = d * cpow(X[:, j], int(d) - 1)
        return J

    def _h_parts(self, X):
        fv, fs = self.S.eval(X)
        gv, gs = self._g_eval(X)
        return fv, fs, gv, gs

    def _h_residual(self, X, s):
        fv, fs, gv, gs = self._h_parts(X)
        hv = (1 - s)[:, None] * self.gamma * gv + s[:, None] * fv
        hs = np.abs(1 - s)[:, None] * gs + np.abs(s)[:, None] * fs + 1e-300
        return hv, np.max(np.abs(hv) / hs, axis=1)

    def _h_jac(self, X, s):
        jf = self.S.jac(X)
        jg = self._g_jac(X)
        return (1 - s)[:, None, None] * self.gamma * jg + s[:, None, None] * jf

    def run(self):
        cfg = self.cfg
        while True:
            idx = np.nonzero(self.status == self.ACTIVE)[0]
            if idx.size == 0:
                break
            x = self.x[idx]
            s = self.s[idx]
            h = np.minimum(self.h[idx], _S_FINAL - s)
            # Euler predictor on the Davidenko ODE
            fv, _, gv, _ = self._h_parts(x)
            hs_deriv = fv - self.gamma * gv
            hx = self._h_jac(x, s)
            dxds = _solve_batched(hx, -hs_deriv)
            xp = x + h[:, None] * dxds
            sp = s + h
            # Newton corrector at the advanced parameter
            for _ in range(cfg.corrector_iters):
                hv, rel = self._h_residual(xp, sp)
                move = rel > cfg.newton_tol
                if not move.any():
                    break
                hxp = self._h_jac(xp[move], sp[move])
                xp[move] += _solve_batched(hxp, -hv[move])
            _, rel = self._h_residual(xp, sp)
            good = np.isfinite(rel) & (rel <= cfg.newton_tol)

            gi = idx[good]
            if gi.size:
                x_new = xp[good]
                s_prev = self.s[gi].copy()
                self.x[gi] = x_new
                self.s[gi] = sp[good]
                self.streak[gi] += 1
                grow = self.streak[gi] >= 4
                self.h[gi] = np.where(grow, np.minimum(self.h[gi] * 1.5, 0.2), self.h[gi])
                self.streak[gi] = np.where(grow, 0, self.streak[gi])
                norms = np.max(np.abs(x_new), axis=1)
                for k, cp in enumerate(_CHECKPOINTS):
                    crossed = (s_prev < cp) & (self.s[gi] >= cp)
                    self.chk_norms[gi[crossed], k] = norms[crossed]
                self.status[gi[norms > cfg.divergence_threshold]] = self.DIVERGED
                done = self.s[gi] >= _S_FINAL - 1e-12
                sel = self.status[gi] == self.ACTIVE
                self.status[gi[done & sel]] = self.AT_END
            bi = idx[~good]
            if bi.size:
                self.h[bi] *= 0.5
                self.streak[bi] = 0
                self.status[bi[self.h[bi] < cfg.min_step]] = self.FAILED
            self.steps[idx] += 1
            exhausted = idx[self.steps[idx] >= cfg.max_steps_per_path]
            self.status[exhausted[self.status[exhausted] == self.ACTIVE]] = self.FAILED
        return self._finish()

    def _polish(self, X, iters=40):
        """Newton against the target system.

        Returns (X, rel, last_step, diverged_mask). A point that merely
        drifts along a solution at infinity keeps a small relative residual
        (the top-degree terms dominate the scale), so acceptance must also
        see the Newton steps contract; last_step records that.
        """
        cfg = self.cfg
        X = X.copy()
        diverged = np.zeros(X.shape[0], dtype=bool)
        rel = np.full(X.shape[0], np.inf)
        last_step = np.full(X.shape[0], np.inf)
        active = np.arange(X.shape[0])
        for _ in range(iters):
            if active.size == 0:
                break
            fv, fs = self.S.eval(X[active])
            r = np.max(np.abs(fv) / fs, axis=1)
            rel[active] = r
            keep = r > 1e-14
            norms = np.max(np.abs(X[active]), axis=1)
            blown = ~np.isfinite(norms) | (norms > cfg.divergence_threshold)
            diverged[active[blown]] = True
            last_step[active[~keep & ~blown]] = 0.0  # converged to the floor
            keep &= ~blown
            active = active[keep]
            if active.size == 0:
                break
            jf = self.S.jac(X[active])
            fv2, _ = self.S.eval(X[active])
            step = _solve_batched(jf, -fv2)
            bad = ~np.isfinite(step).all(axis=1)
            step[bad] = 0.0
            X[active] += step
            last_step[active] = np.max(np.abs(step), axis=1) / (
                1.0 + np.max(np.abs(X[active]), axis=1))
        if active.size:
            fv, fs = self.S.eval(X[active])
            rel[active] = np.max(np.abs(fv) / fs, axis=1)
        return X, rel, last_step, diverged

    def _growth_ratio(self, i):
        """Norm growth across the widest recorded checkpoint span.

        A path absorbed by a multiplicity-k solution at infinity grows like
        (1-s)**(-1/k); across checkpoints 1e-4 .. 1e-8 that is 10**(4/k),
        detectably above 1 even for large k, while a path with a finite
        endpoint has essentially stopped moving there.
        """
        vals = self.chk_norms[i]
        seen = np.nonzero(np.isfinite(vals))[0]
        if len(seen) < 2:
            return None
        return vals[seen[-1]] / max(vals[seen[0]], 1e-300)

    def _finish(self):
        cfg = self.cfg
        at_end = np.nonzero(self.status == self.AT_END)[0]
        finite_pts = []
        if at_end.size:
            polished, rel, last_step, blown = self._polish(self.x[at_end])
            with np.errstate(invalid="ignore"):
                norms = np.max(np.abs(polished), axis=1)
                fv, _ = self.S.eval(polished)
                anch = np.max(np.abs(fv) / self.S.anchors(polished), axis=1)
            for row, i in enumerate(at_end):
                if blown[row]:
                    self.status[i] = self.DIVERGED
                    continue
                # a genuine finite solution must also beat the right-hand
                # side in absolute terms; near-infinity slivers cannot
                converged = (rel[row] <= cfg.polish_tol
                             and anch[row] <= cfg.anchor_tol
                             and last_step[row] <= 1e-6
                             and norms[row] <= cfg.divergence_soft * 10)
                if converged:
                    finite_pts.append(polished[row])
                    continue
                ratio = self._growth_ratio(i)
                big = norms[row] > cfg.divergence_soft if np.isfinite(norms[row]) else True
                growing = ratio is not None and ratio >= cfg.divergence_growth
                self.status[i] = self.DIVERGED if (big or growing) else self.FAILED
        # paths that died mid-track with growth evidence were divergent
        for i in np.nonzero(self.status == self.FAILED)[0]:
            ratio = self._growth_ratio(i)
            if ratio is not None and ratio >= cfg.divergence_growth:
                self.status[i] = self.DIVERGED

        solutions = []
        if finite_pts:
            reps, sizes = dedup_points(finite_pts, cfg.dedup_tol)
            stack = np.array(reps)
            fv, fs = self.S.eval(stack)
            rels = np.max(np.abs(fv) / fs, axis=1)
            jf = self.S.jac(stack)
            conds = np.linalg.cond(jf)
            for k in range(len(reps)):
                solutions.append(Solution(
                    point=reps[k],
                    residual=float(rels[k]),
                    condition=float(conds[k]),
                    cluster_size=sizes[k]))
        n_div = int(np.sum(self.status == self.DIVERGED))
        n_fail = int(np.sum(self.status == self.FAILED))
        npaths = len(self.x)
        return SolutionSet(
            finite_solutions=solutions,
            diverged_paths=n_div,
            failed_paths=n_fail,
            bezout_paths=npaths,
            quality_warning=(n_fail / npaths > 0.05 if npaths else False),
        )


def solve_square(system: SquareSystem, cfg: TrackerConfig = DEFAULT_CONFIG,
                 rng=None) -> SolutionSet:
    """Track all Bezout paths of a square system; see module docstring."""
    if rng is None:
        rng = cfg.rng(1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _Tracker(system, cfg, rng).run()


@dataclass
class CountResult:
    """Outcome of repeated generic solution counting."""

    count: int | None
    conclusive: bool
    trial_counts: list[int]
    quality_warnings: list[bool]
    details: dict = field(default_factory=dict)


def generic_count(A: ExponentSet, weights=None, trials=2,
                  cfg: TrackerConfig = DEFAULT_CONFIG) -> CountResult:
    """Finite-solution count at `trials` independent random right-hand sides.

    Conclusive only when every trial agrees and no trial tripped the path
    quality warning.
    """
    if trials < 2:
        raise InvalidInputError("need at least two trials")
    n = A.m
    counts, warns = [], []
    for trial in range(trials):
        rng = cfg.rng(2, trial)
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        system = powersum_system(A, c, weights=weights)
        sol = solve_square(system, cfg, rng=rng)
        counts.append(sol.count)
        warns.append(sol.quality_warning)
    conclusive = len(set(counts)) == 1 and not any(warns)
    return CountResult(
        count=counts[0] if conclusive else None,
        conclusive=conclusive,
        trial_counts=counts,
        quality_warnings=warns)


def fiber_points(A: ExponentSet, z, cfg: TrackerConfig = DEFAULT_CONFIG,
                 weights=None, n=None):
    """Solutions of the overdetermined system phi(x) = phi(z).

    Solves the square subsystem of the first n equations and filters by the
    remaining ones at 1e-6 relative. Returns (points, square_solution_set).
    """
    z = np.asarray(z, dtype=complex)
    n = len(z) if n is None else n
    if A.m < n + 1:
        raise InvalidInputError("fiber computation needs more equations than unknowns")
    c = powersum_values(z, A, weights=weights)
    system = powersum_system(A, c, weights=weights, n=n)
    sol = solve_square(system, cfg, rng=cfg.rng(3))
    pts = []
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    for s in sol.finite_solutions:
        ok = True
        for j in range(n, A.m):
            a = A.exponents[j]
            xa = cpow(s.point, a)
            val = np.sum(w * xa) - c[j]
            scale = np.sum(np.abs(w) * np.abs(xa)) + abs(c[j]) + 1e-300
            if abs(val) / scale > 1e-6:
                ok = False
                break
        if ok:
            pts.append(s.point)
    return pts, sol


@dataclass
class DegreeResult:
    """Degree measurement via a random line section."""

    degree: int | None
    finite_count: int
    fiber_size: int
    conclusive: bool
    solutions: SolutionSet | None = None


def _line_section_degree(equations, nx, fiber_size, cfg, rng) -> DegreeResult:
    system = SquareSystem(nx=nx, equations=tuple(equations), has_param=True)
    sol = solve_square(system, cfg, rng=rng)
    count = sol.count
    ratio = count / fiber_size
    degree = round(ratio)
    conclusive = abs(ratio - degree) <= 0.01 and not sol.quality_warning
    return DegreeResult(
        degree=degree if conclusive else None,
        finite_count=count,
        fiber_size=fiber_size,
        conclusive=conclusive,
        solutions=sol)


def image_degree(A: ExponentSet, n=None, cfg: TrackerConfig = DEFAULT_CONFIG) -> DegreeResult:
    """Degree of the measurement-image hypersurface for m = n + 1 exponents.

    Solves phi_j(x) = p_j + t*q_j along a random affine line in measurement
    space; the finite-solution count divided by n! is the degree. A
    non-integer ratio within rounding tolerance 0.01 is inconclusive.
    """
    n = A.m - 1 if n is None else n
    if A.m != n + 1:
        raise InvalidInputError("image degree needs exactly n+1 exponents")
    rng = cfg.rng(4)
    p = rng.standard_normal(A.m) + 1j * rng.standard_normal(A.m)
    q = rng.standard_normal(A.m) + 1j * rng.standard_normal(A.m)
    eqs = [PowerSumEquation(a, (complex(p[j]), complex(q[j])))
           for j, a in enumerate(A.exponents)]
    return _line_section_degree(eqs, n, math.factorial(n), cfg, rng)


def branch_curve_degree(A: ExponentSet, tau, cfg: TrackerConfig = DEFAULT_CONFIG) -> DegreeResult:
    """Degree of the weighted branch curve for three exponents.

    Solves tau_1 x1**a_j + tau_2 x2**a_j = (p_j + t*q_j)**a_j along a random
    line; the count divided by |Stab(tau)| is the curve degree.
    """
    if A.m != 3:
        raise InvalidInputError("branch curves are measured for three exponents")
    tau = tuple(int(t) for t in tau)
    if len(tau) != 2 or any(t < 1 for t in tau):
        raise InvalidInputError("tau must be two positive integers")
    rng = cfg.rng(5)
    p = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    q = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    eqs = []
    for j, a in enumerate(A.exponents):
        rhs = tuple(complex(math.comb(a, k) * p[j] ** (a - k) * q[j] ** k)
                    for k in range(a + 1))
        eqs.append(PowerSumEquation(a, rhs, weights=(float(tau[0]), float(tau[1]))))
    stab = math.factorial(2) if tau[0] == tau[1] else 1
    return _line_section_degree(eqs, 2, stab, cfg, rng)
