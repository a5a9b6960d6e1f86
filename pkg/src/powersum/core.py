"""Shared domain types, deterministic randomness, and tolerance policy.

Points are plain complex numpy arrays; the structured records below carry
the measurement exponents, right-hand sides, numerical configuration, and
solver output that every other module exchanges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "ExponentSet",
    "Measurement",
    "TrackerConfig",
    "Solution",
    "SolutionSet",
    "DEFAULT_CONFIG",
    "normalize_point",
    "orbit_size",
    "point_key",
    "dedup_points",
    "as_point",
]


class InvalidInputError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


class NumericalError(RuntimeError):
    """Raised when an iterative method fails to converge.

    Carries a ``diagnostics`` dict with residuals or other state useful
    for a failure report.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ExponentSet:
    """The measurement exponents a_1 < ... < a_m with residue data mod 2, 3."""

    exponents: tuple[int, ...]
    gcd: int = field(init=False)
    residues2: frozenset[int] = field(init=False)
    residues3: frozenset[int] = field(init=False)

    def __post_init__(self):
        exps = tuple(int(a) for a in self.exponents)
        if len(exps) == 0:
            raise InvalidInputError("exponent set must be nonempty")
        if any(a < 1 for a in exps):
            raise InvalidInputError("exponents must be positive integers")
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise InvalidInputError("exponents must be strictly increasing")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "gcd", math.gcd(*exps))
        object.__setattr__(self, "residues2", frozenset(a % 2 for a in exps))
        object.__setattr__(self, "residues3", frozenset(a % 3 for a in exps))

    @property
    def m(self):
        return len(self.exponents)

    def bezout(self, n=None):
        """Product of the first n exponents (all of them by default)."""
        n = self.m if n is None else n
        return math.prod(self.exponents[:n])

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self):
        return len(self.exponents)


@dataclass(frozen=True)
class Measurement:
    """Right-hand-side vector c with a field tag."""

    values: tuple[complex, ...]
    field: str = "complex"  # one of complex / real / nonnegative

    def __post_init__(self):
        if self.field not in ("complex", "real", "nonnegative"):
            raise InvalidInputError(f"unknown field tag {self.field!r}")
        vals = tuple(complex(v) for v in self.values)
        if self.field in ("real", "nonnegative"):
            if any(abs(v.imag) > 0 for v in vals):
                raise InvalidInputError(f"{self.field} measurement has imaginary part")
            if self.field == "nonnegative" and any(v.real < 0 for v in vals):
                raise InvalidInputError("nonnegative measurement has negative value")
        object.__setattr__(self, "values", vals)

    @property
    def m(self):
        return len(self.values)

    def as_array(self):
        if self.field == "complex":
            return np.array(self.values, dtype=complex)
        return np.array([v.real for v in self.values], dtype=float)


@dataclass(frozen=True)
class TrackerConfig:
    """All tolerances, step control, and randomness in one auditable record.

    ``dedup_tol`` must stay well above ``newton_tol`` so that converged
    endpoints of distinct paths are never confused with duplicates.
    """

    seed: int = 20240801
    newton_tol: float = 1e-10
    dedup_tol: float = 1e-6
    divergence_threshold: float = 1e8
    min_step: float = 1e-11
    max_steps_per_path: int = 5000
    rank_tol: float = 1e-8
    # endgame controls: a path still unresolved at the end of tracking is
    # declared divergent when its norm exceeded divergence_soft or kept
    # growing by divergence_growth across the last two checkpoints.
    divergence_soft: float = 1e3
    divergence_growth: float = 1.04
    polish_tol: float = 1e-8
    anchor_tol: float = 1e-6
    corrector_iters: int = 3
    workers: int = 1

    def __post_init__(self):
        pos = ("newton_tol", "dedup_tol", "divergence_threshold", "min_step",
               "rank_tol", "divergence_soft", "polish_tol")
        for name in pos:
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.dedup_tol <= self.newton_tol:
            raise InvalidInputError("dedup_tol must exceed newton_tol")
        if self.max_steps_per_path < 1:
            raise InvalidInputError("max_steps_per_path must be positive")

    def rng(self, *task_key: int) -> np.random.Generator:
        """Deterministic per-task generator; the task key is mixed into the seed."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(task_key)))

    def replace(self, **kw) -> "TrackerConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = TrackerConfig()


@dataclass(frozen=True)
class Solution:
    """One finite solution with its accuracy diagnostics."""

    point: np.ndarray
    residual: float
    condition: float
    cluster_size: int = 1


@dataclass
class SolutionSet:
    """Finite solutions plus the bookkeeping of where every path went."""

    finite_solutions: list[Solution]
    diverged_paths: int
    failed_paths: int
    bezout_paths: int
    quality_warning: bool = False

    def __post_init__(self):
        # merged endpoint clusters count once per absorbed path
        finite = sum(s.cluster_size for s in self.finite_solutions)
        total = finite + self.diverged_paths + self.failed_paths
        if total != self.bezout_paths:
            raise InvalidInputError(
                f"path accounting broken: {finite} finite + "
                f"{self.diverged_paths} diverged + {self.failed_paths} failed != "
                f"{self.bezout_paths} paths")

    @property
    def count(self):
        return len(self.finite_solutions)

    def points(self) -> np.ndarray:
        if not self.finite_solutions:
            return np.zeros((0, 0), dtype=complex)
        return np.array([s.point for s in self.finite_solutions])

    def multisets(self, dedup_tol=1e-6):
        """Distinct coordinate multisets among the finite solutions."""
        reps = [normalize_point(s.point) for s in self.finite_solutions]
        return dedup_points(reps, dedup_tol)


def as_point(coords) -> np.ndarray:
    p = np.atleast_1d(np.asarray(coords, dtype=complex))
    if p.ndim != 1:
        raise InvalidInputError("a point is a one-dimensional coordinate sequence")
    return p


def normalize_point(p) -> np.ndarray:
    """Canonical representative of a point's coordinate-permutation orbit.

    Sorts coordinates by (real, imaginary) lexicographically. Idempotent,
    and invariant under permuting the input.
    """
    p = as_point(p)
    if not np.all(np.isfinite(p.view(float))):
        raise InvalidInputError("cannot normalize a point with non-finite coordinates")
    order = np.lexsort((p.imag, p.real))
    return p[order]


def orbit_size(p, tol=1e-9) -> int:
    """Number of distinct coordinate permutations of p.

    Coordinates within tol of each other (max-norm, after sorting) are
    treated as equal, so the result is n! divided by the factorials of the
    repetition multiplicities.
    """
    q = normalize_point(p)
    n = len(q)
    size = math.factorial(n)
    run = 1
    for i in range(1, n + 1):
        if i < n and abs(q[i] - q[i - 1]) <= tol:
            run += 1
        else:
            size //= math.factorial(run)
            run = 1
    return size


def point_key(p) -> tuple:
    """Sort key giving a canonical order on points of equal dimension."""
    p = np.asarray(p, dtype=complex)
    return tuple(x for c in p for x in (c.real, c.imag))


def dedup_points(points: Sequence[np.ndarray], tol: float):
    """Merge points closer than tol in max-norm; returns (representatives, cluster_sizes).

    Points are compared as ordered tuples: coordinate permutations of one
    another are distinct solutions and are not merged. Representatives are
    returned in canonical order so output never depends on input order.
    """
    pts = [np.asarray(p, dtype=complex) for p in points]
    k = len(pts)
    if k == 0:
        return [], []
    order = sorted(range(k), key=lambda i: point_key(pts[i]))
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a in range(k):
        i = order[a]
        for b in range(a + 1, k):
            j = order[b]
            if np.max(np.abs(pts[i] - pts[j])) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    reps, sizes = [], []
    for members in groups.values():
        stack = np.array([pts[i] for i in members])
        reps.append(stack.mean(axis=0))
        sizes.append(len(members))
    order = sorted(range(len(reps)), key=lambda i: point_key(reps[i]))
    return [reps[i] for i in order], [sizes[i] for i in order]
