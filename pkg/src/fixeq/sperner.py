"""Kuhn (Coxeter-Freudenthal) triangulation of the [0,1]^d grid, Sperner
colorings, and panchromatic-simplex search with boundary-violation reporting.

Grid vertices are integer tuples v in [N]^d with N = 2^ell points per axis;
vertex v sits at coordinate v / (N-1), so cubelets have side 1/(N-1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np


class ExhaustedWithoutWitness(RuntimeError):
    """The scan ended with neither witness: the coloring is not a function."""


@dataclass(frozen=True)
class GridSpec:
    d: int
    ell: int

    def __post_init__(self):
        if self.d < 1 or self.ell < 1:
            raise ValueError("need d >= 1 and ell >= 1")

    @property
    def n_points(self) -> int:
        return 2 ** self.ell

    def coord(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) / (self.n_points - 1)

    def cubelet_bases(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.n_points - 1), repeat=self.d)


@dataclass(frozen=True)
class KuhnSimplex:
    base: tuple[int, ...]
    perm: tuple[int, ...]

    def vertices(self) -> list[tuple[int, ...]]:
        out = [self.base]
        cur = list(self.base)
        for axis in self.perm:
            cur[axis] += 1
            out.append(tuple(cur))
        return out


def simplices_of_cubelet(base, d: int | None = None) -> Iterator[KuhnSimplex]:
    """The d! simplices of one cubelet, in lexicographic permutation order."""
    base = tuple(int(b) for b in base)
    d = len(base) if d is None else d
    for perm in itertools.permutations(range(d)):
        yield KuhnSimplex(base, perm)


class ColoringFn:
    """Memoizing wrapper around a vertex -> color function."""

    def __init__(self, fn: Callable[[tuple[int, ...]], int]):
        self._fn = fn
        self.cache: dict[tuple[int, ...], int] = {}
        self.calls = 0

    def __call__(self, v: tuple[int, ...]) -> int:
        c = self.cache.get(v)
        if c is None:
            self.calls += 1
            c = int(self._fn(v))
            self.cache[v] = c
        return c


@dataclass(frozen=True)
class Panchromatic:
    vertices: tuple[tuple[int, ...], ...]  # ordered so vertex i has color i
    simplex: KuhnSimplex


@dataclass(frozen=True)
class BoundaryViolation:
    vertex: tuple[int, ...]
    axis: int           # 0-based axis
    kind: str           # "zero-face" | "one-face"
    color: int


SpernerOutcome = Panchromatic | BoundaryViolation


def validate_coloring_at(grid: GridSpec, v, color: int) -> BoundaryViolation | None:
    """Check both Sperner boundary rules at one vertex.

    Color i (1-based over axes) is banned on the face x_i = 0; color 0 is
    banned on any face x_i = 1.
    """
    v = tuple(int(x) for x in v)
    n_hi = grid.n_points - 1
    if 1 <= color <= grid.d and v[color - 1] == 0:
        return BoundaryViolation(v, color - 1, "zero-face", color)
    if color == 0:
        for i, x in enumerate(v):
            if x == n_hi:
                return BoundaryViolation(v, i, "one-face", color)
    return None


def iter_panchromatic(grid: GridSpec, coloring: ColoringFn,
                      validate: bool = True) -> Iterator[SpernerOutcome]:
    """Scan cubelets lexicographically and yield panchromatic simplices (or a
    boundary violation, which terminates the stream).

    A cubelet is skipped wholesale when its corner colors do not already
    cover {0..d}: simplex vertices are corners of the cubelet.
    """
    d = grid.d
    full = frozenset(range(d + 1))
    offsets = list(itertools.product((0, 1), repeat=d))
    for base in grid.cubelet_bases():
        corner_colors = {}
        bad = None
        for off in offsets:
            v = tuple(b + o for b, o in zip(base, off))
            fresh = v not in coloring.cache
            c = coloring(v)
            if validate and fresh:
                bad = validate_coloring_at(grid, v, c)
                if bad is not None:
                    yield bad
                    return
            corner_colors[v] = c
        if not full.issubset(corner_colors.values()):
            continue
        for simplex in simplices_of_cubelet(base, d):
            verts = simplex.vertices()
            colors = [corner_colors[v] for v in verts]
            if sorted(colors) == list(range(d + 1)):
                ordered = tuple(verts[colors.index(i)] for i in range(d + 1))
                yield Panchromatic(ordered, simplex)


def find_panchromatic(grid: GridSpec, coloring) -> SpernerOutcome:
    """First panchromatic simplex or first boundary violation, scanning
    cubelets lexicographically with memoized vertex colors."""
    if not isinstance(coloring, ColoringFn):
        coloring = ColoringFn(coloring)
    for outcome in iter_panchromatic(grid, coloring):
        return outcome
    raise ExhaustedWithoutWitness(
        "no panchromatic simplex and no boundary violation: coloring defect")


def count_panchromatic(grid: GridSpec, coloring) -> int:
    """Exhaustive count of panchromatic simplices (odd for valid colorings)."""
    if not isinstance(coloring, ColoringFn):
        coloring = ColoringFn(coloring)
    count = 0
    for outcome in iter_panchromatic(grid, coloring, validate=False):
        if isinstance(outcome, Panchromatic):
            count += 1
    return count
