"""Declarative convex bodies compiled into strong/weak separation oracles.

A body is a small dataclass tree (balls, boxes, polytopes, an inner price
simplex, and combinators: intersection, product, Minkowski sum, level sets,
shifts, dilations).  The oracles follow the weak-separation convention: an
Inside answer certifies membership in the delta-parallel body, a Separated
answer carries a hyperplane ``<a, y - z> <= delta`` valid for the inner
parallel body, with the l-inf normalized normal anchored at the query point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import LinCircuit, Polynomial, as_rational, as_vec, eval_circuit, rational_str


class UnsupportedBody(TypeError):
    pass


class EmptyShrink(ValueError):
    pass


class GradientDegenerate(ValueError):
    pass


# ---------------------------------------------------------------------------
# Separation results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperplane:
    """Separator through `anchor` with l-inf normalized `normal`."""

    normal: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        n = as_vec(self.normal)
        scale = np.max(np.abs(n))
        if scale <= 0:
            raise GradientDegenerate("zero separating normal")
        object.__setattr__(self, "normal", n / scale)
        object.__setattr__(self, "anchor", as_vec(self.anchor))

    def margin(self, y) -> float:
        """<a, y - anchor>; nonpositive (up to slack) on the separated body."""
        return float(self.normal @ (as_vec(y) - self.anchor))


@dataclass(frozen=True)
class Inside:
    pass


@dataclass(frozen=True)
class Separated:
    plane: Hyperplane


SeparationResult = Inside | Separated

INSIDE = Inside()


# ---------------------------------------------------------------------------
# Body specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return len(self.center)


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = as_vec(self.lo), as_vec(self.hi)
        if len(lo) != len(hi) or np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)


@dataclass(frozen=True)
class Polytope:
    """{x : A x <= b}."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = as_vec(self.b)
        if A.shape[0] != len(b):
            raise ValueError("row count of A must match b")
        if np.any(np.all(A == 0, axis=1)):
            raise ValueError("polytope rows must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class SimplexXi:
    """Inner price simplex: {p : p_i >= xi, sum p = 1}."""

    d: int
    xi: float

    def __post_init__(self):
        if not 0 <= self.xi < 1.0 / self.d:
            raise ValueError("need 0 <= xi < 1/d")

    @property
    def dim(self):
        return self.d


@dataclass(frozen=True)
class Intersection:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise ValueError("intersection parts must share a dimension")

    @property
    def dim(self):
        return self.parts[0].dim


@dataclass(frozen=True)
class Product:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self):
        return sum(p.dim for p in self.parts)

    def blocks(self):
        lo = 0
        for p in self.parts:
            yield p, slice(lo, lo + p.dim)
            lo += p.dim


@dataclass(frozen=True)
class MinkowskiSum:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise ValueError("minkowski parts must share a dimension")

    @property
    def dim(self):
        return self.parts[0].dim


@dataclass(frozen=True)
class ConvexFn:
    """First-order oracle for a convex function: value and one subgradient."""

    dim: int
    value: Callable[[np.ndarray], float]
    subgrad: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "ConvexFn":
        return cls(p.dim, p.eval, p.grad)


@dataclass(frozen=True)
class LevelSet:
    """{x : f(x) <= threshold} for convex f."""

    fn: ConvexFn
    threshold: float

    @property
    def dim(self):
        return self.fn.dim


@dataclass(frozen=True)
class Shifted:
    base: object
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", as_vec(self.offset))

    @property
    def dim(self):
        return self.base.dim


@dataclass(frozen=True)
class Dilated:
    """Parallel body of a non-analytic base, realized by margin shifts."""

    base: object
    eps: float

    @property
    def dim(self):
        return self.base.dim


@dataclass(frozen=True)
class WeakOnly:
    """Body known only through a weak-separation circuit.

    Circuit convention: inputs (z_1..z_d, delta); outputs
    (b, g_1..g_d) where b > 1/2 means inside and g is an unnormalized
    separating direction otherwise.
    """

    circuit: LinCircuit
    d: int

    @property
    def dim(self):
        return self.d


@dataclass(frozen=True)
class WellBounded:
    """Caller-supplied conditioning: inner radius r, outer radius R."""

    body: object
    r: float
    R: float
    center_hint: np.ndarray | None = None

    def __post_init__(self):
        if not (0 < self.r <= self.R):
            raise ValueError("need 0 < r <= R")


# ---------------------------------------------------------------------------
# Strong separation
# ---------------------------------------------------------------------------

def strong_sep(body, z) -> SeparationResult:
    """Exact membership-or-separator for analytic bodies and combinators."""
    z = as_vec(z)
    if isinstance(body, Ball):
        diff = z - body.center
        if np.linalg.norm(diff) <= body.radius:
            return INSIDE
        return Separated(Hyperplane(diff, z))
    if isinstance(body, Box):
        lo_v = body.lo - z
        hi_v = z - body.hi
        worst = np.concatenate([lo_v, hi_v])
        k = int(np.argmax(worst))
        if worst[k] <= 0:
            return INSIDE
        d = body.dim
        normal = np.zeros(d)
        normal[k % d] = -1.0 if k < d else 1.0
        return Separated(Hyperplane(normal, z))
    if isinstance(body, Polytope):
        viol = body.A @ z - body.b
        k = int(np.argmax(viol))
        if viol[k] <= 0:
            return INSIDE
        return Separated(Hyperplane(body.A[k], z))
    if isinstance(body, SimplexXi):
        k = int(np.argmin(z))
        if z[k] < body.xi:
            e = np.zeros(body.d)
            e[k] = -1.0
            return Separated(Hyperplane(e, z))
        s = float(np.sum(z)) - 1.0
        if abs(s) > 1e-12:
            return Separated(Hyperplane(np.sign(s) * np.ones(body.d), z))
        return INSIDE
    if isinstance(body, Intersection):
        for part in body.parts:
            res = strong_sep(part, z)
            if isinstance(res, Separated):
                return res
        return INSIDE
    if isinstance(body, Product):
        for part, sl in body.blocks():
            res = strong_sep(part, z[sl])
            if isinstance(res, Separated):
                normal = np.zeros(body.dim)
                normal[sl] = res.plane.normal
                return Separated(Hyperplane(normal, z))
        return INSIDE
    if isinstance(body, MinkowskiSum):
        return minkowski_sum_sep(list(body.parts), z, 1e-9)
    if isinstance(body, LevelSet):
        return level_set_sep(body.fn, body.threshold, z)
    if isinstance(body, Shifted):
        res = strong_sep(body.base, z - body.offset)
        if isinstance(res, Separated):
            return Separated(Hyperplane(res.plane.normal, z))
        return res
    if isinstance(body, Dilated):
        if body.eps >= 0:
            try:
                y = exact_project(body.base, z)
            except UnsupportedBody:
                raise UnsupportedBody("strong oracle of a dilated oracle-backed body")
            gap = np.linalg.norm(z - y)
            if gap <= body.eps:
                return INSIDE
            return Separated(Hyperplane(z - y, z))
        raise UnsupportedBody("strong oracle of an inner parallel body; use weak_sep")
    if isinstance(body, WeakOnly):
        raise UnsupportedBody("WeakOnly bodies have no strong oracle")
    raise UnsupportedBody(f"no strong oracle for {type(body).__name__}")


# ---------------------------------------------------------------------------
# Weak separation
# ---------------------------------------------------------------------------

def weak_sep(body, z, delta: float) -> SeparationResult:
    """Weak oracle: Inside certifies the delta-parallel body; a Separated
    plane satisfies <a, y-z> <= delta on the inner delta-parallel body.

    Combinators answer componentwise, so an Inside in the delta-annulus of
    an intersection follows the per-part semantics (either answer is
    permitted there).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = as_vec(z)
    if isinstance(body, Ball):
        return strong_sep(Ball(body.center, body.radius + delta), z)
    if isinstance(body, Box):
        return strong_sep(Box(body.lo - delta, body.hi + delta), z)
    if isinstance(body, Polytope):
        viol = body.A @ z - body.b
        norms = np.linalg.norm(body.A, axis=1)
        k = int(np.argmax(viol / norms))
        if viol[k] <= delta * norms[k]:
            return INSIDE
        return Separated(Hyperplane(body.A[k], z))
    if isinstance(body, SimplexXi):
        k = int(np.argmin(z))
        if z[k] < body.xi - delta:
            e = np.zeros(body.d)
            e[k] = -1.0
            return Separated(Hyperplane(e, z))
        s = float(np.sum(z)) - 1.0
        if abs(s) > delta * np.sqrt(body.d):
            return Separated(Hyperplane(np.sign(s) * np.ones(body.d), z))
        return INSIDE
    if isinstance(body, Intersection):
        for part in body.parts:
            res = weak_sep(part, z, delta)
            if isinstance(res, Separated):
                return res
        return INSIDE
    if isinstance(body, Product):
        for part, sl in body.blocks():
            res = weak_sep(part, z[sl], delta)
            if isinstance(res, Separated):
                normal = np.zeros(body.dim)
                normal[sl] = res.plane.normal
                return Separated(Hyperplane(normal, z))
        return INSIDE
    if isinstance(body, MinkowskiSum):
        return minkowski_sum_sep(list(body.parts), z, delta)
    if isinstance(body, LevelSet):
        return level_set_sep(body.fn, body.threshold + delta, z)
    if isinstance(body, Shifted):
        res = weak_sep(body.base, z - body.offset, delta)
        if isinstance(res, Separated):
            return Separated(Hyperplane(res.plane.normal, z))
        return res
    if isinstance(body, Dilated):
        inner = delta + body.eps
        if inner <= 0:
            # query of a deep inner body at coarse delta: fall back to the
            # strong answer of the base when available
            res = strong_sep(body.base, z)
            return res
        return weak_sep(body.base, z, inner)
    if isinstance(body, WeakOnly):
        out = eval_circuit(body.circuit, np.concatenate([z, [delta]]))
        b, g = out[0], out[1:]
        if b > 0.5:
            return INSIDE
        return Separated(Hyperplane(g, z))
    raise UnsupportedBody(f"no weak oracle for {type(body).__name__}")


def level_set_sep(fn: ConvexFn, threshold: float, z) -> SeparationResult:
    z = as_vec(z)
    if fn.value(z) <= threshold:
        return INSIDE
    g = as_vec(fn.subgrad(z))
    if np.max(np.abs(g)) <= 0:
        raise GradientDegenerate("zero subgradient at an infeasible point")
    return Separated(Hyperplane(g, z))


# ---------------------------------------------------------------------------
# Parallel bodies
# ---------------------------------------------------------------------------

def parallel_body(body, eps: float):
    """Closed eps-parallel body (eps < 0: inner parallel body).

    Balls stay balls.  A shrunk box is a box, but a grown box is a rounded
    box (l2 parallel body), kept exact through a Dilated wrapper whose
    projection walks in from the base projection.
    """
    if isinstance(body, Ball):
        r = body.radius + eps
        if r <= 0:
            raise EmptyShrink(f"ball of radius {body.radius} shrunk by {-eps}")
        return Ball(body.center, r)
    if isinstance(body, Box):
        if eps > 0:
            return Dilated(body, eps)
        lo, hi = body.lo - eps, body.hi + eps
        if np.any(lo > hi):
            raise EmptyShrink("box shrink exceeds inner radius")
        return Box(lo, hi)
    if isinstance(body, Shifted):
        return Shifted(parallel_body(body.base, eps), body.offset)
    if isinstance(body, Dilated):
        return parallel_body(body.base, body.eps + eps) if isinstance(body.base, (Ball, Box)) \
            else Dilated(body.base, body.eps + eps)
    return Dilated(body, eps)


# ---------------------------------------------------------------------------
# Exact projections
# ---------------------------------------------------------------------------

_MAX_PROJ_FACETS = 8


def exact_project(body, x) -> np.ndarray:
    """Euclidean nearest point, for the analytic fixture shapes."""
    x = as_vec(x)
    if isinstance(body, Ball):
        diff = x - body.center
        n = np.linalg.norm(diff)
        if n <= body.radius:
            return x.copy()
        return body.center + diff * (body.radius / n)
    if isinstance(body, Box):
        return np.clip(x, body.lo, body.hi)
    if isinstance(body, SimplexXi):
        return _project_simplex_floor(x, body.xi)
    if isinstance(body, Polytope):
        return _project_polytope(body, x)
    if isinstance(body, Shifted):
        return exact_project(body.base, x - body.offset) + body.offset
    if isinstance(body, Product):
        out = np.empty(body.dim)
        for part, sl in body.blocks():
            out[sl] = exact_project(part, x[sl])
        return out
    if isinstance(body, Dilated) and body.eps >= 0:
        y = exact_project(body.base, x)
        gap = np.linalg.norm(x - y)
        if gap <= body.eps:
            return x.copy()
        return y + (x - y) * (body.eps / gap)
    raise UnsupportedBody(f"no exact projection for {type(body).__name__}")


def _project_simplex_floor(x: np.ndarray, xi: float) -> np.ndarray:
    """Project onto {y >= xi, sum y = 1}: shifted simplex projection."""
    d = len(x)
    free = np.ones(d, dtype=bool)
    y = np.full(d, xi, dtype=float)
    for _ in range(d):
        nf = int(free.sum())
        mu = (1.0 - xi * (d - nf) - x[free].sum()) / nf
        cand = x[free] + mu
        if np.all(cand >= xi - 1e-15):
            y[free] = np.maximum(cand, xi)
            return y
        newly = np.where(free)[0][cand < xi]
        free[newly] = False
    return y


def _project_polytope(body: Polytope, x: np.ndarray) -> np.ndarray:
    if body.A.shape[0] > _MAX_PROJ_FACETS:
        raise UnsupportedBody(f"polytope projection limited to {_MAX_PROJ_FACETS} facets")
    if np.all(body.A @ x <= body.b + 1e-12):
        return x.copy()
    m, d = body.A.shape
    best, best_dist = None, np.inf
    for k in range(0, min(m, d) + 1):
        for rows in itertools.combinations(range(m), k):
            if k == 0:
                y = x.copy()
            else:
                As = body.A[list(rows)]
                bs = body.b[list(rows)]
                gram = As @ As.T
                try:
                    lam = np.linalg.solve(gram, As @ x - bs)
                except np.linalg.LinAlgError:
                    continue
                if np.any(lam < -1e-10):
                    continue
                y = x - As.T @ lam
            if np.all(body.A @ y <= body.b + 1e-9):
                dist = np.linalg.norm(x - y)
                if dist < best_dist - 1e-15:
                    best, best_dist = y, dist
    if best is None:
        raise EmptyShrink("polytope appears empty")
    return best


def distance_to(body, x) -> float:
    return float(np.linalg.norm(as_vec(x) - exact_project(body, x)))


# ---------------------------------------------------------------------------
# Support functions, vertices, Hausdorff distance
# ---------------------------------------------------------------------------

def support_function(body, u) -> float:
    """h(u) = max_{x in body} <u, x> for analytic bodies."""
    u = as_vec(u)
    if isinstance(body, Ball):
        return float(body.center @ u + body.radius * np.linalg.norm(u))
    if isinstance(body, Box):
        return float(np.maximum(body.lo * u, body.hi * u).sum())
    if isinstance(body, (Polytope, SimplexXi)):
        verts = vertices(body)
        return float(max(v @ u for v in verts))
    if isinstance(body, Shifted):
        return support_function(body.base, u) + float(body.offset @ u)
    if isinstance(body, MinkowskiSum):
        return sum(support_function(p, u) for p in body.parts)
    if isinstance(body, Dilated) and body.eps >= 0:
        return support_function(body.base, u) + body.eps * float(np.linalg.norm(u))
    raise UnsupportedBody(f"no support function for {type(body).__name__}")


def support_argmax(body, u) -> np.ndarray:
    u = as_vec(u)
    if isinstance(body, Ball):
        n = np.linalg.norm(u)
        return body.center + (body.radius / n) * u if n > 0 else body.center.copy()
    if isinstance(body, Box):
        return np.where(u >= 0, body.hi, body.lo).astype(float)
    if isinstance(body, (Polytope, SimplexXi)):
        verts = vertices(body)
        return max(verts, key=lambda v: float(v @ u)).copy()
    if isinstance(body, Shifted):
        return support_argmax(body.base, u) + body.offset
    raise UnsupportedBody(f"no support argmax for {type(body).__name__}")


def vertices(body) -> list[np.ndarray]:
    if isinstance(body, Box):
        return [np.array(c, dtype=float) for c in itertools.product(*zip(body.lo, body.hi))]
    if isinstance(body, SimplexXi):
        d, xi = body.d, body.xi
        out = []
        for k in range(d):
            v = np.full(d, xi)
            v[k] = 1.0 - (d - 1) * xi
            out.append(v)
        return out
    if isinstance(body, Polytope):
        m, d = body.A.shape
        out = []
        for rows in itertools.combinations(range(m), d):
            As = body.A[list(rows)]
            bs = body.b[list(rows)]
            try:
                v = np.linalg.solve(As, bs)
            except np.linalg.LinAlgError:
                continue
            if np.all(body.A @ v <= body.b + 1e-9) and not any(
                np.allclose(v, w, atol=1e-12) for w in out
            ):
                out.append(v)
        if not out:
            raise EmptyShrink("polytope has no vertices (empty or unbounded)")
        return out
    if isinstance(body, Shifted):
        return [v + body.offset for v in vertices(body.base)]
    raise UnsupportedBody(f"no vertex enumeration for {type(body).__name__}")


def outer_radius(body) -> float:
    """Radius of an origin-centered ball containing the body."""
    if isinstance(body, Ball):
        return float(np.linalg.norm(body.center) + body.radius)
    if isinstance(body, Box):
        return float(np.linalg.norm(np.maximum(np.abs(body.lo), np.abs(body.hi))))
    if isinstance(body, (Polytope, SimplexXi)):
        return float(max(np.linalg.norm(v) for v in vertices(body)))
    if isinstance(body, Shifted):
        return outer_radius(body.base) + float(np.linalg.norm(body.offset))
    if isinstance(body, Intersection):
        return float(min(outer_radius(p) for p in body.parts if _has_outer(p)))
    if isinstance(body, Product):
        return float(np.sqrt(sum(outer_radius(p) ** 2 for p in body.parts)))
    if isinstance(body, MinkowskiSum):
        return float(sum(outer_radius(p) for p in body.parts))
    if isinstance(body, Dilated):
        return outer_radius(body.base) + max(body.eps, 0.0)
    raise UnsupportedBody(f"no outer radius for {type(body).__name__}")


def _has_outer(body) -> bool:
    try:
        outer_radius(body)
        return True
    except UnsupportedBody:
        return False


def hausdorff_distance(a, b, n_dirs: int = 512) -> float:
    """Hausdorff distance via sup over directions of |h_a - h_b|.

    Exact for ball pairs; for other support-capable pairs the supremum is
    sampled over n_dirs directions plus structural candidates (axes, box
    corners, center offsets), so the result is a certified lower estimate.
    """
    if isinstance(a, Ball) and isinstance(b, Ball):
        return float(np.linalg.norm(a.center - b.center) + abs(a.radius - b.radius))
    d = a.dim
    if b.dim != d:
        raise UnsupportedBody("dimension mismatch")
    dirs = [np.eye(d)[i] * s for i in range(d) for s in (+1.0, -1.0)]
    dirs += [np.array(c, dtype=float) for c in itertools.product((-1.0, 1.0), repeat=d)]
    for body in (a, b):
        if isinstance(body, Ball):
            dirs.append(body.center)
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(n_dirs, d))
    dirs += [row for row in raw]
    best = 0.0
    for u in dirs:
        n = np.linalg.norm(u)
        if n == 0:
            continue
        u = u / n
        best = max(best, abs(support_function(a, u) - support_function(b, u)))
    return float(best)


# ---------------------------------------------------------------------------
# Minkowski sum separation via an ellipsoid feasibility subproblem
# ---------------------------------------------------------------------------

def minkowski_sum_sep(parts: Sequence, s, delta: float) -> SeparationResult:
    """Is s in part_1 + ... + part_n, up to delta?

    Feasibility of {x_i in part_i, sum x_i = s} with the last block
    eliminated (x_n = s - sum of the others), run through the ellipsoid
    engine; on emptiness the separating normal in s-space is recovered by
    support-function ascent and verified before being returned.
    """
    from .ellipsoid import feasibility, EmptinessCert  # local: avoid cycle

    s = as_vec(s)
    n = len(parts)
    d = len(s)
    if n == 1:
        return weak_sep(parts[0], s, delta)
    radius = [outer_radius(p) for p in parts]

    def oracle(z, dlt):
        xs = [z[i * d:(i + 1) * d] for i in range(n - 1)]
        for i, x in enumerate(xs):
            res = weak_sep(parts[i], x, dlt)
            if isinstance(res, Separated):
                normal = np.zeros((n - 1) * d)
                normal[i * d:(i + 1) * d] = res.plane.normal
                return Separated(Hyperplane(normal, z))
        xn = s - sum(xs)
        res = weak_sep(parts[-1], xn, dlt)
        if isinstance(res, Separated):
            # x_n = s - sum x_i: the cut -a_n on every eliminated block
            normal = np.tile(-res.plane.normal, n - 1)
            return Separated(Hyperplane(normal, z))
        return INSIDE

    R = float(np.sqrt(sum(r * r for r in radius[:-1]))) + 1e-6
    eta = min(delta / max(1.0, np.sqrt(n)), 0.25)
    out = feasibility(oracle, dim=(n - 1) * d, R=R, eta=eta, delta=delta)
    if not isinstance(out, EmptinessCert):
        return INSIDE
    u = _separating_direction(parts, s)
    if u is None:
        # fall back to pointing from the sum of centers toward s
        u = s - sum(support_argmax(p, np.zeros(d) + 1e-9) for p in parts)
    return Separated(Hyperplane(u, s))


def _separating_direction(parts, s, iters: int = 300) -> np.ndarray | None:
    """Maximize <u,s> - sum_i h_i(u) over the unit sphere (supergradient)."""
    d = len(s)
    try:
        centers = sum(support_argmax(p, np.full(d, 1e-12)) for p in parts)
    except UnsupportedBody:
        centers = np.zeros(d)
    u = s - centers
    if np.linalg.norm(u) == 0:
        u = np.ones(d)
    u = u / np.linalg.norm(u)
    best_u, best_gap = None, 0.0
    for t in range(iters):
        try:
            g = s - sum(support_argmax(p, u) for p in parts)
        except UnsupportedBody:
            return None
        gap = float(u @ s) - sum(support_function(p, u) for p in parts)
        if gap > best_gap:
            best_u, best_gap = u.copy(), gap
        step = 1.0 / (t + 2.0)
        u = u + step * g
        nu = np.linalg.norm(u)
        if nu == 0:
            break
        u = u / nu
    return best_u


# ---------------------------------------------------------------------------
# JSON body schema
# ---------------------------------------------------------------------------

def _num(value) -> float:
    if isinstance(value, str):
        return float(as_rational(value))
    return float(value)


def body_from_json(data: dict):
    tag = data["type"]
    if tag == "ball":
        return Ball(np.array([_num(v) for v in data["center"]]), _num(data["radius"]))
    if tag == "box":
        return Box(np.array([_num(v) for v in data["lo"]]), np.array([_num(v) for v in data["hi"]]))
    if tag == "polytope":
        return Polytope(np.array([[_num(v) for v in row] for row in data["A"]]),
                        np.array([_num(v) for v in data["b"]]))
    if tag == "simplex_xi":
        return SimplexXi(int(data["d"]), _num(data["xi"]))
    if tag == "intersection":
        return Intersection(tuple(body_from_json(p) for p in data["parts"]))
    if tag == "product":
        return Product(tuple(body_from_json(p) for p in data["parts"]))
    if tag == "minkowski_sum":
        return MinkowskiSum(tuple(body_from_json(p) for p in data["parts"]))
    if tag == "level_set":
        poly = Polynomial.from_json(data["f"])
        return LevelSet(ConvexFn.from_polynomial(poly), _num(data["threshold"]))
    if tag == "shifted":
        return Shifted(body_from_json(data["base"]), np.array([_num(v) for v in data["offset"]]))
    if tag == "weak_circuit":
        return WeakOnly(LinCircuit.from_json(data["circuit"]), int(data["d"]))
    raise ValueError(f"unknown body tag {tag!r}")


def body_to_json(body) -> dict:
    if isinstance(body, Ball):
        return {"type": "ball", "center": [repr(float(v)) for v in body.center], "radius": repr(float(body.radius))}
    if isinstance(body, Box):
        return {"type": "box", "lo": [repr(float(v)) for v in body.lo], "hi": [repr(float(v)) for v in body.hi]}
    if isinstance(body, Polytope):
        return {"type": "polytope", "A": [[repr(float(v)) for v in row] for row in body.A],
                "b": [repr(float(v)) for v in body.b]}
    if isinstance(body, SimplexXi):
        return {"type": "simplex_xi", "d": body.d, "xi": repr(float(body.xi))}
    if isinstance(body, Intersection):
        return {"type": "intersection", "parts": [body_to_json(p) for p in body.parts]}
    if isinstance(body, Product):
        return {"type": "product", "parts": [body_to_json(p) for p in body.parts]}
    if isinstance(body, MinkowskiSum):
        return {"type": "minkowski_sum", "parts": [body_to_json(p) for p in body.parts]}
    if isinstance(body, Shifted):
        return {"type": "shifted", "base": body_to_json(body.base),
                "offset": [repr(float(v)) for v in body.offset]}
    if isinstance(body, WeakOnly):
        return {"type": "weak_circuit", "circuit": body.circuit.to_json(), "d": body.d}
    raise UnsupportedBody(f"no JSON form for {type(body).__name__}")
