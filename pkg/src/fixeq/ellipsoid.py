"""Central-cut ellipsoid engine.

Provides feasibility with volume-based emptiness certificates, weak/strong
constrained convex optimization (sliding objective), and weak/strong
approximate projection.  Oracles are callables ``(z, delta) -> SeparationResult``
or plain body specs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import (
    ConvexFn,
    Hyperplane,
    Inside,
    Separated,
    WellBounded,
    outer_radius,
    strong_sep,
    weak_sep,
)
from .numerics import as_vec

FLOAT_FLOOR = 1e-13


class IterationCapExceeded(RuntimeError):
    """Volume rule failed to trigger within the cap: oracle inconsistency."""


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray  # symmetric positive-definite
    iteration: int = 0

    def __post_init__(self):
        self.center = as_vec(self.center)
        self.shape = np.asarray(self.shape, dtype=float)
        self._repair()

    def _repair(self):
        """Symmetrize; pad the diagonal if Cholesky fails (float drift)."""
        self.shape = 0.5 * (self.shape + self.shape.T)
        try:
            np.linalg.cholesky(self.shape)
        except np.linalg.LinAlgError:
            d = self.shape.shape[0]
            self.shape = self.shape + 1e-12 * np.eye(d)
            try:
                np.linalg.cholesky(self.shape)
            except np.linalg.LinAlgError:
                # severe collapse: rebuild around the diagonal magnitude
                scale = max(np.abs(np.diag(self.shape)).max(), 1e-18)
                self.shape = np.eye(d) * scale

    def log_sqrt_det(self) -> float:
        sign, logdet = np.linalg.slogdet(self.shape)
        if sign <= 0:
            self._repair()
            sign, logdet = np.linalg.slogdet(self.shape)
        return 0.5 * logdet

    def cut(self, normal: np.ndarray) -> "EllipsoidState":
        """Central cut keeping {y : <normal, y - center> <= 0}."""
        d = len(self.center)
        a = as_vec(normal)
        Pa = self.shape @ a
        quad = float(a @ Pa)
        if quad <= 0:
            self._repair()
            Pa = self.shape @ a
            quad = max(float(a @ Pa), 1e-300)
        b = Pa / math.sqrt(quad)
        if d == 1:
            center = self.center - b / 2.0
            shape = self.shape / 4.0
        else:
            center = self.center - b / (d + 1.0)
            shape = (d * d / (d * d - 1.0)) * (self.shape - (2.0 / (d + 1.0)) * np.outer(b, b))
        return EllipsoidState(center, shape, self.iteration + 1)


def volume_drop_per_cut(d: int) -> float:
    """log of the per-iteration volume ratio of a central cut."""
    if d == 1:
        return math.log(0.5)
    return 0.5 * (d * math.log(d * d / (d * d - 1.0)) + math.log((d - 1.0) / (d + 1.0)))


@dataclass
class EmptinessCert:
    """Witness that the target set is empty or thinner than an eta-ball."""

    final_ellipsoid: EllipsoidState
    cut_history: list
    volume_bound: float  # eta whose ball-volume exceeded the final ellipsoid
    c_hat: float | None = None

    def holds(self) -> bool:
        d = len(self.final_ellipsoid.center)
        return self.final_ellipsoid.log_sqrt_det() < d * math.log(self.volume_bound)


@dataclass
class Minimizer:
    z: np.ndarray
    value: float
    iterations: int = 0
    c_hat: float | None = None


@dataclass
class Empty:
    cert: EmptinessCert


OptimizeResult = Minimizer | Empty


def _as_weak_oracle(X):
    if callable(X):
        return X
    return lambda z, delta: weak_sep(X, z, delta)


def _as_strong_oracle(X):
    if callable(X):
        return X
    return lambda z: strong_sep(X, z)


class _AffineReduction:
    """Reduced coordinates on the {sum p = 1} plane of an inner simplex.

    Body specs containing a SimplexXi are thin (an affine slice), which
    stalls the ellipsoid: queries never land on the plane exactly.  Solving
    in an orthonormal parameterization of the plane keeps the feasible set
    full-dimensional; lifted answers satisfy the equality to float accuracy.
    """

    def __init__(self, d: int):
        self.d = d
        _, _, V = np.linalg.svd(np.ones((1, d)))
        self.Q = V[1:].T  # d x (d-1), orthonormal, columns orthogonal to 1
        self.origin = np.full(d, 1.0 / d)

    def lift(self, y: np.ndarray) -> np.ndarray:
        return self.origin + self.Q @ y

    def drop(self, z: np.ndarray) -> np.ndarray:
        return self.Q.T @ (as_vec(z) - self.origin)

    def reduce_normal(self, normal: np.ndarray) -> np.ndarray | None:
        a = self.Q.T @ as_vec(normal)
        if np.max(np.abs(a)) < 1e-12:
            return None  # the equality plane itself: excludes nothing in-plane
        return a

    def reduce_fn(self, f: ConvexFn) -> ConvexFn:
        return ConvexFn(self.d - 1,
                        lambda y: f.value(self.lift(y)),
                        lambda y: self.Q.T @ as_vec(f.subgrad(self.lift(y))))

    def weak_oracle(self, oracle):
        def reduced(y, delta):
            res = oracle(self.lift(y), delta)
            if isinstance(res, Inside):
                return res
            a = self.reduce_normal(res.plane.normal)
            if a is None:
                return Inside()
            return Separated(Hyperplane(a, y))
        return reduced

    def strong_oracle(self, oracle):
        def reduced(y):
            res = oracle(self.lift(y))
            if isinstance(res, Inside):
                return res
            a = self.reduce_normal(res.plane.normal)
            if a is None:
                return Inside()
            return Separated(Hyperplane(a, y))
        return reduced


def _simplex_reduction(X) -> _AffineReduction | None:
    from .bodies import Intersection, SimplexXi
    if callable(X):
        return None
    simplex = X if isinstance(X, SimplexXi) else None
    if simplex is None and isinstance(X, Intersection):
        for p in X.parts:
            if isinstance(p, SimplexXi):
                simplex = p
                break
    return _AffineReduction(simplex.d) if simplex is not None else None


def _box_cut(center, clip_box):
    """Exact pre-processing cut when the center escapes the bounding box."""
    if clip_box is None:
        return None
    lo, hi = clip_box
    if np.all(center >= lo) and np.all(center <= hi):
        return None
    d = len(center)
    viol_lo = lo - center
    viol_hi = center - hi
    worst = np.concatenate([viol_lo, viol_hi])
    k = int(np.argmax(worst))
    normal = np.zeros(d)
    normal[k % d] = -1.0 if k < d else 1.0
    return normal


def _trace(trace, **rec):
    if trace is not None:
        trace.append(rec)


def feasibility(sep, dim: int, R: float, eta: float, delta: float,
                clip_box=None, center0=None, trace=None):
    """Find a point the oracle declares Inside at tolerance delta, or emit an
    EmptinessCert once the ellipsoid volume drops below an eta-ball's.

    Iteration cap 2 d (d+1) ln(R/eta) plus margin; exceeding it without the
    volume rule firing signals an inconsistent oracle.
    """
    red = _simplex_reduction(sep)
    if red is not None:
        out = feasibility(red.weak_oracle(_as_weak_oracle(sep)), dim=red.d - 1,
                          R=R, eta=eta, delta=delta, trace=trace)
        return red.lift(out) if isinstance(out, np.ndarray) else out
    oracle = _as_weak_oracle(sep)
    state = EllipsoidState(np.zeros(dim) if center0 is None else center0,
                           R * R * np.eye(dim))
    log_eta_vol = dim * math.log(eta)
    cap = int(math.ceil(2 * dim * (dim + 1) * max(math.log(max(R / eta, 2.0)), 1.0))) + 64
    cuts: list[Hyperplane] = []
    log_sqrt_det = state.log_sqrt_det()
    drop = volume_drop_per_cut(dim)
    for it in range(cap):
        if log_sqrt_det < log_eta_vol:
            cert = EmptinessCert(state, cuts, eta)
            _trace(trace, it=it, kind="empty", logvol=log_sqrt_det)
            return cert
        normal = _box_cut(state.center, clip_box)
        kind = "box"
        if normal is None:
            res = oracle(state.center, delta)
            if isinstance(res, Inside):
                _trace(trace, it=it, kind="inside", logvol=log_sqrt_det)
                return state.center.copy()
            cuts.append(res.plane)
            normal = res.plane.normal
            kind = "sep"
        _trace(trace, it=it, kind=kind, logvol=log_sqrt_det)
        state = state.cut(normal)
        log_sqrt_det += drop
        if state.iteration % 64 == 0:
            log_sqrt_det = state.log_sqrt_det()
    raise IterationCapExceeded(f"no Inside answer and no volume collapse in {cap} iterations")


def _optimize(f: ConvexFn, oracle, *, strong: bool, dim: int, R: float, eta: float,
              delta: float, L_f: float, clip_box=None, center0=None, trace=None) -> OptimizeResult:
    """Sliding-objective central cuts: separation cut when infeasible,
    subgradient cut through the center when feasible."""
    r_stop = max(min(eta, delta / (L_f + 1.0)) / (4.0 * math.sqrt(dim)), FLOAT_FLOOR)
    state = EllipsoidState(np.zeros(dim) if center0 is None else center0,
                           R * R * np.eye(dim))
    cap = int(math.ceil(2 * dim * (dim + 1) * max(math.log(max(R / r_stop, 2.0)), 1.0))) + 64
    log_eta_vol = dim * math.log(eta)
    log_stop = dim * math.log(r_stop)
    cuts: list[Hyperplane] = []
    best_z, best_f = None, math.inf
    log_sqrt_det = state.log_sqrt_det()
    drop = volume_drop_per_cut(dim)
    it = 0
    while it < cap:
        if log_sqrt_det < log_stop:
            break
        if best_z is None and log_sqrt_det < log_eta_vol:
            return Empty(EmptinessCert(state, cuts, eta))
        normal = _box_cut(state.center, clip_box)
        kind = "box"
        if normal is None:
            z = state.center
            res = oracle(z) if strong else oracle(z, delta)
            if isinstance(res, Inside):
                val = f.value(z)
                if val < best_f:
                    best_z, best_f = z.copy(), val
                g = as_vec(f.subgrad(z))
                gmax = np.max(np.abs(g))
                if gmax <= FLOAT_FLOOR:
                    break  # flat objective at a feasible point: done
                normal = g / gmax
                kind = "obj"
            else:
                cuts.append(res.plane)
                normal = res.plane.normal
                kind = "sep"
        _trace(trace, it=it, kind=kind, logvol=log_sqrt_det, best=best_f)
        state = state.cut(normal)
        log_sqrt_det += drop
        if state.iteration % 64 == 0:
            log_sqrt_det = state.log_sqrt_det()
        it += 1
    else:
        if best_z is None:
            raise IterationCapExceeded(f"optimizer made no progress in {cap} iterations")
    if best_z is None:
        return Empty(EmptinessCert(state, cuts, eta))
    if strong:
        best_z, best_f = _bisection_snap(f, oracle, best_z, best_f, state.center)
    return Minimizer(best_z, best_f, iterations=state.iteration)


def _bisection_snap(f: ConvexFn, so, z_best, f_best, candidate, steps: int = 40):
    """Slide from the last feasible iterate toward the final center while
    membership holds; keep the improvement if any."""
    if isinstance(so(candidate), Inside):
        fc = f.value(candidate)
        if fc < f_best:
            return candidate.copy(), fc
        lo_t = 1.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            point = z_best + mid * (candidate - z_best)
            if isinstance(so(point), Inside):
                lo = mid
            else:
                hi = mid
        lo_t = lo
    point = z_best + lo_t * (candidate - z_best)
    fp = f.value(point)
    if fp < f_best and isinstance(so(point), Inside):
        return point, fp
    return z_best, f_best


def wcco(f: ConvexFn, wso, delta: float, R: float, eta: float, L_f: float = 1.0,
         clip_box=None, center0=None, trace=None) -> OptimizeResult:
    """Weak constrained convex optimization.

    Returns a Minimizer z with weak_sep(X, z, delta) = Inside and
    f(z) <= min over the inner delta-parallel body + delta, or Empty with a
    volume certificate against the eta-ball.
    """
    red = _simplex_reduction(wso)
    if red is not None:
        res = _optimize(red.reduce_fn(f), red.weak_oracle(_as_weak_oracle(wso)),
                        strong=False, dim=red.d - 1, R=R, eta=eta, delta=delta,
                        L_f=L_f, trace=trace)
        if isinstance(res, Minimizer):
            res.z = red.lift(res.z)
        return res
    return _optimize(f, _as_weak_oracle(wso), strong=False, dim=f.dim, R=R, eta=eta,
                     delta=delta, L_f=L_f, clip_box=clip_box, center0=center0, trace=trace)


def scco(f: ConvexFn, so, delta: float, R: float, eta: float | None = None,
         L_f: float = 1.0, clip_box=None, center0=None, trace=None) -> OptimizeResult:
    """Strong constrained convex optimization: the minimizer lies in X exactly
    (every candidate was an Inside answer of the strong oracle)."""
    if eta is None:
        eta = max(min(1.0, delta / (L_f + 1.0)) / (8.0 * math.sqrt(f.dim)), FLOAT_FLOOR)
    red = _simplex_reduction(so)
    if red is not None:
        res = _optimize(red.reduce_fn(f), red.strong_oracle(_as_strong_oracle(so)),
                        strong=True, dim=red.d - 1, R=R, eta=eta, delta=delta,
                        L_f=L_f, trace=trace)
        if isinstance(res, Minimizer):
            res.z = red.lift(res.z)
        return res
    return _optimize(f, _as_strong_oracle(so), strong=True, dim=f.dim, R=R, eta=eta,
                     delta=delta, L_f=L_f, clip_box=clip_box, center0=center0, trace=trace)


def _sq_dist_fn(x: np.ndarray) -> ConvexFn:
    x = as_vec(x)
    return ConvexFn(len(x), lambda y: 0.5 * float(np.dot(y - x, y - x)), lambda y: y - x)


def _project_params(X, x, eps, well_bounded: WellBounded | None):
    x = as_vec(x)
    if well_bounded is not None:
        R = well_bounded.R
        eta = well_bounded.r
        center0 = well_bounded.center_hint
    else:
        try:
            R = outer_radius(X) if not callable(X) else float(np.linalg.norm(x) + np.sqrt(len(x)))
        except Exception:
            R = float(np.linalg.norm(x) + np.sqrt(len(x)))
        eta = eps
        center0 = None
    L_f = R + float(np.linalg.norm(x))
    # value tolerance eps**2/8 keeps the positional error below c_hat * eps
    delta_v = max(min(eps, eps * eps / 8.0), FLOAT_FLOOR)
    return x, R + 1e-9, eta, center0, L_f, delta_v


def weak_project(X, x, eps: float, well_bounded: WellBounded | None = None,
                 clip_box=None, trace=None):
    """Approximate projection through a weak oracle.

    Returns z in the eps-parallel body with
    ||z - x||^2 <= min over the inner eps-parallel body of ||x - y||^2 + eps,
    or an EmptinessCert.  Internally runs the sliding-objective engine on
    f(y) = ||y - x||^2 / 2 with the l-inf normalized exact gradient cut.
    """
    x, R, eta, center0, L_f, delta_v = _project_params(X, x, eps, well_bounded)
    res = wcco(_sq_dist_fn(x), X, delta_v, R, eta, L_f,
               clip_box=clip_box, center0=center0, trace=trace)
    if isinstance(res, Empty):
        res.cert.c_hat = c_hat(len(x), eta)
        return res.cert
    return res.z


def strong_project(X, x, eps: float, well_bounded: WellBounded | None = None,
                   clip_box=None, trace=None):
    """As weak_project but through a strong oracle; the output lies in X."""
    x, R, eta, center0, L_f, delta_v = _project_params(X, x, eps, well_bounded)
    res = scco(_sq_dist_fn(x), X, delta_v, R, eta, L_f,
               clip_box=clip_box, center0=center0, trace=trace)
    if isinstance(res, Empty):
        res.cert.c_hat = c_hat(len(x), eta)
        return res.cert
    return res.z


def c_hat(d: int, eta: float) -> float:
    """Approximation-projection constant, instantiated as 1 + sqrt(d)/eta
    (the R/r dilation factor of the inner-shift lemma); recorded in
    certificates so tests can tighten it later."""
    return 1.0 + math.sqrt(d) / eta
