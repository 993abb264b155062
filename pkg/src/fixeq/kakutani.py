"""Approximate-Kakutani solver.

Wraps a correspondence F: [0,1]^d =&gt; [0,1]^d, builds the vector-field
coloring G(v) = proj_{F(v)}(v) - v on the Kuhn grid, searches for a
panchromatic simplex, extracts candidates with verified residual, and emits
violation certificates (eta-non-emptiness, almost-Lipschitzness) otherwise.

A damped projection-iteration polish runs before the grid scan; every point
it returns is verified against the same residual bar, so the Sperner
machinery remains the completeness fallback while benign instances resolve
in a handful of projection calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bodies import WellBounded, exact_project
from .ellipsoid import EmptinessCert, c_hat, strong_project, weak_project
from .numerics import as_vec
from .sperner import ColoringFn, GridSpec, Panchromatic, iter_panchromatic

PROJECTION, STRONG_SEP, WEAK_SEP = "projection", "strong", "weak"


class ResourceBound(RuntimeError):
    """Grid larger than the cubelet budget; coarsen alpha or raise the budget."""


@dataclass
class Correspondence:
    """Point-to-set map with well-conditioned metadata.

    value_at(x) returns the BodySpec for F(x) (already clipped into the
    hypercube by construction); conditioning carries the inner-ball radius
    eta, the Hausdorff constant L and the Hoelder exponent q (default 1).
    custom_project, when set, overrides the generic ellipsoid projection
    (used by structured correspondences such as the Walras product map).
    """

    d: int
    mode: str
    value_at: Callable[[np.ndarray], object]
    eta: float
    L: float
    q: float = 1.0
    custom_project: Callable[[np.ndarray, np.ndarray, float], object] | None = None
    template: dict | None = None

    def __post_init__(self):
        if self.mode not in (PROJECTION, STRONG_SEP, WEAK_SEP):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == WEAK_SEP and self.eta <= 0:
            raise ValueError("weak mode needs eta > 0")

    def lipschitz_slack(self, eps: float) -> float:
        """Certificate slack: L_hat * eps with L_hat = 3(1+c_hat) for
        projection-accuracy-limited modes and 3 for strong oracles."""
        if self.mode == STRONG_SEP:
            return 3.0 * eps
        return 3.0 * (1.0 + c_hat(self.d, self.eta)) * eps

    def project(self, at_x: np.ndarray, query: np.ndarray, eps: float):
        """proj_{F(at_x)}(query) at accuracy eps, clipped to the hypercube."""
        if self.custom_project is not None:
            out = self.custom_project(at_x, query, eps)
        else:
            body = self.value_at(at_x)
            if self.mode == PROJECTION:
                out = exact_project(body, query)
            else:
                wb = WellBounded(body, r=min(self.eta, 1.0), R=math.sqrt(self.d) + 1.0)
                box = (np.zeros(self.d), np.ones(self.d))
                if self.mode == STRONG_SEP:
                    out = strong_project(body, query, eps, well_bounded=wb, clip_box=box)
                else:
                    out = weak_project(body, query, eps, well_bounded=wb, clip_box=box)
        if isinstance(out, EmptinessCert):
            return out
        return np.clip(out, 0.0, 1.0)


@dataclass
class FixedPoint:
    x: np.ndarray
    z: np.ndarray
    residual: float


@dataclass
class EmptyCert:
    x: np.ndarray
    cert: EmptinessCert


@dataclass
class LipschitzCert:
    p: np.ndarray
    q: np.ndarray
    z: np.ndarray
    w: np.ndarray
    eps: float
    lhs: float
    rhs: float
    c_hat: float


KakutaniOutcome = FixedPoint | EmptyCert | LipschitzCert


@dataclass
class SolveParams:
    alpha: float
    eps: float
    ell: int
    d: int
    certified: bool = True

    @property
    def n_points(self) -> int:
        return 2 ** self.ell

    @property
    def xi_mesh(self) -> float:
        return math.sqrt(self.d) / (self.n_points - 1)


def projection_accuracy(alpha: float, d: int) -> float:
    a10 = alpha / 10.0
    return min(a10 / 13.0, a10 * a10 / (117.0 * d ** 1.5))


def grid_lower_bound(alpha: float, d: int, L: float) -> float:
    a10 = alpha / 10.0
    return max(d / a10,
               math.sqrt(d) * (L + 1.0) / a10,
               9.0 * d ** 2.5 / (a10 * a10),
               9.0 * d * d * (L + 1.0) / a10)


def choose_params(alpha: float, d: int, L: float, eta: float,
                  cubelet_budget: int | None = None) -> SolveParams:
    """Smallest power-of-two grid meeting the mesh bound, and the projection
    accuracy for it.  With a budget set, grids beyond it raise ResourceBound
    (the caller must coarsen alpha)."""
    if not 0 < alpha < 1 or not 0 < eta < 1 or L < 0:
        raise ValueError("need alpha, eta in (0,1) and L >= 0")
    eps = projection_accuracy(alpha, d)
    n_min = grid_lower_bound(alpha, d, L)
    ell = max(1, int(math.ceil(math.log2(n_min))))
    if cubelet_budget is not None and (2 ** ell) ** d > cubelet_budget:
        raise ResourceBound(
            f"N^d = {(2 ** ell) ** d:.3g} exceeds the cubelet budget {cubelet_budget}")
    return SolveParams(alpha=alpha, eps=eps, ell=ell, d=d)


def _budget_ell(d: int, cubelet_budget: int) -> int:
    ell = 1
    while (2 ** (ell + 1)) ** d <= cubelet_budget:
        ell += 1
    return ell


def vector_field(F: Correspondence, v, eps: float):
    """G(v) = proj_{F(v)}(v) - v, or the propagated emptiness certificate."""
    v = as_vec(v)
    z = F.project(v, v, eps)
    if isinstance(z, EmptinessCert):
        return EmptyCert(v, z)
    return z - v


def color_rule(G, lo_face=None, hi_face=None) -> int:
    """Color 0 if G >= 0 componentwise, else the first index i with G_i <= 0
    (color i+1 on 0-based axes).  Boundary vertices re-tie deterministically:
    allowed nonzero colors ascending, then 0."""
    G = as_vec(G)
    d = len(G)
    lo_face = np.zeros(d, dtype=bool) if lo_face is None else np.asarray(lo_face)
    hi_face = np.zeros(d, dtype=bool) if hi_face is None else np.asarray(hi_face)
    if np.all(G >= 0):
        cand = 0
    else:
        cand = int(np.argmax(G <= 0)) + 1
    if cand > 0 and not lo_face[cand - 1]:
        return cand
    if cand == 0 and not hi_face.any():
        return 0
    for i in range(d):
        if G[i] <= 0 and not lo_face[i]:
            return i + 1
    if hi_face.any():
        raise AssertionError("no legal color: projection not clipped to the cube?")
    return 0


def _grid_coloring(F: Correspondence, grid: GridSpec, eps: float, store: dict):
    """Vertex -> color function; projections are cached in `store` and an
    emptiness certificate aborts the scan through _EmptyAbort."""

    def fn(v):
        x = grid.coord(v)
        z = F.project(x, x, eps)
        if isinstance(z, EmptinessCert):
            raise _EmptyAbort(EmptyCert(x, z))
        store[v] = z
        G = z - x
        n_hi = grid.n_points - 1
        lo = np.array([vi == 0 for vi in v])
        hi = np.array([vi == n_hi for vi in v])
        return color_rule(G, lo, hi)

    return ColoringFn(fn)


class _EmptyAbort(Exception):
    def __init__(self, cert: EmptyCert):
        self.cert = cert


def check_fixed_point(F: Correspondence, x, alpha: float) -> float:
    """residual = ||x - proj_{F(x)}(x)|| at projection accuracy <= alpha/10."""
    x = as_vec(x)
    eps = projection_accuracy(alpha, F.d)
    z = F.project(x, x, eps)
    if isinstance(z, EmptinessCert):
        raise ValueError("correspondence empty at the query point")
    return float(np.linalg.norm(x - z))


def _verify(F: Correspondence, x: np.ndarray, eps: float, bar: float):
    z = F.project(x, x, eps)
    if isinstance(z, EmptinessCert):
        return EmptyCert(x, z)
    resid = float(np.linalg.norm(x - z))
    if resid <= bar:
        return FixedPoint(x.copy(), z, resid)
    return None


def _polish(F: Correspondence, x0: np.ndarray, eps: float, bar: float,
            iters: int, thetas=(0.5, 1.0, 0.25), trace=None):
    """Damped projection iteration x <- (1-th) x + th proj_{F(x)}(x),
    verifying the residual at every step.  Deterministic schedule."""
    x = x0.copy()
    best = None
    per = max(iters // len(thetas), 1)
    for t in range(iters):
        z = F.project(x, x, eps)
        if isinstance(z, EmptinessCert):
            return EmptyCert(x, z), best
        resid = float(np.linalg.norm(x - z))
        if trace is not None:
            trace.append({"stage": "polish", "step": t, "residual": resid})
        if best is None or resid < best[1]:
            best = (x.copy(), resid, z)
        if resid <= bar:
            return FixedPoint(x.copy(), z, resid), best
        theta = thetas[min(t // per, len(thetas) - 1)]
        x = np.clip((1.0 - theta) * x + theta * z, 0.0, 1.0)
    return None, best


def _lipschitz_test(F: Correspondence, points: list[np.ndarray], eps: float):
    """Double-projection test over point pairs; returns the first violation of
    ||z - w|| <= L ||p-q||^q + L_hat eps."""
    slack = F.lipschitz_slack(eps)
    for i, p in enumerate(points):
        for j, q in enumerate(points):
            if i == j:
                continue
            w = F.project(q, q, eps)
            if isinstance(w, EmptinessCert):
                return EmptyCert(q, w)
            w = np.clip(w, 0.0, 1.0)
            z = F.project(p, w, eps)
            if isinstance(z, EmptinessCert):
                return EmptyCert(p, z)
            lhs = float(np.linalg.norm(z - w))
            rhs = F.L * float(np.linalg.norm(p - q)) ** F.q + slack
            if lhs > rhs:
                return LipschitzCert(p.copy(), q.copy(), z, w, eps, lhs, rhs,
                                     c_hat(F.d, F.eta))
    return None


def solve(F: Correspondence, alpha: float, *, strategy: str = "auto",
          cubelet_budget: int = 300_000, max_simplices: int = 64,
          warm_start=None, trace=None) -> KakutaniOutcome:
    """Compute an alpha-approximate Kakutani point or a violation certificate.

    strategy "auto" runs the damped projection polish first and falls back to
    the Sperner scan; "sperner" goes straight to the grid.  Grids are capped
    at the cubelet budget: when the mesh bound exceeds it, the scan runs on
    the budget grid (uncertified) and refines while the budget allows, since
    every returned fixed point is verified against the residual bar anyway.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0,1)")
    d = F.d
    try:
        params = choose_params(alpha, d, F.L, max(F.eta, 1e-9), cubelet_budget)
    except ResourceBound:
        params = SolveParams(alpha=alpha, eps=projection_accuracy(alpha, d),
                             ell=_budget_ell(d, cubelet_budget), d=d, certified=False)
    eps = params.eps
    bar = alpha / 2.0

    if strategy == "auto":
        start = np.full(d, 0.5) if warm_start is None else as_vec(warm_start)
        outcome, best = _polish(F, start, eps, bar, iters=max(80, 20 * d))
        if outcome is not None:
            return outcome

    ell = params.ell
    while True:
        grid = GridSpec(d, ell)
        store: dict = {}
        coloring = _grid_coloring(F, grid, eps, store)
        tried = 0
        try:
            for outcome in iter_panchromatic(grid, coloring):
                if not isinstance(outcome, Panchromatic):
                    raise AssertionError(f"solver built an invalid coloring: {outcome}")
                tried += 1
                verts = [grid.coord(v) for v in outcome.vertices]
                for x in verts:
                    hit = _verify(F, x, eps, bar)
                    if hit is not None:
                        return hit
                # local polish from the 0-colored vertex before certifying
                polished, best = _polish(F, verts[0], eps, bar, iters=24)
                if polished is not None:
                    return polished
                cert = _lipschitz_test(F, verts, eps)
                if cert is not None:
                    return cert
                if tried >= max_simplices:
                    break
        except _EmptyAbort as stop:
            return stop.cert
        if (2 ** (ell + 1)) ** d <= cubelet_budget:
            ell += 1
            continue
        raise ResourceBound(
            f"no verified fixed point or certificate within the cubelet budget "
            f"(alpha={alpha}, final grid 2^{ell})")


# ---------------------------------------------------------------------------
# JSON instance format
# ---------------------------------------------------------------------------

def correspondence_from_json(data: dict) -> Correspondence:
    from .bodies import Ball, body_from_json
    from .numerics import LinCircuit, eval_circuit

    d = int(data["d"])
    mode = {"projection": PROJECTION, "strong": STRONG_SEP, "weak": WEAK_SEP}[data["mode"]]
    template = data["map"]
    kind = template["kind"]
    if kind == "constant":
        body = body_from_json(template["body"])
        value_at = lambda x: body
    elif kind == "ball_circuit":
        from fractions import Fraction
        circuit = LinCircuit.from_json(template["circuit"])
        raw = template["radius"]
        radius = float(Fraction(raw)) if isinstance(raw, str) else float(raw)
        value_at = lambda x: Ball(np.clip(eval_circuit(circuit, x), 0.0, 1.0), radius)
    else:
        raise ValueError(f"unknown correspondence template {kind!r}")
    return Correspondence(d=d, mode=mode, value_at=value_at,
                          eta=float(data["eta"]), L=float(data["L"]),
                          q=float(data.get("q", 1.0)), template=template)


def outcome_to_json(outcome: KakutaniOutcome) -> dict:
    if isinstance(outcome, FixedPoint):
        return {"tag": "fixed_point", "x": [repr(float(v)) for v in outcome.x],
                "z": [repr(float(v)) for v in outcome.z],
                "residual": repr(float(outcome.residual))}
    if isinstance(outcome, EmptyCert):
        return {"tag": "empty_cert", "x": [repr(float(v)) for v in outcome.x],
                "volume_bound": repr(float(outcome.cert.volume_bound)),
                "cuts": len(outcome.cert.cut_history)}
    if isinstance(outcome, LipschitzCert):
        return {"tag": "lipschitz_cert",
                "p": [repr(float(v)) for v in outcome.p],
                "q": [repr(float(v)) for v in outcome.q],
                "z": [repr(float(v)) for v in outcome.z],
                "w": [repr(float(v)) for v in outcome.w],
                "eps": repr(float(outcome.eps)), "lhs": repr(float(outcome.lhs)),
                "rhs": repr(float(outcome.rhs)), "c_hat": repr(float(outcome.c_hat))}
    raise TypeError(f"not an outcome: {outcome!r}")
