"""Concave-game instances and the regularized-potential reduction to the
Kakutani solver, plus equilibrium checking and concavity-violation probes.

Players control disjoint coordinate blocks of one vector in a common convex
constraint set S.  The reduction builds the potential
phi(x, y) = sum_i u_i(y_i, x_{-i}) - gamma ||y||^2 and maps each x to the
near-argmax body of phi(x, .), which the Kakutani engine drives to a fixed
point; gamma = eps/k keeps the regularizer's equilibrium shift within eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kakutani
from .bodies import (
    Ball,
    Box,
    EmptyShrink,
    ConvexFn,
    Inside,
    Intersection,
    LevelSet,
    WellBounded,
    body_from_json,
    body_to_json,
    parallel_body,
    strong_sep,
    weak_sep,
)
from .ellipsoid import Empty, EmptinessCert, Minimizer, scco, wcco, weak_project
from .kakutani import Correspondence, EmptyCert, FixedPoint, WEAK_SEP
from .numerics import LinCircuit, Polynomial, as_vec, eval_circuit, subgradient_circuit


class AlmostEmptinessError(RuntimeError):
    def __init__(self, cert: EmptinessCert):
        super().__init__("constraint set thinner than its claimed inner ball")
        self.cert = cert


@dataclass
class UtilityFn:
    """First-order utility oracle; `lipschitz` is its gradient bound on the
    strategy box (used for the aggregate constant G)."""

    k: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float | None = None
    source: object = None  # Polynomial / LinCircuit it was built from, if any


def adapt_utility(u, k: int, L_default: float | None = None) -> UtilityFn:
    if isinstance(u, UtilityFn):
        return u
    if isinstance(u, Polynomial):
        if u.dim != k:
            raise ValueError("utility dimension != k")
        return UtilityFn(k, u.eval, u.grad, polynomial_lipschitz_bound(u), u)
    if isinstance(u, LinCircuit):
        return UtilityFn(k, lambda x: float(eval_circuit(u, x)[0]),
                         lambda x: subgradient_circuit(u, x)[0], L_default, u)
    raise TypeError(f"cannot adapt utility of type {type(u).__name__}")


def polynomial_lipschitz_bound(p: Polynomial, box_abs: float = 1.0) -> float:
    """sup-norm gradient bound over [-box_abs, box_abs]^k: per-variable sums
    of |coeff| * exponent * box^(degree-1)."""
    per_var = np.zeros(p.dim)
    for exps, coeff in p.monomials.items():
        deg = sum(exps)
        scale = box_abs ** max(deg - 1, 0)
        for j, e in enumerate(exps):
            if e:
                per_var[j] += abs(float(coeff)) * e * scale
    return float(np.linalg.norm(per_var))


@dataclass
class ConcaveGame:
    n: int
    partition: list[tuple[int, int]]      # [lo, hi) index ranges
    utilities: list
    S: WellBounded
    L: float
    epsilon: float
    eta: float
    ambient: Box | None = None            # strategy box; default [-1,1]^k

    def __post_init__(self):
        k = self.k
        covered = sorted(i for lo, hi in self.partition for i in range(lo, hi))
        if covered != list(range(k)):
            raise ValueError("partition must cover [k] exactly once")
        if self.ambient is None:
            self.ambient = Box(-np.ones(k), np.ones(k))
        self._adapted = [adapt_utility(u, k, self.L) for u in self.utilities]

    @property
    def k(self) -> int:
        return max(hi for _, hi in self.partition)

    def utility(self, i: int) -> UtilityFn:
        return self._adapted[i]

    def player_lipschitz(self, i: int) -> float:
        G = self._adapted[i].lipschitz
        return float(G) if G is not None else float(self.L)


@dataclass
class StronglyConcaveGame:
    n: int
    partition: list[tuple[int, int]]
    utilities: list                      # Polynomial (or UtilityFn backed by one)
    mu: float
    L: float
    epsilon: float
    ambient: Box | None = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        k = max(hi for _, hi in self.partition)
        if self.ambient is None:
            self.ambient = Box(-np.ones(k), np.ones(k))


def lift_strongly_concave(g: StronglyConcaveGame) -> ConcaveGame:
    """StronglyConcaveGames -> ConcaveGames: identity on utilities, the
    strategy box as S, and eta small enough that the inner dilation keeps
    fixture equilibria (eta = eps / (4 k L))."""
    k = max(hi for _, hi in g.partition)
    half_width = float(np.min(g.ambient.hi - g.ambient.lo)) / 2.0
    R = float(np.linalg.norm(np.maximum(np.abs(g.ambient.lo), np.abs(g.ambient.hi))))
    eta = g.epsilon / (4.0 * k * max(g.L, 1.0))
    center = (g.ambient.lo + g.ambient.hi) / 2.0
    return ConcaveGame(n=g.n, partition=list(g.partition), utilities=list(g.utilities),
                       S=WellBounded(g.ambient, r=half_width, R=max(R, half_width),
                                     center_hint=center),
                       L=g.L, epsilon=g.epsilon, eta=eta, ambient=g.ambient)


# ---------------------------------------------------------------------------
# The regularized potential and its near-argmax body
# ---------------------------------------------------------------------------

def phi(game: ConcaveGame, gamma: float, x, y) -> tuple[float, np.ndarray]:
    """phi(x, y) = sum_i u_i(y_i, x_{-i}) - gamma ||y||^2 and its y-subgradient,
    assembled blockwise from per-player utility gradients."""
    x, y = as_vec(x), as_vec(y)
    k = game.k
    if len(x) != k or len(y) != k:
        raise ValueError("phi arguments must have dimension k")
    val = 0.0
    grad = np.zeros(k)
    for i, (lo, hi) in enumerate(game.partition):
        u = game.utility(i)
        w = x.copy()
        w[lo:hi] = y[lo:hi]
        val += u.value(w)
        grad[lo:hi] = u.grad(w)[lo:hi]
    val -= gamma * float(y @ y)
    grad -= 2.0 * gamma * y
    return val, grad


def aggregate_lipschitz(game: ConcaveGame, gamma: float) -> float:
    """G = sum_i G_i + 2 gamma k."""
    return sum(game.player_lipschitz(i) for i in range(game.n)) + 2.0 * gamma * game.k


def potential_solve_tolerance(game: ConcaveGame) -> float:
    return min(game.epsilon, game.eta) / 8.0


def best_response_body(game: ConcaveGame, gamma: float, x, y_sol=None):
    """F(x) = {y in S_eta : phi(x, y) >= max over S_{-eta} of phi - eps},
    realized as S_eta intersected with the level set
    {-phi(x, .) <= -(phi(x, y_sol) - (eps - delta_sol))}.

    The ellipsoid maximizer y_sol can land arbitrarily close to the true
    optimum, so the literal level phi(y_sol) may carve a near-singleton;
    lowering it by eps - delta_sol restores the eps-fat body whose members
    satisfy the defining inequality exactly: phi(y) >= phi(y_sol) - eps +
    delta_sol >= max over S_{-eta} - eps, by the solver's own guarantee."""
    x = as_vec(x)
    if y_sol is None:
        y_sol = solve_potential(game, gamma, x)
    delta_sol = potential_solve_tolerance(game)
    level = -(phi(game, gamma, x, y_sol)[0] - (game.epsilon - delta_sol))
    neg_phi = ConvexFn(game.k,
                       lambda y: -phi(game, gamma, x, y)[0],
                       lambda y: -phi(game, gamma, x, y)[1])
    return Intersection((parallel_body(game.S.body, game.eta), LevelSet(neg_phi, level)))


def inner_ball_radius(game: ConcaveGame, gamma: float) -> float:
    """Ball radius the near-argmax body always contains: the paper's
    min(eta/2, eps/G) shrunk by the solve tolerance spent on the level."""
    G = aggregate_lipschitz(game, gamma)
    usable = game.epsilon - potential_solve_tolerance(game)
    return min(game.eta / 2.0, usable / G)


def solve_potential(game: ConcaveGame, gamma: float, x) -> np.ndarray:
    """Near-maximizer of phi(x, .) over S at tolerance min(eps, eta)/8."""
    delta = potential_solve_tolerance(game)
    G = aggregate_lipschitz(game, gamma)
    f = ConvexFn(game.k,
                 lambda y: -phi(game, gamma, x, y)[0],
                 lambda y: -phi(game, gamma, x, y)[1])
    res = wcco(f, game.S.body, delta=delta, R=game.S.R + 1e-9, eta=game.S.r,
               L_f=G, clip_box=(game.ambient.lo, game.ambient.hi),
               center0=game.S.center_hint)
    if isinstance(res, Empty):
        raise AlmostEmptinessError(res.cert)
    return res.z


# ---------------------------------------------------------------------------
# Equilibrium solving / checking
# ---------------------------------------------------------------------------

@dataclass
class EquilibriumReport:
    x: np.ndarray
    per_player_regret: np.ndarray
    feasible: bool
    empty_slices: list[int]
    epsilon: float
    eta: float
    gamma: float = 0.0
    kakutani_residual: float | None = None

    def to_json(self) -> dict:
        return {"tag": "equilibrium",
                "x": [repr(float(v)) for v in self.x],
                "regrets": [repr(float(v)) for v in self.per_player_regret],
                "feasible": self.feasible,
                "empty_slices": self.empty_slices,
                "epsilon": repr(float(self.epsilon)), "eta": repr(float(self.eta)),
                "gamma": repr(float(self.gamma))}


@dataclass
class LipschitzViolation:
    i: int
    x: np.ndarray
    y: np.ndarray
    gap: float


@dataclass
class ConcavityViolation:
    i: int
    x_i: np.ndarray
    y_i: np.ndarray
    x_minus_i: np.ndarray
    lam: float
    lhs: float
    rhs: float


@dataclass
class StrongConcavityViolation(ConcavityViolation):
    mu: float = 0.0


@dataclass
class AlmostEmptiness:
    cert: EmptinessCert


GameCertificate = LipschitzViolation | ConcavityViolation | StrongConcavityViolation | AlmostEmptiness


def _uniform_box_map(box: Box):
    width = float(box.hi[0] - box.lo[0])
    if not np.allclose(box.hi - box.lo, width):
        raise ValueError("strategy box must have uniform width for the cube map")
    lo = box.lo.copy()
    return lo, width


def solve_equilibrium(game: ConcaveGame, *, strategy: str = "auto",
                      cubelet_budget: int = 300_000, warm_start=None):
    """Equilibrium via the Kakutani reduction.

    Returns EquilibriumReport, or a GameCertificate / propagated Kakutani
    certificate when the instance violates its promises.
    """
    k = game.k
    gamma = game.epsilon / k  # the proof needs gamma <= eps/k
    G = aggregate_lipschitz(game, gamma)
    alpha_nat = game.epsilon / G
    lo, width = _uniform_box_map(game.ambient)
    lift = lambda u: lo + width * as_vec(u)
    drop = lambda x: (as_vec(x) - lo) / width

    inner_ball = inner_ball_radius(game, gamma)
    kappa = 2.0 * math.sqrt(2.0 * G / gamma)  # (1/2)-Hoelder constant of the argmax

    br_cache: dict[bytes, object] = {}

    def body_at(x_nat: np.ndarray):
        key = x_nat.tobytes()
        body = br_cache.get(key)
        if body is None:
            body = best_response_body(game, gamma, x_nat)
            if len(br_cache) > 4096:
                br_cache.clear()
            br_cache[key] = body
        return body

    def custom_project(at_u, query_u, eps_cube):
        x_nat = lift(at_u)
        q_nat = lift(query_u)
        try:
            body = body_at(x_nat)
        except AlmostEmptinessError as err:
            return err.cert
        wb = WellBounded(body, r=max(inner_ball, 1e-9), R=game.S.R + game.eta + 1e-9,
                         center_hint=None)
        out = weak_project(body, q_nat, max(eps_cube * width, 1e-12), well_bounded=wb,
                           clip_box=(game.ambient.lo, game.ambient.hi))
        if isinstance(out, EmptinessCert):
            return out
        return np.clip(drop(out), 0.0, 1.0)

    F = Correspondence(d=k, mode=WEAK_SEP,
                       value_at=lambda u: body_at(lift(u)),
                       eta=max(inner_ball / width, 1e-9),
                       L=kappa / math.sqrt(width), q=0.5,
                       custom_project=custom_project)

    if warm_start is None and strategy == "auto":
        # damped best-response iteration toward the exact argmax: the fat
        # near-argmax body accepts a wide band of (3 eps)-equilibria, but the
        # argmax dynamics single out the exact one when they contract
        x_bt = np.asarray((game.ambient.lo + game.ambient.hi) / 2.0, dtype=float)
        try:
            for _ in range(48):
                y_bt = solve_potential(game, gamma, x_bt)
                if np.linalg.norm(y_bt - x_bt) <= alpha_nat / 4.0:
                    break
                x_bt = np.clip(0.5 * x_bt + 0.5 * y_bt, game.ambient.lo, game.ambient.hi)
        except AlmostEmptinessError as err:
            return AlmostEmptiness(err.cert)
        warm_start = x_bt
    ws = drop(warm_start) if warm_start is not None else None
    outcome = kakutani.solve(F, alpha_nat / width, strategy=strategy,
                             cubelet_budget=cubelet_budget, warm_start=ws)
    if isinstance(outcome, FixedPoint):
        x_nat = lift(outcome.x)
        report = check_equilibrium(game, x_nat, 3.0 * game.epsilon, game.eta)
        report.gamma = gamma
        report.kakutani_residual = outcome.residual * width
        return report
    if isinstance(outcome, EmptyCert):
        return AlmostEmptiness(outcome.cert)
    return outcome  # Kakutani Lipschitz certificate, propagated as-is


def check_equilibrium(game: ConcaveGame, x, eps_prime: float, eta: float) -> EquilibriumReport:
    """Per-player regret against the S_{-eta} slice with the other blocks
    pinned at x_{-i}; empty slices report regret 0 and are flagged."""
    x = as_vec(x)
    feasible = isinstance(weak_sep(parallel_body(game.S.body, eta) if eta > 0 else game.S.body,
                                   x, max(eta, 1e-9)), Inside)
    regrets = np.zeros(game.n)
    try:
        inner = parallel_body(game.S.body, -eta) if eta > 0 else game.S.body
    except EmptyShrink:
        # S thinner than eta: every slice constraint is vacuous
        return EquilibriumReport(x=x, per_player_regret=regrets, feasible=feasible,
                                 empty_slices=list(range(game.n)),
                                 epsilon=eps_prime, eta=eta)
    empty_slices: list[int] = []
    for i, (lo, hi) in enumerate(game.partition):
        u = game.utility(i)
        block = slice(lo, hi)
        kb = hi - lo

        def assemble(y_i):
            w = x.copy()
            w[block] = y_i
            return w

        def slice_oracle(y_i, delta):
            return weak_sep(inner, assemble(y_i), delta)

        f = ConvexFn(kb, lambda y_i: -u.value(assemble(y_i)),
                     lambda y_i: -u.grad(assemble(y_i))[block])
        Rb = float(np.linalg.norm(np.maximum(np.abs(game.ambient.lo[block]),
                                             np.abs(game.ambient.hi[block])))) + 1e-9
        res = wcco(f, slice_oracle, delta=eps_prime / 10.0, R=Rb,
                   eta=max(min(game.S.r - eta, 0.5), 1e-6),
                   L_f=game.player_lipschitz(i),
                   clip_box=(game.ambient.lo[block], game.ambient.hi[block]))
        if isinstance(res, Empty):
            empty_slices.append(i)
            continue
        regrets[i] = -res.value - u.value(x)
    return EquilibriumReport(x=x, per_player_regret=regrets, feasible=feasible,
                             empty_slices=empty_slices, epsilon=eps_prime, eta=eta)


def detect_concavity_violation(game, trials: int = 100, seed: int = 0):
    """Sample midpoint inequalities; a strong-concavity parameter on the
    instance strengthens the test by mu lam (1-lam)/2 ||x_i - y_i||^2.
    Absence of a witness is not a proof."""
    mu = getattr(game, "mu", None)
    ambient = game.ambient
    partition = game.partition
    utilities = [adapt_utility(u, max(hi for _, hi in partition), getattr(game, "L", None))
                 for u in game.utilities]
    rng = np.random.default_rng(seed)
    lams = [0.5] + list(rng.uniform(0.05, 0.95, size=max(trials - 1, 0)))
    for t in range(trials):
        i = int(rng.integers(len(partition)))
        lo, hi = partition[i]
        u = utilities[i]
        x_full = rng.uniform(ambient.lo, ambient.hi)
        y_i = rng.uniform(ambient.lo[lo:hi], ambient.hi[lo:hi])
        lam = float(lams[t % len(lams)])
        x_i = x_full[lo:hi].copy()
        w_mid = x_full.copy()
        w_mid[lo:hi] = lam * x_i + (1 - lam) * y_i
        w_y = x_full.copy()
        w_y[lo:hi] = y_i
        lhs = u.value(w_mid)
        rhs = lam * u.value(x_full) + (1 - lam) * u.value(w_y)
        strengthen = 0.0
        if mu is not None:
            strengthen = 0.5 * lam * (1 - lam) * mu * float(np.sum((x_i - y_i) ** 2))
        if lhs < rhs + strengthen - 1e-9:
            x_minus = np.delete(x_full, np.s_[lo:hi])
            if mu is not None:
                return StrongConcavityViolation(i, x_i, y_i, x_minus, lam, lhs,
                                                rhs + strengthen, mu=mu)
            return ConcavityViolation(i, x_i, y_i, x_minus, lam, lhs, rhs)
    return None


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def game_from_json(data: dict):
    utilities = []
    for u in data["utilities"]:
        if "monomials" in u:
            utilities.append(Polynomial.from_json(u))
        else:
            utilities.append(LinCircuit.from_json(u))
    partition = [tuple(pr) for pr in data["partition"]]
    ambient = body_from_json(data["ambient"]) if "ambient" in data else None
    if "mu" in data and data.get("constraint") is None:
        return StronglyConcaveGame(n=int(data["n"]), partition=partition,
                                   utilities=utilities, mu=float(data["mu"]),
                                   L=float(data["L"]), epsilon=float(data["epsilon"]),
                                   ambient=ambient)
    cons = data["constraint"]
    S = WellBounded(body_from_json(cons["body"]), r=float(cons["r"]), R=float(cons["R"]))
    return ConcaveGame(n=int(data["n"]), partition=partition, utilities=utilities,
                       S=S, L=float(data["L"]), epsilon=float(data["epsilon"]),
                       eta=float(data["eta"]), ambient=ambient)


def game_to_json(game) -> dict:
    utilities = []
    for u in game.utilities:
        src = u.source if isinstance(u, UtilityFn) else u
        if isinstance(src, Polynomial):
            utilities.append(src.to_json())
        elif isinstance(src, LinCircuit):
            utilities.append(src.to_json())
        else:
            raise TypeError("only polynomial/circuit utilities serialize")
    out = {"n": game.n, "partition": [list(pr) for pr in game.partition],
           "utilities": utilities, "L": repr(float(game.L)),
           "epsilon": repr(float(game.epsilon)),
           "ambient": body_to_json(game.ambient)}
    if isinstance(game, StronglyConcaveGame):
        out["mu"] = repr(float(game.mu))
        out["constraint"] = None
    else:
        out["constraint"] = {"body": body_to_json(game.S.body),
                             "r": repr(float(game.S.r)), "R": repr(float(game.S.R))}
        out["eta"] = repr(float(game.eta))
    return out
