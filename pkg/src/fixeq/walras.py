"""Exchange economies: budget polytopes with Hoffman diagnostics, regularized
demand and price correspondences, the joint Kakutani reduction, and
equilibrium checking.

Prices live on the inner simplex Delta_xi; agent i's budget is the polytope
{x >= 0, p.x <= p.e_i - alpha/n} (the alpha/n shift keeps budgets slack for
the approximate fixed point), demand is the near-argmax body of the
regularized utility u_i - gamma ||x||^2, and the price map is the
near-argmax of p^T (sum x - sum e) - gamma ||p||^2.  Allocation blocks are
rescaled by xi / (d ||e_i||) into [0,1] boxes so the joint map fits the
Kakutani hypercube contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kakutani
from .bodies import (
    ConvexFn,
    Hyperplane,
    Inside,
    Intersection,
    LevelSet,
    Polytope,
    Separated,
    SimplexXi,
    WellBounded,
    strong_sep,
    vertices,
)
from .ellipsoid import Empty, EmptinessCert, Minimizer, scco
from .kakutani import Correspondence, EmptyCert, FixedPoint, STRONG_SEP
from .numerics import Polynomial, as_vec


class EmptyBudget(ValueError):
    pass


# ---------------------------------------------------------------------------
# Utilities
# ---------------------------------------------------------------------------

@dataclass
class ShiftedLogUtility:
    """u(x) = sum_k a_k ln(sigma + x_k): concave, increasing, Lipschitz on
    the nonnegative orthant, and admits a one-dimensional KKT oracle for
    cross-checks."""

    a: np.ndarray
    sigma: float = 0.05

    def __post_init__(self):
        self.a = as_vec(self.a)
        if np.any(self.a <= 0) or self.sigma <= 0:
            raise ValueError("need positive weights and sigma")

    def value(self, x) -> float:
        x = as_vec(x)
        return float(self.a @ np.log(self.sigma + np.maximum(x, 0.0)))

    def grad(self, x) -> np.ndarray:
        x = as_vec(x)
        return self.a / (self.sigma + np.maximum(x, 0.0))

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.a / self.sigma))

    def to_json(self) -> dict:
        return {"family": "shifted_log", "a": [repr(float(v)) for v in self.a],
                "sigma": repr(float(self.sigma))}


def _adapt_econ_utility(u):
    if isinstance(u, ShiftedLogUtility):
        return u
    if isinstance(u, Polynomial):
        class _P:
            def __init__(s, p):
                s.p = p
            def value(s, x):
                return s.p.eval(x)
            def grad(s, x):
                return s.p.grad(x)
            def lipschitz(s):
                from .games import polynomial_lipschitz_bound
                return polynomial_lipschitz_bound(s.p, 2.0)
            def to_json(s):
                return {"family": "polynomial", **s.p.to_json()}
        return _P(u)
    return u


@dataclass
class ExchangeEconomy:
    n: int
    d: int
    endowments: np.ndarray           # n x d, strictly positive
    utilities: list
    epsilon: float
    xi: float | None = None          # defaults to epsilon^2
    gamma: float | None = None       # regularizer, defaults to epsilon
    L: float | None = None           # utility Lipschitz bound

    def __post_init__(self):
        self.endowments = np.atleast_2d(np.asarray(self.endowments, dtype=float))
        if self.endowments.shape != (self.n, self.d):
            raise ValueError("endowments must be n x d")
        if np.any(self.endowments <= 0):
            raise ValueError("endowments must be strictly positive")
        if self.xi is None:
            self.xi = self.epsilon ** 2
        if not 0 < self.xi < 1.0 / self.d:
            raise ValueError("need 0 < xi < 1/d")
        if self.gamma is None:
            self.gamma = self.epsilon  # lower end of the proof's window
        self.utilities = [_adapt_econ_utility(u) for u in self.utilities]
        if self.L is None:
            self.L = max(u.lipschitz() for u in self.utilities)
        # upper window: eps <= gamma * max ||x||^2 over budgets (bound below)
        max_sq = max(self.allocation_bound(i) ** 2 for i in range(self.n))
        if self.epsilon > self.gamma * max_sq + 1e-12:
            raise ValueError("gamma below the proof window eps <= gamma * max||x||^2")

    def allocation_bound(self, i: int) -> float:
        """Budget sets stay inside the ball of radius d ||e_i|| / xi."""
        return self.d * float(np.linalg.norm(self.endowments[i])) / self.xi

    def total_endowment(self) -> np.ndarray:
        return self.endowments.sum(axis=0)

    def regularized(self, i: int):
        """u_i - gamma ||x||^2 with value/grad closures."""
        u = self.utilities[i]
        g = self.gamma
        return ConvexFn(self.d,
                        lambda x: u.value(x) - g * float(x @ x),
                        lambda x: u.grad(x) - 2.0 * g * x)

    def regularized_lipschitz(self, i: int) -> float:
        return self.L + self.gamma * self.d / self.xi * float(np.linalg.norm(self.endowments[i]))


# ---------------------------------------------------------------------------
# Budget and demand bodies
# ---------------------------------------------------------------------------

def budget_body(econ: ExchangeEconomy, i: int, p, alpha: float = 0.0) -> Polytope:
    """{x >= 0, p.x <= p.e_i - alpha/n} with an exact strong oracle."""
    p = as_vec(p)
    wealth = float(p @ econ.endowments[i]) - alpha / econ.n
    if wealth <= 0:
        raise EmptyBudget(f"agent {i}: shifted wealth {wealth} <= 0")
    A = np.vstack([-np.eye(econ.d), p])
    b = np.concatenate([np.zeros(econ.d), [wealth]])
    return Polytope(A, b)


def budget_radius(econ: ExchangeEconomy, i: int, p, alpha: float = 0.0) -> float:
    """Tight outer radius of the actual budget polytope at p."""
    p = as_vec(p)
    wealth = float(p @ econ.endowments[i]) - alpha / econ.n
    return float(np.linalg.norm(wealth / np.maximum(p, 1e-12)))


def demand_solve_tolerance(econ: ExchangeEconomy) -> float:
    return econ.epsilon / 8.0


def demand_optimum(econ: ExchangeEconomy, i: int, p, alpha: float = 0.0) -> np.ndarray:
    """Ellipsoid near-maximizer of the regularized utility over the budget."""
    body = budget_body(econ, i, p, alpha)
    f = econ.regularized(i)
    neg = ConvexFn(econ.d, lambda x: -f.value(x), lambda x: -f.subgrad(x))
    R = budget_radius(econ, i, p, alpha) + 1e-9
    res = scco(neg, body, delta=demand_solve_tolerance(econ), R=R,
               L_f=econ.regularized_lipschitz(i),
               center0=np.zeros(econ.d) + 1e-3)
    if isinstance(res, Empty):
        raise EmptyBudget(f"agent {i}: budget body reported empty")
    return res.z


def demand_body(econ: ExchangeEconomy, i: int, p, alpha: float = 0.0, x_sol=None):
    """Psi_i(p): budget intersected with the near-optimal level set of the
    regularized utility; the level is lowered by eps - delta_sol so the body
    is eps-fat and its members satisfy u~(x) >= u~(x_sol) - eps + delta_sol
    >= max over the budget - eps."""
    if x_sol is None:
        x_sol = demand_optimum(econ, i, p, alpha)
    f = econ.regularized(i)
    level = -(f.value(x_sol) - (econ.epsilon - demand_solve_tolerance(econ)))
    neg = ConvexFn(econ.d, lambda x: -f.value(x), lambda x: -f.subgrad(x))
    return Intersection((budget_body(econ, i, p, alpha), LevelSet(neg, level)))


def aggregate_demand_body(econ: ExchangeEconomy, p, alpha: float = 0.0,
                          eps_prime: float | None = None):
    """Demand product over (x_1, ..., x_n, sum x_i), restricted to the
    halfspaces Q = {sum x_i >= (1 - eps') sum e}."""
    eps_prime = econ.epsilon if eps_prime is None else eps_prime
    parts = [demand_body(econ, i, p, alpha) for i in range(econ.n)]
    return _AggregateBody(econ, parts, eps_prime)


@dataclass
class _AggregateBody:
    """{(x_1..x_n, s) : x_i in demand_i, s = sum x_i, s >= (1-eps') sum e}."""

    econ: ExchangeEconomy
    parts: list
    eps_prime: float

    @property
    def dim(self):
        return self.econ.n * self.econ.d + self.econ.d

    def split(self, z):
        z = as_vec(z)
        n, d = self.econ.n, self.econ.d
        xs = [z[i * d:(i + 1) * d] for i in range(n)]
        return xs, z[n * d:]

    def membership(self, z, tol: float = 1e-9):
        xs, s = self.split(z)
        n, d = self.econ.n, self.econ.d
        for i, x in enumerate(xs):
            if isinstance(strong_sep(self.parts[i], x), Separated):
                return False
        if np.linalg.norm(s - sum(xs)) > tol:
            return False
        floor = (1.0 - self.eps_prime) * self.econ.total_endowment()
        return bool(np.all(s >= floor - tol))


# ---------------------------------------------------------------------------
# Price body
# ---------------------------------------------------------------------------

def price_objective(econ: ExchangeEconomy, x_sum) -> ConvexFn:
    """w(p) = p^T (x_sum - sum e) - gamma ||p||^2, as a concave objective."""
    excess = as_vec(x_sum) - econ.total_endowment()
    g = econ.gamma
    return ConvexFn(econ.d,
                    lambda p: float(excess @ p) - g * float(p @ p),
                    lambda p: excess - 2.0 * g * p)


def price_optimum(econ: ExchangeEconomy, x_sum) -> np.ndarray:
    w = price_objective(econ, x_sum)
    neg = ConvexFn(econ.d, lambda p: -w.value(p), lambda p: -w.subgrad(p))
    res = scco(neg, SimplexXi(econ.d, econ.xi), delta=demand_solve_tolerance(econ),
               R=1.5, L_f=float(np.linalg.norm(econ.total_endowment())) + 2 * econ.gamma)
    if isinstance(res, Empty):
        raise EmptyBudget("price simplex reported empty")
    return res.z


def price_body(econ: ExchangeEconomy, x_sum, p_sol=None):
    """Psi^P(x_sum): Delta_xi intersected with the near-optimal level set of
    the regularized price objective (same eps-fattening as demand)."""
    if p_sol is None:
        p_sol = price_optimum(econ, x_sum)
    w = price_objective(econ, x_sum)
    level = -(w.value(p_sol) - (econ.epsilon - demand_solve_tolerance(econ)))
    neg = ConvexFn(econ.d, lambda p: -w.value(p), lambda p: -w.subgrad(p))
    return Intersection((SimplexXi(econ.d, econ.xi), LevelSet(neg, level)))


def hoffman_bound(p) -> float:
    """Hoffman constant of the single-row system {p.x <= t}:
    (min over unit v >= 0 of p.v)^{-1} = 1 / min_k p_k."""
    p = as_vec(p)
    if np.any(p <= 0):
        raise ValueError("prices must be positive")
    return float(1.0 / np.min(p))


# ---------------------------------------------------------------------------
# Joint solve
# ---------------------------------------------------------------------------

@dataclass
class WalrasOutcome:
    p: np.ndarray
    allocations: np.ndarray            # n x d
    clearance_residual: np.ndarray     # sum x - sum e
    per_agent_regret: np.ndarray
    epsilon: float
    xi: float
    gamma: float
    feasible: bool = True
    price_test_values: np.ndarray | None = None  # p_hat_k dot excess
    kakutani_residual: float | None = None

    def to_json(self) -> dict:
        return {"tag": "walras",
                "p": [repr(float(v)) for v in self.p],
                "allocations": [[repr(float(v)) for v in row] for row in self.allocations],
                "clearance_residual": [repr(float(v)) for v in self.clearance_residual],
                "regrets": [repr(float(v)) for v in self.per_agent_regret],
                "epsilon": repr(float(self.epsilon)), "xi": repr(float(self.xi)),
                "gamma": repr(float(self.gamma)), "feasible": self.feasible}


def price_test_vectors(d: int, xi: float) -> np.ndarray:
    """p_hat_k: 1 - xi on coordinate k and xi/(d-1) elsewhere, so each sums
    to one (the paper's off-coordinate denominators d-1 and d are read as
    d-1 uniformly)."""
    out = np.full((d, d), xi / (d - 1))
    np.fill_diagonal(out, 1.0 - xi)
    return out


def _tatonnement(econ: ExchangeEconomy, alpha: float, iters: int = 60):
    """Damped excess-demand price adjustment on the exact regularized
    demands; a deterministic warm start for the joint solve."""
    p = np.full(econ.d, 1.0 / econ.d)
    theta = 0.25
    prev = np.inf
    from .bodies import exact_project as _proj
    simplex = SimplexXi(econ.d, econ.xi)
    best = None
    for _ in range(iters):
        xs = np.array([demand_optimum(econ, i, p, alpha) for i in range(econ.n)])
        excess = xs.sum(axis=0) - econ.total_endowment()
        norm = float(np.linalg.norm(excess))
        if best is None or norm < best[0]:
            best = (norm, p.copy(), xs.copy())
        if norm <= econ.epsilon / 4.0:
            break
        if norm > prev:
            theta *= 0.5
        prev = norm
        p = _proj(simplex, p + theta * excess)
    return best[1], best[2]


def joint_correspondence(econ: ExchangeEconomy, alpha: float) -> Correspondence:
    """F(x, s, p) = (demand product at p over (x, s), price body at s), over
    the cube with allocation blocks scaled by xi / (d ||e_i||)."""
    n, d = econ.n, econ.d
    dim = n * d + d + d
    scales = np.empty(dim)  # cube = scale * natural
    for i in range(n):
        scales[i * d:(i + 1) * d] = econ.xi / (d * np.linalg.norm(econ.endowments[i]))
    s_scale = econ.xi / (d * float(sum(np.linalg.norm(e) for e in econ.endowments)))
    scales[n * d:n * d + d] = s_scale
    scales[n * d + d:] = 1.0
    floor = (1.0 - econ.epsilon) * econ.total_endowment()

    level_cache: dict[bytes, list] = {}

    def demand_levels(p_nat):
        key = p_nat.tobytes()
        hit = level_cache.get(key)
        if hit is None:
            hit = [demand_body(econ, i, p_nat, alpha) for i in range(n)]
            if len(level_cache) > 1024:
                level_cache.clear()
            level_cache[key] = hit
        return hit

    def custom_project(at_u, query_u, eps_cube):
        at = as_vec(at_u) / scales
        query = as_vec(query_u) / scales
        p_at = np.maximum(at[n * d + d:], econ.xi / 2)
        p_at = p_at / p_at.sum()
        s_at = at[n * d:n * d + d]
        try:
            demands = demand_levels(p_at)
        except EmptyBudget:
            return EmptinessCert(None, [], econ.xi)
        # demand-side block: min sum_i w_i^2 |x_i - qx_i|^2 + w_s^2 |sum x - qs|^2
        qx = [query[i * d:(i + 1) * d] for i in range(n)]
        qs = query[n * d:n * d + d]
        wx = scales[0:n * d:d] ** 2
        ws = s_scale ** 2

        def f_val(xf):
            xs = xf.reshape(n, d)
            ssum = xs.sum(axis=0)
            v = ws * float(np.dot(ssum - qs, ssum - qs))
            for i in range(n):
                v += wx[i] * float(np.dot(xs[i] - qx[i], xs[i] - qx[i]))
            return 0.5 * v

        def f_grad(xf):
            xs = xf.reshape(n, d)
            ssum = xs.sum(axis=0)
            g = np.empty((n, d))
            common = ws * (ssum - qs)
            for i in range(n):
                g[i] = wx[i] * (xs[i] - qx[i]) + common
            return g.ravel()

        def oracle(xf):
            xs = xf.reshape(n, d)
            for i in range(n):
                res = strong_sep(demands[i], xs[i])
                if isinstance(res, Separated):
                    normal = np.zeros(n * d)
                    normal[i * d:(i + 1) * d] = res.plane.normal
                    return Separated(Hyperplane(normal, xf))
            ssum = xs.sum(axis=0)
            viol = floor - ssum
            k = int(np.argmax(viol))
            if viol[k] > 0:
                normal = np.tile([-(j == k) * 1.0 for j in range(d)], n)
                return Separated(Hyperplane(normal, xf))
            return Inside()

        R = float(np.sqrt(sum(budget_radius(econ, i, p_at, alpha) ** 2 for i in range(n)))) + 1e-6
        delta_v = max(min(eps_cube, eps_cube * eps_cube / 8.0), 1e-13)
        res = scco(ConvexFn(n * d, f_val, f_grad), oracle, delta=delta_v, R=R,
                   L_f=2.0 * R * float(max(wx.max(), ws)) * (n + 1),
                   center0=np.array([demand_optimum(econ, i, p_at, alpha)
                                     for i in range(n)]).ravel())
        if isinstance(res, Empty):
            return res.cert
        xs_new = res.z.reshape(n, d)
        s_new = xs_new.sum(axis=0)
        # price-side block
        q_p = query[n * d + d:]
        try:
            pbody = price_body(econ, s_at)
        except EmptyBudget:
            return EmptinessCert(None, [], econ.xi)
        from .ellipsoid import strong_project
        p_new = strong_project(pbody, q_p, max(eps_cube, 1e-10),
                               well_bounded=WellBounded(pbody, r=min(econ.xi, 0.05), R=1.5))
        if isinstance(p_new, EmptinessCert):
            return p_new
        out = np.concatenate([xs_new.ravel(), s_new, p_new])
        return np.clip(out * scales, 0.0, 1.0)

    def value_at(u):
        at = as_vec(u) / scales
        p_at = np.maximum(at[n * d + d:], econ.xi / 2)
        p_at = p_at / p_at.sum()
        s_at = at[n * d:n * d + d]
        return (aggregate_demand_body(econ, p_at, alpha), price_body(econ, s_at))

    # Hausdorff constant of the joint map (recorded metadata): budget bodies
    # are (d^{3/2}/xi^2) ||e_i|| Lipschitz in p and the argmax maps are
    # (1/2)-Hoelder on top of that
    K = max((econ.d ** 1.5 / econ.xi ** 2) * float(np.linalg.norm(econ.endowments[i]))
            for i in range(econ.n))
    F = Correspondence(d=dim, mode=STRONG_SEP, value_at=value_at,
                       eta=min(econ.epsilon, econ.xi), L=K, q=0.5,
                       custom_project=custom_project)
    F.cube_scales = scales
    return F


def solve_alpha(econ: ExchangeEconomy, floor: float = 1e-6) -> tuple[float, float]:
    """alpha <= eps / max(L_u~ (sqrt d / xi + 1), L_w), floored for floats."""
    L_u = max(econ.regularized_lipschitz(i) for i in range(econ.n))
    L_w = float(np.linalg.norm(econ.total_endowment())) + 2 * econ.gamma
    target = econ.epsilon / max(L_u * (math.sqrt(econ.d) / econ.xi + 1.0), L_w)
    return max(target, floor), target


def solve_walras(econ: ExchangeEconomy, *, strategy: str = "auto",
                 cubelet_budget: int = 300_000):
    """Joint demand-price Kakutani solve; returns a WalrasOutcome or a
    propagated certificate."""
    alpha_run, alpha_target = solve_alpha(econ)
    n, d = econ.n, econ.d
    try:
        p_warm, xs_warm = _tatonnement(econ, alpha_run)
    except EmptyBudget:
        p_warm = np.full(d, 1.0 / d)
        xs_warm = econ.endowments.copy()
    F = joint_correspondence(econ, alpha_run)
    s_warm = xs_warm.sum(axis=0)
    warm_nat = np.concatenate([xs_warm.ravel(), s_warm, p_warm])
    warm = np.clip(warm_nat * F.cube_scales, 0.0, 1.0)
    outcome = kakutani.solve(F, alpha_run, strategy=strategy,
                             cubelet_budget=cubelet_budget, warm_start=warm)
    if isinstance(outcome, EmptyCert):
        return outcome
    if not isinstance(outcome, FixedPoint):
        return outcome
    z_nat = outcome.x / F.cube_scales
    xs = z_nat[:n * d].reshape(n, d)
    p = z_nat[n * d + d:]
    p = np.maximum(p, econ.xi)
    p = p / p.sum()
    out = check_walras(econ, p, xs, econ.epsilon)
    out.kakutani_residual = outcome.residual
    excess = out.clearance_residual
    out.price_test_values = price_test_vectors(d, econ.xi) @ excess
    return out


def check_walras(econ: ExchangeEconomy, p, allocations, eps: float) -> WalrasOutcome:
    """Regret against the full (unshifted) budget with the true utilities,
    and the componentwise clearance residual."""
    p = as_vec(p)
    allocations = np.atleast_2d(np.asarray(allocations, dtype=float))
    n, d = econ.n, econ.d
    regrets = np.zeros(n)
    feasible = True
    for i in range(n):
        x_i = allocations[i]
        if np.any(x_i < -1e-9) or float(p @ x_i) > float(p @ econ.endowments[i]) + 1e-9:
            feasible = False
        u = econ.utilities[i]
        body = budget_body(econ, i, p, 0.0)
        neg = ConvexFn(d, lambda x, u=u: -u.value(x), lambda x, u=u: -u.grad(x))
        res = scco(neg, body, delta=eps / 10.0, R=budget_radius(econ, i, p) + 1e-9,
                   L_f=econ.L, center0=np.zeros(d) + 1e-3)
        best = -res.value if isinstance(res, Minimizer) else u.value(x_i)
        regrets[i] = best - u.value(x_i)
    residual = allocations.sum(axis=0) - econ.total_endowment()
    return WalrasOutcome(p=p, allocations=allocations, clearance_residual=residual,
                         per_agent_regret=regrets, epsilon=eps, xi=econ.xi,
                         gamma=econ.gamma, feasible=feasible)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def economy_from_json(data: dict) -> ExchangeEconomy:
    utilities = []
    for u in data["utility"]:
        if u["family"] == "shifted_log":
            utilities.append(ShiftedLogUtility(np.array([float(v) for v in u["a"]]),
                                               float(u["sigma"])))
        elif u["family"] == "polynomial":
            utilities.append(Polynomial.from_json(u))
        else:
            raise ValueError(f"unknown utility family {u['family']!r}")
    return ExchangeEconomy(n=int(data["n"]), d=int(data["d"]),
                           endowments=np.array([[float(v) for v in row]
                                                for row in data["endowments"]]),
                           utilities=utilities, epsilon=float(data["epsilon"]),
                           xi=float(data["xi"]) if "xi" in data else None,
                           gamma=float(data["gamma"]) if "gamma" in data else None)


def economy_to_json(econ: ExchangeEconomy) -> dict:
    return {"n": econ.n, "d": econ.d,
            "endowments": [[repr(float(v)) for v in row] for row in econ.endowments],
            "utility": [u.to_json() for u in econ.utilities],
            "epsilon": repr(float(econ.epsilon)), "xi": repr(float(econ.xi)),
            "gamma": repr(float(econ.gamma))}
