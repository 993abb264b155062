"""Numerical verification harness for the robust maximum theorem: Lipschitz
value functions and (1/2)-Hoelder argmax maps for strongly concave objectives
over Hausdorff-Lipschitz moving constraint sets.

Only fixture families with analytic constants (mu, L, L') get assertions;
arbitrary problems get reports.  The theorem's constants are unverifiable
from oracles alone, so the audit always carries the solver tolerance as an
explicit slack term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bodies import Ball, Box, ConvexFn, WellBounded, exact_project
from .ellipsoid import Empty, scco
from .numerics import as_vec


@dataclass
class ParametricProblem:
    """max_b f(a, b) over g(a), with fixture-certified constants.

    f_value/f_grad_b: the objective and its b-gradient; g: parameter ->
    constraint body; mu: strong concavity in b; L: joint Lipschitz constant
    of f on the fixture region; L_prime: Hausdorff Lipschitz constant of g.
    """

    name: str
    b_dim: int
    f_value: Callable
    f_grad_b: Callable
    g: Callable
    mu: float
    L: float
    L_prime: float
    param_lo: np.ndarray
    param_hi: np.ndarray
    analytic_argmax: Callable | None = None

    def kappa(self) -> float:
        return self.L_prime + 2.0 * math.sqrt(4.0 / self.mu) * math.sqrt(self.L + self.L * self.L_prime)


def projection_family(dim: int = 2) -> ParametricProblem:
    """f(a,b) = -||b - a||^2 over the unit ball: g*(a) is the projection of a
    onto the ball, so the audit has a closed-form comparision point."""
    lo, hi = -np.full(dim, 1.5), np.full(dim, 1.5)
    diam = 1.5 * math.sqrt(dim) + 1.0
    return ParametricProblem(
        name="projection",
        b_dim=dim,
        f_value=lambda a, b: -float(np.dot(b - a, b - a)),
        f_grad_b=lambda a, b: -2.0 * (as_vec(b) - as_vec(a)),
        g=lambda a: Ball(np.zeros(dim), 1.0),
        mu=2.0,
        L=2.0 * diam * math.sqrt(2.0),
        L_prime=0.0,
        param_lo=lo, param_hi=hi,
        analytic_argmax=lambda a: exact_project(Ball(np.zeros(dim), 1.0), a),
    )


def moving_box_family(dim: int = 2) -> ParametricProblem:
    """f(a,b) = -||b||^2 over the moving box [a, a+1]: g*(a) clamps the
    origin into the box."""
    lo, hi = -np.full(dim, 1.5), np.full(dim, 0.5)
    return ParametricProblem(
        name="moving-box",
        b_dim=dim,
        f_value=lambda a, b: -float(np.dot(b, b)),
        f_grad_b=lambda a, b: -2.0 * as_vec(b),
        g=lambda a: Box(as_vec(a), as_vec(a) + 1.0),
        mu=2.0,
        L=2.0 * 1.5 * math.sqrt(dim) + 1e-9,
        L_prime=1.0,
        param_lo=lo, param_hi=hi,
        analytic_argmax=lambda a: np.clip(np.zeros(dim), as_vec(a), as_vec(a) + 1.0),
    )


FAMILIES = {"projection": projection_family, "moving-box": moving_box_family}


def value_and_argmax(prob: ParametricProblem, a, delta_b: float = 1e-6):
    """f*(a) and the (unique, by strong concavity) maximizer estimate, via
    the strong-oracle ellipsoid at tolerance delta_b."""
    a = as_vec(a)
    body = prob.g(a)
    neg = ConvexFn(prob.b_dim,
                   lambda b: -prob.f_value(a, b),
                   lambda b: -prob.f_grad_b(a, b))
    from .bodies import outer_radius
    res = scco(neg, body, delta=delta_b, R=outer_radius(body) + 1e-9, L_f=prob.L)
    if isinstance(res, Empty):
        raise RuntimeError(f"fixture constraint empty at a={a}")
    return -res.value, res.z


def holder_audit(prob: ParametricProblem, pairs, delta_b: float = 1e-6,
                 pair_distance_cap: float = 1.0) -> dict:
    """Check ||g*(a1) - g*(a2)|| <= kappa ||a1 - a2||^(1/2) + 4 sqrt(delta_b/mu)
    over the supplied pairs; reports per-pair ratios and the worst one.

    The theorem's Hoelder claim holds for sufficiently small parameter
    differences, exposed here as pair_distance_cap (pairs beyond it are
    skipped and counted)."""
    kappa = prob.kappa()
    slack = 4.0 * math.sqrt(delta_b / prob.mu)
    records = []
    skipped = 0
    ok = True
    for a1, a2 in pairs:
        a1, a2 = as_vec(a1), as_vec(a2)
        gap = float(np.linalg.norm(a1 - a2))
        if gap > pair_distance_cap:
            skipped += 1
            continue
        _, g1 = value_and_argmax(prob, a1, delta_b)
        _, g2 = value_and_argmax(prob, a2, delta_b)
        lhs = float(np.linalg.norm(g1 - g2))
        rhs = kappa * math.sqrt(gap) + slack
        ratio = lhs / rhs if rhs > 0 else 0.0
        ok = ok and lhs <= rhs
        records.append({"gap": gap, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    return {"family": prob.name, "kappa": kappa, "slack": slack, "delta_b": delta_b,
            "pairs": records, "skipped": skipped, "ok": ok,
            "max_ratio": max((r["ratio"] for r in records), default=0.0)}


def value_lipschitz_audit(prob: ParametricProblem, pairs, delta_b: float = 1e-6) -> dict:
    """|f*(a1) - f*(a2)| <= (L + L L') ||a1 - a2|| + 2 delta_b, the literal
    value-function bound with the solver tolerance made explicit."""
    C = prob.L + prob.L * prob.L_prime
    records = []
    ok = True
    for a1, a2 in pairs:
        f1, _ = value_and_argmax(prob, a1, delta_b)
        f2, _ = value_and_argmax(prob, a2, delta_b)
        lhs = abs(f1 - f2)
        rhs = C * float(np.linalg.norm(as_vec(a1) - as_vec(a2))) + 2.0 * delta_b
        ok = ok and lhs <= rhs
        records.append({"lhs": lhs, "rhs": rhs})
    return {"family": prob.name, "constant": C, "delta_b": delta_b,
            "pairs": records, "ok": ok}


def sample_pairs(prob: ParametricProblem, n_pairs: int, seed: int = 0,
                 max_gap: float | None = None):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_pairs):
        a1 = rng.uniform(prob.param_lo, prob.param_hi)
        if max_gap is None:
            a2 = rng.uniform(prob.param_lo, prob.param_hi)
        else:
            step = rng.normal(size=len(prob.param_lo))
            step = step / np.linalg.norm(step) * rng.uniform(0, max_gap)
            a2 = np.clip(a1 + step, prob.param_lo, prob.param_hi)
        out.append((a1, a2))
    return out
