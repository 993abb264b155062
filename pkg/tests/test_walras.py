import math

import numpy as np
import pytest

from fixeq.bodies import Inside, Polytope, Separated, hausdorff_distance, strong_sep, vertices
from fixeq.walras import (
    EmptyBudget,
    ExchangeEconomy,
    ShiftedLogUtility,
    WalrasOutcome,
    aggregate_demand_body,
    budget_body,
    budget_radius,
    check_walras,
    demand_body,
    demand_optimum,
    economy_from_json,
    economy_to_json,
    hoffman_bound,
    price_body,
    price_optimum,
    price_test_vectors,
    solve_walras,
)


def kkt_demand(a, sigma, gamma, p, w):
    """Independent oracle: per-coordinate KKT roots of the regularized
    shifted-log utility, with a bisection on the budget multiplier."""
    a, p = np.asarray(a, float), np.asarray(p, float)

    def x_of(lam):
        A = lam * p + 2 * gamma * sigma
        disc = A * A + 8 * gamma * (a - lam * p * sigma)
        return np.maximum((-A + np.sqrt(np.maximum(disc, 0.0))) / (4 * gamma), 0.0)

    if p @ x_of(1e-12) <= w:
        return x_of(1e-12)
    lo, hi = 1e-12, 1e8
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if p @ x_of(mid) > w:
            lo = mid
        else:
            hi = mid
    return x_of(math.sqrt(lo * hi))


def eq_price_bisection(econ):
    """Root of regularized excess demand for good 1 along p = (t, 1-t)."""

    def excess1(t):
        p = np.array([t, 1.0 - t])
        tot = sum(kkt_demand(u.a, u.sigma, econ.gamma, p, float(p @ e))
                  for u, e in zip(econ.utilities, econ.endowments))
        return tot[0] - econ.total_endowment()[0]

    lo, hi = econ.xi, 1.0 - econ.xi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if excess1(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return np.array([t, 1.0 - t])


def symmetric_economy(eps=0.05):
    e = np.array([[1.0, 1.0], [1.0, 1.0]])
    us = [ShiftedLogUtility([1.0, 1.0]), ShiftedLogUtility([1.0, 1.0])]
    return ExchangeEconomy(n=2, d=2, endowments=e, utilities=us, epsilon=eps)


def asymmetric_economy(eps=0.05):
    e = np.array([[2.0, 0.5], [0.5, 2.0]])
    us = [ShiftedLogUtility([2.0, 1.0]), ShiftedLogUtility([1.0, 1.0])]
    return ExchangeEconomy(n=2, d=2, endowments=e, utilities=us, epsilon=eps)


def test_budget_body_triangle():
    econ = symmetric_economy()
    body = budget_body(econ, 0, np.array([0.5, 0.5]), 0.0)
    # triangle {x >= 0, 0.5 x1 + 0.5 x2 <= 1} i.e. x1 + x2 <= 2
    assert isinstance(strong_sep(body, np.array([1.0, 1.0])), Inside)
    assert isinstance(strong_sep(body, np.array([1.5, 1.0])), Separated)
    vs = vertices(body)
    assert any(np.allclose(v, [2, 0]) for v in vs)
    assert any(np.allclose(v, [0, 2]) for v in vs)


def test_budget_bound_lemma():
    # every budget point obeys ||x|| <= d ||e_i|| / xi
    econ = symmetric_economy()
    rng = np.random.default_rng(0)
    bound = econ.allocation_bound(0)
    for _ in range(50):
        p = rng.dirichlet([1, 1])
        p = np.maximum(p, econ.xi)
        p = p / p.sum()
        body = budget_body(econ, 0, p, 0.0)
        for v in vertices(body):
            assert np.linalg.norm(v) <= bound + 1e-9
        assert budget_radius(econ, 0, p) <= bound + 1e-9


def test_empty_budget():
    econ = symmetric_economy()
    p = np.array([0.5, 0.5])
    with pytest.raises(EmptyBudget):
        budget_body(econ, 0, p, alpha=econ.n * float(p @ econ.endowments[0]))


def test_demand_matches_kkt_oracle():
    econ = symmetric_economy()
    rng = np.random.default_rng(1)
    for _ in range(5):
        t = rng.uniform(0.3, 0.7)
        p = np.array([t, 1 - t])
        x = demand_optimum(econ, 0, p)
        ref = kkt_demand([1.0, 1.0], 0.05, econ.gamma, p, float(p @ econ.endowments[0]))
        assert np.linalg.norm(x - ref) <= 0.05, (p, x, ref)


def test_demand_body_membership_replays():
    econ = symmetric_economy()
    p = np.array([0.5, 0.5])
    x_sol = demand_optimum(econ, 0, p)
    body = demand_body(econ, 0, p, 0.0, x_sol=x_sol)
    f = econ.regularized(0)
    level = f.value(x_sol) - (econ.epsilon - econ.epsilon / 8)
    rng = np.random.default_rng(2)
    for _ in range(40):
        x = rng.uniform(0, 2.2, size=2)
        if isinstance(strong_sep(body, x), Inside):
            assert f.value(x) >= level - 1e-9


def test_demand_concentration():
    # any two members are within 2 sqrt(eps/gamma) (strong concavity pinch)
    econ = symmetric_economy()
    p = np.array([0.55, 0.45])
    body = demand_body(econ, 0, p, 0.0)
    rng = np.random.default_rng(3)
    members = [x for x in rng.uniform(0, 2.5, size=(300, 2))
               if isinstance(strong_sep(body, x), Inside)]
    bound = 2 * math.sqrt(econ.epsilon / econ.gamma)
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            assert np.linalg.norm(members[i] - members[j]) <= bound + 1e-9


def test_linear_utility_demand_at_corner():
    # linear-ish utility concentrated on good 1: demand piles onto x1 vertex
    econ = ExchangeEconomy(n=2, d=2, endowments=np.array([[1.0, 1.0], [1.0, 1.0]]),
                           utilities=[ShiftedLogUtility([5.0, 0.05]),
                                      ShiftedLogUtility([1.0, 1.0])],
                           epsilon=0.05)
    p = np.array([0.5, 0.5])
    x = demand_optimum(econ, 0, p)
    assert x[0] > 1.5 and x[1] < 0.5


def test_aggregate_demand_membership():
    econ = symmetric_economy()
    p = np.array([0.5, 0.5])
    agg = aggregate_demand_body(econ, p, 0.0)
    xs = np.array([demand_optimum(econ, i, p) for i in range(2)])
    z = np.concatenate([xs.ravel(), xs.sum(axis=0)])
    assert agg.membership(z, tol=1e-6)
    # sum below the Q floor is rejected
    bad = np.concatenate([0.2 * xs.ravel(), 0.2 * xs.sum(axis=0)])
    assert not agg.membership(bad)


def test_price_body_fixtures():
    econ = symmetric_economy()
    # cleared market: maximizer ~ centroid of the simplex (pure regularizer)
    p0 = price_optimum(econ, econ.total_endowment())
    assert np.allclose(p0, [0.5, 0.5], atol=0.05)
    # excess demand in good 1 pushes p1 toward 1 - xi
    p1 = price_optimum(econ, econ.total_endowment() + np.array([1.0, 0.0]))
    assert p1[0] > 0.9
    # members replay the level inequality
    body = price_body(econ, econ.total_endowment() + np.array([0.3, 0.0]))
    from fixeq.walras import price_objective
    w = price_objective(econ, econ.total_endowment() + np.array([0.3, 0.0]))
    p_sol = price_optimum(econ, econ.total_endowment() + np.array([0.3, 0.0]))
    level = w.value(p_sol) - (econ.epsilon - econ.epsilon / 8)
    rng = np.random.default_rng(5)
    for _ in range(50):
        raw = rng.dirichlet([1, 1])
        p = np.maximum(raw, econ.xi)
        p = p / p.sum()
        if isinstance(strong_sep(body, p), Inside):
            assert w.value(p) >= level - 1e-9


def test_solve_symmetric_economy():
    econ = symmetric_economy()
    out = solve_walras(econ)
    assert isinstance(out, WalrasOutcome)
    assert np.linalg.norm(out.p - [0.5, 0.5]) < 0.05
    assert np.all(out.per_agent_regret <= 4 * econ.epsilon)
    assert np.all(np.abs(out.clearance_residual) <= 3 * econ.epsilon)
    assert np.allclose(out.allocations, econ.endowments, atol=0.2)


def test_solve_asymmetric_economy_matches_bisection():
    econ = asymmetric_economy()
    p_star = eq_price_bisection(econ)
    out = solve_walras(econ)
    assert isinstance(out, WalrasOutcome)
    assert np.linalg.norm(out.p - p_star) < 0.05, (out.p, p_star)
    assert np.all(np.abs(out.clearance_residual) <= 3 * econ.epsilon)
    assert np.all(out.per_agent_regret <= 4 * econ.epsilon)


def test_solve_lopsided_preferences():
    econ = ExchangeEconomy(n=2, d=2, endowments=np.array([[1.0, 1.0], [1.0, 1.0]]),
                           utilities=[ShiftedLogUtility([3.0, 0.05]),
                                      ShiftedLogUtility([1.0, 1.0])],
                           epsilon=0.05)
    out = solve_walras(econ)
    assert isinstance(out, WalrasOutcome)
    assert out.p[0] > out.p[1]


def test_check_walras_self_consistency():
    econ = symmetric_economy()
    out = solve_walras(econ)
    again = check_walras(econ, out.p, out.allocations, econ.epsilon)
    assert np.all(again.per_agent_regret <= 4 * econ.epsilon)
    assert np.all(np.abs(again.clearance_residual) <= 3 * econ.epsilon)
    assert again.feasible


def test_check_walras_endowment_allocation():
    econ = asymmetric_economy()
    p = np.array([0.5, 0.5])
    out = check_walras(econ, p, econ.endowments, econ.epsilon)
    assert np.allclose(out.clearance_residual, 0.0, atol=1e-12)  # exact clearing
    assert np.all(out.per_agent_regret >= -1e-9)  # forgone trade gains
    assert out.feasible


def test_check_walras_overallocation_flagged():
    econ = symmetric_economy()
    too_much = econ.endowments * 3.0
    out = check_walras(econ, np.array([0.5, 0.5]), too_much, econ.epsilon)
    assert not out.feasible


def test_hoffman_examples():
    assert hoffman_bound(np.array([0.5, 0.5])) == pytest.approx(2.0)
    d = 4
    assert hoffman_bound(np.full(d, 1.0 / d)) == pytest.approx(d)
    # brute-force direction search agrees
    rng = np.random.default_rng(7)
    p = np.array([0.3, 0.7])
    dirs = np.abs(rng.normal(size=(4000, 2)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    brute = 1.0 / np.min(dirs @ p)
    assert hoffman_bound(p) == pytest.approx(brute, rel=1e-2)


def test_hoffman_dominated_by_paper_bound():
    rng = np.random.default_rng(8)
    xi = 0.05
    d = 3
    for _ in range(100):
        raw = rng.dirichlet(np.ones(d))
        p = np.maximum(raw, xi)
        p = p / p.sum()
        assert hoffman_bound(p) <= math.sqrt(d) / xi + 1e-9


def test_budget_hausdorff_lipschitz():
    econ = ExchangeEconomy(n=1, d=2, endowments=np.array([[1.0, 1.0]]),
                           utilities=[ShiftedLogUtility([1.0, 1.0])],
                           epsilon=0.05, xi=0.1)
    C = (2 ** 1.5 / econ.xi ** 2) * float(np.linalg.norm(econ.endowments[0]))
    rng = np.random.default_rng(9)
    for _ in range(100):
        raws = rng.dirichlet([1, 1], size=2)
        ps = np.maximum(raws, econ.xi)
        ps = ps / ps.sum(axis=1, keepdims=True)
        b1 = budget_body(econ, 0, ps[0], 0.0)
        b2 = budget_body(econ, 0, ps[1], 0.0)
        dh = hausdorff_distance(b1, b2, n_dirs=64)
        assert dh <= C * np.linalg.norm(ps[0] - ps[1]) + 1e-9


def test_price_test_vectors_sum_to_one():
    v = price_test_vectors(3, 0.06)
    assert np.allclose(v.sum(axis=1), 1.0)
    assert np.allclose(np.diag(v), 1.0 - 0.06)


def test_economy_json_roundtrip():
    econ = asymmetric_economy()
    back = economy_from_json(economy_to_json(econ))
    assert back.n == econ.n and back.d == econ.d
    assert np.allclose(back.endowments, econ.endowments)
    assert back.xi == pytest.approx(econ.xi)
    x = np.array([0.4, 0.6])
    assert back.utilities[0].value(x) == pytest.approx(econ.utilities[0].value(x))
