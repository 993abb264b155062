import math

import numpy as np
import pytest

from fixeq.bodies import Ball, Box, Intersection
from fixeq.ellipsoid import c_hat, weak_project, WellBounded
from fixeq.kakutani import (
    Correspondence,
    EmptyCert,
    FixedPoint,
    LipschitzCert,
    PROJECTION,
    ResourceBound,
    SolveParams,
    WEAK_SEP,
    check_fixed_point,
    choose_params,
    color_rule,
    grid_lower_bound,
    projection_accuracy,
    solve,
    vector_field,
)
from fixeq.numerics import affine_circuit
from fixeq.reductions import BrouwerInstance, brouwer_to_kakutani


def constant_ball(center=(0.3, 0.7), radius=0.05, mode=PROJECTION, eta=None, L=0.0):
    body = Ball(np.array(center), radius)
    return Correspondence(d=len(center), mode=mode, value_at=lambda x: body,
                          eta=radius if eta is None else eta, L=L)


def test_choose_params_formula():
    p = choose_params(alpha=0.5, d=2, L=1.0, eta=0.1)
    a10 = 0.05
    N = p.n_points
    assert N >= 2 / a10
    assert N >= math.sqrt(2) * 2 / a10
    assert N >= 9 * 2 ** 2.5 / a10 ** 2
    assert N >= 9 * 4 * 2 / a10
    # smallest power of two: halving fails at least one bound
    assert (N // 2) < grid_lower_bound(0.5, 2, 1.0)
    assert p.eps <= a10 / 13
    assert p.eps <= a10 ** 2 / (117 * 2 ** 1.5)
    assert p.xi_mesh == pytest.approx(math.sqrt(2) / (N - 1))


def test_choose_params_monotone_in_alpha():
    n_half = choose_params(0.25, 2, 1.0, 0.1).n_points
    n_full = choose_params(0.5, 2, 1.0, 0.1).n_points
    assert n_half >= n_full


def test_choose_params_resource_bound():
    with pytest.raises(ResourceBound):
        choose_params(0.1, 2, 1.0, 0.1, cubelet_budget=100_000)


def test_vector_field_fixtures():
    F = constant_ball((0.5, 0.5), 0.2)
    # interior point: G ~ 0
    G = vector_field(F, np.array([0.45, 0.55]), 1e-6)
    assert np.linalg.norm(G) <= 1e-9
    # far point: G ~ c - v (center pull, minus radius)
    F2 = constant_ball((0.9, 0.9), 1e-6)
    v = np.array([0.1, 0.1])
    G = vector_field(F2, v, 1e-9)
    assert np.allclose(G, np.array([0.8, 0.8]), atol=1e-4)


def test_vector_field_weak_matches_exact():
    body = Ball(np.array([0.4, 0.6]), 0.15)
    Fw = Correspondence(2, WEAK_SEP, lambda x: body, eta=0.15, L=0.0)
    Fp = Correspondence(2, PROJECTION, lambda x: body, eta=0.15, L=0.0)
    rng = np.random.default_rng(3)
    eps = 1e-3
    for _ in range(10):
        v = rng.uniform(0, 1, size=2)
        Gw = vector_field(Fw, v, eps)
        Gp = vector_field(Fp, v, eps)
        assert np.linalg.norm(Gw - Gp) <= c_hat(2, 0.15) * eps


def test_color_rule_examples():
    assert color_rule([0.1, 0.2]) == 0
    assert color_rule([-0.1, 0.2]) == 1
    # boundary re-tie: G = (0.1, -0.2) at a vertex on face x2 = 0 forbids
    # color 2; no other negative component, so 0 must be legal
    lo = np.array([False, True])
    hi = np.array([False, False])
    assert color_rule([0.1, -0.2], lo, hi) == 0
    # re-tie order: negatives at (1,2), face x1 = 0 bans color 1 -> color 2
    lo = np.array([True, False])
    assert color_rule([-0.3, -0.2], lo, hi) == 2
    # one-face: all G >= 0 with v2 = N-1 bans 0; G2 <= 0 required there
    hi = np.array([False, True])
    assert color_rule([0.2, 0.0], np.array([False, False]), hi) == 2


def test_solve_constant_ball_auto_and_sperner():
    for strategy in ("auto", "sperner"):
        F = constant_ball()
        out = solve(F, 0.1, strategy=strategy)
        assert isinstance(out, FixedPoint), strategy
        assert out.residual <= 0.1
        assert np.linalg.norm(out.x - [0.3, 0.7]) <= 0.15
        assert check_fixed_point(F, out.x, 0.1) <= 0.1


def brouwer_affine(d=2):
    W = [["1/2" if i == j else "0" for j in range(d)] for i in range(d)]
    return BrouwerInstance(affine_circuit(W, ["1/4"] * d), L=0.5, gamma=0.2)


def test_solve_affine_brouwer():
    b = brouwer_affine()
    F = brouwer_to_kakutani(b)
    assert F.eta == pytest.approx(0.1)
    for strategy in ("auto", "sperner"):
        out = solve(F, 0.1, strategy=strategy)
        assert isinstance(out, FixedPoint)
        assert check_fixed_point(F, out.x, 0.1) <= 0.1
        # Kakutani point within gamma/2 + alpha of the true fixed point (0.5, 0.5)
        assert np.linalg.norm(out.x - [0.5, 0.5]) <= 0.2 + 0.1
        # round trip: gamma-approximate Brouwer fixed point
        assert np.linalg.norm(out.x - b.eval(out.x)) <= 0.2


def test_brouwer_identity_everything_fixed():
    from fixeq.numerics import identity_circuit
    b = BrouwerInstance(identity_circuit(2), L=1.0, gamma=0.1)
    F = brouwer_to_kakutani(b)
    out = solve(F, 0.1)
    assert isinstance(out, FixedPoint)
    assert out.residual <= 0.1


def test_solve_empty_cert():
    gap = Intersection((Box([0.0, 0.0], [0.2, 1.0]), Box([0.8, 0.0], [1.0, 1.0])))
    F = Correspondence(2, WEAK_SEP, lambda x: gap, eta=0.2, L=1.0)
    out = solve(F, 0.2)
    assert isinstance(out, EmptyCert)
    assert out.cert.holds()


def test_check_fixed_point_values():
    F = constant_ball((0.3, 0.7), 0.05)
    assert check_fixed_point(F, np.array([0.3, 0.7]), 0.1) <= 1e-9
    F2 = constant_ball((0.6, 0.5), 1e-9, eta=1e-9)
    r = check_fixed_point(F2, np.array([0.1, 0.5]), 0.1)
    assert r == pytest.approx(0.5, abs=1e-6)


def moving_ball(L=0.3, radius=0.2, mode=WEAK_SEP):
    base = np.array([0.4, 0.4])
    drift = np.array([[0.0, L], [L, 0.0]])
    def value_at(x):
        c = np.clip(base + drift @ x * 0.5, radius, 1 - radius)
        return Ball(c, radius)
    # Hausdorff-Lipschitz constant of x -> Ball(c(x), r) is the Lipschitz
    # constant of c; drift has spectral norm L, halved
    return Correspondence(2, mode, value_at, eta=radius, L=0.5 * L * math.sqrt(2))


def test_approximate_lipschitz_chain():
    # || proj_{F(p)}(proj_{F(q)}(q)) - proj_{F(p)}(q) || <= L ||p-q|| + 3(1+c_hat) eps
    F = moving_ball()
    eps = 1e-3
    slack = F.lipschitz_slack(eps)
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(100):
        p, q = rng.uniform(0, 1, size=2), rng.uniform(0, 1, size=2)
        w = F.project(q, q, eps)
        z = F.project(p, w, eps)
        zq = F.project(p, q, eps)
        lhs = np.linalg.norm(z - zq)
        rhs = F.L * np.linalg.norm(p - q) + slack
        worst = max(worst, lhs - rhs)
        assert lhs <= rhs + 1e-12
    assert worst <= 0


def test_projection_map_hoelder_bound():
    # || proj_{F(p)}(p) - proj_{F(q)}(q) || <= 2 d^(1/4) sqrt(2 err) + err
    # with err = (L+1) xi + L_hat' eps, for ||p-q|| <= xi
    F = moving_ball()
    eps = 1e-4
    xi = 0.05
    ch = c_hat(2, F.eta)
    err = (F.L + 1) * xi + (3 * (1 + ch) + 2 * ch) * eps
    bound = 2 * 2 ** 0.25 * math.sqrt(2 * err) + err
    rng = np.random.default_rng(11)
    for _ in range(60):
        p = rng.uniform(0.1, 0.9, size=2)
        u = rng.normal(size=2)
        q = np.clip(p + u / np.linalg.norm(u) * xi * rng.uniform(), 0, 1)
        zp = F.project(p, p, eps)
        zq = F.project(q, q, eps)
        assert np.linalg.norm(zp - zq) <= bound + 1e-9


def test_solve_residual_selfconsistency():
    # solve()'s fixed point replays through check_fixed_point below alpha
    F = moving_ball(mode=PROJECTION)
    out = solve(F, 0.05)
    assert isinstance(out, FixedPoint)
    assert check_fixed_point(F, out.x, 0.05) <= 0.05
