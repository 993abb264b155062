import math

import numpy as np
import pytest

from fixeq.bodies import (
    Ball,
    Box,
    ConvexFn,
    Intersection,
    Polytope,
    SimplexXi,
    WellBounded,
    exact_project,
    parallel_body,
)
from fixeq.ellipsoid import (
    EllipsoidState,
    Empty,
    EmptinessCert,
    Minimizer,
    c_hat,
    feasibility,
    scco,
    strong_project,
    volume_drop_per_cut,
    wcco,
    weak_project,
)

EMPTY_SLAB = Intersection((Box([-2.0, -2.0], [0.0, 2.0]), Box([1.0, -2.0], [2.0, 2.0])))


def test_feasibility_ball():
    z = feasibility(Ball([0.0, 0.0], 0.5), dim=2, R=2.0, eta=0.01, delta=1e-6)
    assert isinstance(z, np.ndarray)
    assert np.linalg.norm(z) <= 0.5 + 1e-5


def test_feasibility_empty_intersection():
    cert = feasibility(EMPTY_SLAB, dim=2, R=2.0, eta=0.01, delta=1e-9)
    assert isinstance(cert, EmptinessCert)
    assert cert.holds()  # final volume below the eta-ball volume
    assert cert.cut_history


def test_feasibility_small_box():
    z = feasibility(Box([0.4] * 3, [0.6] * 3), dim=3, R=2.0, eta=0.05, delta=1e-9)
    assert isinstance(z, np.ndarray)
    assert np.all(z >= 0.4 - 1e-6) and np.all(z <= 0.6 + 1e-6)


def test_volume_monotonicity():
    # every central cut shrinks volume by at least exp(-1/(2(d+1)))
    rng = np.random.default_rng(0)
    for d in (1, 2, 4, 7):
        state = EllipsoidState(np.zeros(d), np.eye(d))
        bound = -1.0 / (2.0 * (d + 1.0))
        assert volume_drop_per_cut(d) <= bound + 1e-12
        for _ in range(20):
            a = rng.normal(size=d)
            nxt = state.cut(a)
            drop = nxt.log_sqrt_det() - state.log_sqrt_det()
            assert drop <= bound + 1e-9
            state = nxt


def test_wcco_linear_over_box():
    f = ConvexFn(2, lambda z: float(z[0]), lambda z: np.array([1.0, 0.0]))
    res = wcco(f, Box([0.0, 0.0], [1.0, 1.0]), delta=1e-3, R=2.0, eta=1e-3, L_f=1.0)
    assert isinstance(res, Minimizer)
    assert res.z[0] <= 1e-3


def test_wcco_quadratic_over_ball():
    # min ||x-(2,2)||^2 over unit ball: argmin (1/sqrt2, 1/sqrt2), value (2 sqrt2 - 1)^2
    t = np.array([2.0, 2.0])
    f = ConvexFn(2, lambda z: float((z - t) @ (z - t)), lambda z: 2.0 * (z - t))
    res = wcco(f, Ball([0.0, 0.0], 1.0), delta=1e-5, R=2.0, eta=1e-4, L_f=6.0)
    assert isinstance(res, Minimizer)
    expect = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert np.linalg.norm(res.z - expect) < 1e-2
    assert res.value == pytest.approx((2.0 * np.sqrt(2.0) - 1.0) ** 2, abs=1e-2)


def test_wcco_constant_objective():
    f = ConvexFn(2, lambda z: 0.0, lambda z: np.zeros(2))
    res = wcco(f, Ball([0.0, 0.0], 1.0), delta=1e-4, R=2.0, eta=1e-3, L_f=1.0)
    assert isinstance(res, Minimizer)
    assert res.value == 0.0
    assert np.linalg.norm(res.z) <= 1.0 + 1e-3


def test_wcco_empty_returns_cert():
    f = ConvexFn(2, lambda z: float(z[0]), lambda z: np.array([1.0, 0.0]))
    res = wcco(f, EMPTY_SLAB, delta=1e-6, R=2.0, eta=0.01, L_f=1.0)
    assert isinstance(res, Empty)
    assert res.cert.holds()


def test_scco_constant_on_simplex():
    f = ConvexFn(2, lambda z: float(z[0] + z[1]), lambda z: np.ones(2))
    res = scco(f, SimplexXi(2, 0.1), delta=1e-3, R=1.5, L_f=2.0)
    assert isinstance(res, Minimizer)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    assert np.min(res.z) >= 0.1 - 1e-9 and np.sum(res.z) == pytest.approx(1.0, abs=1e-9)


def test_scco_quadratic_over_shifted_box():
    f = ConvexFn(2, lambda z: float(z @ z), lambda z: 2.0 * z)
    res = scco(f, Box([1.0, 1.0], [2.0, 2.0]), delta=1e-5, R=3.0, L_f=6.0)
    assert isinstance(res, Minimizer)
    assert np.linalg.norm(res.z - [1.0, 1.0]) < 1e-2


def test_scco_lp_vertex():
    body = Polytope([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    f = ConvexFn(2, lambda z: -float(z[0]), lambda z: np.array([-1.0, 0.0]))
    res = scco(f, body, delta=1e-5, R=1.5, L_f=1.0)
    assert isinstance(res, Minimizer)
    assert np.linalg.norm(res.z - [1.0, 0.0]) < 1e-2
    assert res.value == pytest.approx(-1.0, abs=1e-2)
    # strong-oracle output is feasible exactly
    assert np.all(body.A @ res.z <= body.b + 1e-12)


def test_weak_project_examples():
    z = weak_project(Ball([0.0, 0.0], 1.0), [2.0, 0.0], 1e-4)
    assert np.linalg.norm(z - [1.0, 0.0]) < 1e-2

    z = weak_project(Ball([0.0, 0.0], 1.0), [0.2, -0.1], 1e-4)
    assert np.linalg.norm(z - [0.2, -0.1]) < 1e-2  # interior point projects to itself

    z = weak_project(Box([0.0, 0.0], [1.0, 1.0]), [2.0, -1.0], 1e-4)
    assert np.linalg.norm(z - [1.0, 0.0]) < 1e-2


def test_strong_project_examples():
    ball = Ball([0.0, 0.0], 1.0)
    z = strong_project(ball, [2.0, 0.0], 1e-4)
    assert np.linalg.norm(z - [1.0, 0.0]) < 1e-2
    assert np.linalg.norm(z) <= 1.0 + 1e-12  # in X exactly

    z = strong_project(ball, [0.2, -0.1], 1e-4)
    assert np.linalg.norm(z - [0.2, -0.1]) < 1e-2

    box = Box([0.0, 0.0], [1.0, 1.0])
    z = strong_project(box, [2.0, -1.0], 1e-4)
    assert np.linalg.norm(z - [1.0, 0.0]) < 1e-2
    assert np.all(z >= -1e-12) and np.all(z <= 1.0 + 1e-12)


def test_weak_project_empty_cert():
    out = weak_project(EMPTY_SLAB, [0.5, 0.5], 1e-3,
                       well_bounded=WellBounded(EMPTY_SLAB, r=0.01, R=3.0))
    assert isinstance(out, EmptinessCert)
    assert out.c_hat == pytest.approx(c_hat(2, 0.01))


def test_projection_consistency_chat_bound():
    # || weak_project(X, y, eps) - exact_project(B(X, eps), y) || <= c_hat eps
    rng = np.random.default_rng(6)
    X = Ball([0.2, -0.1], 0.7)
    eta = 0.7
    wb = WellBounded(X, r=eta, R=1.0)
    for eps in (0.05, 0.01):
        grown = parallel_body(X, eps)
        for _ in range(10):
            y = rng.uniform(-2, 2, size=2)
            z = weak_project(X, y, eps, well_bounded=wb)
            assert np.linalg.norm(z - exact_project(grown, y)) <= c_hat(2, eta) * eps


def test_weak_project_approximately_nonexpansive():
    rng = np.random.default_rng(13)
    eps = 1e-3
    for X, eta in ((Ball([0.0, 0.0], 0.8), 0.8), (Box([0.0, 0.0], [1.0, 1.0]), 0.5)):
        wb = WellBounded(X, r=eta, R=1.5)
        for _ in range(10):
            x1 = rng.uniform(-1.5, 1.5, size=2)
            x2 = rng.uniform(-1.5, 1.5, size=2)
            z1 = weak_project(X, x1, eps, well_bounded=wb)
            z2 = weak_project(X, x2, eps, well_bounded=wb)
            assert np.linalg.norm(z1 - z2) <= np.linalg.norm(x1 - x2) + 2 * c_hat(2, eta) * eps


def test_minimizer_passes_own_oracle():
    from fixeq.bodies import weak_sep, Inside
    f = ConvexFn(2, lambda z: float(z[1]), lambda z: np.array([0.0, 1.0]))
    X = Ball([0.3, 0.3], 0.5)
    res = wcco(f, X, delta=1e-4, R=2.0, eta=1e-3, L_f=1.0)
    assert isinstance(res, Minimizer)
    assert isinstance(weak_sep(X, res.z, 1e-4), Inside)
