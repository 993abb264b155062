import math

import numpy as np
import pytest

from fixeq.berge import (
    holder_audit,
    moving_box_family,
    projection_family,
    sample_pairs,
    value_and_argmax,
    value_lipschitz_audit,
)


def test_value_and_argmax_projection_family():
    prob = projection_family()
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.uniform(prob.param_lo, prob.param_hi)
        fstar, gstar = value_and_argmax(prob, a, delta_b=1e-8)
        expect = prob.analytic_argmax(a)
        assert np.linalg.norm(gstar - expect) < 1e-3
        assert fstar == pytest.approx(-float(np.linalg.norm(a - expect)) ** 2, abs=1e-6)


def test_value_and_argmax_moving_box():
    prob = moving_box_family()
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = rng.uniform(prob.param_lo, prob.param_hi)
        _, gstar = value_and_argmax(prob, a, delta_b=1e-8)
        assert np.linalg.norm(gstar - prob.analytic_argmax(a)) < 1e-3


def test_value_function_continuity_along_path():
    # no jump larger than (L + L L') step + 2 delta_b along a sampled path
    prob = projection_family()
    delta_b = 1e-7
    C = prob.L + prob.L * prob.L_prime
    ts = np.linspace(0, 1, 40)
    path = np.stack([(1 - t) * np.array([-1.2, 0.3]) + t * np.array([1.3, -1.0]) for t in ts])
    vals = [value_and_argmax(prob, a, delta_b)[0] for a in path]
    step = float(np.linalg.norm(path[1] - path[0]))
    for v1, v2 in zip(vals, vals[1:]):
        assert abs(v1 - v2) <= C * step + 2 * delta_b


def test_holder_audit_projection_family():
    prob = projection_family()
    pairs = sample_pairs(prob, 200, seed=2, max_gap=1.0)
    report = holder_audit(prob, pairs, delta_b=1e-7)
    assert report["ok"]
    assert report["max_ratio"] <= 1.0
    assert len(report["pairs"]) + report["skipped"] == 200


def test_holder_audit_identical_parameters():
    prob = projection_family()
    a = np.array([0.3, -0.8])
    report = holder_audit(prob, [(a, a.copy())], delta_b=1e-7)
    assert report["pairs"][0]["lhs"] <= 1e-5


def test_holder_audit_moving_box_with_slack():
    # the bound holds with slack >= 2x against the analytic argmax
    prob = moving_box_family()
    pairs = sample_pairs(prob, 100, seed=3, max_gap=1.0)
    kappa = prob.kappa()
    for a1, a2 in pairs:
        lhs = np.linalg.norm(prob.analytic_argmax(a1) - prob.analytic_argmax(a2))
        gap = np.linalg.norm(a1 - a2)
        assert lhs <= 0.5 * kappa * math.sqrt(gap) + 1e-12
    report = holder_audit(prob, pairs, delta_b=1e-7)
    assert report["ok"]


def test_value_lipschitz_audit():
    for family in (projection_family(), moving_box_family()):
        pairs = sample_pairs(family, 50, seed=4)
        report = value_lipschitz_audit(family, pairs, delta_b=1e-7)
        assert report["ok"]
