import json

import numpy as np
import pytest

from cfeo.eif import fairness_vectors
from cfeo.lp import (LpProblem, build_lp, lattice_size, solve_exact, solve_grid_oracle)
from cfeo.eif import coefficients_from_scores

from conftest import random_dataset, random_problem


def _problem(beta, eps=(1.0, 1.0), cfpr=(0.3, 0.2), cfnr=(0.4, 0.1)):
    bp, bn = fairness_vectors(cfpr, cfnr)
    return LpProblem(np.asarray(beta, float), bp, bn, *eps)


def test_twelve_rows(small_dataset):
    cs = coefficients_from_scores(small_dataset.a, small_dataset.s,
                                  np.full(small_dataset.n, 0.4))
    G, h = build_lp(cs, 0.1, 0.2).constraints()
    assert G.shape == (12, 4) and h.shape == (12,)


def test_eps_out_of_range():
    with pytest.raises(ValueError, match="epsilon out of range"):
        _problem([1, 1, 1, 1], eps=(1.2, 0.1))


def test_unit_eps_never_binds():
    rng = np.random.default_rng(0)
    for _ in range(200):
        bp, bn = fairness_vectors(rng.random(2), rng.random(2))
        for v in (bp, bn):
            assert np.maximum(v, 0).sum() <= 1 + 1e-12
            assert np.minimum(v, 0).sum() >= -1 - 1e-12


def test_positive_objective_gives_zero():
    sol = solve_exact(_problem([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_array_equal(sol.theta, np.zeros(4))


def test_sign_rule():
    p = _problem([-1, 1, -1, 1], cfpr=(0.5, 0.5), cfnr=(0.5, 0.5))
    sol = solve_exact(p)
    np.testing.assert_array_equal(sol.theta, [1, 0, 1, 0])
    assert sol.objective_value == -2
    grid = solve_grid_oracle(p)
    np.testing.assert_array_equal(grid.theta, [1, 0, 1, 0])


def test_unconstrained_optimum_when_feasible():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(300):
        p = random_problem(rng)
        rule = (p.objective < 0).astype(float)
        if p.violation(rule) <= 0:
            np.testing.assert_array_equal(solve_exact(p).theta, rule)
            checked += 1
    assert checked > 20


def test_identity_pass_through():
    p = _problem([0.2, -0.3, 0.1, -0.4], eps=(0.5, 0.5), cfpr=(0.3, 0.25), cfnr=(0.4, 0.3))
    assert p.violation([0, 1, 0, 1]) <= 0
    np.testing.assert_array_equal(solve_exact(p).theta, [0.0, 1.0, 0.0, 1.0])


def test_lattice_size():
    assert lattice_size(0.05) == 21 ** 4 == 194481


def test_tight_constraints_feasible_and_dominant():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = random_problem(rng)
        exact, grid = solve_exact(p), solve_grid_oracle(p)
        assert p.violation(exact.theta) <= 1e-9
        assert exact.objective_value <= grid.objective_value + 1e-9
        eps_min = min(p.eps_pos, p.eps_neg)
        if eps_min > 0:
            # shrinking theta* towards 1/2 by step/eps_min and rounding to the
            # lattice stays feasible, which bounds the lattice gap
            bound = 0.5 * (1 + 1 / eps_min) * 0.05 * np.abs(p.objective).sum()
            assert grid.objective_value - exact.objective_value <= bound + 1e-12


def test_feasibility_many_problems():
    rng = np.random.default_rng(21)
    for _ in range(10_000):
        p = random_problem(rng)
        theta = solve_exact(p).theta
        assert p.violation(theta) <= 1e-9
        assert theta.min() >= 0 and theta.max() <= 1


def test_deterministic_ties():
    p = _problem([0.0, 0.0, 0.0, 0.0])
    assert np.array_equal(solve_exact(p).theta, np.zeros(4))
    p = _problem([-1, 0, -1, 0], cfpr=(0.5, 0.5), cfnr=(0.5, 0.5))
    a, b = solve_exact(p), solve_exact(p)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert a.theta[1] == 0 and a.theta[3] == 0


def test_serialisation():
    p = _problem([0.1, -0.2, 0.3, -0.4], eps=(0.05, 0.1))
    sol = solve_exact(p)
    json.dumps(p.to_dict())
    d = json.loads(json.dumps(sol.to_dict()))
    assert d["status"] == "optimal" and len(d["theta"]) == 4
