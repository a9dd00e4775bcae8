import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfeo.data import Dataset
from cfeo.eif import (CoefficientSet, DegenerateDenominatorError, compute_phi,
                      coefficients_from_scores, estimate_coefficients, fairness_vectors,
                      pseudo_outcome, validate_weights)
from cfeo.nuisance import NuisanceFit, constant
from cfeo.sim import DgpConfig, default_input_predictor, generate

from conftest import random_dataset


def test_phi_examples():
    np.testing.assert_allclose(pseudo_outcome([0], [1], [0.4], [0.5]), [1.6])
    np.testing.assert_array_equal(pseudo_outcome([1, 1], [0, 1], [0.3, 0.7], [0.9, 0.2]),
                                  [0.3, 0.7])


def test_phi_mean_matches_potential_outcome_mean():
    cfg = DgpConfig.rates()
    predictor = default_input_predictor(cfg)
    world = generate(cfg, 100_000, "post-rai", predictor, seed=5)
    phi = compute_phi(world.dataset, world.true_nuisances)
    a, x = cfg.draw_covariates(1_000_000, np.random.default_rng(6))
    assert abs(phi.mean() - cfg.mu0(a, x).mean()) < 0.01


def test_all_negative_outcomes_degenerate():
    ds = random_dataset(200, seed=1)
    ds = Dataset(ds.a, ds.x, ds.d, ds.s, np.zeros(ds.n, np.int8))
    nf = NuisanceFit(constant(0.0), constant(0.3))
    phi = compute_phi(ds, nf)
    assert np.all(phi == 0)
    with pytest.raises(DegenerateDenominatorError, match="degenerate denominator"):
        estimate_coefficients(ds, nf)
    # beta itself is P(A=a, S=s) * w_fp in that case
    cell = 2 * ds.a + ds.s
    expected = np.bincount(cell, minlength=4) / ds.n
    with pytest.raises(DegenerateDenominatorError):
        coefficients_from_scores(ds.a, ds.s, phi)
    cs = coefficients_from_scores(ds.a, ds.s, phi + 1e-3 * (ds.a + 1), tol=0.0)
    np.testing.assert_allclose(cs.beta, expected - 2e-3 * np.bincount(cell, ds.a + 1.0, 4) / ds.n)


def test_plugin_and_dr_agree_with_oracle_nuisances():
    cfg = DgpConfig.rates()
    world = generate(cfg, 100_000, "post-rai", default_input_predictor(cfg), seed=9)
    dr = estimate_coefficients(world.dataset, world.true_nuisances, method="doubly-robust")
    pi = estimate_coefficients(world.dataset, world.true_nuisances, method="plugin")
    for name in ("beta", "beta_pos", "beta_neg"):
        np.testing.assert_allclose(getattr(dr, name), getattr(pi, name), atol=0.01)


def test_beta_pos_reconstruction():
    beta_pos, _ = fairness_vectors((0.43, 0.24), (0.5, 0.5))
    np.testing.assert_allclose(beta_pos, [0.57, 0.43, -0.76, -0.24])


def test_empty_cell_warns_and_zeroes():
    ds = random_dataset(200, seed=2)
    s = np.where(ds.a == 1, 1, ds.s)
    phi = np.full(ds.n, 0.4)
    with pytest.warns(RuntimeWarning, match="empty cell"):
        cs = coefficients_from_scores(ds.a, s, phi)
    assert cs.beta[2] == 0.0


def test_rates_outside_unit_interval_warn():
    a = np.array([0, 0, 0, 1, 1, 1])
    s = np.array([0, 1, 1, 0, 1, 1])
    phi = np.array([0.1, 1.5, 0.6, 0.5, 0.5, 0.5])
    with pytest.warns(RuntimeWarning, match="outside"):
        cs = coefficients_from_scores(a, s, phi)
    assert cs.input_cfpr[0] < 0


def test_weight_validation():
    with pytest.raises(ValueError):
        validate_weights((0, 0))
    with pytest.raises(ValueError):
        validate_weights((-1, 1))
    assert validate_weights((0, 2)) == (0.0, 2.0)


def test_json_round_trip(small_dataset):
    nf = NuisanceFit(constant(0.4), constant(0.3))
    cs = estimate_coefficients(small_dataset, nf, (1.0, 2.0))
    back = CoefficientSet.from_dict(cs.to_dict())
    np.testing.assert_array_equal(back.beta, cs.beta)
    assert back.input_cfnr == cs.input_cfnr and back.weights == cs.weights


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(30, 300), c=st.floats(0, 1),
       wfp=st.floats(0.1, 3), wfn=st.floats(0.1, 3))
def test_structural_identities(seed, n, c, wfp, wfn):
    ds = random_dataset(n, seed)
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.2, 0.8, n)
    phi = pseudo_outcome(ds.d, ds.y, mu, rng.uniform(0, 0.6, n))
    try:
        cs = coefficients_from_scores(ds.a, ds.s, phi, (wfp, wfn))
    except DegenerateDenominatorError:
        return
    bp, bn = cs.beta_pos, cs.beta_neg
    ulp = 4 * np.finfo(float).eps   # (1 - f) + f can round by one unit
    sums = [bp[0] + bp[1] - 1, bp[2] + bp[3] + 1, bn[0] + bn[1] + 1, bn[2] + bn[3] - 1]
    assert max(abs(v) for v in sums) <= ulp
    const = np.full(4, c)
    assert abs(const @ bp) <= ulp and abs(const @ bn) <= ulp
    rebuilt = fairness_vectors(cs.input_cfpr, cs.input_cfnr)
    np.testing.assert_array_equal(rebuilt[0], bp)
    np.testing.assert_array_equal(rebuilt[1], bn)
