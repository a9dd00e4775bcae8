import inspect
import json

import numpy as np
import pytest

from cfeo.data import Dataset
from cfeo.lp import build_lp, solve_exact
from cfeo.nuisance import LearnerConfig
from cfeo.postprocess import (DerivedPredictor, IDENTITY, PipelineConfig, PipelineError,
                              fit_derived_predictor, fit_fold_nuisances, predict,
                              predict_probability)
from cfeo.sim import BayesOptimalPredictor, DgpConfig, generate, true_coefficients

from conftest import random_dataset

FAST = LearnerConfig(rounds=40)


def _cfg(**kw):
    return PipelineConfig(outcome=FAST, propensity=FAST, **kw)


def test_predict_probability_components():
    dp = DerivedPredictor([0.74, 1.0, 0.0, 0.8])
    assert predict_probability(dp, 0, 0) == 0.74
    assert predict_probability(dp, 1, 0) == 0.0
    assert predict_probability(dp, 1, 1) == 0.8
    np.testing.assert_array_equal(predict_probability(dp, [0, 0, 1, 1], [0, 1, 0, 1]),
                                  [0.74, 1.0, 0.0, 0.8])


def test_identity_and_zero_predictors():
    rng = np.random.default_rng(0)
    a, s = rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)
    np.testing.assert_array_equal(predict(IDENTITY, a, s, rng), s)
    assert predict(DerivedPredictor(np.zeros(4)), a, s, rng).sum() == 0


def test_bernoulli_frequency():
    dp = DerivedPredictor([0.5, 0.5, 0.5, 0.5])
    draws = predict(dp, np.zeros(100_000, int), np.ones(100_000, int), np.random.default_rng(1))
    assert abs(draws.mean() - 0.5) < 0.005


def test_predict_is_seeded():
    dp = DerivedPredictor([0.2, 0.7, 0.4, 0.9])
    a, s = np.tile([0, 1], 50), np.repeat([0, 1], 50)
    first = predict(dp, a, s, np.random.default_rng(5))
    np.testing.assert_array_equal(first, predict(dp, a, s, np.random.default_rng(5)))
    assert isinstance(predict(dp, 1, 1, np.random.default_rng(0)), int)


def test_predict_needs_no_covariates():
    assert list(inspect.signature(predict).parameters) == ["dp", "a", "s", "rng"]


def test_theta_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        DerivedPredictor([0, 1, 0, 1.2])
    dp = DerivedPredictor([0.1, 0.9, 0.0, 1.0], {"note": "x"})
    dp.save(tmp_path / "theta.json")
    back = DerivedPredictor.load(tmp_path / "theta.json")
    np.testing.assert_array_equal(back.theta, dp.theta)
    assert back.provenance == {"note": "x"}
    with pytest.raises(ValueError, match="no 'theta'"):
        DerivedPredictor.from_json(json.dumps({"provenance": {}}))


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError, match="epsilon out of range"):
        PipelineConfig(eps_pos=1.2)
    with pytest.raises(ValueError):
        PipelineConfig(k=1)
    with pytest.raises(ValueError):
        PipelineConfig(weights=(0, 0))
    cfg = _cfg(eps_pos=0.1, k=3, method="plugin", mode="single-split")
    assert PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_all_positive_objective_gives_zero():
    ds = random_dataset(300, seed=3)
    dp = fit_derived_predictor(ds, _cfg(eps_pos=1.0, eps_neg=1.0, weights=(1.0, 0.0)))
    np.testing.assert_array_equal(dp.theta, np.zeros(4))
    assert len(dp.provenance["fold_thetas"]) == 5


def test_reproducible_and_in_box():
    ds = random_dataset(500, seed=4)
    cfg = _cfg(eps_pos=0.02, eps_neg=0.05, seed=9)
    first = fit_derived_predictor(ds, cfg)
    second = fit_derived_predictor(ds, cfg)
    assert first.to_json() == second.to_json()
    assert first.theta.min() >= 0 and first.theta.max() <= 1
    np.testing.assert_allclose(first.theta, np.mean(first.provenance["fold_thetas"], axis=0))


def test_precomputed_nuisances_match():
    ds = random_dataset(400, seed=5)
    cfg = _cfg(eps_pos=0.05, eps_neg=0.05)
    shared = fit_fold_nuisances(ds, cfg)
    np.testing.assert_array_equal(fit_derived_predictor(ds, cfg, shared).theta,
                                  fit_derived_predictor(ds, cfg).theta)


def test_single_split_mode():
    ds = random_dataset(400, seed=6)
    dp = fit_derived_predictor(ds, _cfg(mode="single-split"))
    assert len(dp.provenance["fold_thetas"]) == 1


def test_degenerate_fold_names_fold():
    ds = random_dataset(200, seed=7)
    ds = Dataset(ds.a, ds.x, ds.d, ds.s, np.zeros(ds.n, np.int8))
    with pytest.raises(PipelineError, match="fold 0"):
        fit_derived_predictor(ds, _cfg())


@pytest.mark.slow
def test_fold_counts_agree_on_large_sample():
    cfg = DgpConfig.tradeoff()
    predictor = BayesOptimalPredictor(cfg)
    ds = generate(cfg, 20_000, "post-rai", predictor, seed=3).dataset
    base = PipelineConfig(eps_pos=0.1, eps_neg=0.3, outcome=LearnerConfig(rounds=100),
                          propensity=LearnerConfig(rounds=100))
    two = fit_derived_predictor(ds, base.with_(k=2)).theta
    five = fit_derived_predictor(ds, base.with_(k=5)).theta
    star = solve_exact(build_lp(true_coefficients(cfg, predictor), 0.1, 0.3)).theta
    assert np.abs(two - five).max() < 0.15
    assert np.abs(two - star).max() < 0.2 and np.abs(five - star).max() < 0.2
