import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logit

from cfeo.eif import DegenerateDenominatorError, THETA_IDENTITY, coefficients_from_scores, pseudo_outcome
from cfeo.evaluate import (confidence_interval, evaluate_all, evaluate_with_nuisances,
                           influence_from_scores, influence_values, report_from_scores)
from cfeo.nuisance import LearnerConfig, NuisanceFit, constant
from cfeo.postprocess import PipelineConfig
from cfeo.sim import DgpConfig, default_input_predictor, generate, loglog_slope

from conftest import random_dataset


def _scores(seed, n=400):
    ds = random_dataset(n, seed)
    rng = np.random.default_rng(seed)
    phi = pseudo_outcome(ds.d, ds.y, rng.uniform(0.2, 0.8, n), rng.uniform(0, 0.6, n))
    return ds, phi


def test_identity_report():
    ds, phi = _scores(1)
    rep = report_from_scores(ds.a, ds.s, phi, THETA_IDENTITY)
    cs = coefficients_from_scores(ds.a, ds.s, phi)
    assert rep.loss_change.point == 0.0
    assert rep.predictive_change.point == 0.0
    assert rep.cfpr[0].point == cs.input_cfpr[0] and rep.cfpr[1].point == cs.input_cfpr[1]
    assert rep.cfnr[0].point == cs.input_cfnr[0] and rep.cfnr[1].point == cs.input_cfnr[1]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), theta=st.lists(st.floats(0, 1), min_size=4, max_size=4),
       wfp=st.floats(0.2, 2), wfn=st.floats(0.2, 2))
def test_exact_identities(seed, theta, wfp, wfn):
    ds, phi = _scores(seed, 150)
    try:
        rep = report_from_scores(ds.a, ds.s, phi, theta, (wfp, wfn))
        iv, cs = influence_from_scores(ds.a, ds.s, phi, theta, (wfp, wfn))
    except DegenerateDenominatorError:
        return
    theta = np.asarray(theta)
    assert rep.delta_pos.point == rep.cfpr[0].point - rep.cfpr[1].point
    assert rep.delta_neg.point == rep.cfnr[0].point - rep.cfnr[1].point
    assert rep.loss.point == iv.f_theta.mean()
    np.testing.assert_allclose(rep.loss.point, theta @ cs.beta + wfn * cs.mean_phi,
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(rep.loss_change.point, (theta - THETA_IDENTITY) @ cs.beta,
                               rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(rep.delta_pos.point, theta @ cs.beta_pos, atol=1e-14)
    np.testing.assert_allclose(rep.delta_neg.point, theta @ cs.beta_neg, atol=1e-14)


def test_flat_group_has_zero_influence():
    ds, phi = _scores(2)
    iv, _ = influence_from_scores(ds.a, ds.s, phi, [0.3, 0.3, 0.1, 0.9])
    assert np.all(iv.g[0] == 0) and np.all(iv.h[0] == 0)
    assert np.any(iv.g[1] != 0)


def test_treated_record_loss_influence():
    ds = random_dataset(200, seed=3)
    nf = NuisanceFit(lambda a, x, s: 0.2 + 0.5 / (1 + np.exp(-x[:, 0])), constant(0.4))
    iv = influence_values(ds, THETA_IDENTITY, nf)
    mu, _ = nf.predict(ds)
    treated = ds.d == 1
    np.testing.assert_allclose(iv.f_theta[treated],
                               ((1 - 2 * mu) * ds.s + mu)[treated], rtol=1e-14)


def test_ci_zero_variance_and_ranges():
    assert confidence_interval(0.5, 0.0, 10, "rate-like") == (0.5, 0.5)
    rng = np.random.default_rng(0)
    for _ in range(500):
        p, v, n = rng.uniform(0.001, 0.999), rng.uniform(0, 5), int(rng.integers(1, 50))
        # endpoints may round to the boundary in floating point for huge widths
        lo, hi = confidence_interval(p, v, n, "rate-like")
        assert 0 <= lo <= p <= hi <= 1
        d = 2 * p - 1
        lo, hi = confidence_interval(d, v, n, "difference-like")
        assert -1 <= lo <= d <= hi <= 1
    lo, hi = confidence_interval(0.3, 0.5, 100, "rate-like")
    assert 0 < lo < hi < 1


def test_ci_table_back_calculation():
    point, lo_ref, hi_ref = 0.36, 0.32, 0.41
    half = (logit(hi_ref) - logit(lo_ref)) / 2
    se = half / 1.959964 * point * (1 - point)
    assert abs(se - 0.023) < 0.001
    lo, hi = confidence_interval(point, se**2, 1, "rate-like")
    assert abs(lo - lo_ref) < 0.005 and abs(hi - hi_ref) < 0.005


def test_ci_boundary_fallback():
    with pytest.warns(RuntimeWarning, match="plain Wald"):
        lo, hi = confidence_interval(0.0, 0.04, 100, "rate-like")
    assert lo == pytest.approx(-0.0392, abs=1e-4) and hi == pytest.approx(0.0392, abs=1e-4)
    with pytest.raises(ValueError):
        confidence_interval(0.5, -1, 10)


def test_plain_intervals_are_symmetric():
    ds, phi = _scores(4)
    rep = report_from_scores(ds.a, ds.s, phi, [0.74, 1.0, 0.0, 0.8], ci="plain")
    for e in rep.estimates().values():
        assert e.point - e.ci_lo == pytest.approx(e.ci_hi - e.point)


def test_report_serialisation():
    ds, phi = _scores(5)
    rep = report_from_scores(ds.a, ds.s, phi, [0.74, 1.0, 0.0, 0.8])
    d = json.loads(rep.to_json())
    assert set(d) >= {"loss", "loss_change", "cfpr_0", "delta_neg", "predictive_change", "theta"}
    table = rep.to_table()
    assert "loss change" in table and "P(R != S)" in table


def test_evaluate_all_crossfit():
    ds = random_dataset(600, seed=6)
    cfg = PipelineConfig(outcome=LearnerConfig(rounds=30), propensity=LearnerConfig(rounds=30))
    rep = evaluate_all(ds, THETA_IDENTITY, cfg)
    assert rep.n_test == 600 and rep.loss_change.point == 0.0
    assert 0 < rep.loss.point < 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_interval_width_scales_like_root_n():
    cfg = DgpConfig.rates()
    predictor = default_input_predictor(cfg)
    grid = (500, 2000, 8000)
    widths = {k: [] for k in ("loss", "cfpr_0", "delta_pos")}
    for n in grid:
        w = {k: [] for k in widths}
        for rep in range(5):
            world = generate(cfg, n, "post-rai", predictor, seed=1000 * n + rep)
            est = evaluate_with_nuisances(world.dataset, [0.74, 1.0, 0.0, 0.8],
                                          world.true_nuisances).estimates()
            for k in w:
                w[k].append(est[k].ci_hi - est[k].ci_lo)
        for k in w:
            widths[k].append(np.mean(w[k]))
    for k, values in widths.items():
        assert abs(loglog_slope(grid, values) + 0.5) <= 0.15, (k, values)
