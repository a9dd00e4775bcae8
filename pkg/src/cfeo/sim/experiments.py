"""Monte Carlo studies on the synthetic worlds.

Every runner returns tidy ``pandas`` frames (one row per replication or grid
cell) and derives one independent seed per replication from
``SeedSequence([seed, n, rep])``, so results do not depend on the number of
worker processes.
"""
from __future__ import annotations

import logging
import multiprocessing
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..eif import (DegenerateDenominatorError, METHODS, THETA_IDENTITY, coefficients_from_scores,
                   compute_phi, estimate_coefficients)
from ..evaluate import evaluate_with_nuisances
from ..lp import build_lp, solve_exact
from ..nuisance import NuisanceFit, constant, inject_logit_noise
from ..postprocess import PipelineConfig, fit_derived_predictor, fit_fold_nuisances
from .dgp import (BayesOptimalPredictor, DgpConfig, default_input_predictor, generate,
                  metrics_from_coefficients, true_coefficients)

logger = logging.getLogger(__name__)

THREADS_ENV = "CFEO_THREADS"
COVERAGE_THETA = (0.74, 1.0, 0.0, 0.8)
COVERAGE_ESTIMANDS = ("loss", "loss_change", "cfpr_0", "cfpr_1", "cfnr_0", "cfnr_1",
                      "delta_pos", "delta_neg")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def rep_seeds(seed: int, n: int, rep: int, count: int = 3) -> list[int]:
    return [int(v) for v in np.random.SeedSequence([seed, n, rep]).generate_state(count)]


def validation_seed(seed: int) -> int:
    """Seed of the large truth sample, disjoint from every replication seed."""
    return int(np.random.SeedSequence([seed, 0, 2**31]).generate_state(1)[0])


# Per-replication work runs in forked workers; the context (which holds
# unpicklable fitted models) is inherited through this module global.
_CONTEXT: dict = {}


def _run_jobs(fn, jobs: list, threads: int) -> list:
    if threads <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(min(threads, len(jobs))) as pool:
        return pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads)))


def _check_reps(reps: int, minimum: int, name: str) -> None:
    if reps < 1:
        raise ValueError("reps must be positive")
    if reps < minimum:
        warnings.warn(f"{name}: {reps} replications is below the recommended {minimum}",
                      RuntimeWarning, stacklevel=3)


def _check_grid(n_grid) -> tuple[int, ...]:
    grid = tuple(int(n) for n in n_grid)
    if not grid or any(n < 10 for n in grid):
        raise ValueError("sample sizes must be at least 10")
    return grid


def noisy_nuisances(world, n: int, c: float, mu_seed: int, pi_seed: int, offset: float,
                    pi_cap: float) -> NuisanceFit:
    """Oracle nuisances with logit-scale noise shrinking like ``n**(-1/4)``."""
    mu = inject_logit_noise(world.true_mu0, n, c, mu_seed, offset=offset)
    pi = inject_logit_noise(world.true_pi, n, c, pi_seed, offset=offset, cap=pi_cap)
    return NuisanceFit(mu, pi, gamma=1.0 - pi_cap)


# ---------------------------------------------------------------------------
# convergence rates
# ---------------------------------------------------------------------------

@dataclass
class RateResult:
    raw: pd.DataFrame
    summary: pd.DataFrame
    theta_star: np.ndarray
    optimal_loss: float
    settings: dict = field(default_factory=dict)


def _rate_rep(job):
    n, rep = job
    c = _CONTEXT
    cfg: DgpConfig = c["cfg"]
    world_seed, mu_seed, pi_seed = rep_seeds(c["seed"], n, rep)
    world = generate(cfg, n, "post-rai", c["predictor"], world_seed)
    nf = noisy_nuisances(world, n, c["noise_c"], mu_seed, pi_seed, c["noise_offset"], cfg.pi_cap)
    truth, star = c["truth"], c["star"]
    rows = []
    for method in c["methods"]:
        row = {"n": n, "rep": rep, "method": method}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                cs = estimate_coefficients(world.dataset, nf, c["w"], method)
        except DegenerateDenominatorError as exc:
            logger.warning("n=%d rep=%d %s: %s", n, rep, method, exc)
            rows.append(row)
            continue
        theta = solve_exact(build_lp(cs, c["eps_pos"], c["eps_neg"])).theta
        m = metrics_from_coefficients(theta, truth)
        uf_pos, uf_neg = m.excess_unfairness(c["eps_pos"], c["eps_neg"])
        gap = m.loss - star.loss
        row.update(loss=m.loss, uf_pos=uf_pos, uf_neg=uf_neg, loss_gap=gap,
                   scaled_loss_gap=np.sqrt(n) * gap, scaled_uf_pos=np.sqrt(n) * uf_pos,
                   scaled_uf_neg=np.sqrt(n) * uf_neg)
        row.update({f"theta{i}": float(t) for i, t in enumerate(theta)})
        rows.append(row)
    return rows


def summarise(raw: pd.DataFrame, by=("method", "n")) -> pd.DataFrame:
    """Mean and standard deviation of every numeric column per group."""
    value_cols = [c for c in raw.columns if c not in (*by, "rep") and not c.startswith("theta")]
    agg = raw.groupby(list(by))[value_cols].agg(["mean", "std"])
    agg.columns = [f"{col}_{stat}" for col, stat in agg.columns]
    counts = raw.groupby(list(by))["rep"].count().rename("reps")
    return agg.join(counts).reset_index()


def run_rate_experiment(cfg: DgpConfig | None = None, n_grid=(500, 2000, 8000), reps: int = 200,
                        eps_pos: float = 0.10, eps_neg: float = 0.20, methods=METHODS,
                        seed: int = 0, noise_c: float = 1.0, noise_offset: float = 1.0,
                        n_val: int = 500_000, w=(1.0, 1.0), input_predictor=None,
                        threads: int | None = None) -> RateResult:
    """Loss gap and excess unfairness of the fitted predictor across sample sizes.

    Nuisances are the true functions plus logit noise of size
    ``noise_scale(n, noise_c)``; truth comes from a plugin evaluation with
    the true ``mu0`` on ``n_val`` fresh draws. ``theta_star`` solves the LP
    with those true coefficients.
    """
    cfg = cfg or DgpConfig.rates()
    n_grid = _check_grid(n_grid)
    _check_reps(reps, 50, "rate experiment")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    predictor = input_predictor or default_input_predictor(cfg)
    truth = true_coefficients(cfg, predictor, n_val, validation_seed(seed), w)
    star_sol = solve_exact(build_lp(truth, eps_pos, eps_neg))
    star = metrics_from_coefficients(star_sol.theta, truth)

    _CONTEXT.clear()
    _CONTEXT.update(cfg=cfg, seed=seed, predictor=predictor, noise_c=noise_c,
                    noise_offset=noise_offset, truth=truth, star=star, methods=tuple(methods),
                    w=w, eps_pos=eps_pos, eps_neg=eps_neg)
    jobs = [(n, r) for n in n_grid for r in range(reps)]
    out = _run_jobs(_rate_rep, jobs, threads or default_threads())
    raw = pd.DataFrame([row for rows in out for row in rows])
    settings = {"dgp": cfg.to_dict(), "n_grid": list(n_grid), "reps": reps, "eps_pos": eps_pos,
                "eps_neg": eps_neg, "methods": list(methods), "seed": seed, "noise_c": noise_c,
                "noise_offset": noise_offset, "n_val": n_val, "weights": list(w)}
    return RateResult(raw, summarise(raw), star_sol.theta, star.loss, settings)


def loglog_slope(n_grid, values) -> float:
    """Least-squares slope of ``log|values|`` on ``log n``."""
    x = np.log(np.asarray(n_grid, float))
    y = np.log(np.abs(np.asarray(values, float)))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# fairness / performance tradeoff
# ---------------------------------------------------------------------------

def default_eps_grid(step: float = 0.025, upper: float = 0.5) -> np.ndarray:
    m = int(round(upper / step))
    return np.round(np.linspace(0.0, m * step, m + 1), 10)


@dataclass
class TradeoffResult:
    grid: pd.DataFrame
    input_metrics: dict
    settings: dict = field(default_factory=dict)

    def pivot(self) -> pd.DataFrame:
        return self.grid.pivot(index="eps_pos", columns="eps_neg", values="loss_change")


def run_tradeoff_grid(cfg: DgpConfig | None = None, eps_pos_grid=None, eps_neg_grid=None,
                      seed: int = 0, n_val: int = 500_000, w=(1.0, 1.0)) -> TradeoffResult:
    """Loss change of the optimal derived predictor over a grid of constraints.

    The input is the Bayes-optimal classifier ``1{mu0 > 0.5}``; coefficients
    are the plugin values with the true ``mu0`` on ``n_val`` draws.
    """
    cfg = cfg or DgpConfig.tradeoff()
    ep = default_eps_grid() if eps_pos_grid is None else np.asarray(eps_pos_grid, float)
    en = default_eps_grid() if eps_neg_grid is None else np.asarray(eps_neg_grid, float)
    for g in (ep, en):
        if g.size == 0 or np.any(g < 0) or np.any(g > 1):
            raise ValueError("epsilon grid must be a nonempty subset of [0, 1]")
    truth = true_coefficients(cfg, BayesOptimalPredictor(cfg), n_val, seed, w)
    base = metrics_from_coefficients(THETA_IDENTITY, truth)
    rows = []
    for e_pos in ep:
        for e_neg in en:
            sol = solve_exact(build_lp(truth, float(e_pos), float(e_neg)))
            m = metrics_from_coefficients(sol.theta, truth)
            row = {"eps_pos": float(e_pos), "eps_neg": float(e_neg),
                   "loss_change": float((sol.theta - THETA_IDENTITY) @ truth.beta),
                   "loss": m.loss, "delta_pos": m.delta_pos, "delta_neg": m.delta_neg}
            row.update({f"theta{i}": float(t) for i, t in enumerate(sol.theta)})
            rows.append(row)
    settings = {"dgp": cfg.to_dict(), "eps_pos_grid": ep.tolist(), "eps_neg_grid": en.tolist(),
                "seed": seed, "n_val": n_val, "weights": list(w)}
    return TradeoffResult(pd.DataFrame(rows), base.as_dict(), settings)


# ---------------------------------------------------------------------------
# interval coverage
# ---------------------------------------------------------------------------

@dataclass
class CoverageResult:
    raw: pd.DataFrame
    coverage: pd.DataFrame     # estimand x n
    truth: dict
    settings: dict = field(default_factory=dict)

    def median_coverage(self) -> float:
        return float(np.nanmedian(self.coverage.to_numpy()))


def _coverage_rep(job):
    n, rep = job
    c = _CONTEXT
    cfg: DgpConfig = c["cfg"]
    world_seed, mu_seed, pi_seed = rep_seeds(c["seed"], n, rep)
    world = generate(cfg, n, "post-rai", c["predictor"], world_seed)
    nf = noisy_nuisances(world, n, c["noise_c"], mu_seed, pi_seed, c["noise_offset"], cfg.pi_cap)
    rows = []
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            report = evaluate_with_nuisances(world.dataset, c["theta"], nf, c["w"], c["level"])
    except DegenerateDenominatorError as exc:
        logger.warning("n=%d rep=%d: %s", n, rep, exc)
        return rows
    est = report.estimates()
    for key in COVERAGE_ESTIMANDS:
        e, truth = est[key], c["truth"][key]
        rows.append({"n": n, "rep": rep, "estimand": key, "point": e.point, "ci_lo": e.ci_lo,
                     "ci_hi": e.ci_hi, "truth": truth, "covered": bool(e.covers(truth))})
    return rows


def run_coverage_experiment(cfg: DgpConfig | None = None, n_grid=(1000, 5000), reps: int = 500,
                            theta=COVERAGE_THETA, seed: int = 0, noise_c: float = 1.0,
                            noise_offset: float = 1.0, n_val: int = 500_000, w=(1.0, 1.0),
                            level: float = 0.95, input_predictor=None,
                            threads: int | None = None) -> CoverageResult:
    """Coverage of the evaluation intervals for a fixed ``theta``."""
    cfg = cfg or DgpConfig.rates()
    n_grid = _check_grid(n_grid)
    _check_reps(reps, 100, "coverage experiment")
    theta = np.asarray(theta, dtype=float)
    predictor = input_predictor or default_input_predictor(cfg)
    cs = true_coefficients(cfg, predictor, n_val, validation_seed(seed), w)
    truth = metrics_from_coefficients(theta, cs).as_dict()

    _CONTEXT.clear()
    _CONTEXT.update(cfg=cfg, seed=seed, predictor=predictor, noise_c=noise_c,
                    noise_offset=noise_offset, truth=truth, theta=theta, w=w, level=level)
    jobs = [(n, r) for n in n_grid for r in range(reps)]
    out = _run_jobs(_coverage_rep, jobs, threads or default_threads())
    raw = pd.DataFrame([row for rows in out for row in rows])
    table = (raw.groupby(["estimand", "n"])["covered"].mean().unstack("n")
             .reindex(list(COVERAGE_ESTIMANDS)))
    settings = {"dgp": cfg.to_dict(), "n_grid": list(n_grid), "reps": reps,
                "theta": theta.tolist(), "seed": seed, "noise_c": noise_c,
                "noise_offset": noise_offset, "n_val": n_val, "weights": list(w), "level": level}
    return CoverageResult(raw, table, truth, settings)


# ---------------------------------------------------------------------------
# cost-ratio sweep
# ---------------------------------------------------------------------------

def default_cost_ratios() -> np.ndarray:
    """``w_fp / w_fn`` from 3 down to 1/3, symmetric on the log scale."""
    up = np.array([3.0, 2.5, 2.0, 1.75, 1.5, 1.25])
    return np.concatenate([up, [1.0], 1.0 / up[::-1]])


def run_cost_sweep(cfg: DgpConfig | None = None, ratios=None, eps: float = 0.01,
                   n: int = 5000, seed: int = 0, pipeline: PipelineConfig | None = None) -> pd.DataFrame:
    """Fit ``theta`` on one tradeoff-variant sample for a range of cost ratios.

    Weights are normalised to ``w_fp + w_fn = 2``. The input predictor is
    Bayes optimal for equal weights.
    """
    cfg = cfg or DgpConfig.tradeoff()
    ratios = default_cost_ratios() if ratios is None else np.asarray(ratios, float)
    if np.any(ratios <= 0):
        raise ValueError("cost ratios must be positive")
    world = generate(cfg, n, "post-rai", BayesOptimalPredictor(cfg), seed)
    base = (pipeline or PipelineConfig(seed=seed)).with_(eps_pos=eps, eps_neg=eps)
    nuisances = fit_fold_nuisances(world.dataset, base)
    rows = []
    for r in ratios:
        w = (2.0 * r / (1.0 + r), 2.0 / (1.0 + r))
        dp = fit_derived_predictor(world.dataset, base.with_(weights=w), nuisances)
        row = {"ratio": float(r), "w_fp": w[0], "w_fn": w[1]}
        row.update({f"theta{i}": float(t) for i, t in enumerate(dp.theta)})
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# double robustness
# ---------------------------------------------------------------------------

MISSPECIFICATIONS = ("outcome", "propensity", "both", "none")


@dataclass
class RobustnessResult:
    raw: pd.DataFrame
    summary: pd.DataFrame      # mean absolute beta error, misspecification x n
    truth: np.ndarray
    settings: dict = field(default_factory=dict)

    def error_ratio(self, scenario: str) -> float:
        """Mean error at the largest ``n`` over that at the smallest."""
        row = self.summary.loc[scenario]
        return float(row.iloc[-1] / row.iloc[0])


def _robustness_rep(job):
    n, rep = job
    c = _CONTEXT
    cfg: DgpConfig = c["cfg"]
    (world_seed,) = rep_seeds(c["seed"], n, rep, count=1)
    world = generate(cfg, n, "post-rai", c["predictor"], world_seed)
    wrong = constant(c["wrong_value"])
    rows = []
    for scenario in c["scenarios"]:
        mu = wrong if scenario in ("outcome", "both") else world.true_mu0
        pi = wrong if scenario in ("propensity", "both") else world.true_pi
        nf = NuisanceFit(mu, pi, gamma=cfg.positivity)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cs = coefficients_from_scores(world.dataset.a, world.dataset.s,
                                          compute_phi(world.dataset, nf), c["w"],
                                          tol=-np.inf)
        err = np.abs(cs.beta - c["truth"])
        rows.append({"n": n, "rep": rep, "misspecified": scenario,
                     "beta_error": float(err.mean()), "beta_error_max": float(err.max())})
    return rows


def run_double_robustness(cfg: DgpConfig | None = None, n_grid=(2000, 32000), reps: int = 100,
                          scenarios=("outcome", "propensity", "both"), wrong_value: float = 0.5,
                          seed: int = 0, n_val: int = 500_000, w=(1.0, 1.0),
                          input_predictor=None, threads: int | None = None) -> RobustnessResult:
    """Error of the doubly robust ``beta`` when nuisances are replaced by a constant.

    In each scenario the named nuisance is the constant ``wrong_value`` and
    the other one is the true function. The error of a replication is the
    mean absolute deviation of the four ``beta`` components from the truth.
    """
    cfg = cfg or DgpConfig.rates()
    n_grid = _check_grid(n_grid)
    _check_reps(reps, 50, "double robustness experiment")
    unknown = set(scenarios) - set(MISSPECIFICATIONS)
    if unknown:
        raise ValueError(f"unknown scenarios {sorted(unknown)}")
    predictor = input_predictor or default_input_predictor(cfg)
    truth = true_coefficients(cfg, predictor, n_val, validation_seed(seed), w).beta

    _CONTEXT.clear()
    _CONTEXT.update(cfg=cfg, seed=seed, predictor=predictor, truth=truth, w=w,
                    wrong_value=wrong_value, scenarios=tuple(scenarios))
    jobs = [(n, r) for n in n_grid for r in range(reps)]
    out = _run_jobs(_robustness_rep, jobs, threads or default_threads())
    raw = pd.DataFrame([row for rows in out for row in rows])
    table = (raw.groupby(["misspecified", "n"])["beta_error"].mean().unstack("n")
             .reindex(list(scenarios)))
    settings = {"dgp": cfg.to_dict(), "n_grid": list(n_grid), "reps": reps,
                "scenarios": list(scenarios), "wrong_value": wrong_value, "seed": seed,
                "n_val": n_val, "weights": list(w)}
    return RobustnessResult(raw, table, truth, settings)
