"""Synthetic data, oracle evaluation and simulation studies."""
from .dgp import (BayesOptimalPredictor, DgpConfig, OracleMetrics, OracleWorld, STAGES,
                  TrainedPredictor, VARIANTS, default_input_predictor, generate,
                  metrics_from_coefficients, oracle_evaluate, train_input_predictor,
                  true_coefficients)
from .experiments import (COVERAGE_ESTIMANDS, COVERAGE_THETA, CoverageResult, MISSPECIFICATIONS,
                          RateResult, RobustnessResult,
                          THREADS_ENV, TradeoffResult, default_cost_ratios, default_eps_grid,
                          default_threads, loglog_slope, noisy_nuisances, run_cost_sweep,
                          run_coverage_experiment, run_double_robustness, run_rate_experiment, run_tradeoff_grid,
                          summarise)
from .motivating import MotivatingConfig, ctpr_closed_form, ctpr_enumeration, motivating_ctpr

__all__ = [
    "BayesOptimalPredictor", "COVERAGE_ESTIMANDS", "COVERAGE_THETA", "CoverageResult",
    "DgpConfig", "MISSPECIFICATIONS", "MotivatingConfig", "OracleMetrics", "OracleWorld", "RateResult", "RobustnessResult", "STAGES",
    "THREADS_ENV", "TradeoffResult", "TrainedPredictor", "VARIANTS", "ctpr_closed_form",
    "ctpr_enumeration", "default_cost_ratios", "default_eps_grid", "default_input_predictor",
    "default_threads", "generate", "loglog_slope", "metrics_from_coefficients",
    "motivating_ctpr", "noisy_nuisances", "oracle_evaluate", "run_cost_sweep",
    "run_coverage_experiment", "run_double_robustness", "run_rate_experiment", "run_tradeoff_grid", "summarise",
    "train_input_predictor", "true_coefficients",
]
