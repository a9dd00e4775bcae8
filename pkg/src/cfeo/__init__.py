"""Doubly robust post-processing of binary risk predictors for counterfactual equalized odds."""
from .data import (CsvSchema, DataError, Dataset, FoldAssignment, Record, assign_folds,
                   compas_prepare, load_csv, split_train_test, write_csv)
from .eif import (CoefficientSet, DegenerateDenominatorError, METHODS, THETA_IDENTITY,
                  coefficients_from_scores, compute_phi, estimate_coefficients, pseudo_outcome)
from .evaluate import (Estimate, EvaluationReport, confidence_interval, evaluate_all,
                       evaluate_with_nuisances, influence_values, report_from_scores)
from .lp import LpProblem, LpSolution, build_lp, solve_exact, solve_grid_oracle
from .nuisance import (LearnerConfig, LearnerError, NuisanceFit, crossfit_predictions,
                       fit_nuisances, inject_logit_noise, noise_scale)
from .postprocess import (DerivedPredictor, IDENTITY, PipelineConfig, PipelineError,
                          fit_derived_predictor, predict, predict_probability)

__version__ = "0.1.0"

__all__ = [
    "CoefficientSet", "CsvSchema", "DataError", "Dataset", "DegenerateDenominatorError",
    "DerivedPredictor", "Estimate", "EvaluationReport", "FoldAssignment", "IDENTITY",
    "LearnerConfig", "LearnerError", "LpProblem", "LpSolution", "METHODS", "NuisanceFit",
    "PipelineConfig", "PipelineError", "Record", "THETA_IDENTITY", "assign_folds", "build_lp",
    "coefficients_from_scores", "compas_prepare", "compute_phi", "confidence_interval",
    "crossfit_predictions", "estimate_coefficients", "evaluate_all", "evaluate_with_nuisances",
    "fit_derived_predictor", "fit_nuisances", "influence_values", "inject_logit_noise",
    "load_csv", "noise_scale", "predict", "predict_probability", "pseudo_outcome",
    "report_from_scores", "solve_exact", "solve_grid_oracle", "split_train_test", "write_csv",
]
