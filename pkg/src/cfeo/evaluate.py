"""Doubly robust evaluation of a fixed derived predictor.

For any fixed ``theta`` the loss, loss change, counterfactual error rates,
error-rate differences and predictive change are estimated on a test sample
together with influence-function variances and 95% intervals. Rate-like
quantities get logit-scale delta-method intervals, differences get intervals
on the ``logit((psi + 1) / 2)`` scale.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .data import Dataset, assign_folds
from .eif import (DENOMINATOR_TOLERANCE, THETA_IDENTITY, cell_index, coefficients_from_scores,
                  pseudo_outcome)
from .nuisance import NuisanceFit, crossfit_predictions

CI_KINDS = ("rate-like", "difference-like", "plain")

ESTIMAND_KINDS = {
    "loss": "rate-like",
    "loss_change": "difference-like",
    "cfpr": "rate-like",
    "cfnr": "rate-like",
    "delta_pos": "difference-like",
    "delta_neg": "difference-like",
    "predictive_change": "plain",
}


def confidence_interval(point: float, variance: float, n: int, kind: str = "plain",
                        level: float = 0.95) -> tuple[float, float]:
    """Wald interval, optionally computed on a transformed scale.

    Parameters
    ----------
    point, variance : float
        Estimate and variance of its influence values; the standard error is
        ``sqrt(variance / n)``.
    kind : {"rate-like", "difference-like", "plain"}
        ``rate-like`` works on ``logit(psi)`` and stays inside (0, 1);
        ``difference-like`` works on ``logit((psi + 1) / 2)`` and stays
        inside (-1, 1). A point on the boundary of the transformed domain falls
        back to the plain interval.
    """
    if kind not in CI_KINDS:
        raise ValueError(f"unknown interval kind {kind!r}")
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if n < 1:
        raise ValueError("n must be positive")
    z = norm.ppf(0.5 + level / 2.0)
    se = np.sqrt(variance / n)
    if se == 0.0:
        return float(point), float(point)
    if kind == "difference-like":
        u = (point + 1.0) / 2.0
        if 0.0 < u < 1.0:
            half = z * (se / 2.0) / (u * (1.0 - u))
            lo, hi = expit(logit(u) - half), expit(logit(u) + half)
            return float(2.0 * lo - 1.0), float(2.0 * hi - 1.0)
    elif kind == "rate-like":
        if 0.0 < point < 1.0:
            half = z * se / (point * (1.0 - point))
            return float(expit(logit(point) - half)), float(expit(logit(point) + half))
    if kind != "plain":
        warnings.warn(f"{kind} interval undefined at point {point:.4g}; using plain Wald",
                      RuntimeWarning, stacklevel=2)
    return float(point - z * se), float(point + z * se)


@dataclass(frozen=True)
class Estimate:
    point: float
    variance: float
    ci_lo: float
    ci_hi: float
    level: float = 0.95

    def covers(self, value: float) -> bool:
        return self.ci_lo <= value <= self.ci_hi

    def to_dict(self) -> dict:
        return {"point": self.point, "variance": self.variance, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "level": self.level}


def make_estimate(values: np.ndarray, kind: str, level: float = 0.95,
                  point: float | None = None) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    point = float(values.mean()) if point is None else float(point)
    var = float(values.var(ddof=1)) if n > 1 else 0.0
    lo, hi = confidence_interval(point, var, n, kind, level)
    return Estimate(point, var, lo, hi, level)


@dataclass(frozen=True, eq=False)
class InfluenceValues:
    """Per-record influence values.

    ``g[a]`` and ``h[a]`` are the influence values of the cFPR and cFNR of
    the derived predictor in group ``a``; they are centred by construction.
    ``f_theta`` averages to the loss estimate and ``f_identity`` is the same
    quantity for the identity predictor ``theta = (0, 1, 0, 1)``.
    """

    f_theta: np.ndarray
    f_identity: np.ndarray
    g: np.ndarray
    h: np.ndarray
    flip: np.ndarray


def influence_from_scores(a, s, phi, theta, w=(1.0, 1.0),
                          tol: float = DENOMINATOR_TOLERANCE) -> tuple[InfluenceValues, object]:
    a = np.asarray(a, dtype=np.int64)
    s_i = np.asarray(s, dtype=np.int64)
    s = s_i.astype(float)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cs = coefficients_from_scores(a, s_i, phi, w, "doubly-robust", tol)
    w_fp, w_fn = cs.weights
    cell = cell_index(a, s_i)
    per_unit = w_fp - (w_fp + w_fn) * phi
    f_theta = per_unit * theta[cell] + w_fn * phi
    f_identity = per_unit * THETA_IDENTITY[cell] + w_fn * phi

    g = np.zeros((2, a.shape[0]))
    h = np.zeros((2, a.shape[0]))
    for grp in (0, 1):
        slope = theta[2 * grp + 1] - theta[2 * grp]
        in_g = (a == grp).astype(float)
        g[grp] = slope * in_g * (1.0 - phi) * (s - cs.input_cfpr[grp]) / cs.denom_fpr[grp]
        h[grp] = slope * in_g * phi * ((1.0 - s) - cs.input_cfnr[grp]) / cs.denom_fnr[grp]
    flip = np.where(s_i == 0, theta[2 * a], 1.0 - theta[2 * a + 1])
    return InfluenceValues(f_theta, f_identity, g, h, flip), cs


def influence_values(test: Dataset, theta, nf: NuisanceFit, w=(1.0, 1.0)) -> InfluenceValues:
    """Influence values on ``test`` with fixed nuisances ``nf``."""
    mu, pi = nf.predict(test)
    iv, _ = influence_from_scores(test.a, test.s, pseudo_outcome(test.d, test.y, mu, pi), theta, w)
    return iv


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    loss: Estimate
    loss_change: Estimate
    cfpr: tuple[Estimate, Estimate]
    cfnr: tuple[Estimate, Estimate]
    delta_pos: Estimate
    delta_neg: Estimate
    predictive_change: Estimate
    theta: np.ndarray
    n_test: int
    weights: tuple[float, float] = (1.0, 1.0)

    def estimates(self) -> dict[str, Estimate]:
        return {
            "loss": self.loss, "loss_change": self.loss_change,
            "cfpr_0": self.cfpr[0], "cfpr_1": self.cfpr[1],
            "cfnr_0": self.cfnr[0], "cfnr_1": self.cfnr[1],
            "delta_pos": self.delta_pos, "delta_neg": self.delta_neg,
            "predictive_change": self.predictive_change,
        }

    def to_dict(self) -> dict:
        out = {k: e.to_dict() for k, e in self.estimates().items()}
        out.update(theta=self.theta.tolist(), n_test=self.n_test, weights=list(self.weights))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        labels = {
            "loss": "loss", "loss_change": "loss change",
            "cfpr_0": "cFPR(., 0)", "cfpr_1": "cFPR(., 1)",
            "cfnr_0": "cFNR(., 0)", "cfnr_1": "cFNR(., 1)",
            "delta_pos": "delta+ (cFPR diff)", "delta_neg": "delta- (cFNR diff)",
            "predictive_change": "P(R != S)",
        }
        width = max(len(v) for v in labels.values())
        lines = [f"theta = ({', '.join(f'{t:.3f}' for t in self.theta)}), n = {self.n_test}"]
        for key, e in self.estimates().items():
            lines.append(f"{labels[key]:<{width}}  {e.point:7.3f}  ({e.ci_lo:7.3f}, {e.ci_hi:7.3f})")
        return "\n".join(lines)


def report_from_scores(a, s, phi, theta, w=(1.0, 1.0), level: float = 0.95,
                       tol: float = DENOMINATOR_TOLERANCE, ci: str = "delta") -> EvaluationReport:
    """Evaluate ``theta`` given a doubly robust pseudo-outcome per record.

    ``ci="delta"`` uses the transformed intervals listed in
    ``ESTIMAND_KINDS``; ``ci="plain"`` uses untransformed Wald intervals.
    """
    if ci not in ("delta", "plain"):
        raise ValueError(f"unknown interval style {ci!r}")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (4,) or np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("theta must lie in [0, 1]^4")
    iv, cs = influence_from_scores(a, s, phi, theta, w, tol)

    def est(values, name, point=None):
        kind = ESTIMAND_KINDS[name] if ci == "delta" else "plain"
        return make_estimate(values, kind, level, point)

    cfpr_pts = [theta[2 * g] * (1.0 - cs.input_cfpr[g]) + theta[2 * g + 1] * cs.input_cfpr[g]
                for g in (0, 1)]
    # 1 - theta0 * cFNR - theta1 * (1 - cFNR), arranged to be exact at theta = (0, 1)
    cfnr_pts = [(1.0 - theta[2 * g + 1]) + (theta[2 * g + 1] - theta[2 * g]) * cs.input_cfnr[g]
                for g in (0, 1)]
    cfpr = tuple(est(iv.g[g], "cfpr", cfpr_pts[g]) for g in (0, 1))
    cfnr = tuple(est(iv.h[g], "cfnr", cfnr_pts[g]) for g in (0, 1))
    return EvaluationReport(
        loss=est(iv.f_theta, "loss"),
        loss_change=est(iv.f_theta - iv.f_identity, "loss_change"),
        cfpr=cfpr,
        cfnr=cfnr,
        delta_pos=est(iv.g[0] - iv.g[1], "delta_pos", cfpr_pts[0] - cfpr_pts[1]),
        delta_neg=est(iv.h[0] - iv.h[1], "delta_neg", cfnr_pts[0] - cfnr_pts[1]),
        predictive_change=est(iv.flip, "predictive_change"),
        theta=theta.copy(),
        n_test=int(np.shape(a)[0]),
        weights=cs.weights,
    )


def evaluate_with_nuisances(test: Dataset, theta, nf: NuisanceFit, w=(1.0, 1.0),
                            level: float = 0.95, ci: str = "delta") -> EvaluationReport:
    """Evaluate with fixed (e.g. oracle or externally fit) nuisances."""
    mu, pi = nf.predict(test)
    phi = pseudo_outcome(test.d, test.y, mu, pi)
    return report_from_scores(test.a, test.s, phi, theta, w, level, ci=ci)


def crossfit_scores(test: Dataset, cfg) -> np.ndarray:
    """Per-record estimate of ``Y0`` from out-of-fold nuisances.

    ``cfg.k`` folds (two halves in single-split mode). Returns the doubly
    robust pseudo-outcome, or the outcome regression itself for
    ``cfg.method == "plugin"``.
    """
    test.validate()
    k = 2 if cfg.mode == "single-split" else cfg.k
    folds = assign_folds(test.n, k, cfg.seed)
    mu, pi = crossfit_predictions(test, folds, cfg.outcome, cfg.propensity, cfg.gamma)
    return mu if cfg.method == "plugin" else pseudo_outcome(test.d, test.y, mu, pi)


def evaluate_all(test: Dataset, theta, cfg, level: float = 0.95,
                 scores: np.ndarray | None = None, ci: str = "delta") -> EvaluationReport:
    """Evaluate ``theta`` on an independent test set with cross-fit nuisances.

    All estimates are sample means over the full test set of quantities built
    from :func:`crossfit_scores`; pass ``scores`` to reuse them.
    """
    if scores is None:
        scores = crossfit_scores(test, cfg)
    return report_from_scores(test.a, test.s, scores, theta, cfg.weights, level, ci=ci)
