"""Fit a derived predictor ``R_theta ~ Bernoulli(theta[a, s])`` from training data."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, assign_folds
from .eif import (DegenerateDenominatorError, METHODS, THETA_IDENTITY, cell_index,
                  estimate_coefficients, validate_weights)
from .lp import build_lp, solve_exact
from .nuisance import DEFAULT_GAMMA, LearnerConfig, NuisanceFit, fit_nuisances

logger = logging.getLogger(__name__)

MODES = ("crossfit", "single-split")


class PipelineError(RuntimeError):
    """A fold of the estimation pipeline failed."""


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to fit or evaluate a derived predictor.

    ``mode="crossfit"`` fits nuisances on ``k - 1`` folds and estimates the
    coefficients on the held-out fold, once per fold. ``mode="single-split"``
    uses one half for the nuisances and the other for the coefficients.
    """

    eps_pos: float = 0.05
    eps_neg: float = 0.05
    weights: tuple[float, float] = (1.0, 1.0)
    k: int = 5
    seed: int = 0
    outcome: LearnerConfig = field(default_factory=LearnerConfig)
    propensity: LearnerConfig = field(default_factory=LearnerConfig)
    gamma: float = DEFAULT_GAMMA
    method: str = "doubly-robust"
    mode: str = "crossfit"

    def __post_init__(self):
        for name in ("eps_pos", "eps_neg"):
            e = getattr(self, name)
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"epsilon out of range: {name}={e}")
        object.__setattr__(self, "weights", validate_weights(self.weights))
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "eps_pos": self.eps_pos, "eps_neg": self.eps_neg, "weights": list(self.weights),
            "k": self.k, "seed": self.seed, "outcome": self.outcome.to_dict(),
            "propensity": self.propensity.to_dict(), "gamma": self.gamma,
            "method": self.method, "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        for key in ("outcome", "propensity"):
            if key in d:
                d[key] = LearnerConfig.from_dict(d[key])
        if "weights" in d:
            d["weights"] = tuple(d["weights"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class DerivedPredictor:
    theta: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (4,):
            raise ValueError("theta must have length 4")
        if np.any(theta < 0) or np.any(theta > 1):
            raise ValueError("theta must lie in [0, 1]^4")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def to_json(self) -> str:
        return json.dumps({"theta": self.theta.tolist(), "provenance": self.provenance},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DerivedPredictor":
        d = json.loads(text)
        if not isinstance(d, dict) or "theta" not in d:
            raise ValueError("theta file has no 'theta' entry")
        return cls(np.asarray(d["theta"], float), d.get("provenance", {}))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DerivedPredictor":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


IDENTITY = DerivedPredictor(THETA_IDENTITY, {"kind": "identity"})


def predict_probability(dp: DerivedPredictor, a, s):
    """``P(R_theta = 1 | A=a, S=s) = theta[a, s]``; works on scalars or arrays."""
    p = dp.theta[cell_index(a, s)]
    return float(p) if np.ndim(p) == 0 else p


def predict(dp: DerivedPredictor, a, s, rng: np.random.Generator):
    """Draw ``R_theta`` for group ``a`` and input prediction ``s``.

    Only ``(a, s)`` are needed at prediction time; covariates play no role.
    """
    p = dp.theta[cell_index(a, s)]
    draw = (rng.random(np.shape(p)) < p).astype(np.int8)
    return int(draw) if np.ndim(p) == 0 else draw


@dataclass(frozen=True, eq=False)
class FoldNuisances:
    """Nuisances fit off each target fold, reusable across weights and epsilons."""

    targets: tuple[np.ndarray, ...]
    fits: tuple[NuisanceFit, ...]


def fit_fold_nuisances(train: Dataset, cfg: PipelineConfig) -> FoldNuisances:
    """Fit one pair of nuisances per fold on the records outside that fold.

    In single-split mode there is one target half and one fit.
    """
    train.validate()
    folds = assign_folds(train.n, 2 if cfg.mode == "single-split" else cfg.k, cfg.seed)
    if cfg.mode == "single-split":
        plan = [(folds.indices(0), folds.indices(1))]
    else:
        plan = [(folds.complement(j), folds.indices(j)) for j in range(folds.k)]
    fits = tuple(fit_nuisances(train.subset(nuis_idx), cfg.outcome, cfg.propensity, cfg.gamma)
                 for nuis_idx, _ in plan)
    return FoldNuisances(tuple(target for _, target in plan), fits)


def fit_derived_predictor(train: Dataset, cfg: PipelineConfig,
                          nuisances: FoldNuisances | None = None) -> DerivedPredictor:
    """Estimate ``theta`` on ``train``.

    In cross-fit mode the fold-wise LP solutions are averaged. Pass
    ``nuisances`` from :func:`fit_fold_nuisances` to skip refitting.
    """
    train.validate()
    nuisances = nuisances or fit_fold_nuisances(train, cfg)

    coefs, thetas = [], []
    for j, (target_idx, nf) in enumerate(zip(nuisances.targets, nuisances.fits)):
        try:
            cs = estimate_coefficients(train.subset(target_idx), nf, cfg.weights, cfg.method)
        except DegenerateDenominatorError as exc:
            raise PipelineError(f"fold {j}: {exc}") from exc
        coefs.append(cs)
        thetas.append(solve_exact(build_lp(cs, cfg.eps_pos, cfg.eps_neg)).theta)
    theta = np.mean(thetas, axis=0)

    excess = []
    for cs in coefs:
        excess.append(max(abs(theta @ cs.beta_pos) - cfg.eps_pos,
                          abs(theta @ cs.beta_neg) - cfg.eps_neg, 0.0))
    for j, e in enumerate(excess):
        if e > 1e-6:
            logger.info("averaged theta exceeds fold %d estimated constraints by %.3g", j, e)

    provenance = {
        "config": cfg.to_dict(), "n_train": train.n,
        "fold_thetas": [t.tolist() for t in thetas],
        "fold_constraint_excess": excess,
    }
    return DerivedPredictor(np.clip(theta, 0.0, 1.0), provenance)
