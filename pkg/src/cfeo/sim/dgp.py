"""Synthetic worlds with known potential outcomes.

    P(A = 1)                = 0.3
    X | A                   ~ N(A * (1, -0.8, 4, 2), I_4)
    P_pre(D = 1 | A, X)     = min(0.975, expit((A, X) @ (0.2, -1, 1, -1, 1)))
    P_post(D = 1 | A, X, S) = min(0.975, expit((A, X, S) @ (0.2, -1, 1, -1, 1, 1)))
    P(Y0 = 1 | A, X)        = expit((A, X) @ (-5, 2, -3, 4, -5))
    P(Y1 = 1 | A, X)        = expit((A, X) @ (1, -2, 3, -4, 5))
    Y                       = (1 - D) Y0 + D Y1

The tradeoff variant only changes the Y0 coefficients to (-4, 0.4, 0.6, 0.8, -1).
Since ``S`` is a function of ``(A, X)`` and ``D`` is randomised given
``(A, X, S)``, the true outcome regression is ``mu0 = P(Y0 = 1 | A, X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit

from ..data import Dataset
from ..eif import CoefficientSet, THETA_IDENTITY, coefficients_from_scores
from ..nuisance import LearnerConfig, NuisanceFit, fit_classifier

VARIANTS = ("rates", "tradeoff")
STAGES = ("pre-rai", "post-rai")


@dataclass(frozen=True)
class DgpConfig:
    p_a1: float = 0.3
    x_mean_shift: tuple[float, ...] = (1.0, -0.8, 4.0, 2.0)
    pre_decision_coeffs: tuple[float, ...] = (0.2, -1.0, 1.0, -1.0, 1.0)
    post_decision_coeffs: tuple[float, ...] = (0.2, -1.0, 1.0, -1.0, 1.0, 1.0)
    y0_logit_coeffs: tuple[float, ...] = (-5.0, 2.0, -3.0, 4.0, -5.0)
    y1_logit_coeffs: tuple[float, ...] = (1.0, -2.0, 3.0, -4.0, 5.0)
    pi_cap: float = 0.975
    variant: str = "rates"

    def __post_init__(self):
        if not 0.0 < self.p_a1 < 1.0:
            raise ValueError("p_a1 must lie in (0, 1)")
        if not 0.0 < self.pi_cap < 1.0:
            raise ValueError("pi_cap must lie in (0, 1)")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        p = len(self.x_mean_shift)
        if len(self.pre_decision_coeffs) != p + 1 or len(self.y0_logit_coeffs) != p + 1 \
                or len(self.y1_logit_coeffs) != p + 1 or len(self.post_decision_coeffs) != p + 2:
            raise ValueError("coefficient lengths do not match the covariate dimension")

    @classmethod
    def rates(cls) -> "DgpConfig":
        return cls()

    @classmethod
    def tradeoff(cls) -> "DgpConfig":
        return cls(y0_logit_coeffs=(-4.0, 0.4, 0.6, 0.8, -1.0), variant="tradeoff")

    @property
    def positivity(self) -> float:
        """Positivity constant ``delta = 1 - pi_cap``."""
        return 1.0 - self.pi_cap

    @property
    def dim(self) -> int:
        return len(self.x_mean_shift)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    # -- true functions ----------------------------------------------------

    def mu0(self, a, x, s=None) -> np.ndarray:
        """``P(Y0 = 1 | A, X)``, which equals ``E[Y | A, X, S, D=0]``."""
        return expit(_design(a, x) @ np.asarray(self.y0_logit_coeffs))

    def mu1(self, a, x, s=None) -> np.ndarray:
        return expit(_design(a, x) @ np.asarray(self.y1_logit_coeffs))

    def propensity(self, a, x, s=None, stage: str = "post-rai") -> np.ndarray:
        if stage == "pre-rai":
            lin = _design(a, x) @ np.asarray(self.pre_decision_coeffs)
        else:
            z = np.column_stack([_design(a, x), np.asarray(s, dtype=float)])
            lin = z @ np.asarray(self.post_decision_coeffs)
        return np.minimum(self.pi_cap, expit(lin))

    def true_nuisances(self, stage: str = "post-rai") -> NuisanceFit:
        def pi(a, x, s):
            return self.propensity(a, x, s, stage)

        return NuisanceFit(self.mu0, pi, gamma=self.positivity)

    def draw_covariates(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        a = (rng.random(n) < self.p_a1).astype(np.int8)
        x = rng.standard_normal((n, self.dim)) + a[:, None] * np.asarray(self.x_mean_shift)
        return a, x


def _design(a, x) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.column_stack([a, np.asarray(x, dtype=float).reshape(a.shape[0], -1)])


# ---------------------------------------------------------------------------
# input predictors
# ---------------------------------------------------------------------------

class BayesOptimalPredictor:
    """``S = 1{P(Y0 = 1 | A, X) > threshold}``."""

    def __init__(self, cfg: DgpConfig, threshold: float = 0.5):
        self.cfg = cfg
        self.threshold = threshold

    def __call__(self, a, x) -> np.ndarray:
        return (self.cfg.mu0(a, x) > self.threshold).astype(np.int8)


class TrainedPredictor:
    """Thresholded classifier of observable ``Y`` fit on pre-RAI data."""

    def __init__(self, model, threshold: float = 0.5):
        self.model = model
        self.threshold = threshold

    def __call__(self, a, x) -> np.ndarray:
        return (self.model(_design(a, x)) > self.threshold).astype(np.int8)


@lru_cache(maxsize=8)
def train_input_predictor(cfg: DgpConfig, n: int = 20000, seed: int = 20210301,
                          learner: LearnerConfig = LearnerConfig()) -> TrainedPredictor:
    """Fit ``S`` on a pre-RAI sample to predict the observable outcome."""
    world = generate(cfg, n, "pre-rai", None, seed)
    ds = world.dataset
    return TrainedPredictor(fit_classifier(_design(ds.a, ds.x), ds.y, learner))


def default_input_predictor(cfg: DgpConfig):
    """Bayes-optimal ``S`` for the tradeoff variant, a trained one otherwise."""
    if cfg.variant == "tradeoff":
        return BayesOptimalPredictor(cfg)
    return train_input_predictor(cfg)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleWorld:
    dataset: Dataset
    y0: np.ndarray
    y1: np.ndarray
    true_mu0: object = field(repr=False)
    true_pi: object = field(repr=False)
    pi: np.ndarray = field(repr=False, default=None)

    @property
    def true_nuisances(self) -> NuisanceFit:
        return NuisanceFit(self.true_mu0, self.true_pi, gamma=1.0 - float(np.max(self.pi, initial=0.0)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate(cfg: DgpConfig, n: int, stage: str = "post-rai", input_predictor=None,
             seed=0) -> OracleWorld:
    """Draw ``n`` records with both potential outcomes.

    ``input_predictor`` maps ``(a, x)`` to ``s``; it is required post-RAI,
    where it shifts the decisions. Pre-RAI without a predictor, ``s = 0``.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if stage == "post-rai" and input_predictor is None:
        raise ValueError("post-rai sampling needs an input predictor")
    rng = _rng(seed)
    a, x = cfg.draw_covariates(n, rng)
    s = input_predictor(a, x) if input_predictor is not None else np.zeros(n, dtype=np.int8)
    s = np.asarray(s, dtype=np.int8)
    pi = cfg.propensity(a, x, s, stage)
    d = (rng.random(n) < pi).astype(np.int8)
    y0 = (rng.random(n) < cfg.mu0(a, x)).astype(np.int8)
    y1 = (rng.random(n) < cfg.mu1(a, x)).astype(np.int8)
    y = np.where(d == 1, y1, y0).astype(np.int8)

    def true_pi(aa, xx, ss):
        return cfg.propensity(aa, xx, ss, stage)

    return OracleWorld(Dataset(a, x, d, s, y), y0, y1, cfg.mu0, true_pi, pi)


# ---------------------------------------------------------------------------
# oracle evaluation
# ---------------------------------------------------------------------------

def true_coefficients(cfg: DgpConfig, input_predictor, n_val: int = 500_000, seed=1,
                      w=(1.0, 1.0)) -> CoefficientSet:
    """Plugin coefficients with the true ``mu0`` on a fresh validation draw."""
    rng = _rng(seed)
    a, x = cfg.draw_covariates(n_val, rng)
    s = np.asarray(input_predictor(a, x), dtype=np.int8)
    return coefficients_from_scores(a, s, cfg.mu0(a, x), w, "plugin")


@dataclass(frozen=True)
class OracleMetrics:
    loss: float
    loss_change: float
    delta_pos: float
    delta_neg: float
    cfpr: tuple[float, float]
    cfnr: tuple[float, float]

    def excess_unfairness(self, eps_pos: float, eps_neg: float) -> tuple[float, float]:
        return (max(abs(self.delta_pos) - eps_pos, 0.0), max(abs(self.delta_neg) - eps_neg, 0.0))

    def as_dict(self) -> dict:
        return {
            "loss": self.loss, "loss_change": self.loss_change,
            "cfpr_0": self.cfpr[0], "cfpr_1": self.cfpr[1],
            "cfnr_0": self.cfnr[0], "cfnr_1": self.cfnr[1],
            "delta_pos": self.delta_pos, "delta_neg": self.delta_neg,
        }


def metrics_from_coefficients(theta, cs: CoefficientSet) -> OracleMetrics:
    """Loss and error rates of ``R_theta`` implied by a coefficient set."""
    theta = np.asarray(theta, dtype=float)
    _, w_fn = cs.weights
    loss = float(theta @ cs.beta + w_fn * cs.mean_phi)
    cfpr = tuple(float(theta[2 * g] * (1 - cs.input_cfpr[g]) + theta[2 * g + 1] * cs.input_cfpr[g])
                 for g in (0, 1))
    cfnr = tuple(float((1 - theta[2 * g + 1]) + (theta[2 * g + 1] - theta[2 * g]) * cs.input_cfnr[g])
                 for g in (0, 1))
    return OracleMetrics(
        loss=loss,
        loss_change=float((theta - THETA_IDENTITY) @ cs.beta),
        delta_pos=float(theta @ cs.beta_pos),
        delta_neg=float(theta @ cs.beta_neg),
        cfpr=cfpr,
        cfnr=cfnr,
    )


def oracle_evaluate(theta, cfg: DgpConfig, n_val: int = 500_000, seed=1, w=(1.0, 1.0),
                    input_predictor=None) -> OracleMetrics:
    """True metrics of ``R_theta`` by the plugin formulas with the true ``mu0``."""
    if n_val < 100_000:
        raise ValueError("n_val must be at least 100000")
    predictor = input_predictor or default_input_predictor(cfg)
    return metrics_from_coefficients(theta, true_coefficients(cfg, predictor, n_val, seed, w))
