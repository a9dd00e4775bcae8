"""Nuisance function estimation.

Two nuisance functions drive every estimator in this package:

* the outcome regression ``mu0(a, x, s) = E[Y | A=a, X=x, S=s, D=0]``
* the propensity ``pi(a, x, s) = P(D=1 | A=a, X=x, S=s)``

Prediction functions are vectorised callables ``f(a, x, s) -> ndarray``
taking arrays of shape ``(m,)``, ``(m, p)`` and ``(m,)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logit, ndtri

from .data import Dataset

PredictionFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

LEARNER_KINDS = ("boosted-stumps", "knn", "logistic-basis", "oracle")

DEFAULT_GAMMA = 0.025
INTERIOR_CLAMP = 1e-6


class LearnerError(ValueError):
    """Raised for unusable learner configurations or training data."""


@dataclass(frozen=True)
class LearnerConfig:
    """Learner choice and hyperparameters.

    Parameters
    ----------
    kind : str
        One of ``boosted-stumps`` (gradient boosted depth-1 trees),
        ``knn``, ``logistic-basis`` (logistic regression on a polynomial
        basis) or ``oracle`` (use ``oracle`` unchanged).
    rounds, shrinkage : int, float
        Boosting rounds and learning rate.
    neighbors : int
        Neighbour count for ``knn``.
    degree : int
        Polynomial degree for ``logistic-basis``.
    seed : int
    oracle : callable, optional
        Known prediction function, required for ``kind="oracle"``.
    """

    kind: str = "boosted-stumps"
    rounds: int = 200
    shrinkage: float = 0.1
    neighbors: int = 50
    degree: int = 2
    seed: int = 0
    oracle: PredictionFunction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}")
        if self.rounds < 1:
            raise LearnerError("rounds must be >= 1")
        if not 0.0 < self.shrinkage <= 1.0:
            raise LearnerError("shrinkage must lie in (0, 1]")
        if self.neighbors < 1:
            raise LearnerError("neighbors must be >= 1")
        if self.degree < 1:
            raise LearnerError("degree must be >= 1")
        if self.kind == "oracle" and self.oracle is None:
            raise LearnerError("oracle learner needs a prediction function")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "rounds": self.rounds, "shrinkage": self.shrinkage,
            "neighbors": self.neighbors, "degree": self.degree, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, conf: dict) -> "LearnerConfig":
        keys = ("kind", "rounds", "shrinkage", "neighbors", "degree", "seed")
        return cls(**{k: conf[k] for k in keys if k in conf})


@dataclass(frozen=True)
class NuisanceFit:
    """Fitted outcome regression and truncated propensity."""

    mu0: PredictionFunction
    pi: PredictionFunction
    gamma: float = DEFAULT_GAMMA

    def predict(self, ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(mu0, pi)`` evaluated at every record of ``ds``."""
        mu = np.clip(self.mu0(ds.a, ds.x, ds.s), 0.0, 1.0)
        pi = np.clip(self.pi(ds.a, ds.x, ds.s), 0.0, 1.0 - self.gamma)
        return mu, pi


def features(a, x, s) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float).reshape(a.shape[0], -1)
    return np.column_stack([a, x, np.asarray(s, dtype=float)])


def constant(value: float) -> PredictionFunction:
    def f(a, x, s):
        return np.full(np.shape(a)[0], float(value))

    return f


def _sklearn_model(cfg: LearnerConfig):
    from sklearn.ensemble import GradientBoostingClassifier
    from sklearn.linear_model import LogisticRegression
    from sklearn.neighbors import KNeighborsRegressor
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import PolynomialFeatures, StandardScaler

    if cfg.kind == "boosted-stumps":
        return GradientBoostingClassifier(
            n_estimators=cfg.rounds, learning_rate=cfg.shrinkage, max_depth=1,
            random_state=cfg.seed,
        )
    if cfg.kind == "knn":
        return KNeighborsRegressor(n_neighbors=cfg.neighbors)
    return make_pipeline(
        PolynomialFeatures(cfg.degree, include_bias=False), StandardScaler(),
        LogisticRegression(max_iter=2000),
    )


def fit_classifier(z: np.ndarray, target: np.ndarray, cfg: LearnerConfig) -> PredictionFunction:
    """Fit a probability model of a binary ``target`` on feature rows ``z``.

    Returns a function of feature rows (not of ``(a, x, s)``).
    """
    target = np.asarray(target).astype(int)
    if target.size == 0:
        raise LearnerError("no training rows")
    if np.all(target == target[0]):
        value = float(target[0])
        return lambda zz: np.full(zz.shape[0], value)
    model = _sklearn_model(cfg)
    k = min(cfg.neighbors, target.size)
    if cfg.kind == "knn" and k != cfg.neighbors:
        model.set_params(n_neighbors=k)
    model.fit(z, target)
    if cfg.kind == "knn":
        return lambda zz: np.clip(model.predict(zz), 0.0, 1.0)
    return lambda zz: model.predict_proba(zz)[:, 1]


def fit_outcome_regression(ds: Dataset, cfg: LearnerConfig) -> PredictionFunction:
    """Regress ``y`` on ``(a, x, s)`` among records with ``d = 0``."""
    if cfg.kind == "oracle":
        return cfg.oracle
    untreated = ds.d == 0
    if not np.any(untreated):
        raise LearnerError("no records with d=0; outcome regression cannot be fit")
    model = fit_classifier(features(ds.a[untreated], ds.x[untreated], ds.s[untreated]),
                           ds.y[untreated], cfg)

    def mu0(a, x, s):
        return np.clip(model(features(a, x, s)), 0.0, 1.0)

    return mu0


def truncate(f: PredictionFunction, gamma: float) -> PredictionFunction:
    """Pointwise ``min(f, 1 - gamma)``, clipped below at zero."""
    cap = 1.0 - gamma

    def g(a, x, s):
        return np.clip(f(a, x, s), 0.0, cap)

    return g


def fit_propensity(ds: Dataset, cfg: LearnerConfig, gamma: float = DEFAULT_GAMMA) -> PredictionFunction:
    """Classify ``d`` on ``(a, x, s)`` and truncate at ``1 - gamma``."""
    if not 0.0 < gamma < 1.0:
        raise LearnerError("gamma must lie in (0, 1)")
    if cfg.kind == "oracle":
        return truncate(cfg.oracle, gamma)
    if np.all(ds.d == ds.d[0]):
        warnings.warn(f"all training decisions equal {int(ds.d[0])}; propensity fit is constant",
                      RuntimeWarning, stacklevel=2)
    model = fit_classifier(features(ds.a, ds.x, ds.s), ds.d, cfg)
    return truncate(lambda a, x, s: model(features(a, x, s)), gamma)


def fit_nuisances(ds: Dataset, outcome: LearnerConfig, propensity: LearnerConfig | None = None,
                  gamma: float = DEFAULT_GAMMA) -> NuisanceFit:
    propensity = propensity or outcome
    return NuisanceFit(fit_outcome_regression(ds, outcome), fit_propensity(ds, propensity, gamma), gamma)


# ---------------------------------------------------------------------------
# noise injection
# ---------------------------------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> np.uint64(30))
    h = h * _M1
    h = h ^ (h >> np.uint64(27))
    h = h * _M2
    return h ^ (h >> np.uint64(31))


def keyed_normal(z: np.ndarray, seed: int) -> np.ndarray:
    """Standard normal draw that is a deterministic function of each row of ``z``."""
    z = np.ascontiguousarray(np.asarray(z, dtype=np.float64) + 0.0)  # folds -0.0 into 0.0
    bits = z.view(np.uint64).reshape(z.shape)
    with np.errstate(over="ignore"):
        h = np.full(z.shape[0], np.uint64(seed & 0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
        h = _splitmix(h + _GOLDEN)
        for j in range(z.shape[1]):
            h = _splitmix(h ^ (bits[:, j] + _GOLDEN * np.uint64(j + 1)))
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) / 2.0**53
    return ndtri(u)


def noise_scale(n: int, c: float = 1.0) -> float:
    """Logit-scale noise magnitude ``c * n**(-1/4) / log(n + 1)``."""
    return c * n ** -0.25 / math.log(n + 1)


def inject_logit_noise(f: PredictionFunction, n: int, c: float = 1.0, seed: int = 0, *,
                       offset: float = 0.0, cap: float | None = None,
                       eta: float = INTERIOR_CLAMP) -> PredictionFunction:
    """Perturb a probability function on the logit scale.

    Returns ``g(z) = expit(logit(clamp(f(z), eta, 1 - eta)) + e(z))`` with
    ``e(z) = sigma * (offset + xi(z))``, ``sigma = noise_scale(n, c)`` and
    ``xi(z)`` a standard normal keyed on ``(z, seed)``, so repeated queries of
    the same point agree. The default ``offset=0`` gives centred noise;
    ``offset=1`` draws ``e ~ N(sigma, sigma**2)``, an error that does not
    average away over the sample.

    Parameters
    ----------
    cap : float, optional
        Upper bound applied after perturbation (propensities use ``0.975``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    sigma = noise_scale(n, c)

    def g(a, x, s):
        p = np.clip(f(a, x, s), eta, 1.0 - eta)
        e = sigma * (offset + keyed_normal(features(a, x, s), seed))
        out = expit(logit(p) + e)
        if cap is not None:
            out = np.minimum(out, cap)
        return out

    return g


def crossfit_predictions(ds: Dataset, folds, outcome: LearnerConfig,
                         propensity: LearnerConfig | None = None,
                         gamma: float = DEFAULT_GAMMA) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold ``(mu0, pi)`` for every record.

    Record ``i`` is predicted by nuisances fit on the folds not containing it.
    """
    mu = np.empty(ds.n)
    pi = np.empty(ds.n)
    for j in range(folds.k):
        idx = folds.indices(j)
        nf = fit_nuisances(ds.subset(folds.complement(j)), outcome, propensity, gamma)
        mu[idx], pi[idx] = nf.predict(ds.subset(idx))
    return mu, pi
