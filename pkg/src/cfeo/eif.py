"""Pseudo-outcomes and estimates of the linear program coefficients.

The pseudo-outcome ``phi = (1 - d) / (1 - pi) * (y - mu0) + mu0`` is the
uncentred efficient influence function for ``E[Y0]``.  Every expectation of
``f(a, x, s) * Y0`` is estimated by the sample mean of ``f * phi``
(doubly robust) or ``f * mu0`` (plugin).

Coefficient layout follows the cell order ``(a, s) = (0,0), (0,1), (1,0), (1,1)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .nuisance import NuisanceFit

METHODS = ("doubly-robust", "plugin")
DENOMINATOR_TOLERANCE = 1e-3

# identity predictor: reproduces s exactly
THETA_IDENTITY = np.array([0.0, 1.0, 0.0, 1.0])


class DegenerateDenominatorError(ValueError):
    """An error-rate denominator is too small for a stable ratio."""


def cell_index(a, s) -> np.ndarray:
    """Map ``(a, s)`` to the coefficient position ``2 a + s``."""
    return 2 * np.asarray(a, dtype=np.int64) + np.asarray(s, dtype=np.int64)


def validate_weights(w) -> tuple[float, float]:
    w_fp, w_fn = (float(v) for v in w)
    if w_fp < 0 or w_fn < 0:
        raise ValueError("weights must be nonnegative")
    if w_fp == 0 and w_fn == 0:
        raise ValueError("weights w_fp and w_fn cannot both be zero")
    return w_fp, w_fn


def fairness_vectors(cfpr, cfnr) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the fairness constraint vectors from input error rates.

    ``theta @ beta_pos`` is the cFPR difference between groups 0 and 1 of
    the derived predictor, ``theta @ beta_neg`` the cFNR difference.
    """
    f0, f1 = cfpr
    n0, n1 = cfnr
    beta_pos = np.array([1.0 - f0, f0, f1 - 1.0, -f1])
    beta_neg = np.array([-n0, n0 - 1.0, n1, 1.0 - n1])
    return beta_pos, beta_neg


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Estimated coefficients of the fair post-processing linear program.

    ``denom_fpr[a]`` and ``denom_fnr[a]`` are the sample means of
    ``1{A=a}(1 - phi)`` and ``1{A=a} phi``; they are retained because the
    influence functions of the error rates divide by them.
    """

    beta: np.ndarray
    beta_pos: np.ndarray
    beta_neg: np.ndarray
    mean_phi: float
    input_cfpr: tuple[float, float]
    input_cfnr: tuple[float, float]
    method: str
    weights: tuple[float, float]
    n: int
    denom_fpr: tuple[float, float]
    denom_fnr: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(), "beta_pos": self.beta_pos.tolist(),
            "beta_neg": self.beta_neg.tolist(), "mean_phi": self.mean_phi,
            "input_cfpr": list(self.input_cfpr), "input_cfnr": list(self.input_cfnr),
            "method": self.method, "weights": list(self.weights), "n": self.n,
            "denom_fpr": list(self.denom_fpr), "denom_fnr": list(self.denom_fnr),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSet":
        return cls(
            np.asarray(d["beta"], float), np.asarray(d["beta_pos"], float),
            np.asarray(d["beta_neg"], float), float(d["mean_phi"]),
            tuple(d["input_cfpr"]), tuple(d["input_cfnr"]), d["method"],
            tuple(d["weights"]), int(d["n"]), tuple(d["denom_fpr"]), tuple(d["denom_fnr"]),
        )


def compute_phi(ds: Dataset, nf: NuisanceFit) -> np.ndarray:
    """Doubly robust pseudo-outcome for every record."""
    mu, pi = nf.predict(ds)
    return pseudo_outcome(ds.d, ds.y, mu, pi)


def pseudo_outcome(d, y, mu, pi) -> np.ndarray:
    d, y, mu, pi = (np.asarray(v, dtype=float) for v in (d, y, mu, pi))
    return (1.0 - d) / (1.0 - pi) * (y - mu) + mu


def coefficients_from_scores(a, s, score, w=(1.0, 1.0), method: str = "doubly-robust",
                             tol: float = DENOMINATOR_TOLERANCE) -> CoefficientSet:
    """Estimate all coefficients from a per-record estimate of ``Y0``.

    Parameters
    ----------
    a, s : array_like of shape (n,)
    score : array_like of shape (n,)
        ``phi`` for the doubly robust estimator, ``mu0`` for the plugin.
    w : (float, float)
        False positive and false negative weights.
    tol : float
        A rate denominator below ``tol * P_n(A=a)`` raises
        :class:`DegenerateDenominatorError`.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    w_fp, w_fn = validate_weights(w)
    a = np.asarray(a, dtype=np.int64)
    s = np.asarray(s, dtype=float)
    score = np.asarray(score, dtype=float)
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty sample")

    cell = cell_index(a, s.astype(np.int64))
    counts = np.bincount(cell, minlength=4)
    if np.any(counts == 0):
        empty = [f"(a={c // 2}, s={c % 2})" for c in np.flatnonzero(counts == 0)]
        warnings.warn(f"empty cell(s) {', '.join(empty)}; coefficient set to 0",
                      RuntimeWarning, stacklevel=2)
    beta = np.bincount(cell, weights=w_fp - (w_fp + w_fn) * score, minlength=4) / n

    cfpr, cfnr, dfpr, dfnr = [], [], [], []
    for g in (0, 1):
        in_g = (a == g).astype(float)
        floor = tol * in_g.mean()
        den_fp = np.mean(in_g * (1.0 - score))
        den_fn = np.mean(in_g * score)
        for name, den in (("cFPR", den_fp), ("cFNR", den_fn)):
            if not den > floor:
                raise DegenerateDenominatorError(
                    f"degenerate denominator for input {name} in group {g}: "
                    f"{den:.3g} <= {floor:.3g}"
                )
        cfpr.append(float(np.mean(in_g * s * (1.0 - score)) / den_fp))
        cfnr.append(float(np.mean(in_g * (1.0 - s) * score) / den_fn))
        dfpr.append(float(den_fp))
        dfnr.append(float(den_fn))
    rates = cfpr + cfnr
    if any(not 0.0 <= r <= 1.0 for r in rates):
        warnings.warn(f"estimated input error rates outside [0, 1]: {rates}",
                      RuntimeWarning, stacklevel=2)
    beta_pos, beta_neg = fairness_vectors(cfpr, cfnr)
    return CoefficientSet(
        beta=beta, beta_pos=beta_pos, beta_neg=beta_neg, mean_phi=float(score.mean()),
        input_cfpr=tuple(cfpr), input_cfnr=tuple(cfnr), method=method,
        weights=(w_fp, w_fn), n=int(n), denom_fpr=tuple(dfpr), denom_fnr=tuple(dfnr),
    )


def estimate_coefficients(ds: Dataset, nf: NuisanceFit, w=(1.0, 1.0),
                          method: str = "doubly-robust",
                          tol: float = DENOMINATOR_TOLERANCE) -> CoefficientSet:
    """Estimate the coefficient set on ``ds`` with fixed nuisances ``nf``."""
    if method == "plugin":
        score, _ = nf.predict(ds)
    else:
        score = compute_phi(ds, nf)
    return coefficients_from_scores(ds.a, ds.s, score, w, method, tol)
