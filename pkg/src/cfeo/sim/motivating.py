"""Toy example where a fair-looking predictor hurts the group it targets.

An intervention ``D`` is given to people in need (``Y0 = 1``) at a group
specific opportunity rate and succeeds (``Y1 = 0``) with probability
``strength``. A risk predictor satisfying observable equalized odds with
fixed FPR/FNR on the observed ``Y`` then has counterfactual TPRs that drift
apart as the intervention gets stronger.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class MotivatingConfig:
    p_a1: float = 0.7
    need_rates: tuple[float, float] = (0.4, 0.2)
    opportunity_rates: tuple[float, float] = (0.6, 0.4)
    false_alarm_rates: tuple[float, float] = (0.3, 0.2)
    rai_fpr: float = 0.1
    rai_fnr: float = 0.2
    strengths: tuple[float, ...] = tuple(np.round(np.linspace(0.0, 1.0, 21), 10))

    def __post_init__(self):
        probs = [self.p_a1, self.rai_fpr, self.rai_fnr, *self.need_rates,
                 *self.opportunity_rates, *self.false_alarm_rates, *self.strengths]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("all probabilities must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def ctpr_closed_form(cfg: MotivatingConfig, strength: float, group: int) -> float:
    """``P(S = 1 | Y0 = 1, A = group)``.

    Among people in need a fraction ``opp * strength`` are helped and become
    observable negatives, which the predictor flags at its FPR.
    """
    helped = cfg.opportunity_rates[group] * strength
    return (1.0 - cfg.rai_fnr) * (1.0 - helped) + cfg.rai_fpr * helped


def _bern(p: float, v: int) -> float:
    return p if v == 1 else 1.0 - p


def ctpr_enumeration(cfg: MotivatingConfig, strength: float, group: int) -> float:
    """Same quantity by summing the joint law of ``(A, Y0, Y1, D, Y, S)``.

    Encodes ``D`` independent of ``Y1`` given ``(A, Y0)``, ``Y1 = 0`` whenever
    ``Y0 = 0``, and ``S`` independent of ``(A, Y0)`` given ``Y``.
    """
    num = den = 0.0
    for a, y0, y1, d, s in itertools.product((0, 1), repeat=5):
        p = _bern(cfg.p_a1, a) * _bern(cfg.need_rates[a], y0)
        p_treat = cfg.opportunity_rates[a] if y0 == 1 else cfg.false_alarm_rates[a]
        p *= _bern(p_treat, d)
        p *= _bern(1.0 - strength, y1) if y0 == 1 else float(y1 == 0)
        y = y1 if d == 1 else y0
        p *= _bern(1.0 - cfg.rai_fnr if y == 1 else cfg.rai_fpr, s)
        if a == group and y0 == 1:
            den += p
            if s == 1:
                num += p
    return num / den


def motivating_ctpr(cfg: MotivatingConfig = MotivatingConfig()) -> pd.DataFrame:
    """cTPR curves over the strength grid.

    Columns ``opportunity0/1`` give ``P(D = 1 | Y0 = 1, A = a)`` once decisions
    follow the predictor exactly (``D = S``), which equals the cTPR; the
    baseline opportunity rates are repeated for reference.
    """
    rows = []
    for st in cfg.strengths:
        c0, c1 = ctpr_closed_form(cfg, st, 0), ctpr_closed_form(cfg, st, 1)
        rows.append({
            "strength": float(st), "ctpr0": c0, "ctpr1": c1,
            "opportunity0": c0, "opportunity1": c1,
            "baseline_opportunity0": cfg.opportunity_rates[0],
            "baseline_opportunity1": cfg.opportunity_rates[1],
        })
    return pd.DataFrame(rows)
