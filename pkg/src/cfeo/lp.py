"""The four-variable fair post-processing linear program.

    minimise    theta @ beta
    subject to  0 <= theta <= 1
                |theta @ beta_pos| <= eps_pos
                |theta @ beta_neg| <= eps_neg

:func:`solve_exact` enumerates every basic solution (all C(12, 4) = 495
choices of four tight constraints); :func:`solve_grid_oracle` scans a lattice
and is kept as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .eif import CoefficientSet

FEASIBILITY_TOL = 1e-9
SINGULAR_TOL = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray
    beta_pos: np.ndarray
    beta_neg: np.ndarray
    eps_pos: float
    eps_neg: float

    def __post_init__(self):
        for name in ("objective", "beta_pos", "beta_neg"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (4,):
                raise ValueError(f"{name} must have length 4")
            object.__setattr__(self, name, v)
        for name in ("eps_pos", "eps_neg"):
            e = float(getattr(self, name))
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"epsilon out of range: {name}={e}")
            object.__setattr__(self, name, e)

    @property
    def abs_constraints(self) -> list[tuple[np.ndarray, float]]:
        return [(self.beta_pos, self.eps_pos), (self.beta_neg, self.eps_neg)]

    def constraints(self) -> tuple[np.ndarray, np.ndarray]:
        """Inequalities ``G @ theta <= h`` (12 rows: 8 box, 4 fairness)."""
        eye = np.eye(4)
        G = np.vstack([-eye, eye, self.beta_pos, -self.beta_pos, self.beta_neg, -self.beta_neg])
        h = np.concatenate([np.zeros(4), np.ones(4),
                            [self.eps_pos, self.eps_pos, self.eps_neg, self.eps_neg]])
        return G, h

    def violation(self, theta) -> float:
        G, h = self.constraints()
        return float(np.max(G @ np.asarray(theta, float) - h))

    def to_dict(self) -> dict:
        return {"objective": self.objective.tolist(), "beta_pos": self.beta_pos.tolist(),
                "beta_neg": self.beta_neg.tolist(), "eps_pos": self.eps_pos,
                "eps_neg": self.eps_neg}


@dataclass(frozen=True, eq=False)
class LpSolution:
    theta: np.ndarray
    objective_value: float
    active_constraints: tuple[int, ...] = field(default=())
    status: str = "optimal"

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "objective_value": self.objective_value,
                "active_constraints": list(self.active_constraints), "status": self.status}


def build_lp(cs: CoefficientSet, eps_pos: float, eps_neg: float) -> LpProblem:
    return LpProblem(cs.beta, cs.beta_pos, cs.beta_neg, eps_pos, eps_neg)


@lru_cache(maxsize=1)
def _bases() -> np.ndarray:
    return np.array(list(combinations(range(12), 4)))


def _finish(p: LpProblem, theta: np.ndarray) -> LpSolution:
    G, h = p.constraints()
    slack = h - G @ theta
    viol = -slack.min()
    if viol > FEASIBILITY_TOL * max(1.0, np.abs(G).max()):
        raise RuntimeError(f"LP solution violates constraints by {viol:.3g}")
    theta = np.clip(theta, 0.0, 1.0)
    # exact 0/1 values keep identities such as theta == (0, 1, 0, 1) exact
    theta = np.where(np.abs(theta) < 1e-12, 0.0, theta)
    theta = np.where(np.abs(theta - 1.0) < 1e-12, 1.0, theta)
    active = tuple(int(i) for i in np.flatnonzero(np.abs(h - G @ theta) <= 1e-9))
    return LpSolution(theta, float(theta @ p.objective), active)


def solve_exact(p: LpProblem) -> LpSolution:
    """Global minimiser by exhaustive vertex enumeration.

    Ties within ``TIE_TOL`` are broken towards the lexicographically smallest
    ``theta``.
    """
    G, h = p.constraints()
    bases = _bases()
    A = G[bases]                      # (495, 4, 4)
    b = h[bases]                      # (495, 4)
    scale = np.prod(np.linalg.norm(A, axis=2), axis=1)
    det = np.linalg.det(A)
    ok = np.abs(det) >= SINGULAR_TOL * np.maximum(scale, 1e-300)
    thetas = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    tol = FEASIBILITY_TOL * max(1.0, float(np.abs(G).max()))
    feasible = np.all(thetas @ G.T - h <= tol, axis=1)
    cand = thetas[feasible]
    if cand.shape[0] == 0:  # cannot happen: theta = 0 is always a vertex
        raise RuntimeError("no feasible vertex found")
    obj = cand @ p.objective
    best = obj.min()
    ties = cand[obj <= best + TIE_TOL * (1.0 + abs(best))]
    rounded = np.round(ties, 12)
    order = np.lexsort(rounded.T[::-1])
    return _finish(p, ties[order[0]].copy())


@lru_cache(maxsize=4)
def _lattice(step: float) -> np.ndarray:
    m = int(round(1.0 / step))
    if not np.isclose(m * step, 1.0):
        raise ValueError("step must divide 1")
    axis = np.linspace(0.0, 1.0, m + 1)
    grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    grid.setflags(write=False)
    return grid


def solve_grid_oracle(p: LpProblem, step: float = 0.05) -> LpSolution:
    """Lattice minimiser over ``{0, step, ..., 1}**4``.

    The lattice contains ``0``, which is always feasible, so a solution exists.
    """
    grid = _lattice(step)
    G, h = p.constraints()
    feasible = np.all(grid @ G[8:].T - h[8:] <= FEASIBILITY_TOL, axis=1)
    pts = grid[feasible]
    obj = pts @ p.objective
    i = int(np.argmin(obj))  # first minimiser in lexicographic lattice order
    theta = pts[i].copy()
    return LpSolution(theta, float(obj[i]), (), "optimal")


def lattice_size(step: float) -> int:
    return _lattice(step).shape[0]
