import numpy as np
import pytest

from cfeo.data import Dataset


def random_dataset(n: int, seed: int, p: int = 2) -> Dataset:
    """Small dataset with confounded decisions and both groups present."""
    rng = np.random.default_rng(seed)
    a = (rng.random(n) < 0.4).astype(np.int8)
    a[:2] = (0, 1)
    x = rng.standard_normal((n, p)) + a[:, None]
    s = (x[:, 0] + rng.standard_normal(n) > 0.5).astype(np.int8)
    d = (rng.random(n) < 0.3 + 0.3 * s).astype(np.int8)
    d[:2] = 0
    y = (rng.random(n) < 1 / (1 + np.exp(-x[:, 0]))).astype(np.int8)
    return Dataset(a, x, d, s, y)


@pytest.fixture
def small_dataset() -> Dataset:
    return random_dataset(400, seed=11)


def random_problem(rng: np.random.Generator):
    """LP with coefficients shaped like estimated ones (structural identities hold)."""
    from cfeo.eif import fairness_vectors
    from cfeo.lp import LpProblem

    cfpr, cfnr = rng.random(2), rng.random(2)
    beta_pos, beta_neg = fairness_vectors(cfpr, cfnr)
    eps_pos, eps_neg = rng.choice([0.0, 0.02, 0.1, 0.3, 1.0], size=2) * rng.random(2) ** 0.1
    return LpProblem(rng.normal(0, 0.3, 4), beta_pos, beta_neg, eps_pos, eps_neg)


# Acceptance checks append one line each; they are repeated after the run so
# the verdicts are visible even when output capture is on.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
