"""Fit and audit a fair derived predictor on synthetic data.

Usage: python3 demos/quickstart.py [n]
"""
import sys

import numpy as np

from cfeo import (PipelineConfig, THETA_IDENTITY, evaluate_all, fit_derived_predictor, predict,
                  split_train_test)
from cfeo.sim import BayesOptimalPredictor, DgpConfig, generate, oracle_evaluate


def main(n: int = 10_000) -> None:
    cfg = DgpConfig.tradeoff()
    input_predictor = BayesOptimalPredictor(cfg)
    world = generate(cfg, n, "post-rai", input_predictor, seed=1)
    train, test = split_train_test(world.dataset, 0.5, seed=2)

    pipeline = PipelineConfig(eps_pos=0.05, eps_neg=0.05, k=5, seed=3)
    derived = fit_derived_predictor(train, pipeline)
    print("theta:", np.round(derived.theta, 3))

    print("\ninput predictor on the test half")
    print(evaluate_all(test, THETA_IDENTITY, pipeline).to_table())
    print("\nderived predictor on the test half")
    print(evaluate_all(test, derived.theta, pipeline).to_table())

    truth = oracle_evaluate(derived.theta, cfg, input_predictor=input_predictor)
    print(f"\ntrue values: loss {truth.loss:.3f}, delta+ {truth.delta_pos:.3f}, "
          f"delta- {truth.delta_neg:.3f}")

    # at prediction time only the group and the input prediction are needed
    rng = np.random.default_rng(4)
    draws = predict(derived, test.a[:10], test.s[:10], rng)
    print("\nfirst ten test records: S =", test.s[:10].tolist(), "R =", draws.tolist())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10_000)
