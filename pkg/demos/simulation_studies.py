"""Small versions of the simulation studies, printed as tables.

Usage: python3 demos/simulation_studies.py
The full-size runs are available through ``cfeo simulate``.
"""
import warnings

from cfeo.sim import (motivating_ctpr, run_coverage_experiment, run_double_robustness,
                      run_rate_experiment, run_tradeoff_grid)


def main() -> None:
    warnings.simplefilter("ignore", RuntimeWarning)
    fmt = lambda v: f"{v:.4f}"

    curve = motivating_ctpr()
    print("counterfactual TPR by intervention strength")
    print(curve[["strength", "ctpr0", "ctpr1"]].iloc[::4].to_string(index=False, float_format=fmt))

    rates = run_rate_experiment(n_grid=(500, 2000), reps=50, n_val=100_000, seed=1)
    print("\nscaled loss gap and excess unfairness")
    cols = ["method", "n", "scaled_loss_gap_mean", "uf_pos_mean", "uf_neg_mean"]
    print(rates.summary[cols].to_string(index=False, float_format=fmt))

    grid = run_tradeoff_grid(eps_pos_grid=[0, 0.1, 0.2, 0.3], eps_neg_grid=[0, 0.2, 0.4, 0.6],
                             n_val=100_000)
    print("\nloss change of the optimal fair predictor (rows eps+, columns eps-)")
    print(grid.pivot().to_string(float_format=fmt))

    cover = run_coverage_experiment(n_grid=(2000,), reps=100, n_val=100_000, seed=2)
    print("\ninterval coverage")
    print(cover.coverage.to_string(float_format=fmt))

    robust = run_double_robustness(n_grid=(1000, 8000), reps=50, n_val=100_000)
    print("\nmean absolute beta error with one or both nuisances replaced by 0.5")
    print(robust.summary.to_string(float_format=fmt))


if __name__ == "__main__":
    main()
