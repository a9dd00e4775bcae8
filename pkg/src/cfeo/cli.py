"""Command-line interface.

    cfeo postprocess --train train.csv --eps-pos 0.05 --eps-neg 0.05 --out run/
    cfeo evaluate --theta run/theta.json --test test.csv --out run/
    cfeo compas-prepare --raw compas-scores-two-years.csv --out data/
    cfeo simulate {rates,tradeoff,coverage,motivating,cost-sweep} --seed 1 --out sim/
    cfeo replay run/config.json

Every command writes ``config.json`` with its fully resolved arguments next
to its outputs. Exit status is 0 on success, 1 for bad input or data and 2
for unexpected failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .data import CsvSchema, DataError, compas_prepare, load_csv, split_train_test, write_csv
from .eif import DegenerateDenominatorError, METHODS, THETA_IDENTITY
from .evaluate import crossfit_scores, evaluate_all
from .nuisance import LEARNER_KINDS, LearnerConfig, LearnerError
from .postprocess import MODES, DerivedPredictor, PipelineConfig, PipelineError, fit_derived_predictor

logger = logging.getLogger("cfeo")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2

_USER_ERRORS = (DataError, PipelineError, DegenerateDenominatorError, LearnerError, ValueError,
                FileNotFoundError, IsADirectoryError, PermissionError, json.JSONDecodeError)


class UsageError(Exception):
    """Invalid combination of command-line arguments."""


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_learner_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("nuisance learners")
    kinds = [k for k in LEARNER_KINDS if k != "oracle"]
    g.add_argument("--learner", choices=kinds, default="boosted-stumps",
                   help="learner for both nuisances (default: %(default)s)")
    g.add_argument("--propensity-learner", choices=kinds, default=None,
                   help="override the propensity learner")
    g.add_argument("--rounds", type=int, default=200, help="boosting rounds")
    g.add_argument("--shrinkage", type=float, default=0.1, help="boosting learning rate")
    g.add_argument("--neighbors", type=int, default=50, help="k for the knn learner")
    g.add_argument("--degree", type=int, default=2, help="degree for logistic-basis")
    g.add_argument("--gamma", type=float, default=0.025,
                   help="propensity truncation: pi_hat <= 1 - gamma")


def _add_pipeline_args(p: argparse.ArgumentParser, weights_default) -> None:
    p.add_argument("--wfp", type=float, default=weights_default, help="false positive weight")
    p.add_argument("--wfn", type=float, default=weights_default, help="false negative weight")
    p.add_argument("--k", type=int, default=5, help="cross-fitting folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=METHODS, default="doubly-robust")
    p.add_argument("--mode", choices=MODES, default="crossfit")
    p.add_argument("--schema", type=Path, help="JSON or TOML file mapping roles to column names")
    _add_learner_args(p)


def _pipeline_config(args, weights) -> PipelineConfig:
    def learner(kind):
        return LearnerConfig(kind=kind, rounds=args.rounds, shrinkage=args.shrinkage,
                             neighbors=args.neighbors, degree=args.degree, seed=args.seed)

    return PipelineConfig(
        eps_pos=getattr(args, "eps_pos", 0.05), eps_neg=getattr(args, "eps_neg", 0.05),
        weights=weights, k=args.k, seed=args.seed, outcome=learner(args.learner),
        propensity=learner(args.propensity_learner or args.learner), gamma=args.gamma,
        method=args.method, mode=args.mode,
    )


def _schema(args) -> CsvSchema:
    return CsvSchema.from_file(args.schema) if args.schema else CsvSchema()


def _resolved(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k in ("func", "verbose"):
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _write_config(out: Path, args, extra: dict | None = None) -> None:
    conf = {"cfeo_version": __version__, "command": args.command, "args": _resolved(args)}
    if extra:
        conf.update(extra)
    _write_json(out / "config.json", conf)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_postprocess(args) -> int:
    cfg = _pipeline_config(args, (args.wfp, args.wfn))
    train = load_csv(args.train, _schema(args))
    dp = fit_derived_predictor(train, cfg)
    dp.provenance["train"] = str(args.train)
    out = _outdir(args.out)
    dp.save(out / "theta.json")
    _write_config(out, args, {"pipeline": cfg.to_dict()})
    print(f"theta = ({', '.join(f'{t:.4f}' for t in dp.theta)})")
    print(f"wrote {out / 'theta.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    theta_path = Path(args.theta)
    if not theta_path.is_file():
        raise FileNotFoundError(f"theta file not found: {theta_path}")
    dp = DerivedPredictor.load(theta_path)
    fitted = dp.provenance.get("config", {}).get("weights", [1.0, 1.0])
    w = (args.wfp if args.wfp is not None else fitted[0],
         args.wfn if args.wfn is not None else fitted[1])
    cfg = _pipeline_config(args, w)
    test = load_csv(args.test, _schema(args))
    scores = crossfit_scores(test, cfg)
    derived = evaluate_all(test, dp.theta, cfg, args.level, scores, args.ci)
    given = evaluate_all(test, THETA_IDENTITY, cfg, args.level, scores, args.ci)

    out = _outdir(args.out)
    _write_json(out / "report.json", {"derived": derived.to_dict(), "input": given.to_dict(),
                                      "theta_file": str(theta_path), "test": str(args.test)})
    text = "\n\n".join(["derived predictor", derived.to_table(), "input predictor", given.to_table()])
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    _write_config(out, args, {"pipeline": cfg.to_dict()})
    print(text)
    return EXIT_OK


def cmd_compas_prepare(args) -> int:
    ds = compas_prepare(args.raw)
    out = _outdir(args.out)
    write_csv(ds, out / "compas.csv")
    msg = [f"{ds.n} records -> {out / 'compas.csv'}"]
    if args.train_fraction is not None:
        if not 0.0 < args.train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")
        train, test = split_train_test(ds, args.train_fraction, args.seed)
        write_csv(train, out / "train.csv")
        write_csv(test, out / "test.csv")
        msg.append(f"train {train.n}, test {test.n}")
    _write_config(out, args)
    print("; ".join(msg))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from . import sim

    out = _outdir(args.out)
    study = args.study
    threads = args.threads
    if study == "motivating":
        steps = args.strength_steps
        if steps < 2:
            raise ValueError("strength grid needs at least 2 points")
        cfg = sim.MotivatingConfig(strengths=tuple(np.round(np.linspace(0.0, 1.0, steps), 10)))
        df = sim.motivating_ctpr(cfg)
        df.to_csv(out / "ctpr.csv", index=False)
        _write_config(out, args, {"motivating": cfg.to_dict()})
        print(df.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        return EXIT_OK

    n_val = args.n_val or (100_000 if args.quick else 500_000)
    if study == "rates":
        reps = args.reps or (50 if args.quick else 200)
        res = sim.run_rate_experiment(
            n_grid=args.n_grid, reps=reps, eps_pos=args.eps_pos, eps_neg=args.eps_neg,
            seed=args.seed, noise_c=args.noise_c, noise_offset=args.noise_offset, n_val=n_val,
            threads=threads)
        res.raw.to_csv(out / "raw.csv", index=False)
        res.summary.to_csv(out / "summary.csv", index=False)
        _write_json(out / "summary.json", {"theta_star": res.theta_star,
                                           "optimal_loss": res.optimal_loss,
                                           "summary": res.summary.to_dict(orient="records")})
        _write_config(out, args, {"settings": res.settings})
        cols = ["method", "n", "loss_mean", "scaled_loss_gap_mean", "uf_pos_mean", "uf_neg_mean"]
        print(res.summary[cols].to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    elif study == "tradeoff":
        step = args.step or (0.05 if args.quick else 0.025)
        grid = sim.default_eps_grid(step, args.upper)
        res = sim.run_tradeoff_grid(eps_pos_grid=grid, eps_neg_grid=grid, seed=args.seed,
                                    n_val=n_val)
        res.grid.to_csv(out / "grid.csv", index=False)
        _write_json(out / "summary.json", {"input_metrics": res.input_metrics,
                                           "max_loss_change": float(res.grid.loss_change.max())})
        _write_config(out, args, {"settings": res.settings})
        print(res.pivot().to_string(float_format=lambda v: f"{v:.3f}"))
    elif study == "coverage":
        reps = args.reps or (100 if args.quick else 500)
        theta = args.theta
        if len(theta) != 4:
            raise ValueError("theta needs four comma-separated values")
        res = sim.run_coverage_experiment(n_grid=args.n_grid, reps=reps, theta=theta,
                                          seed=args.seed, noise_c=args.noise_c,
                                          noise_offset=args.noise_offset, n_val=n_val,
                                          threads=threads)
        res.raw.to_csv(out / "raw.csv", index=False)
        res.coverage.to_csv(out / "coverage.csv")
        _write_json(out / "summary.json", {"truth": res.truth,
                                           "median_coverage": res.median_coverage(),
                                           "coverage": res.coverage.to_dict()})
        _write_config(out, args, {"settings": res.settings})
        print(res.coverage.to_string(float_format=lambda v: f"{v:.3f}"))
    elif study == "double-robustness":
        reps = args.reps or (50 if args.quick else 100)
        res = sim.run_double_robustness(n_grid=args.n_grid, reps=reps, seed=args.seed,
                                        n_val=n_val, threads=threads)
        res.raw.to_csv(out / "raw.csv", index=False)
        res.summary.to_csv(out / "errors.csv")
        _write_json(out / "summary.json", {
            "truth_beta": res.truth, "mean_error": res.summary.to_dict(),
            "error_ratio": {s: res.error_ratio(s) for s in res.summary.index}})
        _write_config(out, args, {"settings": res.settings})
        print(res.summary.to_string(float_format=lambda v: f"{v:.4f}"))
    elif study == "cost-sweep":
        df = sim.run_cost_sweep(eps=args.eps, n=args.n, seed=args.seed)
        df.to_csv(out / "sweep.csv", index=False)
        _write_config(out, args)
        print(df.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    return EXIT_OK


def cmd_replay(args) -> int:
    conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
    try:
        command, saved = conf["command"], dict(conf["args"])
    except (KeyError, TypeError):
        raise ValueError(f"{args.config} is not a cfeo config file") from None
    if args.out:
        saved["out"] = args.out
    ns = build_parser().parse_args(_argv_from(command, saved))
    return ns.func(ns)


def _argv_from(command: str, saved: dict) -> list[str]:
    """Rebuild a command line from a saved argument dictionary."""
    argv = [command]
    if saved.get("study"):
        argv.append(saved["study"])
    for key, value in saved.items():
        if key in ("command", "study") or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            argv += [flag, ",".join(str(v) for v in value)]
        else:
            argv += [flag, str(value)]
    return argv


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .sim import default_threads

    parser = argparse.ArgumentParser(prog="cfeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("postprocess", help="fit a derived predictor on training data")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--eps-pos", type=float, default=0.05)
    p.add_argument("--eps-neg", type=float, default=0.05)
    p.add_argument("--out", type=Path, required=True)
    _add_pipeline_args(p, 1.0)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="estimate loss and error rates on test data")
    p.add_argument("--theta", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--ci", choices=["delta", "plain"], default="delta",
                   help="transformed (delta-method) or plain Wald intervals")
    _add_pipeline_args(p, None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compas-prepare", help="build a dataset from the ProPublica COMPAS file")
    p.add_argument("--raw", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--train-fraction", type=float, default=None,
                   help="also write train.csv/test.csv with this training share")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compas_prepare)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("study", choices=["rates", "tradeoff", "coverage", "motivating", "cost-sweep",
                                     "double-robustness"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--quick", action="store_true", help="fewer replications and a smaller truth sample")
    p.add_argument("--threads", type=int, default=default_threads(),
                   help="worker processes (default from CFEO_THREADS, else 1)")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n-grid", type=_int_list, default=None)
    p.add_argument("--n-val", type=int, default=None, help="size of the truth sample")
    p.add_argument("--eps-pos", type=float, default=0.10)
    p.add_argument("--eps-neg", type=float, default=0.20)
    p.add_argument("--noise-c", type=float, default=1.0)
    p.add_argument("--noise-offset", type=float, default=1.0)
    p.add_argument("--theta", type=_float_list, default=[0.74, 1.0, 0.0, 0.8])
    p.add_argument("--step", type=float, default=None, help="tradeoff grid spacing")
    p.add_argument("--upper", type=float, default=0.5, help="tradeoff grid upper end")
    p.add_argument("--strength-steps", type=int, default=21)
    p.add_argument("--eps", type=float, default=0.01, help="cost-sweep fairness tolerance")
    p.add_argument("--n", type=int, default=20000, help="cost-sweep sample size")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a command from its config.json")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="write to a different directory")
    p.set_defaults(func=cmd_replay)
    return parser


def _fill_simulate_defaults(args) -> None:
    if getattr(args, "command", None) != "simulate":
        return
    if args.n_grid is None:
        args.n_grid = {"coverage": [1000, 5000], "double-robustness": [2000, 32000]}.get(
            args.study, [500, 2000, 8000])
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        _fill_simulate_defaults(args)
        return args.func(args)
    except UsageError as exc:
        print(f"cfeo: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except _USER_ERRORS as exc:
        print(f"cfeo: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001 - last-resort reporting
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
