"""Command-line interface: ``hypersindy <command> [flags]``.

Commands: simulate, train, eval, generate, km, table1. Each writes plain
CSV/JSON files and is deterministic given its flags.

Exit codes:
    0  success
    1  any other error (bad input file, shape mismatch, ...)
    2  usage or configuration error
    3  training produced a non-finite loss
    4  evaluation hit a zero-norm reference (relative RMSE undefined)
    5  generated trajectory diverged
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from hypersindy import io
from hypersindy.autodiff import ContractError, DimensionError, DomainError
from hypersindy.config import ConfigError, load_config, preset_names
from hypersindy.dynamics import (
    SYSTEMS,
    ConfigurationError,
    DivergenceError,
    InsufficientDataError,
    estimate_derivatives,
    make_dataset,
    system_spec,
)
from hypersindy.evaluation import (
    DEFAULT_SAMPLES,
    CoefficientEnsemble,
    coefficient_rmse,
    generate_trajectory,
    ground_truth,
    km_estimate,
    sample_coefficients,
    table1_experiment,
)
from hypersindy.library import term_names
from hypersindy.training import TrainingDivergence, train

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_TRAIN_NAN = 3
EXIT_DOMAIN = 4
EXIT_DIVERGED = 5

DISPLAY_THRESHOLD = 0.01


class UsageError(Exception):
    """Flag values that parse but make no sense together."""


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be a finite nonnegative number, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = _nonneg_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ------------------------------------------------------------- formatting


def format_equations(ensemble: CoefficientEnsemble, model) -> str:
    """One line per state equation listing ``mean ± std`` for every displayed term.

    A term is hidden when its gate has been pinned to zero or when its
    ensemble mean is below ``DISPLAY_THRESHOLD`` in magnitude.
    """
    lib = model.config.library
    names = term_names(lib)
    alive = model.mask.permanent_zero
    lines = []
    for i in range(lib.state_dim):
        parts = []
        for k, name in enumerate(names):
            m, s = ensemble.mean[k, i], ensemble.std[k, i]
            if alive[k, i] == 0 or abs(m) < DISPLAY_THRESHOLD:
                continue
            label = "" if name == "1" else f" {name}"
            parts.append(f"({m:+.3f} ± {s:.3f}){label}")
        lines.append(f"dx{i + 1}/dt = " + (" ".join(parts) if parts else "0"))
    return "\n".join(lines)


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    spec = system_spec(args.system, args.sigma, args.n)
    x0 = None
    if args.x0 is not None:
        if len(args.x0) != spec.state_dim:
            raise UsageError(f"--x0 needs {spec.state_dim} values for {args.system}, got {len(args.x0)}")
        x0 = np.array(args.x0)
    traj = make_dataset(spec, args.split, seed=args.seed, steps=args.steps, dt=args.dt, x0=x0)
    io.write_trajectory(traj, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    run = load_config(args.config)
    data = io.read_trajectory(args.data)
    if data.derivatives is None:
        data = estimate_derivatives(data)
    cfg = run.train_config(args.seed)
    lib = run.library_spec()
    if data.state_dim != lib.state_dim:
        raise DimensionError(f"{args.data} has {data.state_dim} states, config expects {lib.state_dim}")

    def report(rec, _model):
        if args.verbose:
            print(f"epoch {rec.epoch:4d}  recon {rec.recon:.4g}  kl {rec.kl:.4g}  "
                  f"l0 {rec.l0:.4g}  active {rec.active_terms}", file=sys.stderr)

    model, history = train(cfg, data, lib, progress=report)
    io.save_checkpoint(model, args.out)
    hist_path = args.history or str(Path(args.out).with_suffix("")) + "_history.csv"
    io.write_history(history, hist_path)
    ens = sample_coefficients(model, DEFAULT_SAMPLES, seed=cfg.seed)
    print(format_equations(ens, model))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = io.load_checkpoint(args.checkpoint)
    lib = model.config.library
    spec = system_spec(args.truth_system, args.sigma, args.n)
    if spec.state_dim != lib.state_dim:
        raise DimensionError(
            f"checkpoint library has n={lib.state_dim} but {spec.name} has n={spec.state_dim}"
        )
    true_mean, true_std = ground_truth(spec, lib)
    ens = sample_coefficients(model, args.samples, seed=args.seed)
    record = {
        "checkpoint": str(args.checkpoint),
        "truth_system": spec.name,
        "sigma": spec.noise_scale,
        "samples": args.samples,
        "seed": args.seed,
        "mean_rmse": coefficient_rmse(true_mean, ens.mean),
        "std_rmse": None if args.mean_only else coefficient_rmse(true_std, ens.std),
    }
    io.dump_json(record, args.out)
    ens_path = args.ensemble or str(Path(args.out).with_suffix("")) + "_ensemble.csv"
    io.write_ensemble(ens, lib, ens_path)
    print(f"mean-RMSE {record['mean_rmse']:.6g}"
          + ("" if record["std_rmse"] is None else f"  std-RMSE {record['std_rmse']:.6g}"))
    return EXIT_OK


def cmd_generate(args) -> int:
    model = io.load_checkpoint(args.checkpoint)
    n = model.config.library.state_dim
    if len(args.x0) != n:
        raise UsageError(f"--x0 needs {n} values for this checkpoint, got {len(args.x0)}")
    traj = generate_trajectory(model, np.array(args.x0), args.dt, args.steps, seed=args.seed, mode=args.mode)
    io.write_trajectory(traj, args.out)
    return EXIT_OK


def cmd_km(args) -> int:
    path = Path(args.data)
    if not path.exists() or path.stat().st_size == 0:
        raise ContractError(f"{path}: empty or missing trajectory file")
    traj = io.read_trajectory(path)
    field = km_estimate(traj, bins=args.bins, min_count=args.min_count)
    io.write_km(field, args.out)
    return EXIT_OK


def _table1_preset(system: str, sigma: float) -> str:
    tag = f"{sigma:g}".replace(".", "p")
    for name in (f"{system}_rmse_sigma{tag}", f"{system}_sigma{tag}"):
        if name in preset_names():
            return name
    raise ConfigError(f"no preset for {system} at sigma={sigma}; pass --config")


def cmd_table1(args) -> int:
    run = load_config(args.config or _table1_preset(args.system, args.sigma))
    if run.system.name != args.system:
        raise ConfigError(f"config is for {run.system.name}, not {args.system}")
    run = replace(run, system=replace(run.system, sigma=args.sigma))
    summary = table1_experiment(run, args.seeds, first_seed=args.first_seed)
    io.dump_json(summary, args.out)
    for method in ("hypersindy", "esindy"):
        cells = []
        for stat in ("mean_rmse", "std_rmse"):
            c = summary[method][stat]
            cells.append(f"{stat} " + ("n/a" if c is None else f"{c['value']:.4f} ± {c['spread']:.4f}"))
        print(f"{method:10s} " + "  ".join(cells))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypersindy", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("simulate", help="simulate a benchmark system and write a trajectory CSV")
    s.add_argument("--system", required=True, choices=SYSTEMS)
    s.add_argument("--sigma", type=_nonneg_float, default=0.0, help="noise scale (default 0)")
    s.add_argument("--split", choices=("train", "test"), default="train", help="initial condition set")
    s.add_argument("--steps", type=_positive_int, default=10000)
    s.add_argument("--dt", type=_positive_float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=10, help="state dimension for lorenz96")
    s.add_argument("--x0", type=_float_list, default=None, help="override the initial state, e.g. 0,1,1.05")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="train a model from a config (file or preset name)")
    t.add_argument("--config", required=True, help=f"JSON file or preset ({', '.join(preset_names())})")
    t.add_argument("--data", required=True, help="trajectory CSV; derivatives are estimated if absent")
    t.add_argument("--out", required=True, help="checkpoint JSON path")
    t.add_argument("--history", default=None, help="history CSV path (default <out>_history.csv)")
    t.add_argument("--seed", type=int, default=None, help="override train.seed")
    t.add_argument("--verbose", action="store_true", help="log every epoch to stderr")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint against a system's true coefficients")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--truth-system", required=True, choices=SYSTEMS)
    e.add_argument("--sigma", type=_nonneg_float, required=True)
    e.add_argument("--n", type=int, default=10, help="state dimension for lorenz96")
    e.add_argument("--samples", type=_positive_int, default=DEFAULT_SAMPLES)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mean-only", action="store_true",
                   help="skip std-RMSE (needed when the true stds are all zero)")
    e.add_argument("--out", required=True, help="JSON record path")
    e.add_argument("--ensemble", default=None, help="ensemble CSV path (default <out>_ensemble.csv)")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("generate", help="sample a trajectory from a trained model")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--x0", type=_float_list, required=True, help="initial state, e.g. 0,1,1.05")
    g.add_argument("--steps", type=_positive_int, default=10000)
    g.add_argument("--dt", type=_positive_float, default=0.01)
    g.add_argument("--mode", choices=("sample", "mean"), default="sample")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    k = sub.add_parser("km", help="Kramers-Moyal drift/diffusion field of a trajectory")
    k.add_argument("--data", required=True)
    k.add_argument("--bins", type=_positive_int, default=20)
    k.add_argument("--min-count", type=_positive_int, default=50)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_km)

    b = sub.add_parser("table1", help="HyperSINDy vs E-SINDy coefficient RMSE over several seeds")
    b.add_argument("--system", required=True, choices=("lorenz", "rossler"))
    b.add_argument("--sigma", type=_nonneg_float, required=True)
    b.add_argument("--seeds", type=_positive_int, default=10)
    b.add_argument("--first-seed", type=int, default=0)
    b.add_argument("--config", default=None, help="config file or preset (default: matching preset)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_table1)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ConfigurationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"hypersindy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergence as exc:
        print(f"training diverged at epoch {exc.epoch} in the {exc.component} term", file=sys.stderr)
        for name, value in exc.values.items():
            print(f"  {name}: {value}", file=sys.stderr)
        return EXIT_TRAIN_NAN
    except DomainError as exc:
        print(f"hypersindy {args.command}: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except DivergenceError as exc:
        print(f"hypersindy {args.command}: trajectory diverged at step {exc.step}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ContractError, DimensionError, InsufficientDataError, ValueError, OSError) as exc:
        print(f"hypersindy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
