"""Coefficient RMSE of HyperSINDy and E-SINDy for every Lorenz/Rossler noise level.

Each cell trains one model per seed (default 10) on a trajectory started from
a jittered initial condition, fits E-SINDy on the same data, and scores both
against the true coefficients. Results go to ``<out>/table1_<system>_<sigma>.json``
and a text table is printed at the end. Parallelism is capped by SSL_THREADS.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from hypersindy import io
from hypersindy.config import load_config
from hypersindy.evaluation import table1_experiment


def cell(c) -> str:
    return "n/a" if c is None else f"{c['value']:.3f} ± {c['spread']:.3f}"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--systems", nargs="+", default=["lorenz", "rossler"])
    ap.add_argument("--sigmas", nargs="+", type=int, default=[1, 5, 10])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for system in args.systems:
        for sigma in args.sigmas:
            run = load_config(f"{system}_rmse_sigma{sigma}")
            run = replace(run, system=replace(run.system, sigma=float(sigma)))
            summary = table1_experiment(run, args.seeds)
            io.dump_json(summary, args.out / f"table1_{system}_{sigma}.json")
            rows.append((system, sigma, summary))
            print(f"done {system} sigma={sigma}", flush=True)

    print(f"\n{'system':8s} {'sigma':>5s}  {'HyperSINDy mean':>17s} {'E-SINDy mean':>17s}"
          f" {'HyperSINDy std':>17s} {'E-SINDy std':>17s}")
    for system, sigma, s in rows:
        print(f"{system:8s} {sigma:5d}  {cell(s['hypersindy']['mean_rmse']):>17s} {cell(s['esindy']['mean_rmse']):>17s}"
              f" {cell(s['hypersindy']['std_rmse']):>17s} {cell(s['esindy']['std_rmse']):>17s}")


if __name__ == "__main__":
    main()
