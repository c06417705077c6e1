"""Drift and diffusion fields of the Lotka-Volterra SDE: data, analytic truth, learned model.

Writes three K-M CSVs (simulated data, a trajectory sampled from a model
trained on a shorter run, and the analytic field evaluated as bin averages
over the data) and prints summary error statistics.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from hypersindy import io
from hypersindy.config import load_config
from hypersindy.dynamics import lotka_volterra_diffusion, lotka_volterra_drift, make_dataset, system_spec
from hypersindy.evaluation import generate_trajectory, km_bin_means, km_estimate
from hypersindy.training import train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--bins", type=int, default=20)
    ap.add_argument("--min-count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    spec = system_spec("lotka_volterra", 1.0)
    data = make_dataset(spec, seed=args.seed, steps=args.steps)
    field = km_estimate(data, args.bins, args.min_count)
    io.write_km(field, args.out / "km_data.csv")

    drift = km_bin_means(field, data, lambda x: lotka_volterra_drift(x.T).T)
    diff = km_bin_means(field, data, lambda x: 0.5 * lotka_volterra_diffusion(x.T).T ** 2)
    io.write_km(replace(field, drift=drift, diffusion=diff), args.out / "km_analytic.csv")
    ok = field.valid
    d_err = np.linalg.norm(field.drift[ok] - drift[ok], axis=1) / np.linalg.norm(drift[ok], axis=1)
    s_err = np.abs(field.diffusion[ok] - diff[ok]) / diff[ok]
    print(f"{ok.sum()} bins with >= {args.min_count} samples")
    print(f"drift relative error: median {np.median(d_err):.3f}, max {d_err.max():.3f}")
    print(f"diffusion relative error: median {np.median(s_err):.3f}, max {s_err.max():.3f}")

    run = load_config("lotka_volterra")
    model, _ = train(run.train_config(args.seed), make_dataset(spec, seed=args.seed, steps=run.data.steps),
                     run.library_spec())
    gen = generate_trajectory(model, data.states[0], data.dt, args.steps, seed=args.seed)
    gfield = km_estimate(gen, args.bins, args.min_count)
    io.write_km(gfield, args.out / "km_learned.csv")
    truth = km_bin_means(gfield, gen, lambda x: lotka_volterra_drift(x.T).T)[gfield.valid]
    agree = np.mean(np.sign(gfield.drift[gfield.valid]) == np.sign(truth))
    print(f"learned model: drift sign agreement {agree:.1%} over {gfield.valid.sum()} bins")


if __name__ == "__main__":
    main()
