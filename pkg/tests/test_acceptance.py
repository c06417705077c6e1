"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion N [PASS|FAIL] ...`` line and the lines
are repeated in the pytest terminal summary. Criterion 7 trains on a 10-state
system for about twenty minutes and only runs when ``HYPERSINDY_LONG=1``.
Run with ``pytest tests/test_acceptance.py -v``.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypersindy import autodiff as ad
from hypersindy import io
from hypersindy.cli import main
from hypersindy.config import load_config
from hypersindy.dynamics import lotka_volterra_diffusion, lotka_volterra_drift, make_dataset, system_spec
from hypersindy.evaluation import (
    coefficient_rmse,
    generate_trajectory,
    ground_truth,
    km_bin_means,
    km_estimate,
    sample_coefficients,
    table1_experiment,
)
from hypersindy.library import LibrarySpec, build_library, monomial
from hypersindy.model import HyperSINDy, ModelConfig, elbo_loss, mask_eval
from hypersindy.training import train

from conftest import numeric_grad, report_criterion

pytestmark = pytest.mark.acceptance


# ------------------------------------------------------------ criterion 1


def test_criterion_1_gradient_correctness():
    t0 = time.perf_counter()
    cfg = ModelConfig(LibrarySpec(2, 1, True), latent_dim=2, hidden_width=8, num_hidden=2)
    assert cfg.term_count == 3
    worst = 0.0
    for seed in range(5):
        r = np.random.default_rng(seed)
        model = HyperSINDy.init(cfg, np.random.default_rng(100 + seed))
        model.mask.log_alpha.data[...] = r.normal(0.5, 1.0, size=(3, 2))
        x, xdot = r.normal(size=(4, 2)), r.normal(size=(4, 2))
        eps, u = r.normal(size=(4, 2)), r.uniform(0.05, 0.95, size=(4, 3, 2))
        loss = lambda: elbo_loss(model, x, xdot, 0.7, 0.3, eps=eps, u=u).total
        ad.backward(loss())
        for p in model.parameters():
            num = numeric_grad(lambda: loss().item(), p.data, h=1e-5)
            scale = max(np.max(np.abs(num)), np.max(np.abs(p.grad)), 1e-8)
            worst = max(worst, float(np.max(np.abs(p.grad - num)) / scale))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 10
    report_criterion(1, "ELBO gradients vs central differences", ok,
                     f"worst relative error {worst:.2e} (limit 1e-3), {elapsed:.1f}s (limit 10s)")
    assert ok


# ------------------------------------------------------------ criterion 2


def test_criterion_2_library_shapes():
    counts = {
        "lorenz": len(build_library(load_config("lorenz_sigma1").library_spec())),
        "rossler": len(build_library(load_config("rossler_sigma1").library_spec())),
        "lotka_volterra": len(build_library(load_config("lotka_volterra").library_spec())),
        "lorenz96": len(build_library(load_config("lorenz96_sigma10").library_spec())),
    }
    expected = {"lorenz": 19, "rossler": 20, "lotka_volterra": 10, "lorenz96": 286}
    ok = counts == expected
    report_criterion(2, "library term counts", ok, f"{counts}")
    assert ok


# ------------------------------------------------------------ criterion 3

LORENZ_TRUE = {  # (variables, equation): value
    ((0,), 0): -10.0, ((1,), 0): 10.0,
    ((0,), 1): 28.0, ((1,), 1): -1.0, ((0, 2), 1): -1.0,
    ((0, 1), 2): 1.0, ((2,), 2): -8.0 / 3.0,
}


def test_criterion_3_deterministic_recovery():
    run = load_config("lorenz_sigma1")
    lib = run.library_spec()
    t0 = time.perf_counter()
    model, _ = train(run.train_config(), make_dataset(system_spec("lorenz", 0.0), steps=10000), lib)
    elapsed = time.perf_counter() - t0
    active = mask_eval(model.mask).data > 0
    want = np.zeros_like(active)
    for (variables, eq) in LORENZ_TRUE:
        want[monomial(lib, *variables), eq] = True
    mean = sample_coefficients(model).mean
    errors = {f"{v}->{eq}": round(float(mean[monomial(lib, *v), eq] - val), 3) for (v, eq), val in LORENZ_TRUE.items()}
    worst = max(abs(e) for e in errors.values())
    ok = bool(np.array_equal(active, want)) and worst <= 0.15 and elapsed <= 45 * 60
    report_criterion(
        3, "deterministic Lorenz recovery", ok,
        f"{int(active.sum())} active terms ({int((active & want).sum())}/7 true, {int((active & ~want).sum())} spurious), "
        f"worst mean error {worst:.3f} (limit 0.15), {elapsed:.0f}s",
    )
    assert ok, errors


# ------------------------------------------------------------ criterion 4


def test_criterion_4_stochastic_recovery():
    summary = table1_experiment(load_config("lorenz_rmse_sigma1"), n_seeds=3)
    h_mean = summary["hypersindy"]["mean_rmse"]["value"]
    h_std = summary["hypersindy"]["std_rmse"]["value"]
    e_mean = summary["esindy"]["mean_rmse"]["value"]
    ok = h_mean <= 0.25 and h_std <= 1.0 and h_mean < e_mean
    report_criterion(
        4, "Lorenz sigma=1, 3 seeds", ok,
        f"HyperSINDy mean-RMSE {h_mean:.3f} (limit 0.25), std-RMSE {h_std:.3f} (limit 1.0), "
        f"E-SINDy mean-RMSE {e_mean:.3f} (HyperSINDy must be lower)",
    )
    assert ok, summary["runs"]


# ------------------------------------------------------------ criterion 5


def test_criterion_5_noise_scaling():
    learned = []
    for sigma in (1, 5, 10):
        run = load_config(f"lorenz_sigma{sigma}")
        spec, lib = run.system_spec(), run.library_spec()
        model, _ = train(run.train_config(), make_dataset(spec, steps=run.data.steps), lib)
        _, true_std = ground_truth(spec, lib)
        learned.append(float(sample_coefficients(model).std[true_std > 0].mean()))
    ok = learned[0] < learned[1] < learned[2]
    report_criterion(5, "learned std grows with sigma", ok,
                     "mean learned std at noisy terms for sigma 1/5/10: " + ", ".join(f"{v:.3f}" for v in learned))
    assert ok


# ------------------------------------------------------------ criterion 6


def _km_errors(field, traj):
    """Per valid bin: drift error relative to the analytic drift norm, diffusion error per component."""
    true_drift = km_bin_means(field, traj, lambda x: lotka_volterra_drift(x.T).T)
    true_diff = km_bin_means(field, traj, lambda x: 0.5 * lotka_volterra_diffusion(x.T).T ** 2)
    ok = field.valid
    drift_err = np.linalg.norm(field.drift[ok] - true_drift[ok], axis=1) / np.linalg.norm(true_drift[ok], axis=1)
    diff_err = np.abs(field.diffusion[ok] - true_diff[ok]) / true_diff[ok]
    return drift_err, diff_err


def test_criterion_6_kramers_moyal():
    spec = system_spec("lotka_volterra", 1.0)
    data = make_dataset(spec, steps=100_000)
    field = km_estimate(data, bins=20, min_count=200)
    drift_err, diff_err = _km_errors(field, data)

    run = load_config("lotka_volterra")
    model, _ = train(run.train_config(), make_dataset(spec, steps=run.data.steps), run.library_spec())
    try:
        gen = generate_trajectory(model, data.states[0], data.dt, 100_000, seed=0)
        gfield = km_estimate(gen, bins=20, min_count=200)
        truth = km_bin_means(gfield, gen, lambda x: lotka_volterra_drift(x.T).T)[gfield.valid]
        signs = float(np.mean(np.sign(gfield.drift[gfield.valid]) == np.sign(truth)))
        gen_note = f"{signs:.1%} sign agreement over {int(gfield.valid.sum())} bins"
    except Exception as exc:  # divergence of the learned model counts as a failure
        signs, gen_note = 0.0, f"generation failed: {exc}"

    ok = drift_err.max() <= 0.15 and diff_err.max() <= 0.25 and signs >= 0.9
    report_criterion(
        6, "Kramers-Moyal fidelity", ok,
        f"{field.valid.sum()} bins; max drift rel. error {drift_err.max():.2f} (limit 0.15, "
        f"{np.mean(drift_err <= 0.15):.0%} of bins within), max diffusion rel. error {diff_err.max():.2f} "
        f"(limit 0.25, {np.mean(diff_err <= 0.25):.0%} within); learned model: {gen_note} (limit 90%)",
    )
    assert ok


# ------------------------------------------------------------ criterion 7


@pytest.mark.skipif(os.environ.get("HYPERSINDY_LONG") != "1", reason="long run; set HYPERSINDY_LONG=1")
def test_criterion_7_lorenz96_structure():
    run = load_config("lorenz96_sigma10")
    spec, lib = run.system_spec(), run.library_spec()
    n = spec.state_dim
    model, _ = train(run.train_config(), make_dataset(spec, steps=run.data.steps), lib)
    active = mask_eval(model.mask).data > 0
    true_mean, _ = ground_truth(spec, lib)
    want = true_mean != 0
    ens = sample_coefficients(model)
    const = ens.mean[0]
    std_ok = [bool(ens.std[0, i] > np.max(np.delete(ens.std[:, i], 0))) for i in range(n)]
    exact = [bool(np.array_equal(active[:, i], want[:, i])) for i in range(n)]
    ok = all(exact) and bool(np.all(np.abs(const - 8) <= 1.0)) and all(std_ok)
    report_criterion(
        7, "Lorenz-96 structure", ok,
        f"{sum(exact)}/{n} equations with exactly the 4 true terms, active terms per equation "
        f"{active.sum(axis=0).tolist()}, constant means {np.round(const, 2).tolist()}, "
        f"constant has the largest std in {sum(std_ok)}/{n} equations",
    )
    assert ok


# ------------------------------------------------------------ criterion 8


def test_criterion_8_metric_examples():
    t = np.array([[2.0, 0.0, 0.0]])
    examples = [coefficient_rmse(t, t) == 0.0, coefficient_rmse(t, [[1.0, 0.0, 0.0]]) == 0.5,
                coefficient_rmse(t, np.zeros_like(t)) == 1.0]
    failures = []

    @settings(max_examples=100, deadline=None, database=None)
    @given(true=arrays(np.float64, (6, 3), elements=st.floats(-50, 50)),
           pred=arrays(np.float64, (6, 3), elements=st.floats(-50, 50)),
           c=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
    def covariant(true, pred, c):
        true = true + 1.0 if np.linalg.norm(true) < 1e-6 else true
        a, b = coefficient_rmse(c * true, c * pred), coefficient_rmse(true, pred)
        if not np.isclose(a, b, rtol=1e-9, atol=1e-12):
            failures.append((a, b))
        assert np.isclose(a, b, rtol=1e-9, atol=1e-12)

    try:
        covariant()
        prop = True
    except AssertionError:
        prop = False
    ok = all(examples) and prop
    report_criterion(8, "RMSE metric", ok, f"examples {sum(examples)}/3 exact, scale covariance over 100 draws "
                     + ("held" if prop else f"broke: {failures[:1]}"))
    assert ok


# ------------------------------------------------------------ criterion 9


def test_criterion_9_determinism(tmp_path):
    def twice(name, argv_of):
        outs = []
        for k in range(2):
            d = tmp_path / f"{name}{k}"
            d.mkdir()
            code = main([str(a) for a in argv_of(d)])
            assert code == 0, (name, code)
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        return outs[0] == outs[1]

    src = tmp_path / "src"
    src.mkdir()
    main(["simulate", "--system", "lotka_volterra", "--sigma", "1", "--steps", "1500", "--out", str(src / "d.csv")])
    main(["train", "--config", "tiny", "--data", str(src / "d.csv"), "--out", str(src / "m.json")])
    import json

    t1 = json.loads(json.dumps(load_config("lorenz_sigma1").__dict__, default=lambda o: o.__dict__))
    t1["data"]["steps"] = 400
    t1["train"].update(epochs=2, hidden_width=8, num_hidden=1, batch_size=100, stat_size=20, beta_spike=None,
                       epoch_beta_spike=None, lambda_spike=None, epoch_lambda_spike=None)
    t1["evaluation"].update(samples=20)
    t1["evaluation"]["esindy"]["n_models"] = 3
    (src / "t1.json").write_text(json.dumps(t1))

    results = {
        "simulate": twice("simulate", lambda d: ["simulate", "--system", "lorenz", "--sigma", 5, "--steps", 2000,
                                                 "--seed", 3, "--out", d / "d.csv"]),
        "train": twice("train", lambda d: ["train", "--config", "tiny", "--data", src / "d.csv", "--out", d / "m.json"]),
        "eval": twice("eval", lambda d: ["eval", "--checkpoint", src / "m.json", "--truth-system", "lotka_volterra",
                                         "--sigma", 1, "--mean-only", "--seed", 2, "--out", d / "e.json"]),
        "generate-sample": twice("gs", lambda d: ["generate", "--checkpoint", src / "m.json", "--x0", "4,2",
                                                  "--steps", 1000, "--seed", 9, "--out", d / "g.csv"]),
        "generate-mean": twice("gm", lambda d: ["generate", "--checkpoint", src / "m.json", "--x0", "4,2",
                                                "--steps", 1000, "--mode", "mean", "--out", d / "g.csv"]),
        "km": twice("km", lambda d: ["km", "--data", src / "d.csv", "--bins", 5, "--min-count", 10, "--out", d / "k.csv"]),
        "table1": twice("table1", lambda d: ["table1", "--system", "lorenz", "--sigma", 1, "--seeds", 2,
                                             "--config", src / "t1.json", "--out", d / "t.json"]),
    }
    ok = all(results.values())
    report_criterion(9, "byte-identical reruns", ok,
                     ", ".join(f"{k} {'same' if v else 'DIFFERENT'}" for k, v in results.items()))
    assert ok
