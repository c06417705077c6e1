"""Scoring: coefficient ensembles, relative RMSE, generation, Kramers-Moyal fields, E-SINDy."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from hypersindy import autodiff as ad
from hypersindy import rng as rngs
from hypersindy.autodiff import DomainError
from hypersindy.dynamics import (
    DivergenceError,
    SystemSpec,
    Trajectory,
    initial_condition,
    make_dataset,
    rk4_step,
    system_spec,
)
from hypersindy.library import LibrarySpec, evaluate_library, monomial
from hypersindy.model import HyperSINDy, hypernet_coefficients, mask_eval, sample_prior

DEFAULT_SAMPLES = 250
KM_MIN_STEPS = 1000


@dataclass(frozen=True)
class CoefficientEnsemble:
    samples: np.ndarray  # (s, l, n)
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_samples(cls, samples) -> CoefficientEnsemble:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 3 or samples.shape[0] < 1:
            raise ad.DimensionError(f"ensemble samples must be (s, l, n), got {samples.shape}")
        # population convention (divisor s)
        return cls(samples, samples.mean(axis=0), samples.std(axis=0))

    @property
    def size(self) -> int:
        return self.samples.shape[0]


def sample_coefficients(model: HyperSINDy, s: int = DEFAULT_SAMPLES, seed: int = 0) -> CoefficientEnsemble:
    """Masked coefficient matrices for ``s`` prior draws, using the deterministic evaluation mask."""
    z = sample_prior(model.config.latent_dim, s, rngs.stream(seed, rngs.SAMPLE))
    with ad.no_grad():
        coeffs = hypernet_coefficients(model, z).data
        gate = mask_eval(model.mask).data
    return CoefficientEnsemble.from_samples(coeffs * gate)


# ------------------------------------------------------------- ground truth


def ground_truth(spec: SystemSpec, library: LibrarySpec) -> tuple[np.ndarray, np.ndarray]:
    """True coefficient means and stds laid out on ``library``.

    A sampled parameter contributes its noise scale only at the terms it
    multiplies. Lotka-Volterra noise enters through the diffusion, not
    through a coefficient, so its std matrix is zero.
    """
    if library.state_dim != spec.state_dim:
        raise ad.DimensionError(
            f"library has n={library.state_dim} but {spec.name} has n={spec.state_dim}"
        )
    l, n = library.term_count, spec.state_dim
    mean, std = np.zeros((l, n)), np.zeros((l, n))
    s = spec.noise_scale

    def put(eq: int, variables: tuple, value: float, noisy: bool = False) -> None:
        k = monomial(library, *variables)
        mean[k, eq] += value
        if noisy:
            std[k, eq] = s

    if spec.name == "lorenz":
        omega, rho, beta = spec.parameter_means
        put(0, (0,), -omega, True)
        put(0, (1,), omega, True)
        put(1, (0,), rho, True)
        put(1, (1,), -1.0)
        put(1, (0, 2), -1.0)
        put(2, (0, 1), 1.0)
        put(2, (2,), -beta, True)
    elif spec.name == "rossler":
        a, b, c = spec.parameter_means
        put(0, (1,), -1.0)
        put(0, (2,), -1.0)
        put(1, (0,), 1.0)
        put(1, (1,), a, True)
        put(2, (), b, True)
        put(2, (0, 2), 1.0)
        put(2, (2,), -c, True)
    elif spec.name == "lotka_volterra":
        put(0, (0,), 1.0)
        put(0, (0, 1), -1.0)
        put(1, (1,), -1.0)
        put(1, (0, 1), 1.0)
    elif spec.name == "lorenz96":
        for i in range(n):
            put(i, (), spec.parameter_means[i], True)
            put(i, tuple(sorted(((i + 1) % n, (i - 1) % n))), 1.0)
            put(i, tuple(sorted(((i - 2) % n, (i - 1) % n))), -1.0)
            put(i, (i,), -1.0)
    else:  # pragma: no cover - system_spec already rejects unknown names
        raise ValueError(spec.name)
    return mean, std


def coefficient_rmse(true, pred) -> float:
    """``||true - pred|| / ||true||`` over all entries, Frobenius norm."""
    true = np.asarray(true, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if true.shape != pred.shape:
        raise ad.DimensionError(f"rmse: shapes {true.shape} and {pred.shape} differ")
    denom = np.linalg.norm(true)
    if denom == 0:
        raise DomainError("rmse: reference coefficients have zero norm")
    return float(np.linalg.norm(true - pred) / denom)


# --------------------------------------------------------------- generation


def generate_trajectory(
    model: HyperSINDy,
    x0,
    dt: float,
    steps: int,
    seed: int = 0,
    mode: str = "sample",
    chunk: int = 2000,
) -> Trajectory:
    """Integrate the learned random ODE with RK4.

    In ``sample`` mode a fresh ``z`` is drawn for every step and its
    coefficients are held fixed across the four stages. ``mean`` mode uses the
    ensemble-mean coefficients (estimated from ``DEFAULT_SAMPLES`` prior draws
    with a fixed internal seed, so the result does not depend on ``seed``).
    """
    if mode not in ("sample", "mean"):
        raise ValueError(f"mode must be 'sample' or 'mean', got {mode!r}")
    if dt <= 0 or steps < 1:
        raise ValueError(f"need dt > 0 and steps >= 1, got dt={dt}, steps={steps}")
    lib = model.config.library
    x = np.asarray(x0, dtype=np.float64).ravel()
    if x.shape != (lib.state_dim,):
        raise ad.DimensionError(f"x0 needs {lib.state_dim} entries, got {x.size}")

    gate = mask_eval(model.mask).data
    rng = rngs.stream(seed, rngs.SAMPLE)
    fixed = sample_coefficients(model, DEFAULT_SAMPLES, seed=0).mean if mode == "mean" else None

    out = np.empty((steps + 1, lib.state_dim))
    out[0] = x
    block = None
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            if fixed is not None:
                coeffs = fixed
            else:
                j = t % chunk
                if j == 0:
                    z = rng.standard_normal((min(chunk, steps - t), model.config.latent_dim))
                    with ad.no_grad():
                        block = hypernet_coefficients(model, z).data * gate
                coeffs = block[j]
            x = rk4_step(lambda s: (evaluate_library(lib, s) @ coeffs)[0], x, dt)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(t + 1)
            out[t + 1] = x
    return Trajectory(dt, out, seed=seed)


# ----------------------------------------------------------- Kramers-Moyal


@dataclass(frozen=True)
class KmField:
    edges: tuple[np.ndarray, ...]
    counts: np.ndarray  # (cells,)
    drift: np.ndarray  # (cells, n), NaN where count < min_count
    diffusion: np.ndarray
    min_count: int

    @property
    def centers(self) -> np.ndarray:
        """Bin-center coordinates of every cell, shape ``(cells, n)``, C order."""
        mids = [0.5 * (e[:-1] + e[1:]) for e in self.edges]
        grid = np.meshgrid(*mids, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    @property
    def valid(self) -> np.ndarray:
        return self.counts >= self.min_count


def km_estimate(traj: Trajectory, bins: int = 20, min_count: int = 50) -> KmField:
    """First two Kramers-Moyal coefficients on a uniform grid over the observed range.

    For transitions starting in a cell: ``drift = mean(dx) / dt`` and
    ``diffusion = mean(dx**2) / (2 dt)``, per state dimension.
    """
    if traj is None or traj.states.shape[0] - 1 < KM_MIN_STEPS:
        raise ad.ContractError(f"km_estimate needs at least {KM_MIN_STEPS} steps")
    if bins < 1 or min_count < 1:
        raise ValueError("bins and min_count must be positive")
    x = traj.states
    n = x.shape[1]
    start, dx = x[:-1], np.diff(x, axis=0)
    lo, hi = x.min(axis=0), x.max(axis=0)
    edges = tuple(np.linspace(lo[i], hi[i], bins + 1) for i in range(n))
    width = np.where(hi > lo, hi - lo, 1.0)
    idx = np.clip(((start - lo) / width * bins).astype(np.intp), 0, bins - 1)
    cell = np.ravel_multi_index(tuple(idx.T), (bins,) * n)

    cells = bins**n
    counts = np.bincount(cell, minlength=cells)
    drift = np.full((cells, n), np.nan)
    diffusion = np.full((cells, n), np.nan)
    ok = counts >= min_count
    for i in range(n):
        s1 = np.bincount(cell, weights=dx[:, i], minlength=cells)
        s2 = np.bincount(cell, weights=dx[:, i] ** 2, minlength=cells)
        drift[ok, i] = s1[ok] / counts[ok] / traj.dt
        diffusion[ok, i] = s2[ok] / counts[ok] / (2.0 * traj.dt)
    return KmField(edges, counts, drift, diffusion, min_count)


def km_bin_means(field: KmField, traj: Trajectory, fn) -> np.ndarray:
    """Average of ``fn(state)`` over the transitions that start in each cell (NaN where invalid)."""
    x = traj.states[:-1]
    n = x.shape[1]
    bins = len(field.edges[0]) - 1
    lo = np.array([e[0] for e in field.edges])
    hi = np.array([e[-1] for e in field.edges])
    width = np.where(hi > lo, hi - lo, 1.0)
    idx = np.clip(((x - lo) / width * bins).astype(np.intp), 0, bins - 1)
    cell = np.ravel_multi_index(tuple(idx.T), (bins,) * n)
    values = np.asarray(fn(x), dtype=np.float64)
    out = np.full((field.counts.size, values.shape[1]), np.nan)
    ok = field.valid
    for i in range(values.shape[1]):
        s = np.bincount(cell, weights=values[:, i], minlength=field.counts.size)
        out[ok, i] = s[ok] / field.counts[ok]
    return out


# ------------------------------------------------------------------ E-SINDy


def _ridge_fit(a: np.ndarray, b: np.ndarray, ridge: float) -> np.ndarray:
    k = a.shape[1]
    if ridge > 0:
        a = np.vstack([a, np.sqrt(ridge) * np.eye(k)])
        b = np.concatenate([b, np.zeros(k)])
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < k:
        raise np.linalg.LinAlgError(f"singular regression: rank {rank} < {k} active terms")
    return sol


def stlsq(theta, xdot, threshold: float, ridge: float = 0.0, iters: int = 10) -> np.ndarray:
    """Sequentially thresholded ridge regression, one equation at a time."""
    theta = np.asarray(theta, dtype=np.float64)
    xdot = np.asarray(xdot, dtype=np.float64)
    if xdot.ndim == 1:
        xdot = xdot[:, None]
    if theta.ndim != 2 or theta.shape[0] != xdot.shape[0]:
        raise ad.DimensionError(f"stlsq: theta {theta.shape} vs derivatives {xdot.shape}")
    if iters < 1 or threshold < 0 or ridge < 0:
        raise ValueError("stlsq needs iters >= 1 and nonnegative threshold/ridge")
    l, n = theta.shape[1], xdot.shape[1]
    coef = np.zeros((l, n))
    for eq in range(n):
        support = np.ones(l, dtype=bool)
        for _ in range(iters):
            c = np.zeros(l)
            c[support] = _ridge_fit(theta[:, support], xdot[:, eq], ridge)
            keep = support & (np.abs(c) >= threshold)
            if np.array_equal(keep, support):
                break
            support = keep
            if not support.any():
                break
        # refit on the final support so surviving coefficients are unbiased by dropped terms
        if support.any():
            coef[support, eq] = _ridge_fit(theta[:, support], xdot[:, eq], ridge)
    return coef


@dataclass(frozen=True)
class EsindyConfig:
    n_models: int = 100
    subsample_frac: float = 1.0
    threshold: float = 0.1
    ridge: float = 0.05
    iters: int = 10


def esindy(
    data: Trajectory,
    library: LibrarySpec,
    n_models: int = 100,
    subsample_frac: float = 1.0,
    threshold: float = 0.1,
    ridge: float = 0.05,
    iters: int = 10,
    seed: int = 0,
) -> CoefficientEnsemble:
    """Bootstrap-aggregated STLSQ (rows drawn with replacement)."""
    if n_models < 2:
        raise ValueError("esindy needs at least 2 models")
    if not 0 < subsample_frac <= 1:
        raise ValueError("subsample_frac must be in (0, 1]")
    if data.derivatives is None:
        raise ad.ContractError("esindy: trajectory has no derivatives")
    theta = evaluate_library(library, data.states)
    m = theta.shape[0]
    k = max(1, int(round(subsample_frac * m)))
    rng = rngs.stream(seed, rngs.BOOTSTRAP)
    reps = []
    for _ in range(n_models):
        rows = rng.integers(0, m, size=k)
        reps.append(stlsq(theta[rows], data.derivatives[rows], threshold, ridge, iters))
    return CoefficientEnsemble.from_samples(np.stack(reps))


# ------------------------------------------------------------------ Table 1

IC_JITTER = 0.5


def perturbed_initial_condition(spec: SystemSpec, seed: int) -> np.ndarray:
    base = initial_condition(spec, "train")
    return base + IC_JITTER * rngs.stream(seed, rngs.SIMULATE, 1).standard_normal(base.shape)


def score(ensemble: CoefficientEnsemble, spec: SystemSpec, library: LibrarySpec) -> dict:
    """Mean- and std-RMSE against ground truth; std-RMSE is None when the true stds are all zero."""
    true_mean, true_std = ground_truth(spec, library)
    out = {"mean_rmse": coefficient_rmse(true_mean, ensemble.mean)}
    out["std_rmse"] = coefficient_rmse(true_std, ensemble.std) if np.any(true_std) else None
    return out


def _table1_seed(job: tuple) -> dict:
    from hypersindy.training import train

    run, seed = job
    spec = system_spec(run.system.name, run.system.sigma, run.system.n)
    library = run.library_spec()
    data = make_dataset(spec, "train", seed=seed, steps=run.data.steps, dt=run.data.dt,
                        x0=perturbed_initial_condition(spec, seed))
    cfg = run.train_config(seed=seed)
    model, _ = train(cfg, data, library)
    hyper = sample_coefficients(model, run.evaluation.samples, seed=seed)
    e = run.evaluation.esindy
    ens = esindy(data, library, e.n_models, e.subsample_frac, e.threshold, e.ridge, e.iters, seed=seed)
    return {"seed": seed, "hypersindy": score(hyper, spec, library), "esindy": score(ens, spec, library)}


def _spread(values: list) -> dict:
    arr = np.array(values, dtype=np.float64)
    return {"value": float(arr.mean()), "spread": float(arr.std())}


def worker_count(jobs: int) -> int:
    cap = os.environ.get("SSL_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def table1_experiment(run, n_seeds: int, first_seed: int = 0) -> dict:
    """Per-seed simulate/train/fit/score, summarised as mean and population std across seeds.

    ``run`` is a :class:`hypersindy.config.RunConfig`. Seeds run in separate
    processes, at most ``SSL_THREADS`` at a time.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    if run.system.name not in ("lorenz", "rossler"):
        raise ValueError(f"table 1 covers lorenz and rossler, not {run.system.name}")
    jobs = [(run, first_seed + k) for k in range(n_seeds)]
    workers = worker_count(len(jobs))
    if workers == 1:
        per_seed = [_table1_seed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_table1_seed, jobs))

    summary = {"system": run.system.name, "sigma": run.system.sigma, "seeds": [r["seed"] for r in per_seed]}
    for method in ("hypersindy", "esindy"):
        summary[method] = {}
        for stat in ("mean_rmse", "std_rmse"):
            vals = [r[method][stat] for r in per_seed]
            summary[method][stat] = None if any(v is None for v in vals) else _spread(vals)
    summary["runs"] = per_seed
    return summary
