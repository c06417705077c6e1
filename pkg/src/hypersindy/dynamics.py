"""Benchmark stochastic systems, their simulators and finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from hypersindy import rng

SYSTEMS = ("lorenz", "rossler", "lotka_volterra", "lorenz96")
PARAMETER_NOISE = "parameter_noise"
STATE_DIFFUSION = "state_dependent_diffusion"


class ConfigurationError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"state became non-finite at step {step}")


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    name: str
    state_dim: int
    parameter_means: tuple[float, ...]
    noise_scale: float = 0.0
    noise_kind: str = PARAMETER_NOISE


def system_spec(name: str, sigma: float = 0.0, n: int = 10) -> SystemSpec:
    if sigma < 0:
        raise ConfigurationError(f"noise scale must be nonnegative, got {sigma}")
    if name == "lorenz":
        return SystemSpec(name, 3, (10.0, 28.0, 8.0 / 3.0), sigma)
    if name == "rossler":
        return SystemSpec(name, 3, (0.2, 0.2, 5.7), sigma)
    if name == "lotka_volterra":
        return SystemSpec(name, 2, (), sigma, STATE_DIFFUSION)
    if name == "lorenz96":
        if n < 4:
            raise ConfigurationError(f"lorenz96 needs at least 4 states, got {n}")
        return SystemSpec(name, n, (8.0,) * n, sigma)
    raise ConfigurationError(f"unknown system {name!r}; expected one of {SYSTEMS}")


@dataclass(frozen=True)
class Trajectory:
    dt: float
    states: np.ndarray
    derivatives: np.ndarray | None = None
    seed: int = 0
    system: SystemSpec | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.shape[0] < 2:
            raise InsufficientDataError("a trajectory needs at least 2 states")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory contains non-finite states")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.derivatives is not None:
            d = np.asarray(self.derivatives, dtype=np.float64).reshape(states.shape)
            d.setflags(write=False)
            object.__setattr__(self, "derivatives", d)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


# --------------------------------------------------------------- vector fields


def lorenz(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    omega, rho, beta = p
    return np.array([
        omega * (x[1] - x[0]),
        x[0] * (rho - x[2]) - x[1],
        x[0] * x[1] - beta * x[2],
    ])


def rossler(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    a, b, c = p
    return np.array([-x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c)])


def lorenz96(x: np.ndarray, forcing: np.ndarray) -> np.ndarray:
    return forcing + (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x


def lotka_volterra_drift(x: np.ndarray) -> np.ndarray:
    return np.array([x[0] - x[0] * x[1], -x[1] + x[0] * x[1]])


def lotka_volterra_diffusion(x: np.ndarray) -> np.ndarray:
    return np.array([0.25 * x[0] - 0.09 * x[1], -0.09 * x[0] + 0.25 * x[1]])


_FIELDS = {"lorenz": lorenz, "rossler": rossler, "lorenz96": lorenz96}


def vector_field(spec: SystemSpec, x: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
    """Deterministic right-hand side, at the mean parameters unless ``params`` is given."""
    x = np.asarray(x, dtype=np.float64)
    if spec.name == "lotka_volterra":
        return lotka_volterra_drift(x)
    p = np.asarray(spec.parameter_means if params is None else params, dtype=np.float64)
    return _FIELDS[spec.name](x, p)


def rk4_step(f, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_inputs(spec: SystemSpec, x0, dt: float, steps: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if x0.shape != (spec.state_dim,):
        raise ConfigurationError(f"{spec.name}: initial state needs {spec.state_dim} entries, got {x0.size}")
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise ConfigurationError(f"steps must be at least 1, got {steps}")
    return x0


def simulate_rde(spec: SystemSpec, x0, dt: float, steps: int, seed: int) -> Trajectory:
    """Random ODE: parameters are redrawn every step and held fixed across its RK4 stages."""
    if spec.noise_kind != PARAMETER_NOISE:
        raise ConfigurationError(f"{spec.name} is not a parameter-noise system")
    x = _check_inputs(spec, x0, dt, steps)
    field = _FIELDS[spec.name]
    means = np.asarray(spec.parameter_means, dtype=np.float64)
    if spec.noise_scale > 0:
        draws = rng.stream(seed, rng.SIMULATE).normal(means, spec.noise_scale, size=(steps, means.size))
    else:
        draws = np.broadcast_to(means, (steps, means.size))

    out = np.empty((steps + 1, spec.state_dim))
    out[0] = x
    for t in range(steps):
        p = draws[t]
        x = rk4_step(lambda s: field(s, p), x, dt)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t + 1)
        out[t + 1] = x
    return Trajectory(dt, out, seed=seed, system=spec)


def simulate_sde(spec: SystemSpec, x0, dt: float, steps: int, seed: int) -> Trajectory:
    """Euler-Maruyama for the Lotka-Volterra SDE; ``noise_scale`` multiplies the diffusion.

    The diffusion does not vanish on the axes, so a step can carry a
    population below zero, after which the drift blows up within a few time
    units. Populations are therefore reflected at zero after every step.
    """
    if spec.name != "lotka_volterra":
        raise ConfigurationError(f"{spec.name} has no state-dependent diffusion")
    x = _check_inputs(spec, x0, dt, steps)
    xi = rng.stream(seed, rng.SIMULATE).standard_normal((steps, 2))
    root_dt = np.sqrt(dt)
    out = np.empty((steps + 1, 2))
    out[0] = x
    for t in range(steps):
        x0_, x1_ = x
        drift_x = x0_ - x0_ * x1_
        drift_y = -x1_ + x0_ * x1_
        diff_x = spec.noise_scale * (0.25 * x0_ - 0.09 * x1_)
        diff_y = spec.noise_scale * (-0.09 * x0_ + 0.25 * x1_)
        x = np.abs(np.array([
            x0_ + drift_x * dt + diff_x * root_dt * xi[t, 0],
            x1_ + drift_y * dt + diff_y * root_dt * xi[t, 1],
        ]))
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t + 1)
        out[t + 1] = x
    return Trajectory(dt, out, seed=seed, system=spec)


def simulate(spec: SystemSpec, x0, dt: float, steps: int, seed: int) -> Trajectory:
    if spec.noise_kind == STATE_DIFFUSION:
        return simulate_sde(spec, x0, dt, steps, seed)
    return simulate_rde(spec, x0, dt, steps, seed)


def estimate_derivatives(traj: Trajectory) -> Trajectory:
    """Unsmoothed finite differences: central inside, one-sided first order at the ends."""
    if traj.states.shape[0] < 3:
        raise InsufficientDataError("derivative estimation needs at least 3 states")
    d = np.gradient(traj.states, traj.dt, axis=0, edge_order=1)
    return replace(traj, derivatives=d)


# the lorenz96 test vector is the rounded one printed in the source tables
_INITIAL = {
    ("lorenz", "train"): (0.0, 1.0, 1.05),
    ("lorenz", "test"): (-1.0, 2.0, 0.5),
    ("rossler", "train"): (0.0, 1.0, 1.05),
    ("rossler", "test"): (-1.0, 2.0, 0.5),
    ("lotka_volterra", "train"): (4.0, 2.0),
    ("lotka_volterra", "test"): (2.1, 1.0),
    ("lorenz96", "test"): (7.8, 8.7, 8.5, 6.0, 9.9, 9.5, 7.5, 6.9, 6.9, 8.7),
}


def initial_condition(spec: SystemSpec, split: str) -> np.ndarray:
    if split not in ("train", "test"):
        raise ConfigurationError(f"unknown split {split!r}")
    if spec.name == "lorenz96" and split == "train":
        x0 = np.full(spec.state_dim, 8.0)
        x0[0] = 8.01
        return x0
    key = (spec.name, split)
    if key not in _INITIAL or len(_INITIAL[key]) != spec.state_dim:
        raise ConfigurationError(f"no {split} initial condition for {spec.name} with n={spec.state_dim}")
    return np.array(_INITIAL[key])


def make_dataset(
    spec: SystemSpec,
    split: str = "train",
    seed: int = 0,
    steps: int = 10000,
    dt: float = 0.01,
    x0=None,
) -> Trajectory:
    if x0 is None:
        x0 = initial_condition(spec, split)
    return estimate_derivatives(simulate(spec, x0, dt, steps, seed))
