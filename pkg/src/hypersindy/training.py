"""Minibatch training with beta warmup, beta/lambda spikes and permanent thresholding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from hypersindy import autodiff as ad
from hypersindy import rng as rngs
from hypersindy.dynamics import Trajectory
from hypersindy.library import LibrarySpec, evaluate_library
from hypersindy.model import (
    HyperSINDy,
    ModelConfig,
    Normalizer,
    elbo_loss,
    hypernet_coefficients,
    sample_prior,
)
from hypersindy.optim import adamw_init, adamw_step

log = logging.getLogger(__name__)

BETA_WARMUP_START = 0.01
BETA_WARMUP_EPOCHS = 100


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, component: str, values: dict):
        self.epoch = epoch
        self.component = component
        self.values = values
        super().__init__(f"non-finite {component} loss at epoch {epoch}: {values}")


@dataclass
class TrainConfig:
    system: str = "lorenz"
    latent_dim: int = 6
    beta_init: float = 10.0
    beta_spike: float | None = None
    epoch_beta_spike: int | None = None
    lambda_init: float = 0.01
    lambda_spike: float | None = None
    epoch_lambda_spike: int | None = None
    epochs: int = 999
    threshold: float = 0.05
    threshold_interval: int = 100
    stat_size: int = 250
    batch_size: int = 250
    learning_rate: float = 0.005
    weight_decay: float = 0.01
    hidden_width: int = 64
    num_hidden: int = 5
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("epoch_beta_spike", "epoch_lambda_spike"):
            e = getattr(self, name)
            if e is not None and self.epochs > 0 and e >= self.epochs:
                raise ValueError(f"{name}={e} must be below epochs={self.epochs}")
        for name in ("beta_init", "lambda_init", "threshold", "learning_rate", "weight_decay"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("beta_spike", "lambda_spike"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.batch_size < 1 or self.stat_size < 1 or self.threshold_interval < 1:
            raise ValueError("batch_size, stat_size and threshold_interval must be positive")


@dataclass
class EpochRecord:
    epoch: int
    recon: float
    kl: float
    l0: float
    beta: float
    lam: float
    active_terms: int


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def beta_schedule(cfg: TrainConfig, epoch: int) -> float:
    if cfg.beta_spike is not None and cfg.epoch_beta_spike is not None and epoch >= cfg.epoch_beta_spike:
        return cfg.beta_spike
    if epoch >= BETA_WARMUP_EPOCHS:
        return cfg.beta_init
    frac = epoch / BETA_WARMUP_EPOCHS
    return BETA_WARMUP_START + frac * (cfg.beta_init - BETA_WARMUP_START)


def lambda_schedule(cfg: TrainConfig, epoch: int) -> float:
    if cfg.lambda_spike is not None and cfg.epoch_lambda_spike is not None and epoch >= cfg.epoch_lambda_spike:
        return cfg.lambda_spike
    return cfg.lambda_init


def is_threshold_epoch(cfg: TrainConfig, epoch: int) -> bool:
    return epoch > 0 and epoch % cfg.threshold_interval == 0


def threshold_update(model: HyperSINDy, cfg: TrainConfig, rng: np.random.Generator) -> int:
    """Pin gates to zero where the prior-mean coefficient magnitude is below ``cfg.threshold``."""
    z = sample_prior(model.config.latent_dim, cfg.stat_size, rng)
    with ad.no_grad():
        mean_coeffs = hypernet_coefficients(model, z).data.mean(axis=0)
    keep = model.mask.permanent_zero
    newly = (keep == 1) & (np.abs(mean_coeffs) < cfg.threshold)
    keep[newly] = 0.0
    return int(newly.sum())


def model_config(cfg: TrainConfig, library: LibrarySpec) -> ModelConfig:
    return ModelConfig(
        library=library,
        latent_dim=cfg.latent_dim,
        hidden_width=cfg.hidden_width,
        num_hidden=cfg.num_hidden,
    )


def train(
    cfg: TrainConfig,
    data: Trajectory,
    library: LibrarySpec,
    model: HyperSINDy | None = None,
    progress=None,
) -> tuple[HyperSINDy, TrainHistory]:
    """Train from scratch (or continue ``model``) and return a frozen copy plus the history.

    ``progress``, when given, is called as ``progress(record, model)`` after each epoch.
    """
    if data.derivatives is None:
        raise ad.ContractError("train: trajectory has no derivatives")
    x_all, dx_all = data.states, data.derivatives
    m = x_all.shape[0]
    if m < cfg.batch_size:
        raise ad.ContractError(f"train: {m} rows is fewer than batch_size={cfg.batch_size}")
    if x_all.shape[1] != library.state_dim:
        raise ad.DimensionError(f"train: data has n={x_all.shape[1]}, library expects {library.state_dim}")

    theta_all = evaluate_library(library, x_all)
    if model is None:
        norm = Normalizer.fit(x_all, dx_all, theta_all) if cfg.normalize else None
        model = HyperSINDy.init(model_config(cfg, library), rngs.stream(cfg.seed, rngs.INIT), norm)
    params = model.parameters()
    opt = adamw_init(params, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay)
    n_batches = m // cfg.batch_size
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        beta = beta_schedule(cfg, epoch)
        lam = lambda_schedule(cfg, epoch)
        order = rngs.stream(cfg.seed, rngs.TRAIN, epoch).permutation(m)
        sums = np.zeros(3)
        for k in range(n_batches):
            idx = order[k * cfg.batch_size:(k + 1) * cfg.batch_size]
            try:
                parts = elbo_loss(
                    model, x_all[idx], dx_all[idx], beta, lam,
                    rng=rngs.stream(cfg.seed, rngs.TRAIN, epoch, k),
                    theta=theta_all[idx],
                )
            except ad.DomainError as exc:
                # exp(logvar / 2) underflowed: the posterior scale collapsed
                raise TrainingDivergence(epoch, "kl", {"kl": float("nan"), "cause": str(exc)}) from exc
            values = {"recon": parts.recon, "kl": parts.kl, "l0": parts.l0}
            bad = [name for name, v in values.items() if not np.isfinite(v)]
            if bad:
                raise TrainingDivergence(epoch, bad[0], values)
            ad.backward(parts.total)
            adamw_step(params, opt)
            sums += (parts.recon, parts.kl, parts.l0)

        if is_threshold_epoch(cfg, epoch):
            zeroed = threshold_update(model, cfg, rngs.stream(cfg.seed, rngs.THRESHOLD, epoch))
            if zeroed:
                log.debug("epoch %d: pinned %d gates to zero", epoch, zeroed)
        mean_parts = sums / n_batches
        record = EpochRecord(epoch, *mean_parts, beta, lam, model.mask.active_count)
        history.records.append(record)
        if progress is not None:
            progress(record, model)

    model.meta.update(train_config=cfg)
    return model.freeze(), history
