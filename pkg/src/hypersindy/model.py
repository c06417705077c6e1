"""The HyperSINDy network.

An encoder maps ``(x, xdot)`` to a Gaussian posterior over a latent ``z``; a
hypernetwork turns each ``z`` into a coefficient matrix of shape ``(l, n)``;
a hard-concrete gate matrix switches library terms on and off; and the
predicted derivative is ``theta(x) @ (coeffs * mask)`` row by row.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from hypersindy import autodiff as ad
from hypersindy.autodiff import DomainError, Tensor
from hypersindy.library import LibrarySpec, evaluate_library

BETA_L0 = 2.0 / 3.0
GAMMA = -0.1
ZETA = 1.1
# keeps log(u) and log(1 - u) finite for uniform draws
_U_EPS = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    library: LibrarySpec
    latent_dim: int = 6
    hidden_width: int = 64
    num_hidden: int = 5
    log_alpha_init: float = 2.2
    beta_l0: float = BETA_L0
    gamma: float = GAMMA
    zeta: float = ZETA

    @property
    def state_dim(self) -> int:
        return self.library.state_dim

    @property
    def term_count(self) -> int:
        return self.library.term_count


@dataclass
class MLP:
    """Fully connected stack with ELU on every hidden layer.

    With ``linear_output`` the last layer is affine and unactivated; without
    it the stack ends at the last hidden activation (used as an encoder trunk).
    """

    weights: list[Tensor]
    biases: list[Tensor]
    linear_output: bool = True

    @classmethod
    def init(cls, sizes: list[int], rng: np.random.Generator, linear_output: bool = True) -> MLP:
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            # kaiming-uniform with a=sqrt(5): bound 1/sqrt(fan_in)
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True))
            biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
        return cls(weights, biases, linear_output)

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.add(ad.matmul(x, w), b)
            if i < last or not self.linear_output:
                x = ad.elu(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class LatentSample:
    mu: Tensor
    logvar: Tensor
    sigma: Tensor
    z: Tensor


@dataclass
class SparseMask:
    """Hard-concrete gates over the ``(l, n)`` coefficient matrix.

    ``permanent_zero`` follows the auxiliary-matrix convention: 1 leaves the
    gate trainable, 0 pins it to zero for good.
    """

    log_alpha: Tensor
    permanent_zero: np.ndarray
    beta_l0: float = BETA_L0
    gamma: float = GAMMA
    zeta: float = ZETA

    @property
    def active_count(self) -> int:
        return int(self.permanent_zero.sum())


@dataclass
class Normalizer:
    """Fixed data-derived rescalings; never trained.

    ``input_shift``/``input_scale`` standardise the ``2n`` encoder inputs.
    The hypernetwork emits coefficients in units where every library column
    and every derivative has unit RMS over the training data; ``coef_scale``
    (shape ``(l, n)``) converts them back to raw library coefficients.
    """

    input_shift: np.ndarray
    input_scale: np.ndarray
    coef_scale: np.ndarray

    @classmethod
    def identity(cls, n: int, l: int) -> Normalizer:
        return cls(np.zeros(2 * n), np.ones(2 * n), np.ones((l, n)))

    @classmethod
    def fit(cls, x: np.ndarray, xdot: np.ndarray, theta: np.ndarray) -> Normalizer:
        inputs = np.concatenate([x, xdot], axis=1)
        spread = inputs.std(axis=0)
        col = np.sqrt(np.mean(theta * theta, axis=0))
        target = np.sqrt(np.mean(xdot * xdot, axis=0))
        col = np.where(col > 0, col, 1.0)
        target = np.where(target > 0, target, 1.0)
        return cls(inputs.mean(axis=0), np.where(spread > 0, spread, 1.0), target[None, :] / col[:, None])


@dataclass
class HyperSINDy:
    config: ModelConfig
    encoder: MLP
    head_mu: MLP
    head_logvar: MLP
    hypernet: MLP
    mask: SparseMask
    norm: Normalizer
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator, norm: Normalizer | None = None) -> HyperSINDy:
        n, d, h, l = config.state_dim, config.latent_dim, config.hidden_width, config.term_count
        trunk = [2 * n] + [h] * config.num_hidden
        hyper = [d] + [h] * config.num_hidden + [l * n]
        encoder = MLP.init(trunk, rng, linear_output=False)
        head_mu = MLP.init([h, d], rng)
        head_logvar = MLP.init([h, d], rng)
        hypernet = MLP.init(hyper, rng)
        mask = SparseMask(
            Tensor(np.full((l, n), config.log_alpha_init), requires_grad=True),
            np.ones((l, n)),
            config.beta_l0,
            config.gamma,
            config.zeta,
        )
        if norm is None:
            norm = Normalizer.identity(n, l)
        return cls(config, encoder, head_mu, head_logvar, hypernet, mask, norm)

    def parameters(self) -> list[Tensor]:
        return [
            *self.encoder.parameters(),
            *self.head_mu.parameters(),
            *self.head_logvar.parameters(),
            *self.hypernet.parameters(),
            self.mask.log_alpha,
        ]

    def freeze(self) -> HyperSINDy:
        """Deep copy whose parameters no longer record a graph."""
        frozen = copy.deepcopy(self)
        for p in frozen.parameters():
            p.requires_grad = False
            p.grad = None
        return frozen

    def theta(self, x) -> np.ndarray:
        return evaluate_library(self.config.library, x)


# ------------------------------------------------------------------ encoder


def encode(model: HyperSINDy, x, xdot, rng: np.random.Generator | None = None, eps=None) -> LatentSample:
    """Reparameterised posterior sample; pass ``eps`` to fix the noise (zeros give ``z = mu``)."""
    if xdot is None:
        raise ad.ContractError("encode: derivatives are required")
    x = np.asarray(x, dtype=np.float64)
    xdot = np.asarray(xdot, dtype=np.float64)
    if x.shape != xdot.shape or x.ndim != 2 or x.shape[1] != model.config.state_dim:
        raise ad.DimensionError(f"encode: states {x.shape} and derivatives {xdot.shape} do not agree")
    inputs = (np.concatenate([x, xdot], axis=1) - model.norm.input_shift) / model.norm.input_scale
    h = model.encoder(Tensor(inputs))
    mu = model.head_mu(h)
    logvar = model.head_logvar(h)
    sigma = ad.exp(ad.scale(logvar, 0.5))
    if eps is None:
        eps = (rng or np.random.default_rng()).standard_normal(mu.shape)
    z = ad.add(mu, ad.mul(sigma, np.asarray(eps, dtype=np.float64)))
    return LatentSample(mu, logvar, sigma, z)


def sample_prior(d: int, b: int, rng: np.random.Generator) -> np.ndarray:
    if d < 1 or b < 1:
        raise ValueError(f"sample_prior needs positive sizes, got d={d}, b={b}")
    return rng.standard_normal((b, d))


def hypernet_coefficients(model: HyperSINDy, z) -> Tensor:
    z = ad.as_tensor(z)
    if z.ndim != 2 or z.shape[1] != model.config.latent_dim:
        raise ad.DimensionError(f"hypernet: latent batch {z.shape} does not match d={model.config.latent_dim}")
    out = ad.reshape(model.hypernet(z), (z.shape[0], model.config.term_count, model.config.state_dim))
    return ad.mul(out, model.norm.coef_scale)


# --------------------------------------------------------------------- mask


def _stretch_clamp(s: Tensor, mask: SparseMask) -> Tensor:
    stretched = ad.add(ad.scale(s, mask.zeta - mask.gamma), mask.gamma)
    return ad.mul(ad.clamp(stretched, 0.0, 1.0), mask.permanent_zero)


def mask_sample_train(mask: SparseMask, b: int, rng: np.random.Generator | None = None, u=None) -> Tensor:
    """One stochastic hard-concrete gate matrix per batch example, shape ``(b, l, n)``."""
    shape = (b, *mask.log_alpha.shape)
    if u is None:
        u = (rng or np.random.default_rng()).uniform(size=shape)
    u = np.clip(np.broadcast_to(np.asarray(u, dtype=np.float64), shape), _U_EPS, 1.0 - _U_EPS)
    logit_noise = np.log(u) - np.log1p(-u)
    s = ad.sigmoid(ad.scale(ad.add(logit_noise, mask.log_alpha), 1.0 / mask.beta_l0))
    return _stretch_clamp(s, mask)


def mask_eval(mask: SparseMask) -> Tensor:
    return _stretch_clamp(ad.sigmoid(mask.log_alpha), mask)


def l0_penalty(mask: SparseMask) -> Tensor:
    # expected number of open gates; uses log(-gamma/zeta) so the shift is real
    shift = mask.beta_l0 * np.log(-mask.gamma / mask.zeta)
    gate_open = ad.sigmoid(ad.add(mask.log_alpha, -shift))
    return ad.sum(ad.mul(gate_open, mask.permanent_zero))


# --------------------------------------------------------- vector field/loss


def predict_derivative(theta, coeffs: Tensor, mask: Tensor) -> Tensor:
    """Row-wise ``theta[i] @ (coeffs[i] * mask[i])``; ``mask`` may also be a single ``(l, n)`` matrix."""
    theta = np.asarray(theta, dtype=np.float64)
    coeffs = ad.as_tensor(coeffs)
    b, l = theta.shape
    if coeffs.ndim != 3 or coeffs.shape[:2] != (b, l):
        raise ad.DimensionError(f"predict_derivative: theta {theta.shape} vs coefficients {coeffs.shape}")
    masked = ad.mul(coeffs, mask)
    out = ad.matmul(Tensor(theta[:, None, :]), masked)
    return ad.reshape(out, (b, coeffs.shape[2]))


def kl_divergence(mu, sigma) -> Tensor:
    """KL from ``N(mu, sigma^2)`` to ``N(0, I)``, summed over latents and averaged over the batch."""
    mu, sigma = ad.as_tensor(mu), ad.as_tensor(sigma)
    if np.any(sigma.data <= 0):
        raise DomainError("kl_divergence: sigma must be positive")
    log_var = ad.scale(ad.log(sigma), 2.0)
    per_entry = ad.sub(ad.add(log_var, 1.0), ad.add(ad.square(mu), ad.square(sigma)))
    return ad.scale(ad.mean(ad.sum(per_entry, axis=1)), -0.5)


@dataclass
class LossParts:
    total: Tensor
    recon: float
    kl: float
    l0: float


def elbo_loss(
    model: HyperSINDy,
    x,
    xdot,
    beta: float,
    lam: float,
    rng: np.random.Generator | None = None,
    theta=None,
    eps=None,
    u=None,
) -> LossParts:
    """Reconstruction + beta * KL + lam * L0 for one minibatch.

    Reconstruction is the squared derivative error summed over state
    dimensions and averaged over the batch. ``theta`` may be passed in when
    the library has already been evaluated for ``x``.
    """
    if beta < 0 or lam < 0:
        raise ValueError("beta and lambda must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    xdot = np.asarray(xdot, dtype=np.float64)
    if rng is None and (eps is None or u is None):
        rng = np.random.default_rng()
    latent = encode(model, x, xdot, rng, eps=eps)
    coeffs = hypernet_coefficients(model, latent.z)
    gates = mask_sample_train(model.mask, x.shape[0], rng, u=u)
    if theta is None:
        theta = model.theta(x)
    pred = predict_derivative(theta, coeffs, gates)
    recon = ad.mean(ad.sum(ad.square(ad.sub(pred, xdot)), axis=1))
    kl = kl_divergence(latent.mu, latent.sigma)
    l0 = l0_penalty(model.mask)
    total = ad.add(ad.add(recon, ad.scale(kl, beta)), ad.scale(l0, lam))
    return LossParts(total, recon.item(), kl.item(), l0.item())
