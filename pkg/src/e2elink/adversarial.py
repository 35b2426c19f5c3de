"""Channel-surrogate GAN: generator (plain, or with a residual skip that
adds the transmitted block back onto the network output), discriminator,
and the adversarial / regularized losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff, nn
from .errors import ConfigError, ContractError

_CLAMP_LO = 1e-12
_CLAMP_HI = 1.0 - 1e-12


@dataclass
class GeneratorInput:
    conditional: np.ndarray      # x, or concat(x, received pilot) with pilots on
    z: np.ndarray | None = None  # drawn fresh per forward call when None


class AdversarialPair:
    """Generator + discriminator stores and the skip-connection flag."""

    def __init__(self, theta_g, theta_d, n, z_dim, residual_mode=False):
        self.theta_g = theta_g
        self.theta_d = theta_d
        self.n = n
        self.z_dim = z_dim
        self.residual_mode = residual_mode

    @classmethod
    def build(cls, M, n, rng, residual_mode=False, pilot=False, z_dim=None):
        if z_dim is None:
            z_dim = 2 * n
        cond_dim = 4 * n if pilot else 2 * n
        # D scores the candidate's residual against the transmitted block,
        # with the conditioning context alongside (see discriminator_features)
        theta_d = nn.build_network([cond_dim + 2 * n, 2 * M, 2 * M, 1],
                                   ["elu", "elu", "sigmoid"], rng)
        theta_g = nn.build_network([cond_dim + z_dim, 8 * M, 8 * M, 2 * n],
                                   ["elu", "tanh", "linear"], rng)
        return cls(theta_g, theta_d, n=n, z_dim=z_dim, residual_mode=residual_mode)


def generator_body(pair, cond, z, trainable=False):
    """The generator network alone: f(concat(cond, z)), no skip."""
    return nn.forward(pair.theta_g, autodiff.concat_cols(cond, z), trainable)


def generate(pair, cond, rng, trainable=False):
    """Fake received data block for a batch of conditionals, drawing a fresh
    latent z. In residual mode the transmitted block (the first 2n columns
    of cond) is added back on the skip connection."""
    cond_v = autodiff._v(cond)
    if cond_v.ndim == 2:
        z = rng.standard_normal((cond_v.shape[0], pair.z_dim))
    else:
        z = rng.standard_normal(pair.z_dim)
    body = generator_body(pair, cond, z, trainable)
    if not pair.residual_mode:
        return body
    width = 2 * pair.n
    x = cond if cond_v.shape[-1] == width else autodiff.slice_cols(cond, 0, width)
    return autodiff.add(x, body)


def generator_forward(pair, gin, rng):
    """Plain-generator forward for one conditional vector."""
    if pair.residual_mode:
        raise ContractError("pair is in residual mode; use residual_generator_forward")
    cond = np.asarray(gin.conditional, dtype=np.float64)
    z = gin.z if gin.z is not None else rng.standard_normal(pair.z_dim)
    return np.asarray(generator_body(pair, cond, z, trainable=False))


def residual_generator_forward(pair, gin, rng):
    """Residual forward: the data signal (first 2n conditional entries) plus
    the network output."""
    if not pair.residual_mode:
        raise ContractError("pair is not in residual mode")
    cond = np.asarray(gin.conditional, dtype=np.float64)
    z = gin.z if gin.z is not None else rng.standard_normal(pair.z_dim)
    body = np.asarray(generator_body(pair, cond, z, trainable=False))
    return cond[..., :2 * pair.n] + body


def discriminator_features(pair, cond, candidate):
    """Discriminator input for one candidate received data block:
    concat(candidate - x, conditioning), where x is the transmitted block
    (the first 2n columns of cond). Presenting the residual directly lets
    the first layer see the noise statistics instead of having to subtract
    a moving constellation itself."""
    width = 2 * pair.n
    cv = autodiff._v(cond)
    x = cond if cv.shape[-1] == width else autodiff.slice_cols(cond, 0, width)
    return autodiff.concat_cols(autodiff.sub(candidate, x), cond)


def discriminator_node(pair, candidate, trainable=False):
    return nn.forward(pair.theta_d, candidate, trainable)


def discriminator_forward(pair, candidate):
    """Realness score in (0, 1); float saturation is clipped away."""
    out = np.asarray(discriminator_node(pair, np.asarray(candidate, dtype=np.float64)))
    out = np.clip(out, _CLAMP_LO, _CLAMP_HI)
    if out.ndim == 1:
        return float(out[0])
    return out


def discriminator_loss(pair, real_batch, fake_batch, trainable=True):
    """Mean over the batch of -ln D(real) - ln(1 - D(fake))."""
    rows_r = np.shape(autodiff._v(real_batch))[0]
    rows_f = np.shape(autodiff._v(fake_batch))[0]
    if rows_r != rows_f:
        raise ContractError("real and fake batch sizes differ: %d vs %d" % (rows_r, rows_f))
    d_real = discriminator_node(pair, real_batch, trainable)
    d_fake = discriminator_node(pair, fake_batch, trainable)
    term = autodiff.add(autodiff.safe_log(d_real),
                        autodiff.safe_log(autodiff.sub(1.0, d_fake)))
    return autodiff.scale(autodiff.sum_all(term), -1.0 / rows_r)


def generator_loss(pair, fake_batch):
    """Mean of -ln D(fake); the discriminator enters as constants, so its
    gradients stay exactly zero under this loss."""
    rows = np.shape(autodiff._v(fake_batch))[0]
    d_fake = discriminator_node(pair, fake_batch, trainable=False)
    return autodiff.scale(autodiff.sum_all(autodiff.safe_log(d_fake)), -1.0 / rows)


def regularized_parts(base, store, lam):
    """(base + lam * 0.5‖θ‖², the penalty term); penalty is None at lam=0."""
    if lam < 0:
        raise ConfigError("lam must be >= 0, got %r" % (lam,))
    if lam == 0.0:
        return base, None
    pen = nn.l2_penalty(store)
    if isinstance(base, autodiff.Node) or isinstance(pen, autodiff.Node):
        pen = autodiff.scale(pen, lam)
        return autodiff.add(base, pen), pen
    return base + lam * pen, lam * pen


def regularized_loss(base, store, lam):
    """base + lam * 0.5‖θ‖² over the one store being trained this step."""
    return regularized_parts(base, store, lam)[0]
