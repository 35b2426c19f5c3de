"""The four end-to-end training schemes and BLER evaluation.

Schemes: "optimal" (transmitter gradients through the known channel), "gan"
and "ra-gan" (gradients through a generator surrogate, plain or residual),
and "rl" (Gaussian-perturbation policy gradient with a mean baseline).
Every inner iteration steps the present networks once each, in the order
discriminator, generator, receiver, transmitter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import adversarial, autodiff, channels, comms, nn
from .adversarial import AdversarialPair, regularized_parts
from .errors import ConfigError, ContractError, TrainingAbort

SCHEME_TAGS = ("optimal", "gan", "ra-gan", "rl")

# Adversarial-step settings. The discriminator takes several steps per
# inner iteration and the generator moves slowly with low momentum: the
# 1:1 alternation at shared defaults lets the generator out-run the tiny
# discriminator, and the game then orbits instead of settling on the
# channel's noise statistics.
GAN_D_STEPS = 5
GAN_G_LR = 1e-4
GAN_BETA1 = 0.5


@dataclass
class Scheme:
    tag: str
    epochs: int = 50
    sigma_p: float = 0.15  # exploration spread for the rl scheme

    def __post_init__(self):
        if self.tag not in SCHEME_TAGS:
            raise ConfigError("unknown scheme tag %r" % (self.tag,))
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0, got %d" % (self.epochs,))


@dataclass
class ChannelSpec:
    kind: str  # awgn | rayleigh | dataset
    dataset: channels.ChannelDataset | None = None

    def __post_init__(self):
        if self.kind not in ("awgn", "rayleigh", "dataset"):
            raise ConfigError("unknown channel kind %r" % (self.kind,))
        if self.kind == "dataset" and self.dataset is None:
            raise ConfigError("dataset channel needs a loaded ChannelDataset")


@dataclass
class TrainReport:
    """Per-epoch traces: epoch means of the losses/penalties used in the
    steps, plus validation BLER at the training Eb/N0."""
    l_hat_r: list = field(default_factory=list)
    l_hat_t: list = field(default_factory=list)
    l_tilde_r: list = field(default_factory=list)
    l_tilde_t: list = field(default_factory=list)
    l_hat_g: list = field(default_factory=list)
    l_hat_d: list = field(default_factory=list)
    pen_r: list = field(default_factory=list)
    pen_t: list = field(default_factory=list)
    pen_g: list = field(default_factory=list)
    pen_d: list = field(default_factory=list)
    val_bler: list = field(default_factory=list)
    iterations_per_epoch: int = 0
    wall_time: float = 0.0

    def n_epochs(self):
        return len(self.val_bler)


@dataclass
class TrainResult:
    theta_t: nn.ParamStore
    theta_r: nn.ParamStore
    report: TrainReport
    pair: AdversarialPair | None = None


def _as_onehot(targets, M):
    if isinstance(targets, comms.Message):
        return targets.onehot.reshape(1, -1)
    if isinstance(targets, (list, tuple)) and targets and isinstance(targets[0], comms.Message):
        return np.stack([t.onehot for t in targets])
    arr = np.asarray(targets)
    if arr.ndim == 2:
        return arr
    return comms.one_hot_batch(arr, M)


def ce_loss(p_batch, targets):
    """Cross entropy in summed-binary form: for each sample,
    -sum_j [t_j ln p_j + (1 - t_j) ln(1 - p_j)], averaged over the batch."""
    pv = autodiff._v(p_batch)
    rows = 1 if pv.ndim == 1 else pv.shape[0]
    onehot = _as_onehot(targets, pv.shape[-1])
    if pv.ndim == 1:
        onehot = onehot.reshape(pv.shape)
    if onehot.shape != pv.shape:
        raise ContractError("targets shape %s does not match probabilities %s"
                            % (onehot.shape, pv.shape))
    pos = autodiff.mul(onehot, autodiff.safe_log(p_batch))
    neg = autodiff.mul(1.0 - onehot, autodiff.safe_log(autodiff.sub(1.0, p_batch)))
    return autodiff.scale(autodiff.sum_all(autodiff.add(pos, neg)), -1.0 / rows)


def ce_per_sample(p, onehot):
    """Untaped per-sample CE values (used as rl rewards)."""
    p = np.asarray(p)
    pc = np.clip(p, 1e-12, 1.0 - 1e-12)
    qc = np.clip(1.0 - p, 1e-12, 1.0 - 1e-12)
    return -(onehot * np.log(pc) + (1.0 - onehot) * np.log(qc)).sum(axis=-1)


def _vals(base, pen, loss):
    return (float(autodiff._v(base)),
            0.0 if pen is None else float(autodiff._v(pen)),
            float(autodiff._v(loss)))


def receiver_step(theta_r, frames, onehot, lam, lr=0.001):
    """One Adam step on the receiver from real received frames.
    Returns (base CE, penalty, regularized loss) values."""
    with autodiff.Tape() as tape:
        p = comms.receive_forward(theta_r, frames, trainable=True)
        base = ce_loss(p, onehot)
        loss, pen = regularized_parts(base, theta_r, lam)
        tape.mark_output(loss)
        autodiff.backward(tape)
    nn.adam_step(theta_r, lr=lr)
    return _vals(base, pen, loss)


def transmitter_step_optimal(theta_t, theta_r, onehot, h, noise, lam, yp=None, lr=0.001):
    """Adam step on the transmitter through the true channel; the gain and
    noise realizations enter as constants, the receiver stays frozen."""
    with autodiff.Tape() as tape:
        x = comms.transmit_forward(theta_t, onehot, trainable=True)
        y = x if h is None else autodiff.complex_gain(x, h)
        y = autodiff.add(y, noise)
        frames = y if yp is None else autodiff.concat_cols(yp, y)
        p = comms.receive_forward(theta_r, frames, trainable=False)
        base = ce_loss(p, onehot)
        loss, pen = regularized_parts(base, theta_t, lam)
        tape.mark_output(loss)
        autodiff.backward(tape)
    nn.adam_step(theta_t, lr=lr)
    return _vals(base, pen, loss)


def transmitter_step_surrogate(theta_t, pair, theta_r, onehot, lam, rng, yp=None, lr=0.001):
    """Adam step on the transmitter through the frozen generator and frozen
    receiver. In residual mode the skip connection contributes its extra
    identity gradient path."""
    with autodiff.Tape() as tape:
        x = comms.transmit_forward(theta_t, onehot, trainable=True)
        cond = x if yp is None else autodiff.concat_cols(x, yp)
        y_fake = adversarial.generate(pair, cond, rng, trainable=False)
        frames = y_fake if yp is None else autodiff.concat_cols(yp, y_fake)
        p = comms.receive_forward(theta_r, frames, trainable=False)
        base = ce_loss(p, onehot)
        loss, pen = regularized_parts(base, theta_t, lam)
        tape.mark_output(loss)
        autodiff.backward(tape)
    nn.adam_step(theta_t, lr=lr)
    return _vals(base, pen, loss)


def gan_steps(pair, y_real, x, lam, rng, yp=None, lr=0.001,
              d_steps=GAN_D_STEPS, g_lr=GAN_G_LR, beta1=GAN_BETA1):
    """Discriminator step(s) then one generator step. Real and fake batches
    share the same transmitted signals; each generator forward draws its
    own latent z. Returned values come from the last D step and the G step."""
    if np.shape(y_real)[0] != np.shape(x)[0]:
        raise ContractError("real and transmitted batch sizes differ")
    cond = x if yp is None else np.hstack([x, yp])
    real_in = np.asarray(adversarial.discriminator_features(pair, cond, y_real))

    d_base = d_loss = d_pen = None
    for _ in range(d_steps):
        fake = np.asarray(adversarial.generate(pair, cond, rng))
        fake_in = np.asarray(adversarial.discriminator_features(pair, cond, fake))
        with autodiff.Tape() as tape:
            d_base = adversarial.discriminator_loss(pair, real_in, fake_in, trainable=True)
            d_loss, d_pen = regularized_parts(d_base, pair.theta_d, lam)
            tape.mark_output(d_loss)
            autodiff.backward(tape)
        nn.adam_step(pair.theta_d, lr=lr, beta1=beta1)

    with autodiff.Tape() as tape:
        fake_node = adversarial.generate(pair, cond, rng, trainable=True)
        g_base = adversarial.generator_loss(
            pair, adversarial.discriminator_features(pair, cond, fake_node))
        g_loss, g_pen = regularized_parts(g_base, pair.theta_g, lam)
        tape.mark_output(g_loss)
        autodiff.backward(tape)
    nn.adam_step(pair.theta_g, lr=g_lr, beta1=beta1)

    return _vals(d_base, d_pen, d_loss), _vals(g_base, g_pen, g_loss)


def transmitter_step_rl(theta_t, theta_r, onehot, h, noise_var, sigma_p,
                        explore_rng, channel_rng, lam, yp=None, lr=0.001):
    """Policy-gradient transmitter step: explore around the transmitter
    output with a power-preserving Gaussian perturbation, use per-sample CE
    from the frozen receiver as rewards (batch-mean baseline subtracted),
    and descend the resulting score-function estimate.

    The reported base loss is the mean per-sample CE of the exploratory
    transmissions (the communication loss actually achieved), not the
    internal score-function objective."""
    if not 0.0 < sigma_p < 1.0:
        raise ConfigError("sigma_p must lie in (0, 1), got %r" % (sigma_p,))
    x = np.asarray(comms.transmit_forward(theta_t, onehot, trainable=False))
    keep = np.sqrt(1.0 - sigma_p ** 2)
    w = explore_rng.normal(0.0, np.sqrt(0.5), size=x.shape)
    x_tilde = keep * x + sigma_p * w

    y = x_tilde if h is None else np.asarray(autodiff.complex_gain(x_tilde, h))
    y = channels.awgn_apply(y, noise_var, channel_rng)
    frames = y if yp is None else np.hstack([yp, y])
    p = np.asarray(comms.receive_forward(theta_r, frames, trainable=False))
    rewards = ce_per_sample(p, onehot)
    advantage = rewards - rewards.mean()
    weights = np.repeat(advantage[:, None], x.shape[1], axis=1)

    with autodiff.Tape() as tape:
        x_node = comms.transmit_forward(theta_t, onehot, trainable=True)
        d = autodiff.sub(x_tilde, autodiff.scale(x_node, keep))
        sq = autodiff.mul(d, d)
        score = autodiff.scale(autodiff.sum_all(autodiff.mul(sq, weights)),
                               -1.0 / (sigma_p ** 2 * x.shape[0]))
        loss, pen = regularized_parts(score, theta_t, lam)
        tape.mark_output(loss)
        autodiff.backward(tape)
    nn.adam_step(theta_t, lr=lr)

    base = float(rewards.mean())
    pen_v = 0.0 if pen is None else float(autodiff._v(pen))
    return base, pen_v, base + pen_v


def _gain_batch(channel_spec, size, rng, split):
    if channel_spec.kind == "awgn":
        return None
    if channel_spec.kind == "rayleigh":
        return channels.rayleigh_batch(rng, size)
    pool = channel_spec.dataset.split(split)
    if len(pool) == 0:
        raise ContractError("dataset split %r is empty" % (split,))
    return pool[rng.integers(0, len(pool), size=size)]


def evaluate_bler(theta_t, theta_r, *, M, n, noise_var, channel_spec, pilot,
                  n_messages, rng, batch_size=4096):
    """Monte-Carlo block error rate of the current transmitter/receiver.
    Fading gains come from the validation side of dataset channels."""
    if n_messages < 1:
        raise ConfigError("n_messages must be >= 1, got %d" % (n_messages,))
    xp = channels.pilot_signal(n) if pilot else None
    sigma = np.sqrt(noise_var / 2.0)
    wrong = 0
    left = n_messages
    while left > 0:
        b = min(batch_size, left)
        msgs = rng.integers(0, M, size=b)
        onehot = comms.one_hot_batch(msgs, M)
        x = np.asarray(comms.transmit_forward(theta_t, onehot, trainable=False))
        h = _gain_batch(channel_spec, b, rng, split="valid")
        y = x if h is None else np.asarray(autodiff.complex_gain(x, h))
        y = y + rng.normal(0.0, sigma, size=x.shape)
        if pilot:
            xpr = np.broadcast_to(xp, x.shape)
            yp = xpr if h is None else np.asarray(autodiff.complex_gain(xpr, h))
            yp = yp + rng.normal(0.0, sigma, size=x.shape)
            y = np.hstack([yp, y])
        p = np.asarray(comms.receive_forward(theta_r, y, trainable=False))
        wrong += int((p.argmax(axis=1) != msgs).sum())
        left -= b
    return wrong / n_messages


def _check_finite(step, value, scheme, epoch, iteration):
    if not np.isfinite(value):
        raise TrainingAbort(
            "non-finite %s loss %r at epoch %d, iteration %d" % (step, value, epoch, iteration),
            scheme=scheme.tag, epoch=epoch, iteration=iteration, step=step)


def train(scheme, cfg, channel_spec, rngs, *, lr=0.001, n_train=10000, val_n=10000):
    """Run one scheme end to end.

    Per epoch there are floor(n_train / B) inner iterations; each draws a
    fresh uniform message batch and channel realizations, forms the real
    received frames (pilot block prepended when pilots are on), and steps
    the present networks in the order D, G, R, T. The weight penalty is
    applied only by the ra-gan scheme, to the receiver and transmitter
    losses; gan, optimal and rl run on the plain losses.
    """
    M, n, B = cfg.M, cfg.n, cfg.B
    pilot = cfg.pilot_enabled
    noise_var = comms.ebn0_to_noise_var(cfg.ebn0_db, M, n)
    lam = cfg.lam if scheme.tag == "ra-gan" else 0.0
    iters = n_train // B
    if iters < 1:
        raise ConfigError("n_train %d gives no full batch of size %d" % (n_train, B))

    pair = None
    if scheme.tag in ("gan", "ra-gan"):
        pair = AdversarialPair.build(M, n, rngs.init,
                                     residual_mode=(scheme.tag == "ra-gan"), pilot=pilot)
    theta_r = comms.build_receiver(M, n, rngs.init, pilot=pilot)
    theta_t = comms.build_transmitter(M, n, rngs.init)
    xp = channels.pilot_signal(n) if pilot else None
    sigma = np.sqrt(noise_var / 2.0)

    report = TrainReport(iterations_per_epoch=iters)
    t0 = time.monotonic()
    for epoch in range(scheme.epochs):
        acc = np.zeros(10)
        for it in range(iters):
            msgs = rngs.messages.integers(0, M, size=B)
            onehot = comms.one_hot_batch(msgs, M)
            x = np.asarray(comms.transmit_forward(theta_t, onehot, trainable=False))
            h = _gain_batch(channel_spec, B, rngs.channel, split="train")
            w = rngs.channel.normal(0.0, sigma, size=x.shape)
            y = (x if h is None else np.asarray(autodiff.complex_gain(x, h))) + w
            yp = None
            if pilot:
                xpr = np.broadcast_to(xp, x.shape)
                yp = xpr if h is None else np.asarray(autodiff.complex_gain(xpr, h))
                yp = yp + rngs.channel.normal(0.0, sigma, size=x.shape)
            frames = y if yp is None else np.hstack([yp, y])

            d_vals = g_vals = (0.0, 0.0, 0.0)
            if pair is not None:
                # adversarial pair runs unregularized: the weight penalty
                # under Adam freezes the discriminator into a dead zero
                # state (see gan_steps notes); lam still applies to R and T.
                # The plain-gan baseline keeps the 1:1 alternation at shared
                # defaults; the stabilized game belongs to the ra-gan scheme.
                if scheme.tag == "ra-gan":
                    d_vals, g_vals = gan_steps(pair, y, x, 0.0, rngs.latent, yp=yp, lr=lr)
                else:
                    d_vals, g_vals = gan_steps(pair, y, x, 0.0, rngs.latent, yp=yp,
                                               lr=lr, d_steps=1, g_lr=lr, beta1=0.9)
                _check_finite("discriminator", d_vals[2], scheme, epoch, it)
                _check_finite("generator", g_vals[2], scheme, epoch, it)
            r_vals = receiver_step(theta_r, frames, onehot, lam, lr=lr)
            _check_finite("receiver", r_vals[2], scheme, epoch, it)
            if scheme.tag == "optimal":
                t_vals = transmitter_step_optimal(theta_t, theta_r, onehot, h, w, lam,
                                                  yp=yp, lr=lr)
            elif scheme.tag == "rl":
                t_vals = transmitter_step_rl(theta_t, theta_r, onehot, h, noise_var,
                                             scheme.sigma_p, rngs.rl_explore,
                                             rngs.channel, lam, yp=yp, lr=lr)
            else:
                t_vals = transmitter_step_surrogate(theta_t, pair, theta_r, onehot, lam,
                                                    rngs.latent, yp=yp, lr=lr)
            _check_finite("transmitter", t_vals[2], scheme, epoch, it)

            acc += (r_vals[0], r_vals[1], r_vals[2],
                    t_vals[0], t_vals[1], t_vals[2],
                    g_vals[1], g_vals[2], d_vals[1], d_vals[2])
        means = acc / iters
        val = evaluate_bler(theta_t, theta_r, M=M, n=n, noise_var=noise_var,
                            channel_spec=channel_spec, pilot=pilot,
                            n_messages=val_n, rng=rngs.eval)
        report.l_tilde_r.append(means[0])
        report.pen_r.append(means[1])
        report.l_hat_r.append(means[2])
        report.l_tilde_t.append(means[3])
        report.pen_t.append(means[4])
        report.l_hat_t.append(means[5])
        report.pen_g.append(means[6])
        report.l_hat_g.append(means[7])
        report.pen_d.append(means[8])
        report.l_hat_d.append(means[9])
        report.val_bler.append(val)
    report.wall_time = time.monotonic() - t0
    return TrainResult(theta_t=theta_t, theta_r=theta_r, report=report, pair=pair)
