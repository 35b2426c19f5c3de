"""Communication semantics of the autoencoder link.

Message one-hot encoding, the transmitter (dense layers plus power
normalization), the softmax receiver, Eb/N0 calibration, and block error
rate. Complex symbols ride as interleaved (re, im) pairs end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff, nn
from .errors import ConfigError, ContractError, DomainError


@dataclass
class Message:
    index: int
    onehot: np.ndarray


@dataclass
class Signal:
    re_im: np.ndarray  # (Re1, Im1, ..., Ren, Imn)
    n: int


@dataclass
class ProbVector:
    p: np.ndarray


@dataclass
class LinkConfig:
    M: int = 16
    n: int = 7
    ebn0_db: float = 3.0
    B: int = 320
    lam: float = 0.01
    pilot_enabled: bool = False

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError("M must be >= 2, got %d" % (self.M,))
        if self.n < 1:
            raise ConfigError("n must be >= 1, got %d" % (self.n,))
        if self.B < 1:
            raise ConfigError("B must be >= 1, got %d" % (self.B,))
        if self.lam < 0:
            raise ConfigError("lam must be >= 0, got %r" % (self.lam,))


def encode_one_hot(m, M):
    if not 0 <= m < M:
        raise DomainError("message index %d outside [0, %d)" % (m, M))
    onehot = np.zeros(M)
    onehot[m] = 1.0
    return Message(index=int(m), onehot=onehot)


def one_hot_batch(indices, M):
    indices = np.asarray(indices)
    out = np.zeros((len(indices), M))
    out[np.arange(len(indices)), indices] = 1.0
    return out


def normalize_power(v):
    """Rescale a 2n-vector so the average power per complex use is one."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[-1] // 2
    return Signal(re_im=autodiff.normalize_rows(v, n), n=n)


def transmitter_layout(M, n):
    return [M, 2 * M, 2 * n], ["relu", "linear"]


def receiver_layout(M, n, pilot=False):
    d = 4 * n if pilot else 2 * n
    return [d, 4 * M, M], ["relu", "softmax"]


def build_transmitter(M, n, rng):
    sizes, acts = transmitter_layout(M, n)
    return nn.build_network(sizes, acts, rng)


def build_receiver(M, n, rng, pilot=False):
    sizes, acts = receiver_layout(M, n, pilot)
    return nn.build_network(sizes, acts, rng)


def transmit_forward(theta_t, onehot, trainable=True):
    """Transmitter pass for a batch (or single) one-hot row: dense layers
    followed by power normalization; recorded on the active tape."""
    out = nn.forward(theta_t, onehot, trainable)
    n = theta_t.layers[-1].weight.shape[0] // 2
    return autodiff.normalize_rows(out, n)


def transmit(theta_t, msg):
    x = transmit_forward(theta_t, msg.onehot, trainable=False)
    x = np.asarray(x)
    return Signal(re_im=x, n=x.shape[-1] // 2)


def receive_forward(theta_r, y, trainable=True):
    return nn.forward(theta_r, y, trainable)


def receive(theta_r, y):
    p = receive_forward(theta_r, np.asarray(y, dtype=np.float64), trainable=False)
    return ProbVector(p=np.asarray(p))


def decide(p):
    """Index of the maximal probability; ties break to the lowest index."""
    arr = p.p if isinstance(p, ProbVector) else np.asarray(p)
    return int(np.argmax(arr))


def ebn0_to_noise_var(ebn0_db, M, n):
    """Noise variance per complex channel use under unit per-use signal
    power: n / (2 * 10^(EbN0/10) * log2 M). Each real component carries
    half of it."""
    return n / (2.0 * 10.0 ** (ebn0_db / 10.0) * np.log2(M))


def bler(decisions, truths):
    decisions = np.asarray(decisions)
    truths = np.asarray(truths)
    if decisions.shape != truths.shape:
        raise ContractError("decisions and truths lengths differ: %s vs %s"
                            % (decisions.shape, truths.shape))
    if decisions.size < 1:
        raise ContractError("bler needs at least one trial")
    return float(np.mean(decisions != truths))
