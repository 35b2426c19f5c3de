"""Stochastic channels: AWGN, Rayleigh block fading with pilot framing, and
file-backed channel-coefficient datasets.

Dataset files are plain text, one sample per line as "re,im"; lines starting
with '#' are comments. Samples are normalized on load so mean |h|^2 = 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .comms import Signal
from .errors import ContractError, DatasetError


@dataclass
class ChannelRealization:
    h: complex            # block-fading gain, 1+0j for AWGN
    noise_var: float      # per complex use


@dataclass
class PilotFrame:
    xp: np.ndarray
    yp: np.ndarray
    y: np.ndarray

    @property
    def frame(self):
        return np.concatenate([self.yp, self.y])


def _as_array(x):
    if isinstance(x, Signal):
        return x.re_im
    return np.asarray(x, dtype=np.float64)


def awgn_apply(x, noise_var, rng):
    """y = x + w with per-real-component variance noise_var / 2."""
    x = _as_array(x)
    if noise_var == 0.0:
        return x.copy()
    return x + rng.normal(0.0, np.sqrt(noise_var / 2.0), size=x.shape)


def rayleigh_sample(rng):
    """One CN(0, 1) gain."""
    re, im = rng.normal(0.0, np.sqrt(0.5), size=2)
    return complex(re, im)


def rayleigh_batch(rng, size):
    g = rng.normal(0.0, np.sqrt(0.5), size=(2, size))
    return g[0] + 1j * g[1]


def fading_apply(x, realization, rng):
    """y = h x + w on interleaved pairs (one gain for the whole block)."""
    x = _as_array(x)
    y = autodiff.complex_gain(x, realization.h)
    if realization.noise_var > 0.0:
        y = y + rng.normal(0.0, np.sqrt(realization.noise_var / 2.0), size=x.shape)
    return y


def pilot_signal(n):
    """The fixed known pilot: n uses of 1+0j (already unit per-use power)."""
    return np.tile(np.array([1.0, 0.0]), n)


def make_pilot_frame(x, realization, rng):
    """Send the pilot block then the data block through the same gain with
    independent noise; the receiver input is concat(yp, y)."""
    x = _as_array(x)
    n = x.shape[-1] // 2
    xp = pilot_signal(n)
    yp = fading_apply(xp, realization, rng)
    y = fading_apply(x, realization, rng)
    return PilotFrame(xp=xp, yp=yp, y=y)


@dataclass
class ChannelDataset:
    samples: np.ndarray           # complex, normalized to mean |h|^2 = 1
    source_path: str
    normalization_factor: float   # raw samples were divided by this
    n_train: int

    @property
    def train(self):
        return self.samples[:self.n_train]

    @property
    def valid(self):
        return self.samples[self.n_train:]

    def split(self, name):
        if name == "train":
            return self.train
        if name == "valid":
            return self.valid
        raise ContractError("unknown split %r" % (name,))


def dataset_load(path):
    """Load and normalize a channel file; first 80% of rows (rounded up)
    form the train split, the rest the validation split."""
    if not os.path.exists(path):
        raise DatasetError("channel file not found: %s" % (path,))
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split(",")
            if len(parts) != 2:
                raise DatasetError("%s:%d: expected 're,im', got %r" % (path, lineno, text))
            try:
                rows.append(complex(float(parts[0]), float(parts[1])))
            except ValueError:
                raise DatasetError("%s:%d: non-numeric value in %r"
                                   % (path, lineno, text)) from None
    if not rows:
        raise DatasetError("channel file has no samples: %s" % (path,))
    raw = np.asarray(rows, dtype=np.complex128)
    factor = float(np.sqrt(np.mean(np.abs(raw) ** 2)))
    if factor < 1e-15:
        raise DatasetError("channel file is all zeros: %s" % (path,))
    samples = raw / factor
    n_train = int(np.ceil(0.8 * len(samples)))
    return ChannelDataset(samples=samples, source_path=str(path),
                          normalization_factor=factor, n_train=n_train)


def dataset_sample_batch(ds, B, split, rng, noise_var=0.0):
    """B gains drawn uniformly with replacement from one split, each paired
    with the configured noise variance."""
    pool = ds.split(split)
    if len(pool) == 0:
        raise ContractError("dataset split %r is empty" % (split,))
    picks = pool[rng.integers(0, len(pool), size=B)]
    return [ChannelRealization(h=complex(h), noise_var=noise_var) for h in picks]
