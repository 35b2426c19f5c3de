"""Dense feed-forward networks over the autodiff tape.

A ParamStore keeps the per-layer weights and biases together with gradient
and Adam moment slots, so one object is the unit that training steps freeze,
update, and hash.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff
from .errors import ConfigError, ShapeError

ACTIVATIONS = ("relu", "elu", "tanh", "sigmoid", "softmax", "linear")

_ACTIVATION_FNS = {
    "relu": autodiff.relu,
    "elu": autodiff.elu,
    "tanh": autodiff.tanh,
    "sigmoid": autodiff.sigmoid,
    "softmax": autodiff.softmax,
    "linear": autodiff.identity,
}


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str


class ParamStore:
    """Layers of one network plus same-shaped grad and Adam moment slots."""

    def __init__(self, layers):
        for layer in layers:
            if layer.activation not in _ACTIVATION_FNS:
                raise ConfigError("unknown activation tag %r" % (layer.activation,))
        self.layers = list(layers)
        self.grads = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in self.layers]
        self.adam_m = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in self.layers]
        self.adam_v = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in self.layers]
        self.step_count = 0

    def zero_grads(self):
        for gw, gb in self.grads:
            gw[...] = 0.0
            gb[...] = 0.0

    def clone(self):
        dup = ParamStore([Layer(l.weight.copy(), l.bias.copy(), l.activation)
                          for l in self.layers])
        for dst, src in ((dup.grads, self.grads), (dup.adam_m, self.adam_m),
                         (dup.adam_v, self.adam_v)):
            for (dw, db), (sw, sb) in zip(dst, src):
                dw[...] = sw
                db[...] = sb
        dup.step_count = self.step_count
        return dup

    def num_params(self):
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def flat(self):
        """All parameters as one vector (weight then bias, layer by layer)."""
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias.ravel()])
                               for l in self.layers])

    def load_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        j = 0
        for l in self.layers:
            k = l.weight.size
            l.weight[...] = vec[j:j + k].reshape(l.weight.shape)
            j += k
            k = l.bias.size
            l.bias[...] = vec[j:j + k]
            j += k
        if j != vec.size:
            raise ShapeError("flat vector has %d entries, store needs %d" % (vec.size, j))


def xavier_init(shape, rng):
    """Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out))."""
    out_dim, in_dim = int(shape[0]), int(shape[1])
    if out_dim < 1 or in_dim < 1:
        raise ConfigError("layer dimensions must be >= 1, got %r" % (shape,))
    a = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-a, a, size=(out_dim, in_dim))


def build_network(sizes, activations, rng):
    """Dense network sizes[0] -> sizes[1] -> ...; biases start at zero."""
    if len(activations) != len(sizes) - 1:
        raise ConfigError("%d activations for %d layers" % (len(activations), len(sizes) - 1))
    layers = [Layer(xavier_init((o, i), rng), np.zeros(o), act)
              for i, o, act in zip(sizes, sizes[1:], activations)]
    return ParamStore(layers)


def activation_apply(tag, v):
    fn = _ACTIVATION_FNS.get(tag)
    if fn is None:
        raise ConfigError("unknown activation tag %r" % (tag,))
    return fn(v)


def dense_forward(params, layer_index, x, trainable=True):
    """One layer: activation(W x + b), recorded on the active tape.

    With trainable=False the layer's parameters enter as constants, so
    gradients flow through the layer but are never written to the store.
    """
    layer = params.layers[layer_index]
    width = np.shape(autodiff._v(x))[-1]
    if width != layer.weight.shape[1]:
        raise ShapeError("layer %d expects input width %d, got %d"
                         % (layer_index, layer.weight.shape[1], width))
    tape = autodiff.active_tape()
    if trainable and tape is not None:
        w = tape.param(params, layer_index, "w")
        b = tape.param(params, layer_index, "b")
    else:
        w, b = layer.weight, layer.bias
    return activation_apply(layer.activation, autodiff.affine(x, w, b))


def forward(params, x, trainable=True):
    for i in range(len(params.layers)):
        x = dense_forward(params, i, x, trainable)
    return x


def adam_step(params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update (bias-corrected) from the stored gradients."""
    params.step_count += 1
    t = params.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for layer, grad, mom, vel in zip(params.layers, params.grads, params.adam_m, params.adam_v):
        for theta, g, m, v in ((layer.weight, grad[0], mom[0], vel[0]),
                               (layer.bias, grad[1], mom[1], vel[1])):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def l2_penalty(params):
    """0.5 * sum of squared weights and biases; taped when a tape is active."""
    tape = autodiff.active_tape()
    if tape is None:
        return 0.5 * sum(float((l.weight * l.weight).sum() + (l.bias * l.bias).sum())
                         for l in params.layers)
    total = None
    for i in range(len(params.layers)):
        for kind in ("w", "b"):
            term = autodiff.half_sq_sum(tape.param(params, i, kind))
            total = term if total is None else autodiff.add(total, term)
    return total
