"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` records every primitive applied to tracked values in execution
order (which is already a valid topological order), and ``backward`` replays
that list in reverse, accumulating adjoints. Without an active tape every op
in this module degrades to plain numpy and returns a bare array, which is the
fast path used for evaluation-only work such as BLER sweeps.

All values are float64. Batches are rows; ops accept single vectors too.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DegenerateSignalError, ShapeError

_active_tape = None


def active_tape():
    return _active_tape


class Node:
    """One recorded value; ``grad`` is populated during backward."""

    __slots__ = ("value", "grad", "_backward")

    def __init__(self, value, backward=None):
        self.value = value
        self.grad = None
        self._backward = backward


class Tape:
    """Recorded primitives plus the bindings of parameter slots to nodes."""

    def __init__(self):
        self.nodes = []
        self.output = None
        self._param_nodes = {}
        self._stores = {}
        self._prev = None

    def __enter__(self):
        global _active_tape
        self._prev = _active_tape
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _active_tape
        _active_tape = self._prev
        return False

    def record(self, value, backward=None):
        node = Node(value, backward)
        self.nodes.append(node)
        return node

    def variable(self, value):
        """Track a free array (lets callers probe input gradients)."""
        return self.record(np.asarray(value, dtype=np.float64))

    def param(self, store, layer_index, kind):
        """Node for one weight ("w") or bias ("b") slot of a ParamStore.

        Cached per slot so repeated use within one tape aliases the same
        node and gradient contributions accumulate.
        """
        key = (id(store), layer_index, kind)
        node = self._param_nodes.get(key)
        if node is None:
            layer = store.layers[layer_index]
            node = self.record(layer.weight if kind == "w" else layer.bias)
            self._param_nodes[key] = node
            self._stores[id(store)] = store
        return node

    def mark_output(self, node):
        self.output = node
        return node


def backward(tape):
    """Backpropagate from the tape's marked scalar output.

    Writes d(output)/d(param) into every bound ParamStore's grad slots;
    slots whose parameters never influenced the output get exactly zero.
    """
    out = tape.output
    if out is None:
        raise ContractError("tape has no marked output node")
    if not isinstance(out, Node) or np.ndim(out.value) != 0:
        raise ContractError(
            "backward needs a scalar output, got shape %s" % (np.shape(out.value),))
    out.grad = np.float64(1.0)
    for node in reversed(tape.nodes):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for store in tape._stores.values():
        store.zero_grads()
    for (sid, idx, kind), node in tape._param_nodes.items():
        if node.grad is None:
            continue
        slot = tape._stores[sid].grads[idx][0 if kind == "w" else 1]
        slot[...] = node.grad
    return tape


def _v(x):
    return x.value if isinstance(x, Node) else x


def _acc(node, g):
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64)
    else:
        node.grad += g


def _record(value, bw, *inputs):
    t = _active_tape
    if t is None or not any(isinstance(i, Node) for i in inputs):
        return value
    return t.record(value, bw)


# ---------------------------------------------------------------------------
# primitives

def affine(x, w, b):
    """Dense pre-activation: x @ w.T + b, with w shaped (out, in)."""
    xv, wv, bv = _v(x), _v(w), _v(b)
    if xv.shape[-1] != wv.shape[1]:
        raise ShapeError(
            "affine input width %d != layer fan-in %d" % (xv.shape[-1], wv.shape[1]))
    out = xv @ wv.T + bv

    def bw(g):
        if isinstance(x, Node):
            _acc(x, g @ wv)
        if isinstance(w, Node):
            _acc(w, np.outer(g, xv) if g.ndim == 1 else g.T @ xv)
        if isinstance(b, Node):
            _acc(b, g if g.ndim == 1 else g.sum(axis=0))

    return _record(out, bw, x, w, b)


def relu(x):
    xv = _v(x)
    out = np.maximum(xv, 0.0)

    def bw(g):
        _acc(x, g * (xv > 0.0))

    return _record(out, bw, x)


def elu(x):
    # alpha fixed at 1
    xv = _v(x)
    out = np.where(xv > 0.0, xv, np.expm1(xv))

    def bw(g):
        _acc(x, g * np.where(xv > 0.0, 1.0, out + 1.0))

    return _record(out, bw, x)


def tanh(x):
    out = np.tanh(_v(x))

    def bw(g):
        _acc(x, g * (1.0 - out * out))

    return _record(out, bw, x)


def sigmoid(x):
    xv = _v(x)
    out = np.empty_like(xv)
    pos = xv >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
    ex = np.exp(xv[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bw(g):
        _acc(x, g * out * (1.0 - out))

    return _record(out, bw, x)


def softmax(x):
    """Row-wise stable softmax (whole vector for 1-D input)."""
    xv = _v(x)
    e = np.exp(xv - xv.max(axis=-1, keepdims=True))
    out = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        _acc(x, out * (g - dot))

    return _record(out, bw, x)


def identity(x):
    return x


def add(a, b):
    out = _v(a) + _v(b)

    def bw(g):
        if isinstance(a, Node):
            _acc(a, g)
        if isinstance(b, Node):
            _acc(b, g)

    return _record(out, bw, a, b)


def sub(a, b):
    out = _v(a) - _v(b)

    def bw(g):
        if isinstance(a, Node):
            _acc(a, g)
        if isinstance(b, Node):
            _acc(b, -g)

    return _record(out, bw, a, b)


def mul(a, b):
    """Elementwise product; tracked inputs must match the output shape."""
    av, bv = _v(a), _v(b)
    out = av * bv

    def bw(g):
        if isinstance(a, Node):
            _acc(a, g * bv)
        if isinstance(b, Node):
            _acc(b, g * av)

    return _record(out, bw, a, b)


def scale(x, c):
    c = float(c)
    out = _v(x) * c

    def bw(g):
        _acc(x, g * c)

    return _record(out, bw, x)


def log(x):
    xv = _v(x)
    out = np.log(xv)

    def bw(g):
        _acc(x, g / xv)

    return _record(out, bw, x)


def clamp(x, lo, hi):
    """Clip to [lo, hi]; gradient is zero where the value was clipped."""
    xv = _v(x)
    out = np.clip(xv, lo, hi)

    def bw(g):
        _acc(x, g * ((xv >= lo) & (xv <= hi)))

    return _record(out, bw, x)


def safe_log(x, eps=1e-12):
    """log after clamping to [eps, 1 - eps]; guards -ln 0 in the losses."""
    return log(clamp(x, eps, 1.0 - eps))


def concat_cols(*parts):
    vals = [_v(p) for p in parts]
    out = np.concatenate(vals, axis=-1)
    widths = [v.shape[-1] for v in vals]

    def bw(g):
        j = 0
        for p, w in zip(parts, widths):
            if isinstance(p, Node):
                _acc(p, g[..., j:j + w])
            j += w

    return _record(out, bw, *parts)


def slice_cols(x, start, stop):
    xv = _v(x)
    out = xv[..., start:stop]

    def bw(g):
        full = np.zeros_like(xv)
        full[..., start:stop] = g
        _acc(x, full)

    return _record(out, bw, x)


def sum_all(x):
    xv = _v(x)
    out = np.float64(xv.sum())

    def bw(g):
        _acc(x, np.full_like(xv, g))

    return _record(out, bw, x)


def mean_all(x):
    return scale(sum_all(x), 1.0 / _v(x).size)


def normalize_rows(x, n):
    """Scale each row to squared norm ``n`` (unit power per complex use)."""
    xv = _v(x)
    norms = np.sqrt((xv * xv).sum(axis=-1, keepdims=True))
    if (norms < 1e-12).any():
        raise DegenerateSignalError(
            "cannot power-normalize a signal with (near-)zero norm")
    c = np.sqrt(float(n)) / norms
    out = xv * c

    def bw(g):
        dot = (g * xv).sum(axis=-1, keepdims=True)
        _acc(x, c * (g - xv * (dot / (norms * norms))))

    return _record(out, bw, x)


def complex_gain(x, h):
    """Multiply interleaved (re, im) pairs by a constant complex gain.

    ``h`` may be a scalar or one gain per row; it is never differentiated.
    """
    xv = _v(x)
    h = np.asarray(h, dtype=np.complex128)
    a, b = h.real, h.imag
    if h.ndim == 1 and xv.ndim == 2:
        a, b = a[:, None], b[:, None]
    xr, xi = xv[..., 0::2], xv[..., 1::2]
    out = np.empty_like(xv)
    out[..., 0::2] = a * xr - b * xi
    out[..., 1::2] = b * xr + a * xi

    def bw(g):
        gr, gi = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(xv)
        gx[..., 0::2] = a * gr + b * gi
        gx[..., 1::2] = a * gi - b * gr
        _acc(x, gx)

    return _record(out, bw, x)


def half_sq_sum(x):
    """0.5 * sum(x**2); the adjoint is exactly g * x per element."""
    xv = _v(x)
    out = np.float64(0.5 * (xv * xv).sum())

    def bw(g):
        _acc(x, g * xv)

    return _record(out, bw, x)
