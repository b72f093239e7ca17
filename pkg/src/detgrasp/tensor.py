"""Dense double-precision tensor kernels with vector-Jacobian products.

Feature maps are plain ``numpy.ndarray`` objects in channels x height x width
layout, always float64. Every forward kernel has a ``*_backward`` companion
that takes the upstream gradient and returns gradients for each input.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _backend


class ShapeError(ValueError):
    """Incompatible tensor dimensions; ``axis`` names the offending axis."""

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class NonFiniteError(FloatingPointError):
    pass


def as_tensor(x, ndim=None, name="input"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must have {ndim} dimensions, got shape {arr.shape}", axis="ndim")
    if arr.size == 0 and arr.ndim > 0 and 0 in arr.shape:
        axis = arr.shape.index(0)
        raise ShapeError(f"{name} has an empty axis {axis}: shape {arr.shape}", axis=axis)
    return arr


def _finite(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        out = fn(*args, **kwargs)
        for arr in out if isinstance(out, tuple) else (out,):
            if isinstance(arr, np.ndarray) and not np.isfinite(arr).all():
                loc = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
                raise NonFiniteError(f"{fn.__name__} produced a non-finite value at {loc}")
        return out

    return wrapper


def _pair(v):
    if isinstance(v, (int, np.integer)):
        return int(v), int(v)
    a, b = v
    return int(a), int(b)


@dataclass(frozen=True, eq=False)
class ConvSpec:
    """Stride-1 2-D convolution parameters.

    ``weights`` has shape ``(out, in, kh, kw)``; ``padding`` is zero padding per
    side and ``dilation`` the tap spacing, both given per axis.
    """

    weights: np.ndarray
    bias: np.ndarray
    padding: Tuple[int, int] = (0, 0)
    dilation: Tuple[int, int] = (1, 1)

    def __post_init__(self):
        w = as_tensor(self.weights, 4, "weights")
        b = as_tensor(self.bias, 1, "bias")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(
                f"bias length {b.shape[0]} != out_channels {w.shape[0]}", axis="out_channels"
            )
        pad, dil = _pair(self.padding), _pair(self.dilation)
        if min(pad) < 0:
            raise ValueError(f"padding must be >= 0, got {pad}")
        if min(dil) < 1:
            raise ValueError(f"dilation must be >= 1, got {dil}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "padding", pad)
        object.__setattr__(self, "dilation", dil)

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel_size(self):
        return self.weights.shape[2], self.weights.shape[3]

    def extent(self):
        (kh, kw), (dh, dw) = self.kernel_size, self.dilation
        return (kh - 1) * dh + 1, (kw - 1) * dw + 1

    def replace(self, weights=None, bias=None):
        return ConvSpec(
            self.weights if weights is None else weights,
            self.bias if bias is None else bias,
            self.padding,
            self.dilation,
        )

    def __eq__(self, other):
        if not isinstance(other, ConvSpec):
            return NotImplemented
        return (
            self.padding == other.padding
            and self.dilation == other.dilation
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    @classmethod
    def init(cls, in_channels, out_channels, kernel_size, rng, padding=0, dilation=1, scale=None):
        kh, kw = _pair(kernel_size)
        if scale is None:
            scale = 1.0 / np.sqrt(in_channels * kh * kw)
        w = rng.normal(0.0, scale, size=(out_channels, in_channels, kh, kw))
        b = rng.normal(0.0, 0.1, size=out_channels)
        return cls(w, b, _pair(padding), _pair(dilation))


@dataclass(frozen=True, eq=False)
class Mlp2Params:
    """Two-layer perceptron ``w2 @ relu(w1 @ x + b1) + b2``; biases optional."""

    w1: np.ndarray
    w2: np.ndarray
    b1: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None

    def __post_init__(self):
        w1 = as_tensor(self.w1, 2, "w1")
        w2 = as_tensor(self.w2, 2, "w2")
        if w2.shape[1] != w1.shape[0]:
            raise ShapeError(f"w2 expects {w2.shape[1]} hidden units, w1 gives {w1.shape[0]}", axis="hidden")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        for name, n in (("b1", w1.shape[0]), ("b2", w2.shape[0])):
            b = getattr(self, name)
            if b is not None:
                b = as_tensor(b, 1, name)
                if b.shape[0] != n:
                    raise ShapeError(f"{name} length {b.shape[0]} != {n}", axis=name)
                object.__setattr__(self, name, b)

    @property
    def in_features(self):
        return self.w1.shape[1]

    @property
    def hidden(self):
        return self.w1.shape[0]

    @property
    def out_features(self):
        return self.w2.shape[0]

    @property
    def reduction_ratio(self):
        return self.in_features / self.hidden

    @property
    def has_bias(self):
        return self.b1 is not None

    def __eq__(self, other):
        if not isinstance(other, Mlp2Params):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))

        return all(same(getattr(self, k), getattr(other, k)) for k in ("w1", "w2", "b1", "b2"))

    @classmethod
    def init(cls, channels, rng, reduction_ratio=4, bias=False):
        hidden = max(1, channels // reduction_ratio)
        w1 = rng.normal(0.0, 1.0 / np.sqrt(channels), size=(hidden, channels))
        w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(channels, hidden))
        if bias:
            return cls(w1, w2, rng.normal(0.0, 0.1, hidden), rng.normal(0.0, 0.1, channels))
        return cls(w1, w2)


# -- convolution ------------------------------------------------------------


def _check_conv(x, spec):
    x = as_tensor(x, 3)
    if x.shape[0] != spec.in_channels:
        raise ShapeError(
            f"input has {x.shape[0]} channels, convolution expects {spec.in_channels}", axis="channels"
        )
    ph, pw = spec.padding
    eh, ew = spec.extent()
    if eh > x.shape[1] + 2 * ph:
        raise ShapeError(f"kernel extent {eh} exceeds padded height {x.shape[1] + 2 * ph}", axis="height")
    if ew > x.shape[2] + 2 * pw:
        raise ShapeError(f"kernel extent {ew} exceeds padded width {x.shape[2] + 2 * pw}", axis="width")
    return x


@_finite
def conv2d(x, spec: ConvSpec):
    x = _check_conv(x, spec)
    return _backend.conv2d_forward(x, spec.weights, spec.bias, *spec.padding, *spec.dilation)


def conv2d_backward(grad, x, spec: ConvSpec):
    """Returns ``(grad_input, grad_weights, grad_bias)``."""
    x = _check_conv(x, spec)
    grad = as_tensor(grad, 3, "grad")
    return _backend.conv2d_backward(grad, x, spec.weights, *spec.padding, *spec.dilation)


# -- pooling ----------------------------------------------------------------


@_finite
def global_pool(x, mode="avg"):
    x = as_tensor(x, 3)
    if mode == "avg":
        return x.mean(axis=(1, 2), keepdims=True)
    if mode == "max":
        return x.max(axis=(1, 2), keepdims=True)
    raise ValueError(f"unknown pooling mode {mode!r}")


def global_pool_backward(grad, x, mode="avg"):
    x = as_tensor(x, 3)
    g = as_tensor(grad).reshape(x.shape[0], 1, 1)
    if mode == "avg":
        return np.broadcast_to(g / (x.shape[1] * x.shape[2]), x.shape).copy()
    flat = x.reshape(x.shape[0], -1)
    idx = flat.argmax(axis=1)
    out = np.zeros_like(flat)
    out[np.arange(x.shape[0]), idx] = g[:, 0, 0]
    return out.reshape(x.shape)


@_finite
def channel_pool(x):
    """Stack of the per-pixel channel mean (plane 0) and channel max (plane 1)."""
    x = as_tensor(x, 3)
    return np.stack([x.mean(axis=0), x.max(axis=0)])


def channel_pool_backward(grad, x):
    x = as_tensor(x, 3)
    grad = as_tensor(grad, 3, "grad")
    out = np.broadcast_to(grad[0] / x.shape[0], x.shape).copy()
    idx = x.argmax(axis=0)
    rows, cols = np.indices(idx.shape)
    out[idx, rows, cols] += grad[1]
    return out


# -- dense layers and activations ---------------------------------------------


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(grad, x):
    return np.where(np.asarray(x) > 0.0, grad, 0.0)


def _mlp2_hidden(x, params):
    h = params.w1 @ x
    if params.b1 is not None:
        h = h + params.b1
    return h


@_finite
def mlp2(x, params: Mlp2Params):
    x = as_tensor(x).reshape(-1)
    if x.shape[0] != params.in_features:
        raise ShapeError(f"input length {x.shape[0]} != w1 columns {params.in_features}", axis="features")
    y = params.w2 @ relu(_mlp2_hidden(x, params))
    if params.b2 is not None:
        y = y + params.b2
    return y


def mlp2_backward(grad, x, params: Mlp2Params):
    """Returns ``(grad_input, grad_params)`` with ``grad_params`` an ``Mlp2Params``."""
    x = as_tensor(x).reshape(-1)
    grad = as_tensor(grad).reshape(-1)
    pre = _mlp2_hidden(x, params)
    hidden = relu(pre)
    g_w2 = np.outer(grad, hidden)
    g_pre = relu_backward(params.w2.T @ grad, pre)
    g_w1 = np.outer(g_pre, x)
    g_x = params.w1.T @ g_pre
    if params.has_bias:
        return g_x, Mlp2Params(g_w1, g_w2, g_pre, grad.copy())
    return g_x, Mlp2Params(g_w1, g_w2)


_SIG_HI = np.nextafter(1.0, 0.0)
_SIG_LO = np.finfo(np.float64).tiny


@_finite
def sigmoid_map(x):
    x = np.asarray(x, dtype=np.float64)
    pos = x >= 0
    ex = np.exp(np.where(pos, -x, x))
    out = np.where(pos, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    # keep the open interval even where the logistic rounds to 0 or 1
    return np.clip(out, _SIG_LO, _SIG_HI)


def sigmoid_backward(grad, x):
    s = sigmoid_map(x)
    return grad * s * (1.0 - s)


# -- combination ------------------------------------------------------------


@_finite
def combine(a, b, mode="add"):
    a = as_tensor(a, 3, "a")
    b = as_tensor(b, 3, "b")
    if mode == "add":
        if a.shape != b.shape:
            raise ShapeError(f"add needs equal shapes, got {a.shape} and {b.shape}", axis="shape")
        return a + b
    if mode == "mul":
        c, h, w = a.shape
        if b.shape == (c, 1, 1) or b.shape == (1, h, w):
            return a * b
        raise ShapeError(f"scale of shape {b.shape} cannot broadcast over {a.shape}", axis="shape")
    if mode == "concat":
        if a.shape[1:] != b.shape[1:]:
            raise ShapeError(f"concat needs equal H x W, got {a.shape[1:]} and {b.shape[1:]}", axis="spatial")
        return np.concatenate([a, b], axis=0)
    raise ValueError(f"unknown combine mode {mode!r}")


def combine_backward(grad, a, b, mode="add"):
    a = as_tensor(a, 3, "a")
    b = as_tensor(b, 3, "b")
    grad = as_tensor(grad, 3, "grad")
    if mode == "add":
        return grad.copy(), grad.copy()
    if mode == "mul":
        axes = tuple(i for i in range(3) if b.shape[i] == 1 and a.shape[i] != 1)
        return grad * b, (grad * a).sum(axis=axes, keepdims=True)
    if mode == "concat":
        return grad[: a.shape[0]].copy(), grad[a.shape[0]:].copy()
    raise ValueError(f"unknown combine mode {mode!r}")


# -- resampling -------------------------------------------------------------


def _interp_matrix(n_out, n_in):
    """Corner-aligned linear interpolation weights, shape ``(n_out, n_in)``."""
    m = np.zeros((n_out, n_in))
    if n_in == 1 or n_out == 1:
        m[:, 0] = 1.0
        return m
    pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
    frac = pos - lo
    rows = np.arange(n_out)
    m[rows, lo] = 1.0 - frac
    m[rows, lo + 1] += frac
    return m


def _check_target(target):
    th, tw = _pair(target)
    if th < 1 or tw < 1:
        raise ShapeError(f"target size must be >= 1, got {(th, tw)}", axis="height" if th < 1 else "width")
    return th, tw


@_finite
def upsample_bilinear(x, target):
    x = as_tensor(x, 3)
    th, tw = _check_target(target)
    mh = _interp_matrix(th, x.shape[1])
    mw = _interp_matrix(tw, x.shape[2])
    return np.einsum("ih,chw,jw->cij", mh, x, mw)


def upsample_bilinear_backward(grad, x, target):
    x = as_tensor(x, 3)
    th, tw = _check_target(target)
    mh = _interp_matrix(th, x.shape[1])
    mw = _interp_matrix(tw, x.shape[2])
    return np.einsum("ih,cij,jw->chw", mh, as_tensor(grad, 3, "grad"), mw)
