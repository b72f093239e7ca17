"""Channel attention, spatial attention and atrous spatial pyramid pooling.

All three modules take a single ``C x H x W`` feature map (no batch axis) and
return a tensor of the same spatial size. Each has a ``*_backward`` returning
the input gradient plus a parameter object of the same type holding the
parameter gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .tensor import (
    ConvSpec,
    Mlp2Params,
    ShapeError,
    as_tensor,
    channel_pool,
    channel_pool_backward,
    combine,
    conv2d,
    conv2d_backward,
    global_pool,
    global_pool_backward,
    mlp2,
    mlp2_backward,
    relu,
    relu_backward,
    sigmoid_backward,
    sigmoid_map,
    upsample_bilinear,
    upsample_bilinear_backward,
)

DEFAULT_RATES = (6, 12, 18)


class AsppContractError(RuntimeError):
    """A branch produced a feature map whose spatial size differs from the input."""


def _add_mlp(a: Mlp2Params, b: Mlp2Params) -> Mlp2Params:
    if a.has_bias:
        return Mlp2Params(a.w1 + b.w1, a.w2 + b.w2, a.b1 + b.b1, a.b2 + b.b2)
    return Mlp2Params(a.w1 + b.w1, a.w2 + b.w2)


# -- channel attention ------------------------------------------------------


@dataclass(frozen=True)
class CamParams:
    mlp: Mlp2Params

    @property
    def channels(self):
        return self.mlp.in_features

    def __post_init__(self):
        if self.mlp.in_features != self.mlp.out_features:
            raise ShapeError(
                f"channel attention MLP must map C -> C, got {self.mlp.in_features} -> {self.mlp.out_features}",
                axis="channels",
            )

    @classmethod
    def init(cls, channels, rng, reduction_ratio=4, bias=False):
        return cls(Mlp2Params.init(channels, rng, reduction_ratio, bias))

    def arrays(self):
        m = self.mlp
        return [m.w1, m.w2] + ([m.b1, m.b2] if m.has_bias else [])

    def with_arrays(self, arrays):
        return CamParams(Mlp2Params(*arrays))


def _cam_check(f, params):
    f = as_tensor(f, 3)
    if f.shape[0] != params.channels:
        raise ShapeError(f"feature map has {f.shape[0]} channels, parameters expect {params.channels}", axis="channels")
    return f


def cam_forward(f, params: CamParams):
    """Returns ``(f_c, scale)`` where ``f_c = f * scale`` per channel."""
    f = _cam_check(f, params)
    gap = global_pool(f, "avg").reshape(-1)
    gmp = global_pool(f, "max").reshape(-1)
    scale = sigmoid_map(mlp2(gap, params.mlp) + mlp2(gmp, params.mlp))
    return combine(f, scale[:, None, None], "mul"), scale


def cam_backward(grad, f, params: CamParams) -> Tuple[np.ndarray, CamParams]:
    f = _cam_check(f, params)
    grad = as_tensor(grad, 3, "grad")
    gap = global_pool(f, "avg").reshape(-1)
    gmp = global_pool(f, "max").reshape(-1)
    logits = mlp2(gap, params.mlp) + mlp2(gmp, params.mlp)
    scale = sigmoid_map(logits)
    g_logits = sigmoid_backward((grad * f).sum(axis=(1, 2)), logits)
    g_gap, gp_avg = mlp2_backward(g_logits, gap, params.mlp)
    g_gmp, gp_max = mlp2_backward(g_logits, gmp, params.mlp)
    g_f = (
        grad * scale[:, None, None]
        + global_pool_backward(g_gap, f, "avg")
        + global_pool_backward(g_gmp, f, "max")
    )
    return g_f, CamParams(_add_mlp(gp_avg, gp_max))


def cam_kink_margin(f, params: CamParams):
    """Distance of ``f`` from the nearest non-differentiable point of the module."""
    f = _cam_check(f, params)
    margins = []
    for v in (global_pool(f, "avg").reshape(-1), global_pool(f, "max").reshape(-1)):
        pre = params.mlp.w1 @ v + (0.0 if params.mlp.b1 is None else params.mlp.b1)
        margins.append(np.abs(pre).min())
    flat = np.sort(f.reshape(f.shape[0], -1), axis=1)
    if flat.shape[1] > 1:
        margins.append((flat[:, -1] - flat[:, -2]).min())
    return float(min(margins))


# -- spatial attention ------------------------------------------------------


@dataclass(frozen=True)
class SamParams:
    conv: ConvSpec

    def __post_init__(self):
        c = self.conv
        if c.kernel_size != (7, 7) or c.in_channels != 2 or c.out_channels != 1:
            raise ShapeError(
                "spatial attention needs a 7x7 convolution with 2 input and 1 output channel, "
                f"got {c.kernel_size} with {c.in_channels} -> {c.out_channels}",
                axis="kernel",
            )
        if c.padding != (3, 3) or c.dilation != (1, 1):
            raise ShapeError(
                f"spatial attention needs padding 3 and dilation 1, got {c.padding} / {c.dilation}",
                axis="padding",
            )

    @classmethod
    def from_weights(cls, weights, bias=0.0):
        return cls(ConvSpec(np.reshape(weights, (1, 2, 7, 7)), np.array([float(bias)]), (3, 3), (1, 1)))

    @classmethod
    def init(cls, rng):
        return cls(ConvSpec.init(2, 1, 7, rng, padding=3))

    def arrays(self):
        return [self.conv.weights, self.conv.bias]

    def with_arrays(self, arrays):
        w, b = arrays
        return SamParams(self.conv.replace(w, b))


def sam_forward(f, params: SamParams):
    """Returns ``(f_s, attn)`` where ``attn`` is a ``1 x H x W`` plane in (0, 1)."""
    f = as_tensor(f, 3)
    attn = sigmoid_map(conv2d(channel_pool(f), params.conv))
    return combine(f, attn, "mul"), attn


def sam_backward(grad, f, params: SamParams) -> Tuple[np.ndarray, SamParams]:
    f = as_tensor(f, 3)
    grad = as_tensor(grad, 3, "grad")
    pooled = channel_pool(f)
    logits = conv2d(pooled, params.conv)
    attn = sigmoid_map(logits)
    g_logits = sigmoid_backward((grad * f).sum(axis=0, keepdims=True), logits)
    g_pooled, g_w, g_b = conv2d_backward(g_logits, pooled, params.conv)
    g_f = grad * attn + channel_pool_backward(g_pooled, f)
    return g_f, SamParams(params.conv.replace(g_w, g_b))


def sam_kink_margin(f):
    f = as_tensor(f, 3)
    if f.shape[0] < 2:
        return float("inf")
    s = np.sort(f, axis=0)
    return float((s[-1] - s[-2]).min())


# -- atrous spatial pyramid pooling -----------------------------------------


@dataclass(frozen=True)
class AsppConfig:
    """Branch convolutions in order: one 1x1, one 3x3 atrous per rate, then
    (optionally) the 1x1 applied to the globally pooled map. ``fuse`` projects
    the concatenated branches to the output channels."""

    branches: Tuple[ConvSpec, ...]
    fuse: ConvSpec
    dilation_rates: Tuple[int, ...] = DEFAULT_RATES
    include_image_pool: bool = True

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "dilation_rates", tuple(int(r) for r in self.dilation_rates))
        expected = 1 + len(self.dilation_rates) + int(self.include_image_pool)
        if len(self.branches) != expected:
            raise ShapeError(f"expected {expected} branch convolutions, got {len(self.branches)}", axis="branches")
        if any(r < 1 for r in self.dilation_rates):
            raise ValueError(f"dilation rates must be >= 1, got {self.dilation_rates}")
        first = self.branches[0]
        for k, spec in enumerate(self.branches):
            if spec.out_channels != first.out_channels or spec.in_channels != first.in_channels:
                raise ShapeError(f"branch {k} has mismatched channel counts", axis="channels")
        for spec in (self.branches[0],) + self.branches[1 + len(self.dilation_rates):]:
            if spec.kernel_size != (1, 1) or spec.padding != (0, 0):
                raise ShapeError("1x1 branches must be unpadded 1x1 convolutions", axis="kernel")
        for rate, spec in zip(self.dilation_rates, self.branches[1:]):
            if spec.kernel_size != (3, 3) or spec.dilation != (rate, rate) or spec.padding != (rate, rate):
                raise ShapeError(f"atrous branch for rate {rate} must be 3x3 with padding = dilation = {rate}", axis="kernel")
        if self.fuse.kernel_size != (1, 1) or self.fuse.in_channels != len(self.branches) * first.out_channels:
            raise ShapeError(
                f"fuse must be 1x1 over {len(self.branches) * first.out_channels} channels", axis="channels"
            )

    @property
    def in_channels(self):
        return self.branches[0].in_channels

    @property
    def branch_channels(self):
        return self.branches[0].out_channels

    @property
    def out_channels(self):
        return self.fuse.out_channels

    @classmethod
    def init(cls, in_channels, branch_channels, out_channels, rng, dilation_rates=DEFAULT_RATES,
             include_image_pool=True):
        branches = [ConvSpec.init(in_channels, branch_channels, 1, rng)]
        branches += [ConvSpec.init(in_channels, branch_channels, 3, rng, padding=r, dilation=r) for r in dilation_rates]
        if include_image_pool:
            branches.append(ConvSpec.init(in_channels, branch_channels, 1, rng))
        fuse = ConvSpec.init(len(branches) * branch_channels, out_channels, 1, rng)
        return cls(tuple(branches), fuse, tuple(dilation_rates), include_image_pool)

    def arrays(self):
        out = []
        for spec in self.branches + (self.fuse,):
            out += [spec.weights, spec.bias]
        return out

    def with_arrays(self, arrays):
        specs = self.branches + (self.fuse,)
        new = [s.replace(arrays[2 * k], arrays[2 * k + 1]) for k, s in enumerate(specs)]
        return AsppConfig(tuple(new[:-1]), new[-1], self.dilation_rates, self.include_image_pool)


def _aspp_trace(f, cfg: AsppConfig):
    f = as_tensor(f, 3)
    if f.shape[0] != cfg.in_channels:
        raise ShapeError(f"feature map has {f.shape[0]} channels, ASPP expects {cfg.in_channels}", axis="channels")
    h, w = f.shape[1:]
    n_conv = 1 + len(cfg.dilation_rates)
    pre, outs = [], []
    for spec in cfg.branches[:n_conv]:
        z = conv2d(f, spec)
        if z.shape[1:] != (h, w):
            raise AsppContractError(f"branch produced {z.shape[1:]}, expected {(h, w)}")
        pre.append(z)
        outs.append(relu(z))
    pooled = None
    if cfg.include_image_pool:
        pooled = global_pool(f, "avg")
        z = conv2d(pooled, cfg.branches[-1])
        pre.append(z)
        up = upsample_bilinear(relu(z), (h, w))
        if up.shape[1:] != (h, w):
            raise AsppContractError(f"pooled branch produced {up.shape[1:]}, expected {(h, w)}")
        outs.append(up)
    cat = np.concatenate(outs, axis=0)
    fused = conv2d(cat, cfg.fuse)
    return {"f": f, "pre": pre, "pooled": pooled, "cat": cat, "fused": fused}


def aspp_forward(f, cfg: AsppConfig):
    return relu(_aspp_trace(f, cfg)["fused"])


def aspp_backward(grad, f, cfg: AsppConfig) -> Tuple[np.ndarray, AsppConfig]:
    t = _aspp_trace(f, cfg)
    f = t["f"]
    h, w = f.shape[1:]
    g_fused = relu_backward(as_tensor(grad, 3, "grad"), t["fused"])
    g_cat, g_fw, g_fb = conv2d_backward(g_fused, t["cat"], cfg.fuse)
    b = cfg.branch_channels
    g_f = np.zeros_like(f)
    grads = []
    n_conv = 1 + len(cfg.dilation_rates)
    for k, spec in enumerate(cfg.branches[:n_conv]):
        g_z = relu_backward(g_cat[k * b:(k + 1) * b], t["pre"][k])
        g_in, g_w, g_b = conv2d_backward(g_z, f, spec)
        g_f += g_in
        grads.append(spec.replace(g_w, g_b))
    if cfg.include_image_pool:
        spec = cfg.branches[-1]
        z = t["pre"][-1]
        g_up = g_cat[n_conv * b:]
        g_z = relu_backward(upsample_bilinear_backward(g_up, relu(z), (h, w)), z)
        g_pool, g_w, g_b = conv2d_backward(g_z, t["pooled"], spec)
        g_f += global_pool_backward(g_pool, f, "avg")
        grads.append(spec.replace(g_w, g_b))
    return g_f, AsppConfig(tuple(grads), cfg.fuse.replace(g_fw, g_fb), cfg.dilation_rates, cfg.include_image_pool)


def aspp_kink_margin(f, cfg: AsppConfig):
    t = _aspp_trace(f, cfg)
    return float(min(np.abs(z).min() for z in t["pre"] + [t["fused"]]))


def aspp_concat_channels(f, cfg: AsppConfig):
    """Channel count of the pre-fuse concatenation."""
    return _aspp_trace(f, cfg)["cat"].shape[0]


# -- JSON parameter import / export ------------------------------------------


def _conv_to_dict(spec):
    from .harness.formats import tensor_to_json

    return {
        "weights": tensor_to_json(spec.weights),
        "bias": tensor_to_json(spec.bias),
        "padding": list(spec.padding),
        "dilation": list(spec.dilation),
    }


def _conv_from_dict(d):
    from .harness.formats import tensor_from_json

    return ConvSpec(
        tensor_from_json(d["weights"]),
        tensor_from_json(d["bias"]),
        tuple(d.get("padding", (0, 0))),
        tuple(d.get("dilation", (1, 1))),
    )


def params_to_dict(params):
    from .harness.formats import FORMAT_VERSION, tensor_to_json

    if isinstance(params, CamParams):
        m = params.mlp
        d = {"kind": "cam", "w1": tensor_to_json(m.w1), "w2": tensor_to_json(m.w2)}
        if m.has_bias:
            d["b1"], d["b2"] = tensor_to_json(m.b1), tensor_to_json(m.b2)
    elif isinstance(params, SamParams):
        d = {"kind": "sam", "conv": _conv_to_dict(params.conv)}
    elif isinstance(params, AsppConfig):
        d = {
            "kind": "aspp",
            "dilation_rates": list(params.dilation_rates),
            "include_image_pool": params.include_image_pool,
            "branches": [_conv_to_dict(s) for s in params.branches],
            "fuse": _conv_to_dict(params.fuse),
        }
    else:
        raise TypeError(f"cannot serialize {type(params).__name__}")
    return {"format_version": FORMAT_VERSION, **d}


def params_from_dict(d):
    from .harness.formats import check_version, tensor_from_json

    check_version(d)
    kind = d.get("kind")
    if kind == "cam":
        b1 = tensor_from_json(d["b1"]) if "b1" in d else None
        b2 = tensor_from_json(d["b2"]) if "b2" in d else None
        return CamParams(Mlp2Params(tensor_from_json(d["w1"]), tensor_from_json(d["w2"]), b1, b2))
    if kind == "sam":
        return SamParams(_conv_from_dict(d["conv"]))
    if kind == "aspp":
        return AsppConfig(
            tuple(_conv_from_dict(s) for s in d["branches"]),
            _conv_from_dict(d["fuse"]),
            tuple(d["dilation_rates"]),
            bool(d["include_image_pool"]),
        )
    raise ValueError(f"unknown parameter kind {kind!r}")
