"""Catalogue of every differentiable operation, ready for :func:`grad_check`.

Each builder draws a random configuration and input from ``rng`` and returns
``(DiffOp, inputs)``. Draws that land within a finite-difference step of a
kink (ReLU zero, max tie, smooth-L1 knee) are redrawn.
"""
from __future__ import annotations

import numpy as np

from . import attention as att
from . import losses
from . import tensor as T
from .gradcheck import DiffOp, GradCheckReport, grad_check

KINK_MARGIN = 1e-2
MAX_DRAWS = 500


def _redraw(build, rng, ok):
    for _ in range(MAX_DRAWS):
        op, inputs = build(rng)
        if ok(op, inputs):
            return op, inputs
    raise RuntimeError("could not draw a kink-free configuration")


def _top2_gap(x, axis):
    s = np.sort(x, axis=axis)
    if s.shape[axis] < 2:
        return np.inf
    return float((np.take(s, -1, axis=axis) - np.take(s, -2, axis=axis)).min())


def build_conv2d(rng):
    c, o = rng.integers(1, 4), rng.integers(1, 3)
    h, w = rng.integers(3, 7, size=2)
    k = int(rng.choice([1, 3]))
    dil = int(rng.integers(1, 3))
    pad = int(rng.integers(0, dil * (k - 1) // 2 + 2))
    if (k - 1) * dil + 1 > min(h, w) + 2 * pad:
        pad = (k - 1) * dil
    x = rng.standard_normal((c, h, w))
    wt = rng.standard_normal((o, c, k, k))
    b = rng.standard_normal(o)

    def fwd(x, wt, b):
        return T.conv2d(x, T.ConvSpec(wt, b, pad, dil))

    def bwd(g, x, wt, b):
        return T.conv2d_backward(g, x, T.ConvSpec(wt, b, pad, dil))

    return DiffOp(f"conv2d(k={k},pad={pad},dil={dil})", fwd, bwd, input_names=("x", "w", "b")), [x, wt, b]


def build_global_pool(mode):
    def build(rng):
        x = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5))))
        op = DiffOp(
            f"global_pool_{mode}",
            lambda x: T.global_pool(x, mode),
            lambda g, x: (T.global_pool_backward(g, x, mode),),
            input_names=("x",),
        )
        return op, [x]

    if mode == "avg":
        return build
    return lambda rng: _redraw(build, rng, lambda op, i: _top2_gap(i[0].reshape(i[0].shape[0], -1), 1) > KINK_MARGIN)


def build_channel_pool(rng):
    def build(rng):
        x = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        op = DiffOp("channel_pool", T.channel_pool, lambda g, x: (T.channel_pool_backward(g, x),), input_names=("x",))
        return op, [x]

    return _redraw(build, rng, lambda op, i: _top2_gap(i[0], 0) > KINK_MARGIN)


def build_mlp2(bias):
    def build(rng):
        c = int(rng.integers(2, 9))
        p = T.Mlp2Params.init(c, rng, reduction_ratio=2, bias=bias)
        x = rng.standard_normal(c)

        def fwd(x, *ws):
            return T.mlp2(x, T.Mlp2Params(*ws))

        def bwd(g, x, *ws):
            gx, gp = T.mlp2_backward(g, x, T.Mlp2Params(*ws))
            return (gx, gp.w1, gp.w2) + ((gp.b1, gp.b2) if bias else ())

        arrays = [p.w1, p.w2] + ([p.b1, p.b2] if bias else [])
        names = ("x", "w1", "w2", "b1", "b2")[: 1 + len(arrays)]
        return DiffOp(f"mlp2(bias={bias})", fwd, bwd, input_names=names), [x] + arrays

    def hidden_margin(op, inputs):
        x, w1 = inputs[0], inputs[1]
        pre = w1 @ x + (inputs[3] if bias else 0.0)
        return np.abs(pre).min() > KINK_MARGIN

    return lambda rng: _redraw(build, rng, hidden_margin)


def build_sigmoid(rng):
    x = rng.normal(0.0, 3.0, size=(int(rng.integers(1, 3)), 3, 3))
    return DiffOp("sigmoid_map", T.sigmoid_map, lambda g, x: (T.sigmoid_backward(g, x),), input_names=("x",)), [x]


def build_combine(mode, scale=None):
    def build(rng):
        c, h, w = (int(v) for v in rng.integers(1, 5, size=3))
        a = rng.standard_normal((c, h, w))
        if mode == "add":
            b = rng.standard_normal((c, h, w))
        elif mode == "concat":
            b = rng.standard_normal((int(rng.integers(1, 4)), h, w))
        elif scale == "channel":
            b = rng.standard_normal((c, 1, 1))
        else:
            b = rng.standard_normal((1, h, w))
        name = f"combine_{mode}" + (f"_{scale}" if scale else "")
        op = DiffOp(
            name,
            lambda a, b: T.combine(a, b, mode),
            lambda g, a, b: T.combine_backward(g, a, b, mode),
            input_names=("a", "b"),
        )
        return op, [a, b]

    return build


def build_upsample(rng):
    x = rng.standard_normal((int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))))
    target = tuple(int(v) for v in rng.integers(1, 7, size=2))
    op = DiffOp(
        f"upsample_bilinear(to={target})",
        lambda x: T.upsample_bilinear(x, target),
        lambda g, x: (T.upsample_bilinear_backward(g, x, target),),
        input_names=("x",),
    )
    return op, [x]


def cam_op(params: att.CamParams):
    def fwd(f, *arrays):
        return att.cam_forward(f, params.with_arrays(arrays))[0]

    def bwd(g, f, *arrays):
        gf, gp = att.cam_backward(g, f, params.with_arrays(arrays))
        return [gf] + gp.arrays()

    names = ("f", "w1", "w2", "b1", "b2")[: 1 + len(params.arrays())]
    return DiffOp("cam", fwd, bwd, input_names=names)


def build_cam(rng):
    def build(rng):
        c = int(rng.choice([4, 6, 8]))
        params = att.CamParams.init(c, rng, reduction_ratio=int(rng.choice([2, 4])), bias=bool(rng.integers(0, 2)))
        f = rng.standard_normal((c, int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        return cam_op(params), [f] + params.arrays()

    def ok(op, inputs):
        params = att.CamParams(T.Mlp2Params(*inputs[1:]))
        return att.cam_kink_margin(inputs[0], params) > KINK_MARGIN

    return _redraw(build, rng, ok)


def sam_op(params: att.SamParams):
    def fwd(f, w, b):
        return att.sam_forward(f, params.with_arrays([w, b]))[0]

    def bwd(g, f, w, b):
        gf, gp = att.sam_backward(g, f, params.with_arrays([w, b]))
        return [gf] + gp.arrays()

    return DiffOp("sam", fwd, bwd, input_names=("f", "w", "b"))


def build_sam(rng):
    def build(rng):
        params = att.SamParams.init(rng)
        f = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        return sam_op(params), [f] + params.arrays()

    return _redraw(build, rng, lambda op, i: att.sam_kink_margin(i[0]) > KINK_MARGIN)


def aspp_op(cfg: att.AsppConfig):
    def fwd(f, *arrays):
        return att.aspp_forward(f, cfg.with_arrays(arrays))

    def bwd(g, f, *arrays):
        gf, gc = att.aspp_backward(g, f, cfg.with_arrays(arrays))
        return [gf] + gc.arrays()

    names = ["f"]
    for k in range(len(cfg.branches)):
        names += [f"branch{k}.w", f"branch{k}.b"]
    names += ["fuse.w", "fuse.b"]
    return DiffOp(f"aspp(rates={list(cfg.dilation_rates)},pool={cfg.include_image_pool})", fwd, bwd,
                  input_names=names)


def build_aspp(rng):
    def build(rng):
        rates = [(6, 12, 18), (1, 2, 3), (2, 4)][int(rng.integers(0, 3))]
        cfg = att.AsppConfig.init(2, 1, 2, rng, dilation_rates=rates, include_image_pool=bool(rng.integers(0, 4)))
        f = rng.standard_normal((2, int(rng.integers(3, 5)), int(rng.integers(3, 5))))
        op = aspp_op(cfg)
        op.smooth = lambda inputs: att.aspp_kink_margin(inputs[0], cfg.with_arrays(inputs[1:])) > KINK_MARGIN
        return op, [f] + cfg.arrays()

    return _redraw(build, rng, lambda op, inputs: op.smooth(inputs))


def build_dice(rng):
    shape = tuple(int(v) for v in rng.integers(1, 5, size=2))
    pred = rng.uniform(0.05, 0.95, size=shape)
    target = (rng.random(shape) < 0.5).astype(float)
    eps = 1e-6
    op = DiffOp(
        "dice_loss",
        lambda p: np.array(losses.dice_loss(p, target, eps)),
        lambda g, p: (g * losses.dice_loss_backward(p, target, eps),),
        input_names=("pred",),
    )
    return op, [pred]


def build_focal(rng):
    n = int(rng.integers(1, 8))
    # ln(p) curvature makes a 1e-3 central difference inaccurate close to 0 or 1
    pred = rng.uniform(0.15, 0.85, size=n)
    target = (rng.random(n) < 0.5).astype(float)
    alpha = float(rng.uniform(0.1, 1.0))
    gamma = float(rng.choice([0.0, 0.5, 1.0, 2.0, 3.0]))
    op = DiffOp(
        f"focal_loss(alpha={alpha:.3f},gamma={gamma})",
        lambda p: np.asarray(losses.focal_loss(p, target, alpha, gamma)),
        lambda g, p: (g * losses.focal_loss_backward(p, target, alpha, gamma),),
        input_names=("pred",),
    )
    return op, [pred]


def build_smooth_l1(rng):
    def build(rng):
        n = int(rng.integers(1, 8))
        pred = rng.normal(0.0, 2.0, size=n)
        target = rng.normal(0.0, 2.0, size=n)
        op = DiffOp(
            "smooth_l1",
            lambda p: np.array(losses.smooth_l1(p, target)),
            lambda g, p: (g * losses.smooth_l1_backward(p, target),),
            input_names=("pred",),
        )
        return op, [pred, target]

    def ok(op, inputs):
        d = np.abs(inputs[0] - inputs[1])
        return np.abs(d - 1.0).min() > KINK_MARGIN and d.min() > KINK_MARGIN

    op, (pred, _) = _redraw(build, rng, ok)
    return op, [pred]


def build_mask_loss(rng):
    s = int(rng.integers(1, 4))
    h, w = (int(v) for v in rng.integers(2, 5, size=2))
    cate = rng.integers(0, 3, size=(s, s))
    cate[0, 0] = max(cate[0, 0], 1)
    targets = (rng.random((s * s, h, w)) < 0.5).astype(float)
    pred = rng.uniform(0.05, 0.95, size=(s * s, h, w))

    def fwd(p):
        return np.array(losses.mask_loss(losses.MaskBatch(p, targets, cate)))

    def bwd(g, p):
        return (g * losses.mask_loss_backward(losses.MaskBatch(p, targets, cate)),)

    return DiffOp("mask_loss", fwd, bwd, input_names=("pred",)), [pred]


BUILDERS = {
    "conv2d": build_conv2d,
    "global_pool_avg": build_global_pool("avg"),
    "global_pool_max": build_global_pool("max"),
    "channel_pool": build_channel_pool,
    "mlp2": build_mlp2(False),
    "mlp2_bias": build_mlp2(True),
    "sigmoid_map": build_sigmoid,
    "combine_add": build_combine("add"),
    "combine_mul_channel": build_combine("mul", "channel"),
    "combine_mul_spatial": build_combine("mul", "spatial"),
    "combine_concat": build_combine("concat"),
    "upsample_bilinear": build_upsample,
    "cam": build_cam,
    "sam": build_sam,
    "aspp": build_aspp,
    "dice_loss": build_dice,
    "focal_loss": build_focal,
    "smooth_l1": build_smooth_l1,
    "mask_loss": build_mask_loss,
}


def run_check(name, seed) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    op, inputs = BUILDERS[name](rng)
    return grad_check(op, inputs, seed=seed)
