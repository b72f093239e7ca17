"""Pure-Python/numpy twins of the compiled kernels in ``_core.pyx``."""
import numpy as np


def conv2d_forward(x, w, b, ph, pw, dh, dw):
    C, H, W = x.shape
    O, _, KH, KW = w.shape
    Ho = H + 2 * ph - ((KH - 1) * dh + 1) + 1
    Wo = W + 2 * pw - ((KW - 1) * dw + 1) + 1
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out = np.empty((O, Ho, Wo))
    out[...] = b[:, None, None]
    for p in range(KH):
        for q in range(KW):
            patch = xp[:, p * dh:p * dh + Ho, q * dw:q * dw + Wo]
            out += np.einsum("oc,chw->ohw", w[:, :, p, q], patch)
    return out


def conv2d_backward(g, x, w, ph, pw, dh, dw):
    C, H, W = x.shape
    O, _, KH, KW = w.shape
    Ho, Wo = g.shape[1:]
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for p in range(KH):
        for q in range(KW):
            rows = slice(p * dh, p * dh + Ho)
            cols = slice(q * dw, q * dw + Wo)
            gxp[:, rows, cols] += np.einsum("oc,ohw->chw", w[:, :, p, q], g)
            gw[:, :, p, q] = np.einsum("ohw,chw->oc", g, xp[:, rows, cols])
    gx = np.ascontiguousarray(gxp[:, ph:ph + H, pw:pw + W])
    return gx, gw, g.sum(axis=(1, 2))


def _signed_area(pts):
    s = 0.0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def convex_intersection_area(subject, clip):
    """Sutherland-Hodgman clip of ``subject`` by ``clip``; returns the area."""
    subject = [(float(x), float(y)) for x, y in subject]
    clip = [(float(x), float(y)) for x, y in clip]
    if len(subject) < 3 or len(clip) < 3:
        return 0.0
    sa = _signed_area(clip)
    if sa == 0.0:
        return 0.0
    if sa < 0.0:
        clip = clip[::-1]
    out = subject
    nc = len(clip)
    for e in range(nc):
        if not out:
            break
        ex0, ey0 = clip[e]
        ex1, ey1 = clip[(e + 1) % nc]
        inp, out = out, []
        sx, sy = inp[-1]
        ds = (ex1 - ex0) * (sy - ey0) - (ey1 - ey0) * (sx - ex0)
        for px, py in inp:
            dp = (ex1 - ex0) * (py - ey0) - (ey1 - ey0) * (px - ex0)
            if dp >= 0.0:
                if ds < 0.0:
                    t = ds / (ds - dp)
                    out.append((sx + t * (px - sx), sy + t * (py - sy)))
                out.append((px, py))
            elif ds >= 0.0:
                t = ds / (ds - dp)
                out.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, ds = px, py, dp
    if len(out) < 3:
        return 0.0
    return abs(_signed_area(out))
