"""Independent reference computations used by the tests."""
import numpy as np

from detgrasp.dgbcm import LabelNotFound, NoGraspInBox


def _row_intervals(poly, ys):
    """For each scanline y, the [left, right] span of a convex polygon (nan if missed)."""
    lo = np.full(ys.shape, np.inf)
    hi = np.full(ys.shape, -np.inf)
    n = len(poly)
    for k in range(n):
        (x0, y0), (x1, y1) = poly[k], poly[(k + 1) % n]
        if y0 == y1:
            hit = ys == y0
            lo = np.where(hit, np.minimum(lo, min(x0, x1)), lo)
            hi = np.where(hit, np.maximum(hi, max(x0, x1)), hi)
            continue
        t = (ys - y0) / (y1 - y0)
        hit = (t >= 0) & (t <= 1)
        x = x0 + t * (x1 - x0)
        lo = np.where(hit, np.minimum(lo, x), lo)
        hi = np.where(hit, np.maximum(hi, x), hi)
    return lo, hi


def raster_iou(a, b, n=2000):
    """IoU by counting an ``n x n`` grid of sample points over the joint bounding box."""
    pts = np.vstack([a, b])
    (xmin, ymin), (xmax, ymax) = pts.min(axis=0), pts.max(axis=0)
    xs = xmin + (np.arange(n) + 0.5) * (xmax - xmin) / n
    ys = ymin + (np.arange(n) + 0.5) * (ymax - ymin) / n

    def count(lo, hi):
        lo = np.where(np.isfinite(lo), lo, np.inf)
        c = np.searchsorted(xs, hi, side="right") - np.searchsorted(xs, lo, side="left")
        return np.maximum(c, 0)

    la, ha = _row_intervals(np.asarray(a), ys)
    lb, hb = _row_intervals(np.asarray(b), ys)
    ca, cb = count(la, ha).sum(), count(lb, hb).sum()
    inter = count(np.maximum(la, lb), np.minimum(ha, hb)).sum()
    union = ca + cb - inter
    return 0.0 if union == 0 else inter / union


def brute_force_select(boxes, candidates, label):
    """Enumerate every candidate x box pair of ``label`` and keep the best."""
    boxes = [b for b in boxes if b.label == label]
    if not boxes:
        raise LabelNotFound(label)
    best = None
    for g in candidates:
        for b in boxes:
            if b.x1 <= g.x <= b.x2 and b.y1 <= g.y <= b.y2:
                key = ((-g.quality, g.y, g.x, g.theta, g.width), (-b.score, b.x1, b.y1, b.x2, b.y2))
                if best is None or key < best[0]:
                    best = (key, g, b)
    if best is None:
        raise NoGraspInBox(label)
    return best[1], best[2]
