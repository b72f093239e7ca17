"""Grid-cell indexing and the mask, category and regression losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_tensor


@dataclass(frozen=True)
class GridSpec:
    """An ``s x s`` grid; rows ``i`` and columns ``j`` are 1-based."""

    s: int

    def __post_init__(self):
        if int(self.s) < 1:
            raise ValueError(f"grid size must be >= 1, got {self.s}")


@dataclass(frozen=True)
class LossWeights:
    lam: float = 3.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    dice_epsilon: float = 1e-6
    focal_reduction: str = "mean_pos"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("mask-loss weight must be positive")
        if self.focal_gamma < 0:
            raise ValueError("focal gamma must be >= 0")
        if not 0 < self.focal_alpha <= 1:
            raise ValueError("focal alpha must lie in (0, 1]")
        if self.focal_reduction not in ("mean_pos", "mean", "sum"):
            raise ValueError(f"unknown focal reduction {self.focal_reduction!r}")


def _grid_size(grid):
    return grid.s if isinstance(grid, GridSpec) else int(grid)


def grid_to_channel(i, j, grid):
    """Mask channel ``k = (i - 1) * S + j`` of grid cell ``(i, j)``, all 1-based."""
    s = _grid_size(grid)
    if not (1 <= i <= s and 1 <= j <= s):
        raise IndexError(f"cell ({i}, {j}) outside a {s}x{s} grid")
    return (i - 1) * s + j


def channel_to_grid(k, grid):
    s = _grid_size(grid)
    if not 1 <= k <= s * s:
        raise IndexError(f"channel {k} outside 1..{s * s}")
    i, j = divmod(k - 1, s)
    return i + 1, j + 1


def channel_index(k, grid):
    """0-based storage index of 1-based channel ``k``."""
    s = _grid_size(grid)
    if not 1 <= k <= s * s:
        raise IndexError(f"channel {k} outside 1..{s * s}")
    return k - 1


# -- Dice -------------------------------------------------------------------


def _pair_maps(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ", axis="shape")
    return pred, target


def dice_loss(pred, target, eps=1e-6):
    pred, target = _pair_maps(pred, target)
    inter = np.sum(pred * target)
    denom = np.sum(pred * pred) + np.sum(target * target) + eps
    return float(1.0 - (2.0 * inter + eps) / denom)


def dice_loss_backward(pred, target, eps=1e-6):
    """Gradient of :func:`dice_loss` with respect to ``pred``."""
    pred, target = _pair_maps(pred, target)
    num = 2.0 * np.sum(pred * target) + eps
    den = np.sum(pred * pred) + np.sum(target * target) + eps
    return -(2.0 * target * den - num * 2.0 * pred) / (den * den)


# -- Focal ------------------------------------------------------------------

_CLAMP = 1e-12


def _focal_terms(pred, target, alpha):
    p = np.clip(np.asarray(pred, dtype=np.float64), _CLAMP, 1.0 - _CLAMP)
    t = np.asarray(target)
    pos = t == 1
    p_t = np.where(pos, p, 1.0 - p)
    alpha_t = np.where(pos, alpha, 1.0 - alpha)
    return p, pos, p_t, alpha_t


def focal_loss(pred, target, alpha=0.25, gamma=2.0):
    """Elementwise ``-alpha_t (1 - p_t)^gamma ln p_t``; scalars in, scalar out."""
    _, _, p_t, alpha_t = _focal_terms(pred, target, alpha)
    out = -alpha_t * (1.0 - p_t) ** gamma * np.log(p_t)
    return float(out) if out.ndim == 0 else out


def focal_loss_backward(pred, target, alpha=0.25, gamma=2.0):
    """Elementwise derivative of :func:`focal_loss` with respect to ``pred``."""
    _, pos, p_t, alpha_t = _focal_terms(pred, target, alpha)
    q = 1.0 - p_t
    if gamma == 0:
        d_pt = -alpha_t / p_t
    else:
        d_pt = -alpha_t * (-gamma * q ** (gamma - 1.0) * np.log(p_t) + q ** gamma / p_t)
    out = np.where(pos, d_pt, -d_pt)
    return float(out) if out.ndim == 0 else out


def category_loss(pred, cate_targets, weights: LossWeights = LossWeights()):
    """Focal loss over an ``(n_classes, S, S)`` probability map.

    ``cate_targets`` is ``S x S`` with 0 for background and 1-based class ids
    otherwise; each class id ``c`` is a one-hot target on plane ``c - 1``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    cate = np.asarray(cate_targets).astype(int)
    if pred.ndim != 3 or pred.shape[1:] != cate.shape:
        raise ShapeError(f"category map {pred.shape} does not match targets {cate.shape}", axis="grid")
    if cate.max(initial=0) > pred.shape[0] or cate.min(initial=0) < 0:
        raise ValueError("category id outside the predicted classes")
    onehot = (cate[None] == np.arange(1, pred.shape[0] + 1)[:, None, None]).astype(np.float64)
    total = np.sum(focal_loss(pred, onehot, weights.focal_alpha, weights.focal_gamma))
    if weights.focal_reduction == "sum":
        return float(total)
    if weights.focal_reduction == "mean":
        return float(total / pred.size)
    return float(total / max(int(np.count_nonzero(cate)), 1))


# -- mask loss --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MaskBatch:
    """Per-channel predicted masks ``(S*S, H, W)``, binary targets of the same
    shape and the ``S x S`` map of category ids (0 = background)."""

    predicted: np.ndarray
    targets: np.ndarray
    category_targets: np.ndarray

    def __post_init__(self):
        pred = as_tensor(self.predicted, 3, "predicted")
        tgt = as_tensor(self.targets, 3, "targets")
        cate = np.asarray(self.category_targets)
        if cate.ndim != 2 or cate.shape[0] != cate.shape[1]:
            raise ShapeError(f"category targets must be S x S, got {cate.shape}", axis="grid")
        s = cate.shape[0]
        if pred.shape[0] != s * s:
            raise ShapeError(f"{pred.shape[0]} mask channels for a {s}x{s} grid", axis="channels")
        if tgt.shape != pred.shape:
            raise ShapeError(f"targets {tgt.shape} differ from predictions {pred.shape}", axis="shape")
        if pred.min() < 0 or pred.max() > 1:
            raise ValueError("predicted masks must lie in [0, 1]")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "targets", tgt)
        object.__setattr__(self, "category_targets", cate)

    @property
    def grid(self):
        return GridSpec(self.category_targets.shape[0])

    def pos_indicator(self):
        """1-based channels ``k`` whose grid cell holds a foreground category."""
        s = self.grid.s
        return [
            grid_to_channel(i, j, s)
            for i in range(1, s + 1)
            for j in range(1, s + 1)
            if self.category_targets[i - 1, j - 1] > 0
        ]


def mask_loss(batch: MaskBatch, eps=1e-6):
    positives = batch.pos_indicator()
    if not positives:
        return 0.0
    total = 0.0
    for k in positives:
        c = channel_index(k, batch.grid)
        total += dice_loss(batch.predicted[c], batch.targets[c], eps)
    return total / len(positives)


def mask_loss_backward(batch: MaskBatch, eps=1e-6):
    grad = np.zeros_like(batch.predicted)
    positives = batch.pos_indicator()
    for k in positives:
        c = channel_index(k, batch.grid)
        grad[c] = dice_loss_backward(batch.predicted[c], batch.targets[c], eps) / len(positives)
    return grad


def total_loss(l_cate, l_mask, weights: LossWeights = LossWeights()):
    if l_cate < 0 or l_mask < 0:
        raise ValueError(f"losses must be non-negative, got {l_cate}, {l_mask}")
    return l_cate + weights.lam * l_mask


# -- smooth L1 --------------------------------------------------------------


def _residual(pred, target):
    pred = np.atleast_1d(np.asarray(pred, dtype=np.float64))
    target = np.atleast_1d(np.asarray(target, dtype=np.float64))
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ", axis="length")
    if pred.size == 0:
        raise ValueError("smooth L1 needs at least one element")
    return pred - target


def smooth_l1(pred, target):
    d = _residual(pred, target)
    a = np.abs(d)
    return float(np.mean(np.where(a < 1.0, 0.5 * d * d, a - 0.5)))


def smooth_l1_backward(pred, target):
    d = _residual(pred, target)
    return np.where(np.abs(d) < 1.0, d, np.sign(d)) / d.size
