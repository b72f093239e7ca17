"""Finite-difference verification of hand-written vector-Jacobian products."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

STEP = 1e-3
RTOL = 1e-4
ATOL = 1e-8


@dataclass
class DiffOp:
    """A differentiable operation for :func:`grad_check`.

    ``forward(*inputs)`` returns one array; ``backward(upstream, *inputs)``
    returns one gradient per input, in order. ``sample(rng)`` draws a random
    valid input list. ``smooth(inputs)`` may reject draws that sit within a
    finite-difference step of a kink (ReLU zero, max-pool tie).
    """

    name: str
    forward: Callable[..., np.ndarray]
    backward: Callable[..., Sequence[np.ndarray]]
    sample: Optional[Callable[[np.random.Generator], List[np.ndarray]]] = None
    smooth: Optional[Callable[[List[np.ndarray]], bool]] = None
    input_names: Optional[Sequence[str]] = None


@dataclass
class GradCheckReport:
    name: str
    seed: int
    max_rel_error: float
    passed: bool
    location: Optional[tuple] = None
    detail: str = ""
    n_elements: int = 0

    def to_dict(self):
        return {
            "op": self.name,
            "seed": self.seed,
            "max_rel_error": self.max_rel_error,
            "passed": self.passed,
            "location": None if self.location is None else list(self.location),
            "detail": self.detail,
            "n_elements": self.n_elements,
        }


def draw_inputs(op: DiffOp, rng: np.random.Generator, max_tries=200):
    for _ in range(max_tries):
        inputs = [np.array(a, dtype=np.float64) for a in op.sample(rng)]
        if op.smooth is None or op.smooth(inputs):
            return inputs
    raise RuntimeError(f"{op.name}: could not draw a kink-free input in {max_tries} tries")


def grad_check(op: DiffOp, inputs=None, seed=0, step=STEP, rtol=RTOL, atol=ATOL) -> GradCheckReport:
    """Compare ``op.backward`` against central differences of ``<upstream, forward>``.

    Each element's error is ``|a - n|`` divided by the largest gradient
    magnitude (analytic or numeric) in the same input tensor; differences
    below ``atol`` count as zero. The check passes iff the worst element over
    all inputs is below ``rtol``.
    """
    rng = np.random.default_rng(seed)
    if inputs is None:
        inputs = draw_inputs(op, rng)
    inputs = [np.array(a, dtype=np.float64) for a in inputs]
    names = list(op.input_names or [f"arg{i}" for i in range(len(inputs))])

    def fail(detail, location=None):
        return GradCheckReport(op.name, seed, float("inf"), False, location, detail)

    out = np.asarray(op.forward(*inputs), dtype=np.float64)
    if not np.isfinite(out).all():
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(out))[0])
        return fail("non-finite forward output", ("output",) + idx)
    upstream = rng.standard_normal(out.shape)
    analytic = op.backward(upstream, *inputs)
    if len(analytic) != len(inputs):
        return fail(f"backward returned {len(analytic)} gradients for {len(inputs)} inputs")

    worst, where, count = 0.0, None, 0
    for k, (x, g) in enumerate(zip(inputs, analytic)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != x.shape:
            return fail(f"gradient shape {g.shape} != input shape {x.shape}", (names[k],))
        if not np.isfinite(g).all():
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(g))[0])
            return fail("non-finite analytic gradient", (names[k],) + idx)
        flat = x.reshape(-1)
        numeric = np.empty(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(np.sum(upstream * op.forward(*inputs)))
            flat[i] = orig - step
            f_minus = float(np.sum(upstream * op.forward(*inputs)))
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                loc = (names[k],) + tuple(int(j) for j in np.unravel_index(i, x.shape))
                return fail("non-finite value during finite differencing", loc)
            numeric[i] = (f_plus - f_minus) / (2.0 * step)
        a = g.reshape(-1)
        diff = np.abs(a - numeric)
        count += flat.size
        if diff.size == 0 or diff.max() < atol:
            continue
        scale = max(np.abs(a).max(), np.abs(numeric).max())
        err = np.where(diff < atol, 0.0, diff / scale)
        i = int(err.argmax())
        if err[i] > worst:
            worst = float(err[i])
            where = (names[k],) + tuple(int(j) for j in np.unravel_index(i, x.shape))
    return GradCheckReport(op.name, seed, worst, worst < rtol, where, "", count)
