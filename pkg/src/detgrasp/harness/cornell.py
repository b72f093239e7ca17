"""Reader and writer for Cornell-style positive grasp rectangle files.

Each rectangle is four consecutive ``x y`` lines. Blocks containing a NaN
coordinate are dropped whole; blank lines are ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

from ..geometry import RotatedRect
from .formats import FormatError


@dataclass
class CornellRects:
    rects: List[RotatedRect] = field(default_factory=list)
    spans: List[Tuple[int, int]] = field(default_factory=list)
    skipped: List[Tuple[int, int]] = field(default_factory=list)

    def __len__(self):
        return len(self.rects)


def _parse_token(tok, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"line {lineno}: non-numeric token {tok!r}") from None
    if math.isinf(v):
        raise FormatError(f"line {lineno}: infinite coordinate {tok!r}")
    return v


def parse_cornell_rects(text: str) -> CornellRects:
    lines = [(n, ln.split()) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if len(lines) % 4:
        start = lines[len(lines) - len(lines) % 4][0]
        raise FormatError(f"line {start}: incomplete rectangle ({len(lines) % 4} of 4 vertex lines)")
    out = CornellRects()
    for b in range(0, len(lines), 4):
        block = lines[b:b + 4]
        span = (block[0][0], block[-1][0])
        verts = []
        for lineno, toks in block:
            if len(toks) != 2:
                raise FormatError(f"line {lineno}: expected 2 values, got {len(toks)}")
            verts.append(tuple(_parse_token(t, lineno) for t in toks))
        if any(math.isnan(c) for v in verts for c in v):
            out.skipped.append(span)
            continue
        out.rects.append(RotatedRect.from_vertices(verts))
        out.spans.append(span)
    return out


def format_cornell_rects(rects) -> str:
    return "".join(f"{x!r} {y!r}\n" for r in rects for x, y in r.vertices.tolist())


def load_cornell_rects(path) -> CornellRects:
    with open(path) as fh:
        return parse_cornell_rects(fh.read())
