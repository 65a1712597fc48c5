"""Minimal SVG and number formatting shared by the exporters."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = ["fmt", "svg_polylines"]


def fmt(value: float) -> str:
    """Fixed 9-significant-digit formatting so reruns are byte-identical."""
    v = float(value)
    if v == 0.0:
        return "0"
    return f"{v:.9g}"


def svg_polylines(
    lines: Iterable[np.ndarray],
    region: Sequence[Sequence[float]],
    stroke_width: float = 1.0,
    widths: Iterable[Sequence[float] | None] | None = None,
    opacities: Iterable[Sequence[float] | None] | None = None,
    markers: Sequence[Sequence[float]] = (),
    width_px: int = 600,
) -> str:
    """Polylines in the ``(x, y)`` plane with the view box set to ``region``.

    The y axis points up (mathematical orientation).  Strokes keep their
    pixel width under the scaling transform.  Optional per-line widths and
    opacities take the mean of per-sample attributes.
    """
    (x0, x1), (y0, y1) = region[0], region[1]
    w = x1 - x0
    h = y1 - y0
    height_px = max(1, int(round(width_px * h / w))) if w > 0 else width_px
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{width_px}" height="{height_px}" viewBox="{fmt(x0)} {fmt(-y1)} {fmt(w)} {fmt(h)}">',
        '<g transform="scale(1,-1)" fill="none" stroke="black">',
    ]
    lines = list(lines)
    widths = list(widths) if widths is not None else [None] * len(lines)
    opacities = list(opacities) if opacities is not None else [None] * len(lines)
    for pts, lw, op in zip(lines, widths, opacities):
        pts = np.asarray(pts, dtype=float)
        if pts.shape[0] == 0:
            continue
        coords = " ".join(f"{fmt(p[0])},{fmt(p[1])}" for p in pts)
        sw = stroke_width if lw is None else float(np.mean(lw))
        extra = "" if op is None else f' stroke-opacity="{fmt(float(np.mean(op)))}"'
        out.append(
            f'<polyline points="{coords}" stroke-width="{fmt(sw)}"{extra} vector-effect="non-scaling-stroke"/>'
        )
    r = 0.005 * max(w, h)
    for m in markers:
        out.append(f'<circle cx="{fmt(m[0])}" cy="{fmt(m[1])}" r="{fmt(r)}" fill="red" stroke="none"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
