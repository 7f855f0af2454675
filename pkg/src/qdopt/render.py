"""SVG picture of a 2-D collection: one mark per solution, lighter is better."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

CANVAS = 500
MARGIN = 20
LEGEND_H = 50

# viridis anchors, dark to light (monotone in lightness)
_RAMP = np.array([
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142), (38, 130, 142),
    (31, 158, 137), (53, 183, 121), (109, 205, 89), (180, 222, 44), (253, 231, 37),
], dtype=float)


def ramp_color(t: float) -> str:
    """Hex color for ``t`` in [0, 1]: 0 is the darkest, 1 the lightest."""
    t = min(max(float(t), 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(t), len(_RAMP) - 2)
    rgb = _RAMP[i] + (t - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _num(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def render_collection_svg(container, title: str = "") -> str:
    """SVG document; grid members are drawn as cells, archive members as dots."""
    members = container.members()
    dim = getattr(container, "dim", None) or getattr(container, "descriptor_size", None)
    if dim != 2:
        raise ValueError(f"can only draw 2-D collections, this one has {dim} descriptor dimensions")
    width = CANVAS + 2 * MARGIN
    height = CANVAS + 2 * MARGIN + LEGEND_H
    fits = np.array([m.fitness for m in members]) if members else np.zeros(0)
    lo = float(fits.min()) if len(fits) else 0.0
    hi = float(fits.max()) if len(fits) else 0.0
    span = hi - lo

    def shade(f):
        return ramp_color(1.0 if span == 0 else (f - lo) / span)

    def to_px(dx, dy):
        return MARGIN + dx * CANVAS, MARGIN + (1.0 - dy) * CANVAS

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<title>{escape(title)}</title>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{CANVAS}" height="{CANVAS}" '
           f'fill="white" stroke="black" stroke-width="1"/>']
    if container.kind == "grid":
        rx, ry = container.resolution
        cw, ch = CANVAS / rx, CANVAS / ry
        for m in members:
            i, j = container.cell_of(m)
            x, y = to_px(i / rx, (j + 1) / ry)
            out.append(f'<rect class="member" x="{_num(x)}" y="{_num(y)}" width="{_num(cw)}" '
                       f'height="{_num(ch)}" fill="{shade(m.fitness)}"/>')
    else:
        r = max(1.0, container.l * CANVAS / 2)
        for m in members:
            x, y = to_px(*m.descriptor)
            out.append(f'<circle class="member" cx="{_num(x)}" cy="{_num(y)}" r="{_num(r)}" '
                       f'fill="{shade(m.fitness)}"/>')
    # legend
    ly = CANVAS + 2 * MARGIN + 5
    steps = 50
    bar_w = CANVAS / 2
    for s in range(steps):
        out.append(f'<rect x="{_num(MARGIN + s * bar_w / steps)}" y="{ly}" '
                   f'width="{_num(bar_w / steps + 0.5)}" height="12" fill="{ramp_color(s / (steps - 1))}"/>')
    out.append(f'<text class="legend-min" x="{MARGIN}" y="{ly + 28}" font-size="11">{lo:.4g}</text>')
    out.append(f'<text class="legend-max" x="{_num(MARGIN + bar_w)}" y="{ly + 28}" font-size="11" '
               f'text-anchor="end">{hi:.4g}</text>')
    out.append(f'<text x="{_num(MARGIN + bar_w + 10)}" y="{ly + 10}" font-size="11">'
               f'fitness (lighter is better), {len(members)} solutions</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
