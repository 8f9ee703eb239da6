"""Deterministic SVG depiction of a MolGraph from its own coordinates.

Every bond becomes one ``<g class="bond">`` group and every atom one
``<text>`` element. Numbers are printed with two decimals so output bytes
only depend on the input graph and the style.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .graph import BondDisplay, BondOrder, MolGraph, ensure_valid, median_bond_length

_HEX = re.compile(r"#[0-9A-Fa-f]{6}\Z")


@dataclass(frozen=True)
class DepictStyle:
    single: str = "#939FAA"
    double: str = "#E08684"
    triple: str = "#F9CFA2"
    aromatic: str = "#85B5B5"
    wedge: str = "#00FF00"
    dash: str = "#FF0000"
    label: str = "#000000"
    background: str = "#FFFFFF"
    width: int = 400
    height: int = 400
    margin: int = 30
    font_size: int = 14
    stroke_width: float = 2.0
    offset_fraction: float = 0.08  # gap between parallel lines, relative to median bond length
    wedge_fraction: float = 0.15  # half-width of the wide wedge end
    hatch_count: int = 6

    def __post_init__(self):
        for name in ("single", "double", "triple", "aromatic", "wedge", "dash", "label", "background"):
            if not _HEX.match(getattr(self, name)):
                raise ValueError(f"{name} color must be #RRGGBB")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canvas must be positive")
        if self.margin < 0 or 2 * self.margin >= min(self.width, self.height):
            raise ValueError("margin leaves no drawing area")
        if self.font_size <= 0 or self.hatch_count < 2:
            raise ValueError("font size must be positive and hatch count at least 2")

    def bond_color(self, order: BondOrder) -> str:
        return {
            BondOrder.SINGLE: self.single,
            BondOrder.DOUBLE: self.double,
            BondOrder.TRIPLE: self.triple,
            BondOrder.AROMATIC: self.aromatic,
        }[order]


def _f(v: float) -> str:
    text = f"{v:.2f}"
    return "0.00" if text == "-0.00" else text


def _line(x1, y1, x2, y2, color, width) -> str:
    return (
        f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
        f'stroke="{color}" stroke-width="{_f(width)}"/>'
    )


def _atom_text(label: str, charge: int) -> str:
    if charge == 0:
        return label
    sign = "+" if charge > 0 else "-"
    return label + (sign if abs(charge) == 1 else f"{abs(charge)}{sign}")


def depict(graph: MolGraph, style: DepictStyle | None = None) -> str:
    """Render ``graph`` as SVG text. The graph must carry coordinates."""
    style = style or DepictStyle()
    ensure_valid(graph)
    if graph.atoms and not graph.has_coords:
        raise ValueError("depiction needs coordinates on every atom")
    w, h, m = style.width, style.height, style.margin
    pts: list[tuple[float, float]] = []
    unit = 1.0
    if graph.atoms:
        xs = [a.coords[0] for a in graph.atoms]
        ys = [a.coords[1] for a in graph.atoms]
        span = max(max(xs) - min(xs), max(ys) - min(ys))
        bond = median_bond_length(graph)
        # a lone atom or a collapsed drawing still gets a sensible scale
        scale = min(w - 2 * m, h - 2 * m) / span if span > 0 else (min(w, h) - 2 * m) / 4
        cx, cy = (max(xs) + min(xs)) / 2, (max(ys) + min(ys)) / 2
        pts = [(w / 2 + (x - cx) * scale, h / 2 - (y - cy) * scale) for x, y in zip(xs, ys)]
        unit = bond * scale
    off = style.offset_fraction * unit
    half_wedge = style.wedge_fraction * unit

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="{style.background}"/>',
    ]
    for k, b in enumerate(graph.bonds):
        (x1, y1), (x2, y2) = pts[b.from_idx], pts[b.to_idx]
        length = math.hypot(x2 - x1, y2 - y1) or 1.0
        nx, ny = -(y2 - y1) / length, (x2 - x1) / length  # unit normal
        attrs = f'class="bond" id="b{k}" data-order="{b.order.value}" data-display="{b.display.value}"'
        parts = []
        if b.display is BondDisplay.BEGIN_WEDGE:
            poly = [
                (x1, y1),
                (x2 + nx * half_wedge, y2 + ny * half_wedge),
                (x2 - nx * half_wedge, y2 - ny * half_wedge),
            ]
            pts_text = " ".join(f"{_f(px)},{_f(py)}" for px, py in poly)
            parts.append(f'<polygon points="{pts_text}" fill="{style.wedge}" stroke="{style.wedge}"/>')
        elif b.display is BondDisplay.BEGIN_DASH:
            n = style.hatch_count
            for i in range(n):
                t = (i + 1) / n
                px, py = x1 + (x2 - x1) * t, y1 + (y2 - y1) * t
                hw = half_wedge * t
                parts.append(_line(px + nx * hw, py + ny * hw, px - nx * hw, py - ny * hw,
                                   style.dash, style.stroke_width / 2))
        else:
            color = style.bond_color(b.order)
            shifts = {
                BondOrder.DOUBLE: (-off / 2, off / 2),
                BondOrder.TRIPLE: (-off, 0.0, off),
            }.get(b.order, (0.0,))
            for s in shifts:
                parts.append(_line(x1 + nx * s, y1 + ny * s, x2 + nx * s, y2 + ny * s, color, style.stroke_width))
        out.append(f"<g {attrs}>" + "".join(parts) + "</g>")
    for a, (x, y) in zip(graph.atoms, pts):
        out.append(
            f'<text class="atom" id="a{a.index}" x="{_f(x)}" y="{_f(y)}" '
            f'font-family="sans-serif" font-size="{style.font_size}" fill="{style.label}" '
            f'text-anchor="middle" dominant-baseline="central">'
            f"{escape(_atom_text(a.label, a.formal_charge))}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
