"""Plain SVG drawings of continua, deformed shapes, rigid disks and paths."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

MATERIAL = "#9db4c0"
DEFORMED = "#e07a5f"
RIGID = "#222222"


class Canvas:
    """Collects shapes in model coordinates (mm, y up) and writes one SVG."""

    def __init__(self, pad: float = 1.0, scale: float = 20.0):
        self.items: list = []
        self.lo = np.array([np.inf, np.inf])
        self.hi = -self.lo
        self.pad = pad
        self.scale = scale

    def _grow(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        self.lo = np.minimum(self.lo, pts.min(axis=0))
        self.hi = np.maximum(self.hi, pts.max(axis=0))

    def polygons(self, polys, fill, stroke="none", opacity=1.0, width=0.02):
        polys = np.asarray(polys, dtype=float)
        if len(polys) == 0:
            return
        self._grow(polys)
        d = " ".join("M" + " L".join(f"{x:.4f},{-y:.4f}" for x, y in p) + " Z" for p in polys)
        self.items.append(
            f'<path d="{d}" fill="{fill}" fill-opacity="{opacity}" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polyline(self, pts, stroke, width=0.06, dash=None):
        pts = np.asarray(pts, dtype=float)
        if len(pts) < 2:
            return
        self._grow(pts)
        p = " ".join(f"{x:.4f},{-y:.4f}" for x, y in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{p}" fill="none" stroke="{stroke}" stroke-width="{width}"{extra}/>')

    def circle(self, center, r, fill, stroke="none", width=0.03):
        cx, cy = center
        self._grow([[cx - r, cy - r], [cx + r, cy + r]])
        self.items.append(
            f'<circle cx="{cx:.4f}" cy="{-cy:.4f}" r="{r:.4f}" fill="{fill}" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def marker(self, point, color, size=0.25):
        self.circle(point, size, color)

    def arrow(self, start, vec, color, width=0.08):
        start = np.asarray(start, dtype=float)
        end = start + np.asarray(vec, dtype=float)
        self.polyline([start, end], color, width)
        d = np.asarray(vec, dtype=float)
        n = np.linalg.norm(d)
        if n > 0:
            d = d / n
            side = np.array([-d[1], d[0]])
            head = [end, end - 0.5 * d + 0.25 * side, end - 0.5 * d - 0.25 * side]
            self.polygons([head], color)

    def text(self, point, label, size=0.8):
        x, y = point
        self._grow([[x, y]])
        self.items.append(f'<text x="{x:.4f}" y="{-y:.4f}" font-size="{size}" font-family="sans-serif">{escape(label)}</text>')

    def render(self) -> str:
        lo, hi = self.lo - self.pad, self.hi + self.pad
        if not np.all(np.isfinite(lo)):
            lo, hi = np.zeros(2), np.ones(2)
        w, h = hi - lo
        view = f"{lo[0]:.4f} {-hi[1]:.4f} {w:.4f} {h:.4f}"
        body = "\n".join(self.items)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view}" '
            f'width="{w * self.scale:.0f}" height="{h * self.scale:.0f}">\n{body}\n</svg>\n'
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def draw_continuum(canvas: Canvas, continuum, coords=None, fill=MATERIAL, opacity=1.0) -> None:
    xy = continuum.coords if coords is None else coords
    canvas.polygons(xy[continuum.cells], fill, stroke="#555555", opacity=opacity, width=0.01)
    for loop in continuum.boundary.loops:
        canvas.polyline(xy[list(loop) + [loop[0]]], "#333333", width=0.04)


def draw_rigid(canvas: Canvas, continuum) -> None:
    for s in continuum.rigid:
        canvas.circle(s.center, s.radius, RIGID)


def draw_masks(canvas: Canvas, masks) -> None:
    for m in masks:
        canvas.circle((m.x, m.y), m.r, "none", stroke="#888888", width=0.03)


def draw_ports(canvas: Canvas, continuum, direction=None, force=0.0, coords=None) -> None:
    xy = continuum.coords if coords is None else coords
    present = set(int(n) for n in continuum.active_nodes)
    for n in continuum.fixed_nodes:
        if int(n) in present:
            canvas.marker(xy[n], "#2a9d8f", 0.15)
    if continuum.input_node is not None and continuum.input_node in present:
        p = xy[continuum.input_node]
        if direction is not None and force:
            canvas.arrow(p - 2.0 * np.sign(force) * np.asarray(direction), 2.0 * np.sign(force) * np.asarray(direction), "#d62828")
        canvas.marker(p, "#d62828")
    if continuum.output_node is not None and continuum.output_node in present:
        canvas.marker(xy[continuum.output_node], "#1d3557")


def topology_svg(path, continuum, masks=(), direction=None, force=0.0, actual=None, specified=None) -> None:
    """Smoothed continuum with masks, rigid disks, ports and optional paths."""
    c = Canvas()
    draw_masks(c, masks)
    draw_continuum(c, continuum)
    draw_rigid(c, continuum)
    draw_ports(c, continuum, direction, force)
    if actual is not None:
        c.polyline(actual, "#1d3557", 0.06)
    if specified is not None:
        c.polyline(specified, "#f4a261", 0.06, dash="0.2,0.15")
    c.save(path)


def deformation_svg(path, continuum, node_ids, u, label="") -> None:
    """Undeformed outline (faded) under the deformed shape for one load stage."""
    c = Canvas()
    draw_continuum(c, continuum, opacity=0.25)
    xy = continuum.coords.copy()
    xy[node_ids] = xy[node_ids] + np.asarray(u).reshape(-1, 2)
    draw_continuum(c, continuum, coords=xy, fill=DEFORMED, opacity=0.85)
    draw_rigid(c, continuum)
    if label:
        c.text(continuum.coords[continuum.active_nodes].min(axis=0) - [0.0, 1.5], label)
    c.save(path)


def paths_svg(path, curves: dict) -> None:
    """Overlay of several polylines keyed by label."""
    palette = ["#1d3557", "#e63946", "#2a9d8f", "#f4a261", "#6d597a", "#264653"]
    c = Canvas(pad=0.5, scale=60.0)
    for k, (label, pts) in enumerate(curves.items()):
        c.polyline(pts, palette[k % len(palette)], 0.03)
    c.save(path)
