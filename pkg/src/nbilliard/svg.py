"""Minimal SVG emitter for static figures (polylines, markers, the wall)."""
import math
from xml.sax.saxutils import escape

import numpy as np

COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


class Figure:
    def __init__(self, width=640, height=640, title=None):
        self.width, self.height = width, height
        self.title = title
        self.items = []
        self.lo = np.array([math.inf, math.inf])
        self.hi = -self.lo

    def _grow(self, pts):
        pts = np.asarray(pts, float).reshape(-1, 2)
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        if len(pts):
            self.lo = np.minimum(self.lo, pts.min(0))
            self.hi = np.maximum(self.hi, pts.max(0))

    def polyline(self, pts, colour=None, width=1.5, dash=None, fit=True):
        pts = np.asarray(pts, float)
        if fit:
            self._grow(pts)
        self.items.append(("line", pts, colour or COLOURS[len(self.items) % len(COLOURS)],
                           width, dash))
        return self

    def points(self, pts, colour="#000000", r=3.0, fit=True):
        pts = np.asarray(pts, float).reshape(-1, 2)
        if fit:
            self._grow(pts)
        self.items.append(("dots", pts, colour, r, None))
        return self

    def wall(self, wall, colour="#555555"):
        # drawn across whatever the other items span
        self.items.append(("wall", wall, colour, 2.0, None))
        self._grow(wall.foot)
        return self

    def render(self, pad=0.08):
        lo, hi = self.lo.copy(), self.hi.copy()
        if not np.all(np.isfinite(lo)):
            lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        span = max(float((hi - lo).max()), 1e-9)
        c = 0.5 * (lo + hi)
        lo, hi = c - (0.5 + pad) * span, c + (0.5 + pad) * span
        sx = self.width / (hi[0] - lo[0])
        sy = self.height / (hi[1] - lo[1])

        def tr(p):
            p = np.asarray(p, float).reshape(-1, 2)
            return np.column_stack([(p[:, 0] - lo[0]) * sx, (hi[1] - p[:, 1]) * sy])

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               '<rect width="100%" height="100%" fill="white"/>']
        if self.title:
            out.append(f'<title>{escape(self.title)}</title>')
        for kind, obj, colour, w, dash in self.items:
            if kind == "line":
                p = tr(obj)
                for run in _finite_runs(p):
                    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in run)
                    d = f' stroke-dasharray="{dash}"' if dash else ""
                    out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="{w}"{d} '
                               f'points="{pts}"/>')
            elif kind == "dots":
                for x, y in tr(obj):
                    out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{w}" fill="{colour}"/>')
            else:
                s0 = obj.coord(obj.foot)
                big = 4.0 * span
                p = tr(np.array([obj.point(s0 - big), obj.point(s0 + big)]))
                out.append(f'<line x1="{p[0, 0]:.2f}" y1="{p[0, 1]:.2f}" x2="{p[1, 0]:.2f}" '
                           f'y2="{p[1, 1]:.2f}" stroke="{colour}" stroke-width="{w}"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _finite_runs(p):
    ok = np.all(np.isfinite(p), axis=1)
    runs, cur = [], []
    for q, good in zip(p, ok):
        if good:
            cur.append(q)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return [r for r in runs if len(r) > 1]
