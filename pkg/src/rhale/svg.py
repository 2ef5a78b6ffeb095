"""Tiny SVG writer for effect, PDP/ICE and benchmark plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 50
MAX_ICE_LINES = 200


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Panel:
    """Maps data coordinates to a pixel box."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        lo, hi = ylim
        if not hi > lo:
            lo, hi = lo - 1.0, hi + 1.0
        pad = 0.05 * (hi - lo)
        self.xlim = xlim
        self.ylim = (lo - pad, hi + pad)

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - lo) / (hi - lo) * self.h

    def points(self, x, y) -> str:
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y)))

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        out = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
               'fill="none" stroke="#444"/>']
        for x in np.linspace(*self.xlim, 5):
            out.append(f'<text x="{_fmt(self.px(x))}" y="{self.y0 + self.h + 14}" '
                       f'font-size="10" text-anchor="middle">{x:.3g}</text>')
        for y in np.linspace(*self.ylim, 5):
            out.append(f'<text x="{self.x0 - 4}" y="{_fmt(self.py(y) + 3)}" '
                       f'font-size="10" text-anchor="end">{y:.3g}</text>')
        out.append(f'<text x="{self.x0 + self.w / 2}" y="{self.y0 + self.h + 28}" '
                   f'font-size="11" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(f'<text x="{self.x0 - 38}" y="{self.y0 + self.h / 2}" font-size="11" '
                   f'text-anchor="middle" transform="rotate(-90 {self.x0 - 38} '
                   f'{self.y0 + self.h / 2})">{escape(ylabel)}</text>')
        return out

    def line(self, x, y, color="#1f77b4", width=1.5, opacity=1.0, dash=None) -> str:
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return (f'<polyline points="{self.points(x, y)}" fill="none" stroke="{color}" '
                f'stroke-width="{width}" stroke-opacity="{opacity}"{extra}/>')


def _document(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    heading = (f'<text x="{WIDTH / 2}" y="18" font-size="13" text-anchor="middle">'
               f'{escape(title)}</text>')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', heading,
                      *body, "</svg>"]) + "\n"


def effect_svg(result, title: str = "feature effect") -> str:
    """Curve with a +-std band on top; per-bin effects with whiskers and histograms below."""
    z = result.partition.limits
    x = np.union1d(np.linspace(z[0], z[-1], 201), z)
    y = np.asarray(result.effect(x))
    sd = np.asarray(result.std(x))
    bins = result.bins
    w = WIDTH - 2 * MARGIN
    top = _Panel(MARGIN, 30, w, 230, (z[0], z[-1]), (float(np.min(y - sd)), float(np.max(y + sd))))
    std = bins.std_filled
    low = float(np.min(bins.mean - std))
    high = float(np.max(bins.mean + std))
    bottom = _Panel(MARGIN, 300, w, 140, (z[0], z[-1]), (min(low, 0.0), max(high, 0.0)))

    name = result.feature_name or f"x{result.feature_index + 1}"
    body = top.frame("", "effect")
    band = top.points(x, y + sd) + " " + top.points(x[::-1], (y - sd)[::-1])
    body.append(f'<polygon points="{band}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>')
    body.append(top.line(x, y, width=2))
    body += bottom.frame(name, "bin effect")
    for k in range(bins.K):
        left, right = float(bottom.px(z[k])), float(bottom.px(z[k + 1]))
        mid = 0.5 * (left + right)
        hist = bins.histograms[k] if bins.histograms else None
        if hist is not None and sum(hist.counts) > 0:
            # mirrored histogram as a violin substitute
            edges = np.asarray(hist.edges)
            counts = np.asarray(hist.counts, dtype=float)
            half = 0.45 * (right - left) * counts / counts.max()
            for c, e0, e1 in zip(half, edges[:-1], edges[1:]):
                if c > 0:
                    ya, yb = float(bottom.py(e1)), float(bottom.py(e0))
                    body.append(f'<rect x="{_fmt(mid - c)}" y="{_fmt(ya)}" width="{_fmt(2 * c)}" '
                                f'height="{_fmt(max(yb - ya, 0.5))}" fill="#ff7f0e" fill-opacity="0.3"/>')
        y0, ymu = float(bottom.py(0.0)), float(bottom.py(bins.mean[k]))
        body.append(f'<rect x="{_fmt(left + 1)}" y="{_fmt(min(y0, ymu))}" '
                    f'width="{_fmt(max(right - left - 2, 0.5))}" height="{_fmt(abs(y0 - ymu))}" '
                    f'fill="#1f77b4" fill-opacity="0.5"/>')
        ya, yb = float(bottom.py(bins.mean[k] + std[k])), float(bottom.py(bins.mean[k] - std[k]))
        body.append(f'<line x1="{_fmt(mid)}" y1="{_fmt(ya)}" x2="{_fmt(mid)}" y2="{_fmt(yb)}" '
                    'stroke="#222" stroke-width="1"/>')
    return _document(body, title)


def pdp_ice_svg(pdp_curve, ice_bundle, title: str = "PDP and ICE") -> str:
    curves = ice_bundle.curves
    step = max(1, int(np.ceil(curves.shape[0] / MAX_ICE_LINES)))
    shown = curves[::step]
    grid = ice_bundle.grid
    panel = _Panel(MARGIN, 30, WIDTH - 2 * MARGIN, HEIGHT - 90, (grid[0], grid[-1]),
                   (float(min(shown.min(), pdp_curve.values.min())),
                    float(max(shown.max(), pdp_curve.values.max()))))
    body = panel.frame("feature value", "model output")
    body += [panel.line(grid, row, color="#888", width=0.7, opacity=0.4) for row in shown]
    body.append(panel.line(pdp_curve.grid, pdp_curve.values, color="#d62728", width=2.5))
    return _document(body, title)


def metric_svg(report, metric: str, title: str = "") -> str:
    """A metric against fixed K, with the automatic binning as a dashed line."""
    ks = np.array(report.k_list, dtype=float)
    vals = np.array([report.mean(metric, "fixed", int(k)) for k in ks])
    auto = report.mean(metric, "auto")
    xlim = (ks.min(), ks.max()) if ks.size > 1 else (ks[0] - 1, ks[0] + 1)
    panel = _Panel(MARGIN, 30, WIDTH - 2 * MARGIN, HEIGHT - 90, xlim,
                   (float(min(vals.min(), auto, 0.0)), float(max(vals.max(), auto))))
    body = panel.frame("K (fixed-size bins)", metric)
    body.append(panel.line(ks, vals, color="#1f77b4", width=2))
    for k, v in zip(ks, vals):
        body.append(f'<circle cx="{_fmt(panel.px(k))}" cy="{_fmt(panel.py(v))}" r="2.5" fill="#1f77b4"/>')
    body.append(panel.line(list(xlim), [auto, auto], color="#d62728", width=2, dash="6,4"))
    return _document(body, title or f"{metric}: fixed K vs automatic")
