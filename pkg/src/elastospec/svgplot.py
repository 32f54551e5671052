"""Tiny deterministic SVG emitters: scatter and log-log line plots.

No plotting dependency; output is byte-identical for identical input.
"""

from __future__ import annotations

import math

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf"]

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _fmt(x):
    return f"{x:.6g}"


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / max(n - 1, 1)))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


class _Canvas:
    def __init__(self, xlim, ylim, xlabel, ylabel, title, xlog=False, ylog=False):
        self.xlim, self.ylim = xlim, ylim
        self.xlog, self.ylog = xlog, ylog
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
            f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
            f'<text x="15" y="{_H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 15 {_H / 2})">{ylabel}</text>',
            f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
            f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>',
        ]
        self._axes()

    def _tx(self, x):
        lo, hi = self.xlim
        if self.xlog:
            x, lo, hi = math.log10(x), math.log10(lo), math.log10(hi)
        f = (x - lo) / (hi - lo) if hi > lo else 0.5
        return _ML + f * (_W - _ML - _MR)

    def _ty(self, y):
        lo, hi = self.ylim
        if self.ylog:
            y, lo, hi = math.log10(y), math.log10(lo), math.log10(hi)
        f = (y - lo) / (hi - lo) if hi > lo else 0.5
        return _H - _MB - f * (_H - _MT - _MB)

    def _axes(self):
        if self.xlog:
            lo, hi = self.xlim
            xt = [10.0 ** e for e in range(math.floor(math.log10(lo)),
                                           math.ceil(math.log10(hi)) + 1)]
        else:
            xt = _ticks(*self.xlim)
        if self.ylog:
            lo, hi = self.ylim
            yt = [10.0 ** e for e in range(math.floor(math.log10(lo)),
                                           math.ceil(math.log10(hi)) + 1)]
        else:
            yt = _ticks(*self.ylim)
        for t in xt:
            if not (self.xlim[0] <= t <= self.xlim[1]):
                continue
            px = self._tx(t)
            self.parts.append(f'<line x1="{_fmt(px)}" y1="{_H - _MB}" x2="{_fmt(px)}" '
                              f'y2="{_H - _MB + 5}" stroke="black"/>')
            self.parts.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 18}" '
                              f'text-anchor="middle" font-size="10">{_fmt(t)}</text>')
        for t in yt:
            if not (self.ylim[0] <= t <= self.ylim[1]):
                continue
            py = self._ty(t)
            self.parts.append(f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" '
                              f'y2="{_fmt(py)}" stroke="black"/>')
            self.parts.append(f'<text x="{_ML - 8}" y="{_fmt(py)}" text-anchor="end" '
                              f'font-size="10" dominant-baseline="middle">{_fmt(t)}</text>')

    def legend(self, labels):
        y = _MT + 14
        for i, lab in enumerate(labels):
            color = _COLORS[i % len(_COLORS)]
            self.parts.append(f'<circle cx="{_W - _MR - 110}" cy="{y}" r="4" fill="{color}"/>')
            self.parts.append(f'<text x="{_W - _MR - 100}" y="{y + 4}" font-size="11">{lab}</text>')
            y += 16

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w") as f:
            f.write("\n".join(self.parts) + "\n")


def _pad(lo, hi, log=False):
    if log:
        lo = max(lo, 1e-300)
        span = math.log10(hi / lo) if hi > lo else 1.0
        return lo * 10 ** (-0.05 * span), hi * 10 ** (0.05 * span)
    span = hi - lo or max(abs(hi), 1.0)
    return lo - 0.05 * span, hi + 0.05 * span


def scatter_plot(series, path, xlabel="Re", ylabel="Im", title="", limits=None):
    """Scatter plot of labelled (x, y) point sets, one color per series.

    ``series`` is a list of (label, xs, ys).  ``limits`` optionally pins
    the axes as ((xmin, xmax), (ymin, ymax)).
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    if limits is None:
        xlim = _pad(min(xs_all), max(xs_all))
        ylim = _pad(min(ys_all), max(ys_all))
    else:
        xlim, ylim = limits
    cv = _Canvas(xlim, ylim, xlabel, ylabel, title)
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        for x, y in zip(xs, ys):
            if xlim[0] <= x <= xlim[1] and ylim[0] <= y <= ylim[1]:
                cv.parts.append(f'<circle cx="{_fmt(cv._tx(x))}" cy="{_fmt(cv._ty(y))}" '
                                f'r="3" fill="{color}" fill-opacity="0.7"/>')
    cv.legend([label for label, _, _ in series])
    cv.save(path)


def loglog_plot(series, path, xlabel="h", ylabel="error", title="", guides=()):
    """Log-log line plot; ``guides`` adds reference slopes (slope, label)."""
    xs_all = [x for _, xs, _ in series for x in xs if x > 0]
    ys_all = [y for _, _, ys in series for y in ys if y > 0]
    if not xs_all or not ys_all:
        raise ValueError("log-log plot needs positive data")
    xlim = _pad(min(xs_all), max(xs_all), log=True)
    ylim = _pad(min(ys_all), max(ys_all), log=True)
    cv = _Canvas(xlim, ylim, xlabel, ylabel, title, xlog=True, ylog=True)
    labels = []
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{_fmt(cv._tx(x))},{_fmt(cv._ty(y))}"
                       for x, y in zip(xs, ys) if x > 0 and y > 0)
        cv.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            if x > 0 and y > 0:
                cv.parts.append(f'<circle cx="{_fmt(cv._tx(x))}" cy="{_fmt(cv._ty(y))}" '
                                f'r="3" fill="{color}"/>')
        labels.append(label)
    x0, x1 = min(xs_all), max(xs_all)
    y1 = max(ys_all)
    for slope, glabel in guides:
        ys = [y1 * (x0 / x1) ** slope, y1]
        pts = f"{_fmt(cv._tx(x0))},{_fmt(cv._ty(ys[0]))} {_fmt(cv._tx(x1))},{_fmt(cv._ty(ys[1]))}"
        cv.parts.append(f'<polyline points="{pts}" fill="none" stroke="#888" '
                        f'stroke-dasharray="5,4"/>')
        labels.append(glabel)
    cv.legend(labels)
    cv.save(path)
