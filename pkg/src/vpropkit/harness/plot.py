"""Static SVG convergence plots (no plotting library needed)."""

import math
from collections import OrderedDict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

METRICS = {"elbo": ("elbo", "ELBO (train)"), "logloss": ("test_logloss", "test log-loss")}
REFERENCE = "VI-exact"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 20, 50


def _seed_means(records, attr):
    """algorithm -> (passes, mean over seeds), in first-seen order."""
    groups = OrderedDict()
    for r in records:
        groups.setdefault(r.algorithm, {}).setdefault(r.pass_index, []).append(getattr(r, attr))
    out = OrderedDict()
    for alg, by_pass in groups.items():
        passes = np.array(sorted(by_pass), dtype=float)
        vals = np.array([np.mean(by_pass[int(p)]) for p in passes])
        keep = np.isfinite(vals)
        out[alg] = (passes[keep], vals[keep])
    return out


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def render_svg_plot(records, metric, path):
    """One polyline per algorithm (mean over seeds); VI-exact as a dashed line."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}")
    records = list(records)
    if not records:
        raise ValueError("no trace records to plot")
    attr, label = METRICS[metric]
    series = _seed_means(records, attr)
    ref = series.pop(REFERENCE, None)
    ref_value = float(np.mean(ref[1])) if ref is not None and ref[1].size else None

    xs = [p for p, _ in series.values() if p.size]
    ys = [v for _, v in series.values() if v.size]
    if ref_value is not None:
        ys.append(np.array([ref_value]))
    if not ys:
        raise ValueError(f"no finite {metric} values to plot")
    x_hi = max((float(p.max()) for p in xs), default=1.0)
    x_lo = 0.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    allv = np.concatenate(ys)
    y_lo, y_hi = float(allv.min()), float(allv.max())
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else max(1.0, abs(y_hi)) * 0.05
    y_lo, y_hi = y_lo - pad, y_hi + pad

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + pw * (x - x_lo) / (x_hi - x_lo)

    def sy(y):
        # larger values sit higher on screen
        return TOP + ph * (y_hi - y) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}"/>'
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}"/></g>',
    ]
    for t in _ticks(x_lo, x_hi):
        out.append(
            f'<text x="{sx(t):.2f}" y="{TOP + ph + 16}" text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{LEFT - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(
        f'<text class="xlabel" x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">data passes</text>'
    )
    out.append(
        f'<text class="ylabel" x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(label)}</text>'
    )

    legend = []
    for i, (alg, (p, v)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}" for a, b in zip(p, v))
        out.append(
            f'<polyline data-algorithm="{escape(alg)}" points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        legend.append((alg, color, ""))
    if ref_value is not None:
        y = sy(ref_value)
        out.append(
            f'<line class="reference" data-algorithm="{REFERENCE}" x1="{LEFT}" y1="{y:.3f}" '
            f'x2="{LEFT + pw}" y2="{y:.3f}" stroke="black" stroke-dasharray="6 4"/>'
        )
        legend.append((REFERENCE, "black", ' stroke-dasharray="6 4"'))

    lx = LEFT + pw + 15
    out.append('<g class="legend">')
    for i, (alg, color, dash) in enumerate(legend):
        ly = TOP + 10 + 18 * i
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>'
            f'<text x="{lx + 30}" y="{ly + 4}">{escape(alg)}</text>'
        )
    out.append("</g></svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
