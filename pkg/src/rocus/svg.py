"""Self-contained SVG plots built from strings (no plotting backend)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .env2d import DEFAULT_PARAMS, GRID_RES, EnvParams, occupancy_grid

PRIOR_COLOR = "#1f77b4"
POSTERIOR_COLOR = "#ff7f0e"
SIZE = 480
PAD = 40


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") if v == v else "0"


def _doc(width, height, body: list[str], title: str = "") -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    parts = [head, f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


class ArenaFrame:
    """Maps arena coordinates to pixels, y up."""

    def __init__(self, params: EnvParams = DEFAULT_PARAMS, size: int = SIZE, pad: int = PAD):
        self.lo, self.hi = params.lo, params.hi
        self.size, self.pad = size, pad
        self.scale = (size - 2 * pad) / (self.hi - self.lo)

    def x(self, v):
        return self.pad + (v - self.lo) * self.scale

    def y(self, v):
        return self.size - self.pad - (v - self.lo) * self.scale

    def border(self) -> str:
        a, b = self.x(self.lo), self.y(self.hi)
        w = (self.hi - self.lo) * self.scale
        return f'<rect x="{_fmt(a)}" y="{_fmt(b)}" width="{_fmt(w)}" height="{_fmt(w)}" fill="none" stroke="black"/>'


def simplify_collinear(p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Drop interior points lying on the segment between their neighbours."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    if len(p) <= 2:
        return p
    keep = [p[0]]
    for i in range(1, len(p) - 1):
        a, b, c = keep[-1], p[i], p[i + 1]
        u, v = b - a, c - b
        cross = u[0] * v[1] - u[1] * v[0]
        if abs(cross) > tol * max(1.0, np.hypot(*u) * np.hypot(*v)) or np.dot(u, v) < 0:
            keep.append(b)
    keep.append(p[-1])
    return np.array(keep)


def path_d(points, frame: ArenaFrame) -> str:
    pts = simplify_collinear(points)
    cmds = [f"{'M' if i == 0 else 'L'}{_fmt(frame.x(x))} {_fmt(frame.y(y))}" for i, (x, y) in enumerate(pts)]
    return " ".join(cmds)


def render_trajectories(prior, posterior, params: EnvParams = DEFAULT_PARAMS, title: str = "") -> str:
    """Prior trajectories in blue, posterior in orange, over the arena."""
    if len(prior) == 0 or len(posterior) == 0:
        raise ValueError("need at least one prior and one posterior trajectory")
    f = ArenaFrame(params)
    body = [f.border()]
    for trajs, color in ((prior, PRIOR_COLOR), (posterior, POSTERIOR_COLOR)):
        for tr in trajs:
            pos = getattr(tr, "positions", tr)
            body.append(f'<path d="{path_d(pos, f)}" fill="none" stroke="{color}" stroke-opacity="0.6" stroke-width="1.2"/>')
    for (px, py), label in ((params.start, "start"), (params.goal, "goal")):
        body.append(f'<circle cx="{_fmt(f.x(px))}" cy="{_fmt(f.y(py))}" r="5" fill="black"><title>{label}</title></circle>')
    return _doc(SIZE, SIZE, body, title)


def occupancy_frequency(tasks, params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES) -> np.ndarray:
    acc = np.zeros((res, res))
    for t in tasks:
        acc += occupancy_grid(t, params, res)
    return acc / max(len(tasks), 1)


def density_diff(prior_tasks, posterior_tasks, params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES) -> np.ndarray:
    """Posterior minus prior per-cell obstacle frequency, in ``[-1, 1]``."""
    if len(prior_tasks) == 0 or len(posterior_tasks) == 0:
        raise ValueError("both task sets must be nonempty")
    return occupancy_frequency(posterior_tasks, params, res) - occupancy_frequency(prior_tasks, params, res)


def diverging_color(v: float, vmax: float) -> str:
    """White at 0, red for positive, blue for negative."""
    t = 0.0 if vmax <= 0 else min(abs(v) / vmax, 1.0)
    fade = int(round(255 * (1.0 - t)))
    return f"#ff{fade:02x}{fade:02x}" if v > 0 else f"#{fade:02x}{fade:02x}ff"


def render_density_diff(diff: np.ndarray, params: EnvParams = DEFAULT_PARAMS, title: str = "") -> str:
    """Heatmap of a density difference; zero cells are left as background."""
    f = ArenaFrame(params)
    res = diff.shape[0]
    cell = (params.hi - params.lo) / res * f.scale
    vmax = float(np.abs(diff).max())
    body = []
    for i, j in zip(*np.nonzero(diff)):
        x0 = params.lo + i * (params.hi - params.lo) / res
        y1 = params.lo + (j + 1) * (params.hi - params.lo) / res
        body.append(
            f'<rect x="{_fmt(f.x(x0))}" y="{_fmt(f.y(y1))}" width="{_fmt(cell)}" height="{_fmt(cell)}" '
            f'fill="{diverging_color(diff[i, j], vmax)}"/>'
        )
    body.append(f.border())
    return _doc(SIZE, SIZE, body, title)


class _Axes:
    def __init__(self, xlim, ylim, w=SIZE * 1.5, h=SIZE * 0.75, pad=PAD * 1.5):
        self.w, self.h, self.pad = w, h, pad
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            span = abs(self.y0) * 0.1 or 1.0
            self.y0, self.y1 = self.y0 - span, self.y1 + span

    def x(self, v):
        return self.pad + (v - self.x0) / (self.x1 - self.x0) * (self.w - 2 * self.pad)

    def y(self, v):
        return self.h - self.pad - (v - self.y0) / (self.y1 - self.y0) * (self.h - 2 * self.pad)

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        p, w, h = self.pad, self.w, self.h
        out = [f'<rect x="{p}" y="{p}" width="{w - 2 * p}" height="{h - 2 * p}" fill="none" stroke="black"/>']
        for v in (self.x0, self.x1):
            out.append(f'<text x="{_fmt(self.x(v))}" y="{h - p + 15}" text-anchor="middle" font-size="11">{_fmt(v)}</text>')
        for v in (self.y0, self.y1):
            out.append(f'<text x="{p - 5}" y="{_fmt(self.y(v))}" text-anchor="end" font-size="11">{_fmt(v)}</text>')
        out.append(f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
        out.append(f'<text x="12" y="{h / 2}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 12 {h / 2})">{escape(ylabel)}</text>')
        return out


def render_trace(values, title: str = "", burn_in: int = 0) -> str:
    """Behavior value against iteration; one polyline vertex per iteration."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    ax = _Axes((0, v.size - 1), (float(v.min()), float(v.max())))
    pts = " ".join(f"{_fmt(ax.x(i))},{_fmt(ax.y(y))}" for i, y in enumerate(v))
    body = ax.frame("iteration", "behavior")
    if 0 < burn_in < v.size:
        bx = _fmt(ax.x(burn_in))
        body.append(f'<line x1="{bx}" y1="{ax.pad}" x2="{bx}" y2="{ax.h - ax.pad}" stroke="gray" stroke-dasharray="4"/>')
    body.append(f'<polyline points="{pts}" fill="none" stroke="{POSTERIOR_COLOR}" stroke-width="1" data-n="{v.size}"/>')
    return _doc(ax.w, ax.h, body, title)


def histogram(values, bins: int = 40, range_=None) -> tuple[np.ndarray, np.ndarray]:
    """Density histogram; a constant series collapses into a single bin."""
    v = np.asarray(values, dtype=float)
    if v.min() == v.max():
        return np.array([1.0]), np.array([v[0], v[0]])
    counts, edges = np.histogram(v, bins=bins, range=range_, density=True)
    return counts, edges


def render_density(series: dict, title: str = "", bins: int = 40) -> str:
    """Overlaid step histograms of one or more named value series."""
    if not series or any(len(v) == 0 for v in series.values()):
        raise ValueError("every series must be nonempty")
    allv = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    lo, hi = float(allv.min()), float(allv.max())
    hists = {k: histogram(v, bins, None if lo == hi else (lo, hi)) for k, v in series.items()}
    ymax = max(float(c.max()) for c, _ in hists.values())
    ax = _Axes((lo, hi), (0.0, ymax))
    body = ax.frame("behavior", "density")
    colors = [PRIOR_COLOR, POSTERIOR_COLOR, "#2ca02c", "#d62728"]
    for n, (name, (counts, edges)) in enumerate(hists.items()):
        color = colors[n % len(colors)]
        if len(counts) == 1:
            x = _fmt(ax.x(edges[0]))
            body.append(f'<line class="spike" x1="{x}" y1="{_fmt(ax.y(0))}" x2="{x}" y2="{_fmt(ax.y(ymax))}" '
                        f'stroke="{color}" stroke-width="2"/>')
        else:
            pts = [(edges[0], 0.0)]
            for c, a, b in zip(counts, edges[:-1], edges[1:]):
                pts += [(a, c), (b, c)]
            pts.append((edges[-1], 0.0))
            s = " ".join(f"{_fmt(ax.x(x))},{_fmt(ax.y(y))}" for x, y in pts)
            body.append(f'<polyline points="{s}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>')
        body.append(f'<text x="{ax.w - ax.pad}" y="{ax.pad + 15 * (n + 1)}" text-anchor="end" font-size="11" '
                    f'fill="{color}">{escape(name)}</text>')
    return _doc(ax.w, ax.h, body, title)


__all__ = [
    "render_trajectories", "render_density_diff", "render_trace", "render_density", "density_diff",
    "occupancy_frequency", "diverging_color", "path_d", "simplify_collinear", "histogram", "ArenaFrame",
]
