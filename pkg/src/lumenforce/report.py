"""Navigation quality metrics, force contour maps and report artifacts.

Turns per-contact force estimate streams into the quantities used to
judge a navigation run: the per-frame maximal contact force as the main
safety signal, its peak and time average, the force-time integral, and
the wall contour map of accumulated maximal force. Artifacts are written
as CSV and self-contained SVG files; output is deterministic for a fixed
input so reports can be diffed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phantom import PhantomGeometry

__all__ = [
    "NavigationMetrics",
    "ContourMap",
    "frame_peak_series",
    "compute_metrics",
    "build_contour",
    "emit",
    "write_metrics_csv",
    "write_traces_csv",
]


@dataclass
class NavigationMetrics:
    """Aggregate navigation-quality numbers over one or more repeats.

    average_max_cf:      mean over repeats of the per-run peak contact force, N
    std_max_cf:          standard deviation of the per-run peak over repeats, N
    average_mean_cf:     mean over repeats of the time-averaged per-frame max, N
    force_time_integral: mean over repeats of the integral of the per-frame
                         max force over time, N*s
    shape_rmse/maxe:     optional shape-estimation error summary, mm
    """

    average_max_cf: float
    std_max_cf: float
    average_mean_cf: float
    force_time_integral: float
    n_runs: int
    shape_rmse: float | None = None
    shape_maxe: float | None = None

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("metrics need at least one run")
        if self.force_time_integral < 0 or self.std_max_cf < 0:
            raise ValueError("integral and deviation cannot be negative")


def frame_peak_series(estimates, frame_times) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame maximal contact force magnitude.

    ``frame_times`` lists every frame timestamp, including frames without
    any contact, which contribute zero force.
    """
    t = np.asarray(sorted(float(x) for x in frame_times))
    if t.size == 0:
        raise ValueError("frame_times must not be empty")
    if np.any(np.diff(t) <= 0):
        raise ValueError("frame timestamps must be strictly increasing")
    peaks = np.zeros_like(t)
    for e in estimates:
        i = int(np.argmin(np.abs(t - e.timestamp)))
        if abs(t[i] - e.timestamp) > 1e-9 + 1e-6 * max(abs(e.timestamp), 1.0):
            raise ValueError(f"estimate at t={e.timestamp} matches no frame")
        peaks[i] = max(peaks[i], e.magnitude)
    return t, peaks


def _trapezoid(t: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


def _run_stats(estimates, frame_times) -> tuple[float, float, float]:
    t, peaks = frame_peak_series(estimates, frame_times)
    peak = float(peaks.max())
    integral = _trapezoid(t, peaks)
    duration = float(t[-1] - t[0])
    mean = integral / duration if duration > 0 else peak
    return peak, mean, integral


def compute_metrics(runs, shape_errors=None) -> NavigationMetrics:
    """Metrics over one run or several repeats.

    ``runs`` is one (estimates, frame_times) pair or a list of them. The
    per-frame scalar is the maximal contact force magnitude in the frame;
    the peak, the time average and the trapezoidal force-time integral
    are computed per run and averaged over repeats, with the standard
    deviation of the peak reported across repeats.
    """
    if isinstance(runs, tuple):
        runs = [runs]
    if not runs:
        raise ValueError("metrics need at least one run")
    peaks, means, integrals = [], [], []
    for estimates, frame_times in runs:
        p, m, i = _run_stats(estimates, frame_times)
        peaks.append(p)
        means.append(m)
        integrals.append(i)
    rmse = maxe = None
    if shape_errors:
        rmse = float(np.mean([e.rmse for e in shape_errors]))
        maxe = float(np.max([e.maxe for e in shape_errors]))
    return NavigationMetrics(
        average_max_cf=float(np.mean(peaks)),
        std_max_cf=float(np.std(peaks, ddof=1)) if len(peaks) > 1 else 0.0,
        average_mean_cf=float(np.mean(means)),
        force_time_integral=float(np.mean(integrals)),
        n_runs=len(runs),
        shape_rmse=rmse,
        shape_maxe=maxe,
    )


# ---------------------------------------------------------------------------
# contour map


@dataclass
class ContourMap:
    """Wall vertices carrying the maximal force observed nearby.

    ``values`` is NaN at vertices never within ``radius`` of an
    observation. ``segments`` maps wall names to index ranges into the
    shared vertex array.
    """

    vertices: np.ndarray
    values: np.ndarray
    segments: dict
    radius: float

    @property
    def vmin(self) -> float:
        v = self.values[~np.isnan(self.values)]
        return float(v.min()) if v.size else 0.0

    @property
    def vmax(self) -> float:
        v = self.values[~np.isnan(self.values)]
        return float(v.max()) if v.size else 0.0


def _resample_polyline(poly: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0:
        return poly.copy()
    n = max(int(math.ceil(arc[-1] / spacing)) + 1, 2)
    q = np.linspace(0.0, arc[-1], n)
    return np.column_stack([np.interp(q, arc, poly[:, 0]), np.interp(q, arc, poly[:, 1])])


def build_contour(estimates, geometry: PhantomGeometry, radius: float = 1.0,
                  spacing: float | None = None) -> ContourMap:
    """Accumulate force magnitudes onto nearby wall vertices.

    Every observation assigns its magnitude to wall vertices within
    ``radius`` of its position; where several interactions hit the same
    vertex the maximum is kept, so the map shows the worst force each
    piece of wall has seen. Aggregation is order independent.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    spacing = spacing if spacing is not None else radius / 2.0
    verts = []
    segments = {}
    start = 0
    for name, poly in geometry.walls.items():
        res = _resample_polyline(np.asarray(poly, float), spacing)
        verts.append(res)
        segments[name] = (start, start + len(res))
        start += len(res)
    vertices = np.vstack(verts)
    values = np.full(len(vertices), np.nan)
    for e in estimates:
        d = np.linalg.norm(vertices - np.asarray(e.position), axis=1)
        sel = d <= radius
        values[sel] = np.fmax(values[sel], e.magnitude)
    return ContourMap(vertices=vertices, values=values, segments=segments, radius=radius)


# ---------------------------------------------------------------------------
# artifact emission


def write_metrics_csv(metrics, path) -> None:
    """One labeled row per NavigationMetrics; header-only when empty."""
    rows = metrics if isinstance(metrics, (list, tuple)) else [("run", metrics)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["label", "avg_max_cf_N", "std_max_cf_N", "avg_mean_cf_N",
             "ft_integral_Ns", "n_runs", "shape_rmse_mm", "shape_maxe_mm"]
        )
        for label, m in rows:
            w.writerow(
                [
                    label,
                    f"{m.average_max_cf:.9g}",
                    f"{m.std_max_cf:.9g}",
                    f"{m.average_mean_cf:.9g}",
                    f"{m.force_time_integral:.9g}",
                    m.n_runs,
                    "" if m.shape_rmse is None else f"{m.shape_rmse:.9g}",
                    "" if m.shape_maxe is None else f"{m.shape_maxe:.9g}",
                ]
            )


def write_traces_csv(estimates, path) -> None:
    """Per-contact force traces over time, ordered by timestamp."""
    rows = sorted(estimates, key=lambda e: (e.timestamp, e.contact_index))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "contact_idx", "s_mm", "Fmag_N"])
        for e in rows:
            w.writerow([f"{e.timestamp:.6f}", e.contact_index, f"{e.s:.6f}", f"{e.magnitude:.9g}"])


_COLOR_STOPS = [
    (0.0, (40, 70, 200)),
    (0.35, (60, 180, 190)),
    (0.65, (245, 200, 60)),
    (1.0, (215, 40, 35)),
]


def _color_for(frac: float) -> str:
    frac = min(max(frac, 0.0), 1.0)
    for (f0, c0), (f1, c1) in zip(_COLOR_STOPS[:-1], _COLOR_STOPS[1:]):
        if frac <= f1:
            t = 0.0 if f1 == f0 else (frac - f0) / (f1 - f0)
            rgb = tuple(int(round(a + t * (b - a))) for a, b in zip(c0, c1))
            return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"
    return "rgb(215,40,35)"


def _svg_header(width: float, height: float) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]


def _legend(lines: list[str], x: float, y: float, height: float, vmin: float, vmax: float,
            title: str) -> None:
    steps = 24
    for i in range(steps):
        frac = 1.0 - i / (steps - 1)
        yy = y + i * height / steps
        lines.append(
            f'<rect x="{x:.1f}" y="{yy:.1f}" width="14" height="{height / steps + 0.5:.1f}" '
            f'fill="{_color_for(frac)}"/>'
        )
    lines.append(
        f'<text x="{x + 18:.1f}" y="{y + 8:.1f}" font-size="11" font-family="sans-serif">'
        f"{vmax:.3g}</text>"
    )
    lines.append(
        f'<text x="{x + 18:.1f}" y="{y + height:.1f}" font-size="11" font-family="sans-serif">'
        f"{vmin:.3g}</text>"
    )
    lines.append(
        f'<text x="{x:.1f}" y="{y - 8:.1f}" font-size="11" font-family="sans-serif">{title}</text>'
    )


def contour_svg(contour: ContourMap, path, wire_xy: np.ndarray | None = None,
                title: str = "accumulated max contact force (N)") -> None:
    """Render the contour map as a standalone SVG with a numeric legend."""
    pts = contour.vertices
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    width, margin, legend_w = 720.0, 30.0, 80.0
    scale = (width - 2 * margin - legend_w) / span[0]
    height = span[1] * scale + 2 * margin

    def to_px(p):
        return (margin + (p[0] - lo[0]) * scale, margin + (p[1] - lo[1]) * scale)

    vmin, vmax = contour.vmin, contour.vmax
    rng = max(vmax - vmin, 1e-12)
    lines = _svg_header(width, height)
    lines.append(f'<!-- radius {contour.radius:.3g} mm -->')
    for name, (a, b) in sorted(contour.segments.items()):
        seg_pts = pts[a:b]
        seg_val = contour.values[a:b]
        for i in range(len(seg_pts) - 1):
            x0, y0 = to_px(seg_pts[i])
            x1, y1 = to_px(seg_pts[i + 1])
            pair = seg_val[i : i + 2]
            v = np.nan if np.all(np.isnan(pair)) else np.nanmax(pair)
            if np.isnan(v):
                color, w = "rgb(190,190,190)", 2.0
            else:
                color, w = _color_for((v - vmin) / rng), 4.0
            lines.append(
                f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                f'stroke="{color}" stroke-width="{w:.1f}" stroke-linecap="round"/>'
            )
    if wire_xy is not None:
        d = " ".join(
            f"{'M' if i == 0 else 'L'}{to_px(p)[0]:.2f},{to_px(p)[1]:.2f}"
            for i, p in enumerate(wire_xy)
        )
        lines.append(f'<path d="{d}" fill="none" stroke="rgb(40,40,40)" stroke-width="1.5"/>')
    _legend(lines, width - legend_w + 10, margin + 10, height - 2 * margin - 20, vmin, vmax, title)
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def stress_profile_svg(arc_mm: np.ndarray, values: np.ndarray, path,
                       ylabel: str = "outer-fiber stress (N/mm^2)") -> None:
    """Plot a quantity along the tool length as a standalone SVG."""
    arc_mm = np.asarray(arc_mm, float)
    values = np.asarray(values, float)
    if arc_mm.shape != values.shape or arc_mm.size < 2:
        raise ValueError("arc and values must be equal-length arrays of >= 2 samples")
    width, height, margin = 720.0, 360.0, 50.0
    vmax = float(values.max())
    vmin = min(float(values.min()), 0.0)
    rng = max(vmax - vmin, 1e-12)
    srange = max(float(arc_mm[-1] - arc_mm[0]), 1e-12)

    def to_px(s, v):
        x = margin + (s - arc_mm[0]) / srange * (width - 2 * margin)
        y = height - margin - (v - vmin) / rng * (height - 2 * margin)
        return x, y

    lines = _svg_header(width, height)
    lines.append(
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
    )
    lines.append(
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>'
    )
    for i in range(5):
        s = arc_mm[0] + srange * i / 4
        x, _ = to_px(s, vmin)
        lines.append(
            f'<line x1="{x:.1f}" y1="{height - margin}" x2="{x:.1f}" '
            f'y2="{height - margin + 5}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{x:.1f}" y="{height - margin + 18}" font-size="11" '
            f'font-family="sans-serif" text-anchor="middle">{s:.0f}</text>'
        )
        v = vmin + rng * i / 4
        _, y = to_px(arc_mm[0], v)
        lines.append(
            f'<line x1="{margin - 5}" y1="{y:.1f}" x2="{margin}" y2="{y:.1f}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{margin - 8}" y="{y + 4:.1f}" font-size="11" '
            f'font-family="sans-serif" text-anchor="end">{v:.3g}</text>'
        )
    d = " ".join(
        f"{'M' if i == 0 else 'L'}{to_px(s, v)[0]:.2f},{to_px(s, v)[1]:.2f}"
        for i, (s, v) in enumerate(zip(arc_mm, values))
    )
    lines.append(f'<path d="{d}" fill="none" stroke="rgb(180,40,35)" stroke-width="2"/>')
    lines.append(
        f'<text x="{width / 2:.0f}" y="{height - 10}" font-size="12" font-family="sans-serif" '
        f'text-anchor="middle">arc length from base (mm)</text>'
    )
    lines.append(
        f'<text x="14" y="{margin - 14}" font-size="12" font-family="sans-serif">{ylabel}</text>'
    )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def emit(out_dir, metrics=None, estimates=None, contour=None,
         stress_profile=None, wire_xy=None) -> dict:
    """Write the report artifact set into ``out_dir``.

    metrics:        NavigationMetrics or [(label, metrics), ...] -> metrics.csv
    estimates:      force estimate stream -> traces.csv
    contour:        ContourMap -> contour.svg
    stress_profile: (arc_mm, values) -> stress.svg

    Returns a mapping of artifact name to written path. Output is
    deterministic for identical inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    if metrics is not None:
        path = out / "metrics.csv"
        write_metrics_csv(metrics, path)
        written["metrics"] = path
    if estimates is not None:
        path = out / "traces.csv"
        write_traces_csv(estimates, path)
        written["traces"] = path
    if contour is not None:
        path = out / "contour.svg"
        contour_svg(contour, path, wire_xy=wire_xy)
        written["contour"] = path
    if stress_profile is not None:
        arc_mm, values = stress_profile
        path = out / "stress.svg"
        stress_profile_svg(arc_mm, values, path)
        written["stress"] = path
    return written
