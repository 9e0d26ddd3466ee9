"""Segmentation and contact tracking on grayscale frames.

Extracts the vessel boundary mask and the tool centerline from 8-bit
frames, then sweeps a search window along the tool to produce an
arc-length parameterized centerline with contact and tip observations.
All image operations are implemented here on plain numpy arrays: the
tool mask comes from thresholding (the tool is dark on a light
background) followed by morphological closing; vessel boundaries come
from Gaussian smoothing and a Canny detector. The vessel mask is meant
to be computed once per session from a tool-free reference frame and
reused, since the vessel is assumed static.

Pixel coordinates are (x = column, y = row) with integer indices at
pixel centers; arc lengths accumulate along the swept centerline. Frames
are processed independently apart from the cached vessel mask, which is
read-only after creation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SeedNotFoundError",
    "TrackRunawayError",
    "RasterFrame",
    "BinaryMask",
    "ContactObservation",
    "TrackedShape",
    "SweepParams",
    "rgb_to_gray",
    "gaussian_blur",
    "canny_edges",
    "threshold_tool",
    "morph_dilate",
    "morph_erode",
    "morph_close",
    "sweep_track",
    "calibrate",
    "vessel_boundary_mask",
    "tool_mask",
    "segment_frame",
    "read_frame",
    "write_pgm",
    "read_manifest",
    "write_manifest",
    "write_shape_csv",
    "read_shape_csv",
]


class SeedNotFoundError(RuntimeError):
    """No tool pixels intersect the seed region."""


class TrackRunawayError(RuntimeError):
    """The sweep exceeded its step budget without finding the tip."""


@dataclass
class RasterFrame:
    """8-bit grayscale frame with a timestamp in seconds."""

    pixels: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError("frame must be 2-D grayscale")
        if self.pixels.dtype != np.uint8:
            raise ValueError("frame must be 8-bit (uint8)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class BinaryMask:
    """Foreground bit mask matching a frame's dimensions."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits)
        if self.bits.ndim != 2 or self.bits.dtype != bool:
            raise ValueError("mask must be a 2-D boolean array")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass
class ContactObservation:
    """Centerline point in contact with a vessel boundary.

    Coordinates and arc length follow the owning TrackedShape's units.
    ``wall_normal`` points from the wall into the lumen when available;
    ``wall_distance`` is the centerline-to-boundary distance.
    """

    x: float
    y: float
    s: float
    wall_normal: np.ndarray | None = None
    wall_distance: float = math.nan

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class TrackedShape:
    """Arc-length parameterized tool centerline with observations.

    centerline:  (K, 3) columns x, y, s with s strictly increasing from 0
    contacts:    ordered by arc length, all at or before the tip
    tip:         (x, y, s) of the distal end; s equals the last arc length
    calibration: mm per pixel applied so far (1.0 while still in pixels)
    """

    centerline: np.ndarray
    contacts: list[ContactObservation]
    tip: np.ndarray
    calibration: float = 1.0
    timestamp: float = 0.0

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float)
        if self.centerline.ndim != 2 or self.centerline.shape[1] != 3 or len(self.centerline) < 2:
            raise ValueError("centerline must be (K, 3) with K >= 2")
        s = self.centerline[:, 2]
        if np.any(np.diff(s) <= 0):
            raise ValueError("arc length must be strictly increasing")
        self.tip = np.asarray(self.tip, dtype=float)
        if not np.isclose(self.tip[2], s[-1]):
            raise ValueError("tip arc length must equal the last centerline arc length")
        last = -np.inf
        for c in self.contacts:
            if c.s > self.tip[2] + 1e-9:
                raise ValueError("contact beyond the tip")
            if c.s < last:
                raise ValueError("contacts must be ordered by arc length")
            last = c.s
        if self.calibration <= 0:
            raise ValueError("calibration must be positive")

    @property
    def length(self) -> float:
        return float(self.tip[2])

    @property
    def xy(self) -> np.ndarray:
        return self.centerline[:, :2]

    @property
    def s(self) -> np.ndarray:
        return self.centerline[:, 2]


# ---------------------------------------------------------------------------
# pixel-level operations


def rgb_to_gray(rgb: np.ndarray, timestamp: float = 0.0) -> RasterFrame:
    """Luma conversion for RGB input, plumbing for color cameras."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise ValueError("expected an (H, W, 3) array")
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return RasterFrame(np.clip(np.rint(gray), 0, 255).astype(np.uint8), timestamp)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    c = (size - 1) / 2.0
    x = np.arange(size) - c
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _convolve_separable(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    k = len(kernel)
    pad = k // 2
    out = np.pad(img, ((0, 0), (pad, pad)), mode="edge")
    acc = np.zeros_like(img)
    for t in range(k):
        acc += kernel[t] * out[:, t : t + img.shape[1]]
    out = np.pad(acc, ((pad, pad), (0, 0)), mode="edge")
    acc = np.zeros_like(img)
    for t in range(k):
        acc += kernel[t] * out[t : t + img.shape[0], :]
    return acc


def gaussian_blur(frame: RasterFrame, kernel_size: int = 5, sigma: float | None = None) -> RasterFrame:
    """Separable Gaussian smoothing with replicated borders.

    ``sigma`` defaults to the conventional size rule
    0.3 * ((size - 1) / 2 - 1) + 0.8.
    """
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError("kernel size must be an odd integer >= 3")
    if sigma is None:
        sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    g = _gaussian_kernel(kernel_size, sigma)
    out = _convolve_separable(frame.pixels.astype(float), g)
    return RasterFrame(np.clip(np.rint(out), 0, 255).astype(np.uint8), frame.timestamp)


def _shift(a: np.ndarray, dy: int, dx: int, fill=0):
    out = np.full_like(a, fill)
    h, w = a.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ys_src = slice(max(-dy, 0), h + min(-dy, 0))
    xs_src = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = a[ys_src, xs_src]
    return out


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def _correlate3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    h, w = img.shape
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            coeff = kernel[dy + 1, dx + 1]
            if coeff != 0.0:
                out += coeff * padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return out


def canny_edges(
    frame: RasterFrame,
    high_threshold: float = 150.0,
    low_high_ratio: float = 5.0,
    sobel_size: int = 3,
) -> BinaryMask:
    """Canny edge detection: Sobel gradients, non-maximum suppression,
    then double thresholding with hysteresis.

    The lower threshold is high_threshold / low_high_ratio. Gradient
    magnitude is the L2 norm of the 3x3 Sobel responses, so a step of
    height h yields a peak magnitude of about 4 h.
    """
    if sobel_size != 3:
        raise ValueError("only the 3x3 Sobel operator is supported")
    if high_threshold <= 0 or low_high_ratio <= 1:
        raise ValueError("thresholds must be positive with ratio > 1")

    img = frame.pixels.astype(float)
    gx = _correlate3(img, _SOBEL_X)
    gy = _correlate3(img, _SOBEL_Y)
    mag = np.hypot(gx, gy)

    ang = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    neighbors = np.zeros(mag.shape + (2,), dtype=float)
    bins = [
        ((ang < 22.5) | (ang >= 157.5), (0, 1), (0, -1)),
        ((ang >= 22.5) & (ang < 67.5), (1, 1), (-1, -1)),
        ((ang >= 67.5) & (ang < 112.5), (1, 0), (-1, 0)),
        ((ang >= 112.5) & (ang < 157.5), (1, -1), (-1, 1)),
    ]
    for sel, (dy1, dx1), (dy2, dx2) in bins:
        neighbors[sel, 0] = _shift(mag, -dy1, -dx1)[sel]
        neighbors[sel, 1] = _shift(mag, -dy2, -dx2)[sel]
    # strict comparison on the trailing side breaks plateau ties so a
    # symmetric step leaves a single one-pixel chain
    thin = (mag >= neighbors[..., 0]) & (mag > neighbors[..., 1]) & (mag > 0)

    low = high_threshold / low_high_ratio
    strong = thin & (mag >= high_threshold)
    weak = thin & (mag >= low)
    return BinaryMask(_hysteresis(strong, weak))


def _hysteresis(strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    h, w = strong.shape
    visited = strong.copy()
    fy, fx = np.nonzero(strong)
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    while fy.size:
        cand_lin = []
        for dy, dx in offsets:
            ny = fy + dy
            nx = fx + dx
            ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
            cand_lin.append(ny[ok] * w + nx[ok])
        lin = np.unique(np.concatenate(cand_lin)) if cand_lin else np.array([], dtype=int)
        lin = lin[weak.ravel()[lin] & ~visited.ravel()[lin]]
        visited.ravel()[lin] = True
        fy, fx = lin // w, lin % w
    return visited


def threshold_tool(frame: RasterFrame, threshold: float) -> BinaryMask:
    """Tool extraction: foreground is everything at or below ``threshold``.

    The tool is rendered dark on a light background, as in fluoroscopy.
    """
    if not (0 < threshold < 255):
        raise ValueError("threshold must lie in (0, 255)")
    return BinaryMask(frame.pixels <= threshold)


def _disk_offsets(radius: int) -> list[tuple[int, int]]:
    # square (Chebyshev) structuring element: bridges thin-line gaps that
    # a 4-connected cross cannot
    r = int(radius)
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]


def morph_dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    out = np.zeros_like(mask.bits)
    for dy, dx in _disk_offsets(radius):
        out |= _shift(mask.bits, dy, dx, fill=False)
    return BinaryMask(out)


def morph_erode(mask: BinaryMask, radius: int) -> BinaryMask:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    out = np.ones_like(mask.bits)
    for dy, dx in _disk_offsets(radius):
        # outside the frame counts as foreground so borders are not eaten
        out &= _shift(mask.bits, dy, dx, fill=True)
    return BinaryMask(out)


def morph_close(mask: BinaryMask, radius: int = 1) -> BinaryMask:
    """Dilation followed by erosion; bridges gaps up to ~2 * radius."""
    return morph_erode(morph_dilate(mask, radius), radius)


# ---------------------------------------------------------------------------
# moving-window sweep


@dataclass
class SweepParams:
    """Geometry and thresholds of the moving search window.

    window_px:           window extent across the tool (normal direction)
    step_px:             advance along the tangent per step; defaults to
                         half the window
    contact_distance_px: centerline-to-boundary distance that counts as
                         contact
    min_pixels:          tool pixel count below which the tip is declared
    seed_region:         (x0, y0, x1, y1) rectangle searched for the base
    max_steps:           safety budget for the sweep
    smooth_window:       centroid smoothing span (points); 0 disables.
                         Smoothing suppresses the arc-length inflation that
                         centroid jitter would otherwise accumulate.
    """

    window_px: float
    step_px: float | None = None
    contact_distance_px: float = 3.0
    min_pixels: int = 3
    seed_region: tuple[float, float, float, float] | None = None
    max_steps: int | None = None
    tangent_memory: float = 0.5
    smooth_window: int = 7

    def __post_init__(self):
        if self.window_px <= 0:
            raise ValueError("window_px must be positive")
        if self.step_px is None:
            self.step_px = self.window_px / 2.0
        if self.step_px <= 0:
            raise ValueError("step_px must be positive")
        if self.contact_distance_px <= 0:
            raise ValueError("contact_distance_px must be positive")
        if self.min_pixels < 1:
            raise ValueError("min_pixels must be >= 1")
        if not (0.0 <= self.tangent_memory < 1.0):
            raise ValueError("tangent_memory must be in [0, 1)")


def default_sweep_params(wire_width_px: float, frame_width: int, frame_height: int,
                         seed_region=None, contact_distance_px=None) -> SweepParams:
    """Defaults tied to the expected tool width: window twice the width,
    step half the window, contact distance 1.5x the half width."""
    if seed_region is None:
        seed_region = (0.0, 0.0, 3.0 * wire_width_px, float(frame_height))
    return SweepParams(
        window_px=2.0 * wire_width_px,
        contact_distance_px=(
            1.5 * wire_width_px / 2.0 if contact_distance_px is None else contact_distance_px
        ),
        seed_region=seed_region,
        max_steps=int(4 * (frame_width + frame_height) / max(wire_width_px, 1.0)),
    )


def _pixels_in_window(ys, xs, center, tangent, half_t, half_n):
    rel_x = xs - center[0]
    rel_y = ys - center[1]
    along = rel_x * tangent[0] + rel_y * tangent[1]
    across = -rel_x * tangent[1] + rel_y * tangent[0]
    sel = (np.abs(along) <= half_t) & (np.abs(across) <= half_n)
    return sel


def _crop_nonzero(bits, center, radius):
    h, w = bits.shape
    x0 = max(int(np.floor(center[0] - radius)), 0)
    x1 = min(int(np.ceil(center[0] + radius)) + 1, w)
    y0 = max(int(np.floor(center[1] - radius)), 0)
    y1 = min(int(np.ceil(center[1] + radius)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return np.empty(0), np.empty(0)
    sub = bits[y0:y1, x0:x1]
    ys, xs = np.nonzero(sub)
    return ys.astype(float) + y0, xs.astype(float) + x0


def _seed(tool_bits, params):
    if params.seed_region is None:
        raise ValueError("sweep needs a seed region")
    x0, y0, x1, y1 = params.seed_region
    h, w = tool_bits.shape
    sub = tool_bits[int(max(y0, 0)) : int(min(y1, h)) + 1, int(max(x0, 0)) : int(min(x1, w)) + 1]
    ys, xs = np.nonzero(sub)
    if ys.size == 0:
        raise SeedNotFoundError("no tool pixels inside the seed region")
    ys = ys.astype(float) + int(max(y0, 0))
    xs = xs.astype(float) + int(max(x0, 0))
    centroid = np.array([xs.mean(), ys.mean()])
    pts = np.column_stack([xs, ys]) - centroid
    if len(pts) >= 2:
        cov = pts.T @ pts
        evals, evecs = np.linalg.eigh(cov)
        direction = evecs[:, int(np.argmax(evals))]
    else:
        direction = np.array([1.0, 0.0])
    return centroid, direction


def _orient_seed_direction(tool_bits, centroid, direction, params):
    counts = []
    for sign in (1.0, -1.0):
        t = sign * direction
        center = centroid + params.step_px * t
        ys, xs = _crop_nonzero(tool_bits, center, params.window_px + params.step_px)
        if ys.size == 0:
            counts.append(0)
            continue
        sel = _pixels_in_window(ys, xs, center, t, params.step_px / 2.0, params.window_px / 2.0)
        counts.append(int(sel.sum()))
    return direction if counts[0] >= counts[1] else -direction


def _smooth_polyline(pts: np.ndarray, window: int) -> np.ndarray:
    """Local quadratic smoothing of an ordered point sequence."""
    n = len(pts)
    if window < 3 or n < 5:
        return pts.copy()
    half = window // 2
    out = pts.copy()
    idx = np.arange(n, dtype=float)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        if hi - lo < 5:
            continue
        t = idx[lo:hi] - idx[i]
        basis = np.column_stack([np.ones_like(t), t, t * t])
        cx, *_ = np.linalg.lstsq(basis, pts[lo:hi, 0], rcond=None)
        cy, *_ = np.linalg.lstsq(basis, pts[lo:hi, 1], rcond=None)
        out[i] = (cx[0], cy[0])
    return out


def _nearest_wall(wall_bits, point, search_radius):
    ys, xs = _crop_nonzero(wall_bits, point, search_radius)
    if ys.size == 0:
        return math.inf, None
    d = np.hypot(xs - point[0], ys - point[1])
    i = int(np.argmin(d))
    return float(d[i]), np.array([xs[i], ys[i]])


def _wall_normal(wall_bits, wall_point, toward, radius=3.0):
    ys, xs = _crop_nonzero(wall_bits, wall_point, radius)
    if ys.size < 2:
        n = toward / (np.linalg.norm(toward) or 1.0)
        return n
    pts = np.column_stack([xs, ys])
    pts = pts - pts.mean(axis=0)
    cov = pts.T @ pts
    evals, evecs = np.linalg.eigh(cov)
    tangent = evecs[:, int(np.argmax(evals))]
    normal = np.array([-tangent[1], tangent[0]])
    if normal @ toward < 0:
        normal = -normal
    return normal


def sweep_track(tool: BinaryMask, walls: BinaryMask, params: SweepParams,
                timestamp: float = 0.0) -> TrackedShape:
    """Sweep a window along the tool to extract centerline, contacts, tip.

    Starting from the seed region, a rectangular window oriented normal
    to the local tangent collects tool pixels; their centroid extends the
    centerline and updates the tangent. Whenever the centroid comes
    within ``contact_distance_px`` of a wall pixel a contact is recorded
    (consecutive hits are merged, keeping the closest approach). The tip
    is declared where the window holds fewer than ``min_pixels`` pixels,
    after probing one extra window length so short gaps do not truncate
    the track; the distal-most tool pixel refines the tip position.
    """
    if tool.bits.shape != walls.bits.shape:
        raise ValueError("tool and wall masks must have the same shape")
    tool_bits = tool.bits
    wall_bits = walls.bits

    centroid, direction = _seed(tool_bits, params)
    tangent = _orient_seed_direction(tool_bits, centroid, direction, params)

    max_steps = params.max_steps or int(40 * max(tool_bits.shape) / params.step_px)
    half_t = params.step_px / 2.0
    half_n = params.window_px / 2.0
    gap_budget = max(int(np.ceil(params.window_px / params.step_px)), 1)

    # walk to both extremities; the end nearest the seed is the tool base,
    # which makes the track orientation independent of the seed principal
    # axis sign
    def walk_to_end(start: np.ndarray, direction: np.ndarray) -> np.ndarray:
        cur = start.copy()
        tan = direction.copy()
        for _ in range(max_steps):
            center = cur + params.step_px * tan
            ys, xs = _crop_nonzero(tool_bits, center, half_t + half_n + 1.0)
            if ys.size:
                sel = _pixels_in_window(ys, xs, center, tan, half_t, half_n)
                if int(sel.sum()) >= params.min_pixels:
                    nxt = np.array([xs[sel].mean(), ys[sel].mean()])
                    chord = nxt - cur
                    norm = np.linalg.norm(chord)
                    if norm >= 0.05 * params.step_px:
                        if chord @ tan > 0:
                            tan = chord / norm
                        cur = nxt
                        continue
            break
        return cur

    end_a = walk_to_end(centroid, -tangent)
    end_b = walk_to_end(centroid, tangent)
    start = end_a if np.linalg.norm(end_a - centroid) <= np.linalg.norm(end_b - centroid) else end_b
    far = end_b if start is end_a else end_a
    into = centroid - start
    if np.linalg.norm(into) > 0.25 * params.step_px:
        tangent = into / np.linalg.norm(into)
    else:
        chord = far - start
        norm = np.linalg.norm(chord)
        if norm > 0:
            tangent = chord / norm
    centroid = start

    points = [centroid.copy()]
    arcs = [0.0]
    raw_hits = []  # (point_idx, distance, wall_pixel)
    last_window: tuple[np.ndarray, np.ndarray] | None = None

    d0, w0 = _nearest_wall(wall_bits, centroid, params.contact_distance_px + 2.0)
    if d0 < params.contact_distance_px:
        raw_hits.append((0, d0, w0))

    steps = 0
    while True:
        steps += 1
        if steps > max_steps:
            raise TrackRunawayError(f"sweep exceeded {max_steps} steps without reaching a tip")

        found = False
        for gap in range(gap_budget + 1):
            center = points[-1] + params.step_px * (1.0 + gap) * tangent
            ys, xs = _crop_nonzero(tool_bits, center, half_t + half_n + 1.0)
            if ys.size:
                sel = _pixels_in_window(
                    ys, xs, center, tangent, half_t + 0.5 * gap * params.step_px, half_n
                )
                if int(sel.sum()) >= params.min_pixels:
                    ys, xs = ys[sel], xs[sel]
                    found = True
                    break
        if not found:
            break

        new_pt = np.array([xs.mean(), ys.mean()])
        chord = float(np.linalg.norm(new_pt - points[-1]))
        if chord < 0.05 * params.step_px:
            break  # centroid stalled at the mask end
        last_window = (ys, xs)
        points.append(new_pt)
        arcs.append(arcs[-1] + chord)

        if len(points) >= 3:
            fresh = points[-1] - points[-3]
        else:
            fresh = points[-1] - points[0]
        norm = np.linalg.norm(fresh)
        if norm > 0:
            fresh = fresh / norm
            if fresh @ tangent > 0:
                blended = params.tangent_memory * tangent + (1 - params.tangent_memory) * fresh
                tangent = blended / np.linalg.norm(blended)

        d, wpx = _nearest_wall(wall_bits, new_pt, params.contact_distance_px + 2.0)
        if d < params.contact_distance_px:
            raw_hits.append((len(points) - 1, d, wpx))

    if len(points) < 2:
        raise SeedNotFoundError("track collapsed to a single point")

    pts = _smooth_polyline(np.asarray(points), params.smooth_window)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])

    # refine the tip using the distal-most pixel of the last populated window
    if last_window is not None:
        ys, xs = last_window
        proj = (xs - pts[-1][0]) * tangent[0] + (ys - pts[-1][1]) * tangent[1]
        i = int(np.argmax(proj))
        if proj[i] > 0.25:
            tip_pt = np.array([xs[i], ys[i]])
            pts = np.vstack([pts, tip_pt])
            arc = np.append(arc, arc[-1] + float(np.linalg.norm(tip_pt - pts[-2])))

    centerline = np.column_stack([pts, arc])
    contacts = _cluster_contacts(raw_hits, pts, arc, wall_bits, params)
    tip = np.array([pts[-1, 0], pts[-1, 1], arc[-1]])
    return TrackedShape(
        centerline=centerline,
        contacts=contacts,
        tip=tip,
        calibration=1.0,
        timestamp=timestamp,
    )


def _cluster_contacts(raw_hits, pts, arc, wall_bits, params) -> list[ContactObservation]:
    contacts = []
    run: list[tuple[int, float, np.ndarray]] = []

    def flush():
        if not run:
            return
        # midpoint of the close-approach span: unbiased both for convex
        # bumps and for narrow throats the tool crosses diagonally
        dists = np.array([d for _, d, _ in run])
        best = float(dists.min())
        band = best + 0.35 * (params.contact_distance_px - best)
        idxs = np.array([i for i, _, _ in run])[dists <= band]
        s_c = 0.5 * float(arc[idxs[0]] + arc[idxs[-1]])
        p_c = np.array(
            [np.interp(s_c, arc, pts[:, 0]), np.interp(s_c, arc, pts[:, 1])]
        )
        best_i, best_d, best_wpx = min(run, key=lambda h: h[1])
        normal = _wall_normal(wall_bits, best_wpx, pts[best_i] - best_wpx)
        contacts.append(
            ContactObservation(
                x=float(p_c[0]), y=float(p_c[1]), s=s_c,
                wall_normal=normal, wall_distance=float(best_d),
            )
        )
        run.clear()

    last_idx = None
    for idx, dist, wpx in raw_hits:
        if last_idx is not None and idx - last_idx > 2:
            flush()
        run.append((idx, dist, wpx))
        last_idx = idx
    flush()
    return contacts


def calibrate(shape: TrackedShape, mm_per_px: float) -> TrackedShape:
    """Scale a pixel-space shape isotropically into millimetres."""
    if mm_per_px <= 0:
        raise ValueError("mm_per_px must be positive")
    contacts = [
        ContactObservation(
            x=c.x * mm_per_px, y=c.y * mm_per_px, s=c.s * mm_per_px,
            wall_normal=None if c.wall_normal is None else c.wall_normal.copy(),
            wall_distance=c.wall_distance * mm_per_px,
        )
        for c in shape.contacts
    ]
    return TrackedShape(
        centerline=shape.centerline * mm_per_px,
        contacts=contacts,
        tip=shape.tip * mm_per_px,
        calibration=shape.calibration * mm_per_px,
        timestamp=shape.timestamp,
    )


# ---------------------------------------------------------------------------
# glue


def vessel_boundary_mask(reference: RasterFrame, blur_kernel: int = 5,
                         high_threshold: float = 150.0, low_high_ratio: float = 5.0) -> BinaryMask:
    """Session vessel mask: smooth then edge-detect a tool-free frame."""
    return canny_edges(gaussian_blur(reference, blur_kernel), high_threshold, low_high_ratio)


def tool_mask(frame: RasterFrame, threshold: float, close_radius: int = 1,
              blur_kernel: int | None = None) -> BinaryMask:
    """Tool mask: optional smoothing, dark thresholding, closing."""
    f = gaussian_blur(frame, blur_kernel) if blur_kernel else frame
    return morph_close(threshold_tool(f, threshold), close_radius)


def segment_frame(frame: RasterFrame, vessel_mask: BinaryMask, params: SweepParams,
                  threshold: float = 70.0, close_radius: int = 1,
                  blur_kernel: int | None = None,
                  mm_per_px: float | None = None) -> TrackedShape:
    """Full per-frame pipeline: tool mask, sweep, optional calibration."""
    tool = tool_mask(frame, threshold, close_radius, blur_kernel)
    shape = sweep_track(tool, vessel_mask, params, timestamp=frame.timestamp)
    if mm_per_px is not None:
        shape = calibrate(shape, mm_per_px)
    return shape


# ---------------------------------------------------------------------------
# file I/O


def write_pgm(frame: RasterFrame, path) -> None:
    """Binary (P5) PGM output."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii"))
        fh.write(frame.pixels.tobytes())


def _read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(int(data[i:j]))
        i = j
    i += 1
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pixels = np.frombuffer(data[i : i + width * height], dtype=np.uint8)
    return pixels.reshape(height, width).copy()


def read_frame(path, timestamp: float = 0.0) -> RasterFrame:
    """Read a PGM (binary P5) or PNG grayscale frame."""
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return RasterFrame(_read_pgm(p), timestamp)
    if p.suffix.lower() == ".png":
        from PIL import Image

        img = Image.open(p).convert("L")
        return RasterFrame(np.asarray(img, dtype=np.uint8), timestamp)
    raise ValueError(f"unsupported frame format: {p.suffix}")


def write_manifest(entries, path) -> None:
    """Manifest of a frame sequence: rows of (t_s, relative path)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "path"])
        for t, rel in entries:
            w.writerow([f"{t:.6f}", rel])


def read_manifest(path) -> list[tuple[float, Path]]:
    base = Path(path).parent
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["t_s", "path"]:
            raise ValueError(f"{path}: expected header 't_s,path'")
        for row in reader:
            if not row:
                continue
            out.append((float(row[0]), base / row[1]))
    return out


def write_shape_csv(shape: TrackedShape, path) -> None:
    """Centerline CSV: s_mm,x_mm,y_mm,is_contact,is_tip.

    Contacts are quantized onto the nearest centerline sample; wall
    normals are not representable in this format and are dropped.
    """
    contact_rows = {
        int(np.argmin(np.abs(shape.centerline[:, 2] - c.s))) for c in shape.contacts
    }
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s_mm", "x_mm", "y_mm", "is_contact", "is_tip"])
        n = len(shape.centerline)
        for i, (x, y, s) in enumerate(shape.centerline):
            w.writerow(
                [
                    f"{s:.6f}",
                    f"{x:.6f}",
                    f"{y:.6f}",
                    1 if i in contact_rows else 0,
                    1 if i == n - 1 else 0,
                ]
            )


def read_shape_csv(path, timestamp: float = 0.0, calibration: float = 1.0) -> TrackedShape:
    rows = []
    contacts_idx = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["s_mm", "x_mm", "y_mm", "is_contact", "is_tip"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            s, x, y, is_contact, _is_tip = row
            rows.append((float(x), float(y), float(s)))
            if int(is_contact):
                contacts_idx.append(len(rows) - 1)
    arr = np.array(rows)
    contacts = [
        ContactObservation(x=arr[i, 0], y=arr[i, 1], s=arr[i, 2]) for i in contacts_idx
    ]
    tip = arr[-1].copy()
    return TrackedShape(
        centerline=arr, contacts=contacts, tip=tip,
        calibration=calibration, timestamp=timestamp,
    )
