"""Inverse multi-point contact force estimation from a tracked shape.

A tracked tool section from base to tip is modeled as a cantilever in a
local frame whose x axis is tangent to the tool at its base, isolating
the model from global camera coordinates. For each observed contact the
deflection vector from its rest position on the cantilever (same arc
length) to the observed position is prescribed as a displacement
boundary condition. Solving the displacement-controlled nonlinear beam
problem recovers the constraint reactions; their negatives are the
forces the tool applies to the wall.

Estimation is stateless per frame: results carry the frame timestamp so
downstream consumers order by time, and independent frames can be
estimated concurrently.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .beam_fem import (
    BeamMesh,
    ConvergenceError,
    DirichletBC,
    snapped_node_arcs,
    solve_quasistatic,
    straight_wire_mesh,
    centerline_mesh,
)
from .rigidity import RigidityProfile
from .segmentation import TrackedShape

__all__ = [
    "InconsistentShapeError",
    "IntrinsicShape",
    "CantileverModel",
    "ForceEstimate",
    "SimulatedShape",
    "ShapeError",
    "build_model",
    "estimate_forces",
    "estimate_frame",
    "decompose",
    "shape_error",
    "write_estimates_csv",
    "read_estimates_csv",
]


class InconsistentShapeError(ValueError):
    """Tracked shape violates the cantilever model assumptions."""


@dataclass(frozen=True)
class IntrinsicShape:
    """Rest shape of the modeled tool section.

    The default is a straight cantilever. A curved rest shape is
    described by (arc length, curvature) samples; headings come from
    integrating the curvature from the base, with linear interpolation
    between samples.
    """

    curvature_samples: np.ndarray | None = None

    def rest_points(self, arcs: np.ndarray) -> np.ndarray:
        arcs = np.asarray(arcs, dtype=float)
        if self.curvature_samples is None:
            return np.column_stack([arcs, np.zeros_like(arcs)])
        samples = np.asarray(self.curvature_samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError("curvature_samples must be (n, 2): arc length, curvature")
        grid = np.linspace(0.0, float(arcs[-1]), max(4 * len(arcs), 256))
        kappa = np.interp(grid, samples[:, 0], samples[:, 1])
        theta = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * np.diff(grid))])
        cx = np.concatenate([[0.0], np.cumsum(0.5 * (np.cos(theta)[1:] + np.cos(theta)[:-1]) * np.diff(grid))])
        cy = np.concatenate([[0.0], np.cumsum(0.5 * (np.sin(theta)[1:] + np.sin(theta)[:-1]) * np.diff(grid))])
        return np.column_stack([np.interp(arcs, grid, cx), np.interp(arcs, grid, cy)])


STRAIGHT = IntrinsicShape()


@dataclass
class CantileverModel:
    """Cantilever model of the tracked section, ready to solve.

    base_origin / base_tangent: the local frame in global coordinates
    mesh:          rest-shape beam mesh in the local frame, nodes snapped
                   to every contact arc length
    bcs:           base clamp plus one displacement BC per contact
    contact_nodes: mesh node index of each contact, ordered as observed
    """

    base_origin: np.ndarray
    base_tangent: np.ndarray
    mesh: BeamMesh
    bcs: list[DirichletBC]
    contact_nodes: list[int]
    contacts: list
    length: float
    timestamp: float = 0.0

    @property
    def rotation(self) -> np.ndarray:
        """Local-to-global rotation matrix."""
        tx, ty = self.base_tangent
        return np.array([[tx, -ty], [ty, tx]])

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.base_origin) @ self.rotation

    def to_global(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rotation.T + self.base_origin


@dataclass(frozen=True)
class ForceEstimate:
    """Estimated contact force in global coordinates.

    ``force`` is the force the tool applies to the wall at ``position``.
    ``f_n`` and ``f_t`` are the normal and tangential magnitudes when the
    wall normal was observed, else None.
    """

    contact_index: int
    position: np.ndarray
    s: float
    force: np.ndarray
    magnitude: float
    f_n: float | None
    f_t: float | None
    timestamp: float


@dataclass
class SimulatedShape:
    """Deformed model centerline mapped back to global coordinates."""

    xy: np.ndarray
    arc: np.ndarray


@dataclass
class ShapeError:
    """Pointwise distance between tracked and simulated shapes.

    Correspondence is by equal arc length; rmse and maxe summarize the
    sampled distances.
    """

    arc: np.ndarray
    distances: np.ndarray
    rmse: float
    maxe: float


def _base_frame(shape: TrackedShape, fit_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Origin and unit tangent of the tool at its base.

    The tangent comes from a least-squares cubic fit of x(s), y(s) over
    the unloaded span before the first contact, evaluated at the base.
    Up to the first contact the bending moment varies linearly along the
    wire, so the centerline is locally cubic in arc length and the fit
    recovers the base tangent with negligible curvature bias; a chord or
    quadratic estimate would tilt the whole model frame.
    """
    pts = shape.centerline
    s = pts[:, 2] - pts[0, 2]
    if fit_points is not None:
        m = min(max(fit_points, 2), len(pts))
    else:
        window = 0.35 * float(s[-1])
        if shape.contacts:
            window = min(window, 0.9 * (shape.contacts[0].s - pts[0, 2]))
        m = int(np.searchsorted(s, max(window, 0.0)))
        m = min(max(m, 2), len(pts))
        # shrink the window until it is only gently curved (small sagitta),
        # otherwise the polynomial model of x(s), y(s) breaks down
        while m > 4:
            chord = pts[m - 1, :2] - pts[0, :2]
            clen = np.linalg.norm(chord)
            if clen > 0:
                rel = pts[:m, :2] - pts[0, :2]
                sag = np.max(np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0])) / clen
                if sag <= 0.08 * clen:
                    break
            m = max(int(0.7 * m), 4)
    deg = min(3, m - 1)
    cx = np.polynomial.polynomial.polyfit(s[:m], pts[:m, 0], deg)
    cy = np.polynomial.polynomial.polyfit(s[:m], pts[:m, 1], deg)
    tangent = np.array([cx[1], cy[1]])
    norm = np.linalg.norm(tangent)
    if norm == 0:
        raise InconsistentShapeError("degenerate base tangent")
    return pts[0, :2].copy(), tangent / norm


def build_model(
    shape: TrackedShape,
    profile: RigidityProfile,
    intrinsic: IntrinsicShape = STRAIGHT,
    n_elements: int = 64,
    radius: float | None = None,
    kappa: float = 0.9,
    nu: float = 0.3,
    fit_points: int | None = None,
    base_tangent: np.ndarray | None = None,
    base_origin: np.ndarray | None = None,
    axial_rigidity: float | None = None,
    shear_rigidity: float | None = None,
    constrain_axial: bool = True,
) -> CantileverModel:
    """Build the cantilever model for one tracked frame.

    The model spans base to tip (length equal to the tracked arc length)
    so every contact lies inside it. Mesh nodes are snapped onto the
    contact arc lengths, each element gets its rigidity from the profile
    keyed by distance from the distal tip, and the deflection vector of
    each contact (observed position minus rest position, in the local
    frame) becomes its boundary condition.

    ``base_tangent`` overrides the fitted frame direction; the frame
    refinement in :func:`estimate_frame` uses it. With
    ``constrain_axial=False`` only the transverse component of each
    deflection vector is prescribed, modeling frictionless wall sliding;
    image-derived shapes resolve the axial component far more poorly than
    the transverse one, and against a near-inextensible model that noise
    would masquerade as large friction forces.
    """
    if len(shape.contacts) == 0:
        raise InconsistentShapeError("the model needs at least one contact")
    length = shape.length
    s0 = float(shape.centerline[0, 2])
    contact_arcs = [c.s - s0 for c in shape.contacts]
    if max(contact_arcs) >= length - s0:
        raise InconsistentShapeError("contact at or beyond the tip arc length")
    if min(contact_arcs) <= 0:
        raise InconsistentShapeError("contact at the clamped base")
    model_len = length - s0

    if profile.s_max < model_len:
        warnings.warn(
            f"rigidity profile covers {profile.s_max:g} mm of a {model_len:g} mm model; "
            "end values are clamped",
            stacklevel=2,
        )

    if base_tangent is not None:
        origin = (
            np.asarray(base_origin, dtype=float)
            if base_origin is not None
            else shape.centerline[0, :2].copy()
        )
        tangent = np.asarray(base_tangent, dtype=float)
        tangent = tangent / np.linalg.norm(tangent)
    else:
        origin, tangent = _base_frame(shape, fit_points)

    arcs = snapped_node_arcs(model_len, n_elements, contact_arcs)
    mids = 0.5 * (arcs[1:] + arcs[:-1])
    ei = profile.ei_at(model_len - mids)

    rest = intrinsic.rest_points(arcs)
    if intrinsic.curvature_samples is None:
        mesh = straight_wire_mesh(arcs, ei, radius=radius, kappa=kappa, nu=nu,
                                  axial_rigidity=axial_rigidity, shear_rigidity=shear_rigidity)
    else:
        mesh = centerline_mesh(rest, ei, radius=radius, kappa=kappa, nu=nu,
                               axial_rigidity=axial_rigidity, shear_rigidity=shear_rigidity)

    rot = np.array([[tangent[0], -tangent[1]], [tangent[1], tangent[0]]])
    bcs = [DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]
    contact_nodes = []
    for c, s_c in zip(shape.contacts, contact_arcs):
        node = mesh.node_at_arc(s_c)
        local_obs = (np.array([c.x, c.y]) - origin) @ rot
        d = local_obs - rest[node]
        ux = float(d[0]) if constrain_axial else None
        bcs.append(DirichletBC(node, ux, float(d[1])))
        contact_nodes.append(node)

    # warm start: the observation already describes the deformed state, so
    # the solver polishes it instead of ramping from the rest shape (which
    # can pass near tail snap-through states the real wire never visited)
    obs_local = (shape.centerline[:, :2] - origin) @ rot
    s_obs = shape.centerline[:, 2] - s0
    wx = np.interp(arcs, s_obs, obs_local[:, 0])
    wy = np.interp(arcs, s_obs, obs_local[:, 1])
    dx = np.gradient(wx, arcs)
    dy = np.gradient(wy, arcs)
    obs_angle = np.arctan2(dy, dx)
    rest_d = np.gradient(rest, arcs, axis=0)
    rest_angle = np.arctan2(rest_d[:, 1], rest_d[:, 0])
    mesh.node_xy = np.column_stack([wx, wy])
    mesh.node_phi = obs_angle - rest_angle
    mesh.node_xy[0] = rest[0]
    mesh.node_phi[0] = 0.0

    return CantileverModel(
        base_origin=origin,
        base_tangent=tangent,
        mesh=mesh,
        bcs=bcs,
        contact_nodes=contact_nodes,
        contacts=list(shape.contacts),
        length=model_len,
        timestamp=shape.timestamp,
    )


def estimate_forces(
    model: CantileverModel,
    increments: int = 10,
    tol: float = 1e-6,
    max_iters: int = 50,
) -> tuple[list[ForceEstimate], SimulatedShape]:
    """Solve the inverse problem and return per-contact force estimates.

    The reactions at the contact nodes, sign-flipped and rotated back to
    the global frame, are the forces the tool exerts on the wall. The
    deformed model shape is returned alongside for error assessment.
    """
    try:
        result = solve_quasistatic(
            model.mesh, model.bcs, increments=increments, tol=tol, max_iters=max_iters
        )
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"force estimation failed for frame t={model.timestamp:.3f}s "
            f"({len(model.contact_nodes)} contacts): {exc}",
            residual_norm=exc.residual_norm,
            increment=exc.increment,
        ) from exc

    rot = model.rotation
    estimates = []
    for i, (node, contact) in enumerate(zip(model.contact_nodes, model.contacts)):
        reaction = result.reaction_at(node)
        wall_force = -(rot @ reaction.force)
        magnitude = float(np.linalg.norm(wall_force))
        normal = getattr(contact, "wall_normal", None)
        if normal is not None:
            f_n, f_t = decompose(wall_force, normal)
        else:
            f_n = f_t = None
        estimates.append(
            ForceEstimate(
                contact_index=i,
                position=np.array([contact.x, contact.y]),
                s=float(contact.s),
                force=wall_force,
                magnitude=magnitude,
                f_n=f_n,
                f_t=f_t,
                timestamp=model.timestamp,
            )
        )

    sim_xy = model.to_global(result.deformed_nodes[:, :2])
    simulated = SimulatedShape(xy=sim_xy, arc=model.mesh.arc.copy())
    return estimates, simulated


def decompose(force: np.ndarray, wall_normal: np.ndarray) -> tuple[float, float]:
    """Split a contact force into normal and tangential magnitudes.

    Both components are non-negative; f_n^2 + f_t^2 equals the squared
    force magnitude.
    """
    n = np.asarray(wall_normal, dtype=float)
    norm = np.linalg.norm(n)
    if not np.isfinite(norm) or norm == 0:
        raise ValueError("wall normal must be a non-zero vector")
    n = n / norm
    f = np.asarray(force, dtype=float)
    f_n = float(abs(f @ n))
    f_t = float(np.linalg.norm(f - (f @ n) * n))
    return f_n, f_t


def shape_error(actual: TrackedShape, simulated: SimulatedShape) -> ShapeError:
    """Distance between tracked and simulated shapes at matched arc lengths."""
    s_act = actual.centerline[:, 2] - actual.centerline[0, 2]
    lo = max(float(s_act[0]), float(simulated.arc[0]))
    hi = min(float(s_act[-1]), float(simulated.arc[-1]))
    if hi <= lo:
        raise ValueError("tracked and simulated arc ranges do not overlap")
    sel = (s_act >= lo) & (s_act <= hi)
    s_q = s_act[sel]
    sim_x = np.interp(s_q, simulated.arc, simulated.xy[:, 0])
    sim_y = np.interp(s_q, simulated.arc, simulated.xy[:, 1])
    d = np.hypot(actual.centerline[sel, 0] - sim_x, actual.centerline[sel, 1] - sim_y)
    return ShapeError(
        arc=s_q,
        distances=d,
        rmse=float(np.sqrt(np.mean(d**2))),
        maxe=float(np.max(d)),
    )


def _heading_physics_fit(xy: np.ndarray, s: np.ndarray, window_end: float,
                         profile: RigidityProfile, model_len: float) -> float | None:
    """Base heading of a clamped span from segment headings.

    Over the span before the first contact the bending moment is linear
    in the point coordinates, so the headings obey
    theta(s) = gamma + a * int(ds/EI) + b * int(x ds/EI) + c * int(y ds/EI)
    and a linear least-squares fit yields the base angle gamma directly.
    Returns None when the span holds too few segments.
    """
    m = int(np.searchsorted(s, window_end))
    m = min(m, len(xy))
    if m < 5:
        return None
    p = xy[:m]
    seg = np.diff(p, axis=0)
    th = np.unwrap(np.arctan2(seg[:, 1], seg[:, 0]))
    smid = 0.5 * (s[:m][1:] + s[:m][:-1])
    xmid = 0.5 * (p[1:, 0] + p[:-1, 0])
    ymid = 0.5 * (p[1:, 1] + p[:-1, 1])
    ei = profile.ei_at(np.maximum(model_len - smid, 0.0))

    def cumtrap_from_zero(f):
        out = np.empty_like(f)
        out[0] = f[0] * smid[0]
        out[1:] = out[0] + np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(smid))
        return out

    a = np.column_stack(
        [
            np.ones_like(smid),
            cumtrap_from_zero(1.0 / ei),
            cumtrap_from_zero(xmid / ei),
            cumtrap_from_zero(ymid / ei),
        ]
    )
    coef, *_ = np.linalg.lstsq(a, th, rcond=None)
    return float(coef[0])


def estimate_frame(
    shape: TrackedShape,
    profile: RigidityProfile,
    intrinsic: IntrinsicShape = STRAIGHT,
    n_elements: int = 64,
    increments: int = 10,
    tol: float = 1e-6,
    max_iters: int = 50,
    radius: float | None = None,
    frame_refinements: int = 15,
    axial_rigidity: float | None = None,
    constrain_axial: bool = True,
) -> tuple[list[ForceEstimate], SimulatedShape, ShapeError]:
    """Model, solve and score one frame, refining the base frame.

    The initial base angle comes from a physics fit of the near-base
    headings, corrected by the recovered base shear angle; it is then
    polished by a bracketed parabolic search that minimizes the
    model-to-observation shape error over the frame angle
    (``frame_refinements`` caps the solve budget). A residual frame error
    otherwise leaks into the prescribed deflections and distorts the
    recovered forces. The returned estimates correspond to the frame with
    the smallest shape error.
    """
    s0 = float(shape.centerline[0, 2])
    model_len = shape.length - s0
    window_end = 0.999 * (shape.contacts[0].s - s0) if shape.contacts else model_len

    origin, tangent = _base_frame(shape)
    g = _heading_physics_fit(shape.centerline[:, :2], shape.centerline[:, 2] - s0,
                             window_end, profile, model_len)
    if g is not None:
        tangent = np.array([math.cos(g), math.sin(g)])

    evals: dict[float, tuple] = {}

    def solve_at(gamma: float):
        key = round(gamma, 9)
        if key not in evals:
            tangent_g = np.array([math.cos(gamma), math.sin(gamma)])
            model = build_model(
                shape, profile, intrinsic, n_elements, radius=radius,
                base_tangent=tangent_g, base_origin=origin,
                axial_rigidity=axial_rigidity, constrain_axial=constrain_axial,
            )
            est, sim = estimate_forces(model, increments, tol, max_iters)
            evals[key] = (shape_error(shape, sim).rmse, est, sim, model)
        return evals[key]

    g0 = math.atan2(tangent[1], tangent[0])
    _, est0, _, model0 = solve_at(g0)
    # the heading fit reads the centerline, which leaves the clamp at the
    # shear angle; correct by the recovered base shear
    rot0 = model0.rotation
    v0 = float(sum((rot0.T @ e.force)[1] for e in est0))
    g0 += v0 / model0.mesh.sections[0].kGA
    solve_at(g0)

    # the shape error has a well-defined minimum over the frame angle:
    # bracket it, then shrink with parabolic steps
    step = 2e-3
    for _ in range(8):
        lo, hi = solve_at(g0 - step)[0], solve_at(g0 + step)[0]
        mid = solve_at(g0)[0]
        if mid <= lo and mid <= hi:
            break
        g0 = g0 - step if lo < hi else g0 + step
        step *= 1.6
    rounds = max(frame_refinements // 3, 1)
    for _ in range(rounds):
        r_m = solve_at(g0 - step)[0]
        r_0 = solve_at(g0)[0]
        r_p = solve_at(g0 + step)[0]
        denom = r_m - 2 * r_0 + r_p
        if denom > 0:
            g_v = g0 + 0.5 * step * (r_m - r_p) / denom
            g_v = min(max(g_v, g0 - 1.5 * step), g0 + 1.5 * step)
            solve_at(g_v)
        g0 = min(evals, key=lambda k: evals[k][0])
        step /= 3.0
        if step < 5e-6:
            break

    best_key = min(evals, key=lambda k: evals[k][0])
    _, estimates, simulated, _ = evals[best_key]
    err = shape_error(shape, simulated)
    return estimates, simulated, err


# ---------------------------------------------------------------------------
# estimate stream I/O


_CSV_HEADER = ["t_s", "contact_idx", "s_mm", "x_mm", "y_mm", "Fx_N", "Fy_N", "Fmag_N", "fn_N", "ft_N"]


def write_estimates_csv(estimates, path) -> None:
    """Stream of per-contact estimates; fn/ft are blank when no wall
    normal was available."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_HEADER)
        for e in estimates:
            w.writerow(
                [
                    f"{e.timestamp:.6f}",
                    e.contact_index,
                    f"{e.s:.6f}",
                    f"{e.position[0]:.6f}",
                    f"{e.position[1]:.6f}",
                    f"{e.force[0]:.9g}",
                    f"{e.force[1]:.9g}",
                    f"{e.magnitude:.9g}",
                    "" if e.f_n is None else f"{e.f_n:.9g}",
                    "" if e.f_t is None else f"{e.f_t:.9g}",
                ]
            )


def read_estimates_csv(path) -> list[ForceEstimate]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            t, idx, s, x, y, fx, fy, mag, fn, ft = row
            out.append(
                ForceEstimate(
                    contact_index=int(idx),
                    position=np.array([float(x), float(y)]),
                    s=float(s),
                    force=np.array([float(fx), float(fy)]),
                    magnitude=float(mag),
                    f_n=float(fn) if fn else None,
                    f_t=float(ft) if ft else None,
                    timestamp=float(t),
                )
            )
    return out
