"""Synthetic planar vessel phantom and scripted navigation scenarios.

Provides the verification oracle for the whole pipeline: a 2-D phantom
geometry (named wall polylines in mm), forward beam simulation under
known loads or known contact deflections, deterministic anti-aliased
frame rendering that emulates a grayscale fluoroscopy view, and scenario
scripting that produces per-frame ground truth (true shapes, true
contact forces and the resultant force on the phantom).

Coordinates are in mm with the image convention (y grows downward);
pixels map as px = (mm - origin) / mm_per_px. Contact evolution is
scripted rather than solved as a contact problem: the estimation method
consumes observed deflections, so scripted displacement or force sets
are sufficient for verification. Scenario frames are generated
sequentially; rendering is deterministic given the seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .beam_fem import (
    BeamMesh,
    DirichletBC,
    SolveResult,
    snapped_node_arcs,
    solve_quasistatic,
    straight_wire_mesh,
)
from .segmentation import RasterFrame

__all__ = [
    "PhantomGeometry",
    "RenderStyle",
    "ContactSpec",
    "ScenarioFrame",
    "Scenario",
    "TrueContact",
    "GroundTruthRecord",
    "ForwardResult",
    "load_geometry",
    "save_geometry",
    "load_scenario",
    "save_scenario",
    "render_frame",
    "forward_simulate",
    "run_scenario",
    "write_ground_truth_csv",
    "contact_channel_geometry",
    "four_contact_growth_scenario",
    "opposed_contacts_scenario",
    "aligned_contacts_scenario",
    "arch_like_geometry",
]


# ---------------------------------------------------------------------------
# geometry


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _cross2(p4 - p3, p1 - p3)
    d2 = _cross2(p4 - p3, p2 - p3)
    d3 = _cross2(p2 - p1, p3 - p1)
    d4 = _cross2(p2 - p1, p4 - p1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _polyline_self_intersects(pts: np.ndarray) -> bool:
    n = len(pts) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if _segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]):
                return True
    return False


def _point_polyline_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to a polyline, vectorized over segments."""
    p = np.asarray(points, float)
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    ll = np.einsum("ij,ij->i", ab, ab)
    ll[ll == 0] = 1.0
    rel = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", rel, ab) / ll, 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = np.linalg.norm(p[:, None, :] - proj, axis=2)
    return d.min(axis=1)


@dataclass
class PhantomGeometry:
    """Named wall polylines with an optional lumen centerline and ostia.

    walls:      mapping of wall name to (K, 2) polyline in mm
    centerline: optional lumen centerline polyline
    branches:   named ostium positions (RCCA/RSA/LCCA/LSA style labels)
    """

    walls: dict
    centerline: np.ndarray | None = None
    branches: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.walls:
            raise ValueError("geometry needs at least one wall polyline")
        clean = {}
        for name, poly in self.walls.items():
            arr = np.asarray(poly, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
                raise ValueError(f"wall {name!r} must be a (K, 2) polyline with K >= 2")
            if _polyline_self_intersects(arr):
                raise ValueError(f"wall {name!r} is self-intersecting")
            clean[name] = arr
        self.walls = clean
        if self.centerline is not None:
            self.centerline = np.asarray(self.centerline, dtype=float)
        self.branches = {k: np.asarray(v, dtype=float) for k, v in self.branches.items()}

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.vstack(list(self.walls.values()))
        return pts.min(axis=0), pts.max(axis=0)

    def wall_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest wall polyline."""
        d = None
        for poly in self.walls.values():
            di = _point_polyline_distance(points, poly)
            d = di if d is None else np.minimum(d, di)
        return d

    def lumen_min_width(self) -> float:
        """Smallest gap between distinct wall polylines."""
        names = list(self.walls)
        best = math.inf
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                d = _point_polyline_distance(self.walls[a], self.walls[b])
                best = min(best, float(d.min()))
        return best

    def validate_lumen(self, wire_diameter: float) -> None:
        if self.lumen_min_width() <= wire_diameter:
            raise ValueError(
                f"lumen width {self.lumen_min_width():.2f} mm does not clear a "
                f"{wire_diameter:.2f} mm wire"
            )


def save_geometry(geometry: PhantomGeometry, path) -> None:
    doc = {
        "walls": {k: np.asarray(v).tolist() for k, v in geometry.walls.items()},
        "centerline": None if geometry.centerline is None else geometry.centerline.tolist(),
        "branches": {k: np.asarray(v).tolist() for k, v in geometry.branches.items()},
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_geometry(path) -> PhantomGeometry:
    doc = json.loads(Path(path).read_text())
    return PhantomGeometry(
        walls=doc["walls"],
        centerline=doc.get("centerline"),
        branches=doc.get("branches", {}),
    )


# ---------------------------------------------------------------------------
# rendering


@dataclass
class RenderStyle:
    """Canvas and drawing parameters of the synthetic camera."""

    canvas_px: tuple[int, int] = (1920, 1080)
    mm_per_px: float = 0.5
    origin_mm: tuple[float, float] = (0.0, 0.0)
    wire_width_px: float = 3.0
    wall_width_px: float = 3.0
    background: int = 230
    wall_value: int = 120
    wire_value: int = 30
    noise_sigma: float = 0.0

    def to_px(self, points_mm: np.ndarray) -> np.ndarray:
        return (np.asarray(points_mm, float) - np.asarray(self.origin_mm)) / self.mm_per_px


def _draw_polyline(img: np.ndarray, pts: np.ndarray, width_px: float, value: float, bg: float):
    h, w = img.shape
    half = width_px / 2.0
    for p0, p1 in zip(pts[:-1], pts[1:]):
        lo = np.floor(np.minimum(p0, p1) - half - 1.0).astype(int)
        hi = np.ceil(np.maximum(p0, p1) + half + 1.0).astype(int)
        x0, y0 = np.maximum(lo, 0)
        x1, y1 = np.minimum(hi, [w - 1, h - 1])
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        d = p1 - p0
        ll = float(d @ d)
        if ll == 0:
            dist = np.hypot(xs - p0[0], ys - p0[1])
        else:
            t = np.clip(((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / ll, 0.0, 1.0)
            dist = np.hypot(xs - (p0[0] + t * d[0]), ys - (p0[1] + t * d[1]))
        cov = np.clip(half + 0.5 - dist, 0.0, 1.0)
        shade = bg - cov * (bg - value)
        region = img[y0 : y1 + 1, x0 : x1 + 1]
        np.minimum(region, shade, out=region)


def render_frame(
    geometry: PhantomGeometry | None,
    wire_xy_mm: np.ndarray | None,
    style: RenderStyle = RenderStyle(),
    seed: int = 0,
    timestamp: float = 0.0,
) -> RasterFrame:
    """Rasterize walls (mid gray) and the wire (dark) on a light field.

    Anti-aliased with ~1 px linear coverage falloff; darker strokes win
    where strokes overlap. Optional Gaussian pixel noise is seeded, so a
    fixed seed reproduces the frame bit for bit. Shapes must lie inside
    the canvas.
    """
    w, h = style.canvas_px
    img = np.full((h, w), float(style.background))

    def check_inside(pts_px, what):
        if np.any(pts_px[:, 0] < -0.5) or np.any(pts_px[:, 0] > w - 0.5) or np.any(
            pts_px[:, 1] < -0.5
        ) or np.any(pts_px[:, 1] > h - 0.5):
            raise ValueError(f"{what} extends outside the canvas")

    if geometry is not None:
        for name, poly in geometry.walls.items():
            pts = style.to_px(poly)
            check_inside(pts, f"wall {name!r}")
            _draw_polyline(img, pts, style.wall_width_px, style.wall_value, style.background)
    if wire_xy_mm is not None:
        pts = style.to_px(wire_xy_mm)
        check_inside(pts, "wire")
        _draw_polyline(img, pts, style.wire_width_px, style.wire_value, style.background)

    if style.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, style.noise_sigma, img.shape)

    return RasterFrame(np.clip(np.rint(img), 0, 255).astype(np.uint8), timestamp)


# ---------------------------------------------------------------------------
# forward simulation (oracle)


@dataclass
class ForwardResult:
    """Force-controlled solve plus the displacements at the load points."""

    result: SolveResult
    load_nodes: list[int]
    load_arcs: np.ndarray
    displacements: np.ndarray  # (k, 2) displacement of each load point


def forward_simulate(
    mesh: BeamMesh,
    point_loads,
    increments: int = 10,
    tol: float = 1e-6,
    max_iters: int = 50,
) -> ForwardResult:
    """Deform a clamped cantilever under point forces at given arcs.

    ``point_loads`` is a sequence of (s, fx, fy) in the mesh frame; the
    mesh must have nodes at (or snapped to) those arc positions. Returns
    the solved state and the displacement of each loaded node, which is
    exactly what the inverse estimator consumes for a round trip.
    """
    loads = np.zeros(mesh.dof_count)
    nodes = []
    arcs = []
    for s, fx, fy in point_loads:
        node = mesh.node_at_arc(s)
        if not math.isclose(mesh.arc[node], s, rel_tol=0, abs_tol=1e-6 * max(mesh.length, 1.0)):
            raise ValueError(f"mesh has no node at arc {s:g} (nearest {mesh.arc[node]:g})")
        nodes.append(node)
        arcs.append(s)
        loads[3 * node] += fx
        loads[3 * node + 1] += fy
    bcs = [DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]
    result = solve_quasistatic(
        mesh, bcs, increments=increments, tol=tol, max_iters=max_iters, external_loads=loads
    )
    disp = np.array(
        [result.deformed_nodes[n, :2] - mesh.rest_xy[n] for n in nodes]
    ) if nodes else np.zeros((0, 2))
    return ForwardResult(result=result, load_nodes=nodes, load_arcs=np.asarray(arcs), displacements=disp)


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class ContactSpec:
    """One scripted contact: transverse deflection or applied force.

    ``deflection`` prescribes the local-frame displacement of the wire
    point at arc ``s``; its x component may be None to leave the wire
    free to slide axially (a frictionless wall). ``force`` applies a
    local-frame point force instead. Exactly one of the two must be set.
    """

    s: float
    deflection: tuple | None = None
    force: tuple | None = None

    def __post_init__(self):
        if (self.deflection is None) == (self.force is None):
            raise ValueError("specify exactly one of deflection or force")
        if self.s <= 0:
            raise ValueError("contact arc must be positive")


@dataclass
class ScenarioFrame:
    t: float
    wire_length: float
    contacts: list

    def __post_init__(self):
        if self.wire_length <= 0:
            raise ValueError("wire_length must be positive")
        for c in self.contacts:
            if c.s >= self.wire_length:
                raise ValueError(
                    f"frame t={self.t}: contact at s={c.s} beyond wire length {self.wire_length}"
                )


@dataclass
class Scenario:
    """Scripted navigation: wire base pose, per-frame length and contacts."""

    name: str
    base_mm: tuple[float, float]
    frames: list
    base_tangent_deg: float = 0.0
    wire_radius_mm: float = 0.6
    style: RenderStyle = field(default_factory=RenderStyle)
    seed: int = 0

    @property
    def rotation(self) -> np.ndarray:
        a = math.radians(self.base_tangent_deg)
        return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


@dataclass
class TrueContact:
    """Ground truth for one contact in one frame (global coordinates).

    ``force`` is the force the wire applies to the wall.
    """

    s: float
    position: np.ndarray
    force: np.ndarray
    deflection: np.ndarray


@dataclass
class GroundTruthRecord:
    """Per-frame ground truth emitted by a scenario run.

    ``resultant_force`` is the vector sum of the true contact forces, the
    quantity a platform force sensor would report.
    """

    t: float
    wire_xy: np.ndarray
    wire_arc: np.ndarray
    contacts: list
    resultant_force: np.ndarray
    frame: RasterFrame | None = None


def run_scenario(
    geometry: PhantomGeometry | None,
    scenario: Scenario,
    profile,
    n_elements: int = 64,
    increments: int = 10,
    tol: float = 1e-6,
    render: bool = True,
) -> tuple[RasterFrame | None, list[GroundTruthRecord]]:
    """Execute a scripted scenario frame by frame.

    Per frame: build the wire mesh at the scripted length with per-element
    rigidity from ``profile`` (a RigidityProfile or a constant), apply the
    scripted contacts (displacement contacts become boundary conditions,
    force contacts become nodal loads), solve, record ground truth and
    optionally render. Returns the wire-free vessel reference frame and
    one record per scripted frame. Infeasible frames raise with the frame
    time in the message.
    """
    ei_fn = profile.ei_at if hasattr(profile, "ei_at") else (lambda d: np.full_like(np.asarray(d, float), float(profile)))
    base = np.asarray(scenario.base_mm, dtype=float)
    rot = scenario.rotation

    reference = render_frame(geometry, None, scenario.style, seed=scenario.seed, timestamp=-1.0) if render else None

    records = []
    for fi, fr in enumerate(scenario.frames):
        arcs = snapped_node_arcs(fr.wire_length, n_elements, [c.s for c in fr.contacts])
        mids = 0.5 * (arcs[1:] + arcs[:-1])
        ei = np.asarray(ei_fn(fr.wire_length - mids), dtype=float)
        mesh = straight_wire_mesh(arcs, ei, radius=scenario.wire_radius_mm)

        bcs = [DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]
        loads = np.zeros(mesh.dof_count)
        disp_nodes = []
        for c in fr.contacts:
            node = mesh.node_at_arc(c.s)
            if c.deflection is not None:
                dx, dy = c.deflection
                bcs.append(DirichletBC(node, None if dx is None else float(dx), float(dy)))
                disp_nodes.append(node)
            else:
                loads[3 * node] += c.force[0]
                loads[3 * node + 1] += c.force[1]
        try:
            result = solve_quasistatic(
                mesh, bcs, increments=increments, tol=tol, max_iters=50,
                external_loads=loads if np.any(loads) else None,
            )
        except Exception as exc:
            msg = f"scenario {scenario.name!r} frame {fi} (t={fr.t:.3f}s): {exc}"
            from .beam_fem import ConvergenceError as _CE

            if isinstance(exc, _CE):
                raise _CE(msg, exc.residual_norm, exc.increment) from exc
            raise type(exc)(msg) from exc

        wire_local = result.deformed_nodes[:, :2]
        wire_xy = wire_local @ rot.T + base

        contacts = []
        rf = np.zeros(2)
        for c in fr.contacts:
            node = mesh.node_at_arc(c.s)
            pos = wire_xy[node]
            defl = result.deformed_nodes[node, :2] - mesh.rest_xy[node]
            if c.deflection is not None:
                wall_force = -(rot @ result.reaction_at(node).force)
            else:
                wall_force = -(rot @ np.asarray(c.force, dtype=float))
            contacts.append(TrueContact(s=c.s, position=pos, force=wall_force, deflection=defl))
            rf += wall_force

        frame = None
        if render:
            frame = render_frame(
                geometry, wire_xy, scenario.style, seed=scenario.seed + 1 + fi, timestamp=fr.t
            )
        records.append(
            GroundTruthRecord(
                t=fr.t, wire_xy=wire_xy, wire_arc=mesh.arc.copy(),
                contacts=contacts, resultant_force=rf, frame=frame,
            )
        )
    return reference, records


def write_ground_truth_csv(records, path) -> None:
    """Long-format ground truth: one row per contact per frame."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["t_s", "frame", "contact_idx", "s_mm", "x_mm", "y_mm", "Fx_N", "Fy_N",
             "RFx_N", "RFy_N", "wire_len_mm"]
        )
        for fi, rec in enumerate(records):
            for ci, c in enumerate(rec.contacts):
                w.writerow(
                    [
                        f"{rec.t:.6f}", fi, ci, f"{c.s:.6f}",
                        f"{c.position[0]:.6f}", f"{c.position[1]:.6f}",
                        f"{c.force[0]:.9g}", f"{c.force[1]:.9g}",
                        f"{rec.resultant_force[0]:.9g}", f"{rec.resultant_force[1]:.9g}",
                        f"{rec.wire_arc[-1]:.6f}",
                    ]
                )


# ---------------------------------------------------------------------------
# scenario / geometry JSON


def save_scenario(scenario: Scenario, path) -> None:
    doc = {
        "name": scenario.name,
        "base_mm": list(scenario.base_mm),
        "base_tangent_deg": scenario.base_tangent_deg,
        "wire_radius_mm": scenario.wire_radius_mm,
        "seed": scenario.seed,
        "style": asdict(scenario.style),
        "frames": [
            {
                "t": fr.t,
                "wire_length_mm": fr.wire_length,
                "contacts": [
                    {
                        "s_mm": c.s,
                        **(
                            {"deflection_mm": [c.deflection[0], c.deflection[1]]}
                            if c.deflection is not None
                            else {"force_N": list(c.force)}
                        ),
                    }
                    for c in fr.contacts
                ],
            }
            for fr in scenario.frames
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_scenario(path) -> Scenario:
    doc = json.loads(Path(path).read_text())
    style_doc = doc.get("style", {})
    style_doc["canvas_px"] = tuple(style_doc.get("canvas_px", (1920, 1080)))
    style_doc["origin_mm"] = tuple(style_doc.get("origin_mm", (0.0, 0.0)))
    frames = []
    for fr in doc["frames"]:
        contacts = []
        for c in fr.get("contacts", []):
            if "deflection_mm" in c:
                dx, dy = c["deflection_mm"]
                contacts.append(ContactSpec(s=c["s_mm"], deflection=(dx, dy)))
            else:
                contacts.append(ContactSpec(s=c["s_mm"], force=tuple(c["force_N"])))
        frames.append(ScenarioFrame(t=fr["t"], wire_length=fr["wire_length_mm"], contacts=contacts))
    return Scenario(
        name=doc.get("name", "scenario"),
        base_mm=tuple(doc["base_mm"]),
        frames=frames,
        base_tangent_deg=doc.get("base_tangent_deg", 0.0),
        wire_radius_mm=doc.get("wire_radius_mm", 0.6),
        style=RenderStyle(**style_doc),
        seed=doc.get("seed", 0),
    )


# ---------------------------------------------------------------------------
# shipped fixtures


def _solve_scripted_frame(profile, length, contacts, n_elements, tol=1e-7):
    """Clamped wire at the scripted length with (arc, dy) wall pins."""
    ei_fn = profile.ei_at if hasattr(profile, "ei_at") else (
        lambda dist: np.full_like(np.asarray(dist, float), float(profile))
    )
    arcs = snapped_node_arcs(length, n_elements, [s for s, _ in contacts])
    mids = 0.5 * (arcs[1:] + arcs[:-1])
    mesh = straight_wire_mesh(arcs, np.asarray(ei_fn(length - mids), float))
    bcs = [DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]
    for s, dy in contacts:
        bcs.append(DirichletBC(mesh.node_at_arc(s), None, float(dy)))
    return mesh, solve_quasistatic(mesh, bcs, increments=10, tol=tol)


def _arc_landing_at(mesh, solved, x_local: float) -> float:
    """Material arc whose deformed position lands at local x."""
    xs = solved.deformed_nodes[:, 0]
    if np.any(np.diff(xs) <= 0):
        order = np.argsort(xs)
        return float(np.interp(x_local, xs[order], mesh.arc[order]))
    return float(np.interp(x_local, xs, mesh.arc))


def grow_contact_scenario(
    profile,
    throat_x,
    margins,
    lengths,
    base_mm=(40.0, 70.0),
    fps: float = 1.0,
    wire_radius_mm: float = 0.8,
    style: RenderStyle | None = None,
    n_elements: int = 64,
    name: str = "contact-growth",
    seed: int = 20,
    activation_lead: float = 1.0,
    throat_slack: float = 0.3,
    clearance: float = 12.0,
) -> tuple[PhantomGeometry, Scenario]:
    """Scenario of a wire advancing through a series of narrow throats,
    plus the matching static geometry.

    Each throat sits at a fixed station ``throat_x[i]`` (local, measured
    along the insertion axis from the base). When the advancing wire
    first extends ``activation_lead`` past a station, the wire point
    passing through it is deflected ``margins[i]`` beyond its free
    position and the transverse offset of the throat is frozen; in later
    frames the wire keeps sliding through the same throat, so the contact
    is re-expressed each frame at the material arc currently at the
    station (axially free, transverse pinned). Static walls are therefore
    consistent with every frame; the builder validates that the wire
    touches them only at the scripted contacts.
    """
    if style is None:
        style = RenderStyle(
            canvas_px=(1600, 900),
            mm_per_px=0.4,
            origin_mm=(0.0, 0.0),
            wire_width_px=4.0,
            wall_width_px=3.0,
            noise_sigma=0.0,
        )

    throats: list[tuple[float, float]] = []  # (x station, frozen dy)
    frames = []
    shapes = []

    def contacts_for(ln, throat_list):
        """Fixed-point pass: arcs whose deformed positions hit the stations."""
        contacts = [(max(x, 5.0), dy) for x, dy in throat_list]  # initial arc guess = x
        mesh = solved = None
        for _ in range(4):
            mesh, solved = _solve_scripted_frame(profile, ln, contacts, n_elements)
            new = []
            shift = 0.0
            for (arc, dy), (x_t, _) in zip(contacts, throat_list):
                arc_new = _arc_landing_at(mesh, solved, x_t)
                arc_new = min(max(arc_new, 5.0), ln - 3.0)
                shift = max(shift, abs(arc_new - arc))
                new.append((arc_new, dy))
            contacts = new
            if shift < 0.25:
                break
        mesh, solved = _solve_scripted_frame(profile, ln, contacts, n_elements)
        return contacts, mesh, solved

    for fi, ln in enumerate(lengths):
        # activate stations the wire tip has passed
        while len(throats) < len(throat_x):
            x_next = float(throat_x[len(throats)])
            _, _, probe = (None, None, None)
            contacts, mesh, solved = contacts_for(ln, throats)
            tip_x = float(solved.deformed_nodes[-1, 0])
            if tip_x < x_next + activation_lead:
                break
            arc_at = _arc_landing_at(mesh, solved, x_next)
            node = mesh.node_at_arc(min(arc_at, ln - 3.0))
            y_free = float(solved.deformed_nodes[node, 1])
            throats.append((x_next, y_free + float(margins[len(throats)])))
        contacts, mesh, solved = contacts_for(ln, throats)
        shapes.append((mesh, solved, contacts))
        frames.append(
            ScenarioFrame(
                t=fi / fps,
                wire_length=float(ln),
                contacts=[ContactSpec(s=s, deflection=(None, dy)) for s, dy in contacts],
            )
        )

    base = np.asarray(base_mm, float)
    geometry = _throat_channel_geometry(
        shapes, throats, base, wire_radius_mm,
        wall_width_mm=style.wall_width_px * style.mm_per_px,
        throat_slack=throat_slack, clearance=clearance,
    )
    _validate_scenario_geometry(geometry, shapes, base, wire_radius_mm,
                                style.wall_width_px * style.mm_per_px, throat_slack)
    scenario = Scenario(
        name=name,
        base_mm=tuple(float(v) for v in base),
        frames=frames,
        wire_radius_mm=wire_radius_mm,
        style=style,
        seed=seed,
    )
    return geometry, scenario


def _throat_channel_geometry(shapes, throats, base, wire_radius, wall_width_mm,
                             throat_slack, clearance) -> PhantomGeometry:
    """Smooth outer lumen walls plus a short throat lip pair per station."""
    x0 = base[0] - 25.0
    x1 = max(s.deformed_nodes[:, 0].max() for _, s, _ in shapes) + base[0] + 25.0
    grid = np.linspace(x0, x1, 300)
    env_hi = np.full_like(grid, base[1])
    env_lo = np.full_like(grid, base[1])
    reach = -np.inf
    for _, solved, _ in shapes:
        xy = solved.deformed_nodes[:, :2] + base
        order = np.argsort(xy[:, 0])
        inside = (grid >= xy[order[0], 0]) & (grid <= xy[order[-1], 0])
        y = np.interp(grid[inside], xy[order, 0], xy[order, 1])
        env_hi[inside] = np.maximum(env_hi[inside], y)
        env_lo[inside] = np.minimum(env_lo[inside], y)
        reach = max(reach, float(xy[order[-1], 0]))
    # hold the envelope beyond the farthest tip so the wall does not
    # cliff back to the baseline right at the wire end
    k = int(np.searchsorted(grid, reach))
    if 0 < k < len(grid):
        env_hi[k:] = env_hi[k - 1]
        env_lo[k:] = env_lo[k - 1]

    kernel = np.ones(9) / 9.0
    pad = lambda a: np.concatenate([np.full(4, a[0]), a, np.full(4, a[-1])])
    smooth_hi = np.convolve(pad(env_hi), kernel, mode="valid")
    smooth_lo = np.convolve(pad(env_lo), kernel, mode="valid")
    upper = np.column_stack([grid, np.maximum(smooth_hi, env_hi) + clearance])
    lower = np.column_stack([grid, np.minimum(smooth_lo, env_lo) - clearance])
    center = np.column_stack([grid, 0.5 * (upper[:, 1] + lower[:, 1])])

    walls = {"outer": upper, "inner": lower}
    gap = wire_radius + throat_slack
    for i, (x_t, dy) in enumerate(throats):
        xs = base[0] + np.array([x_t - 4.0, x_t + 4.0])
        y_c = base[1] + dy
        walls[f"throat_{i}_a"] = np.column_stack([xs, np.full(2, y_c - gap - wall_width_mm / 2.0)])
        walls[f"throat_{i}_b"] = np.column_stack([xs, np.full(2, y_c + gap + wall_width_mm / 2.0)])
    return PhantomGeometry(walls=walls, centerline=center)


def _validate_scenario_geometry(geometry, shapes, base, wire_radius,
                                wall_width_mm, throat_slack) -> None:
    """Every frame's wire must touch walls only at its scripted contacts."""
    touch_budget = wire_radius + throat_slack + wall_width_mm / 2.0 + 0.3
    for fi, (mesh, solved, contacts) in enumerate(shapes):
        xy = solved.deformed_nodes[:, :2] + base
        contact_x = np.array([xy[mesh.node_at_arc(s), 0] for s, _ in contacts])
        d = geometry.wall_distance(xy)
        near_contact = np.zeros(len(xy), dtype=bool)
        for cx in contact_x:
            near_contact |= np.abs(xy[:, 0] - cx) <= 10.0
        free_min = d[~near_contact].min() if np.any(~near_contact) else np.inf
        if free_min < wire_radius + wall_width_mm / 2.0 + 1.7:
            raise ValueError(
                f"scenario frame {fi}: wire within {free_min:.2f} mm of a wall away from contacts"
            )
        for s, _ in contacts:
            node = mesh.node_at_arc(s)
            dist = geometry.wall_distance(xy[node][None, :])[0]
            if dist > touch_budget:
                raise ValueError(
                    f"scenario frame {fi}: contact at arc {s:g} sits {dist:.2f} mm from "
                    f"the nearest wall (budget {touch_budget:.2f})"
                )


GROWTH_STATIONS = (80.0, 148.0, 210.0, 252.0)
GROWTH_MARGINS = (7.0, 9.0, 9.0, 6.0)


def scenario_sweep_params(scenario: Scenario):
    """Segmentation sweep parameters matched to a scenario's rendering."""
    from .segmentation import SweepParams

    style = scenario.style
    wire_w = style.wire_width_px
    bx = scenario.base_mm[0] / style.mm_per_px
    return SweepParams(
        window_px=2.0 * wire_w,
        contact_distance_px=wire_w,
        min_pixels=3,
        seed_region=(bx - 15.0, 0.0, bx + 15.0, float(style.canvas_px[1])),
        max_steps=4000,
    )


def four_contact_growth_scenario(profile=None) -> tuple[PhantomGeometry, Scenario]:
    """Advancing wire picking up one to four throat contacts.

    Contact forces stay within a few tenths of a newton on the synthetic
    reference wire. Deterministic; used by the closed-loop acceptance run
    and the demos.
    """
    if profile is None:
        from .rigidity import synthetic_reference_profile

        profile = synthetic_reference_profile()
    lengths = np.linspace(105.0, 287.0, 13)
    return grow_contact_scenario(
        profile,
        GROWTH_STATIONS,
        GROWTH_MARGINS,
        lengths,
        base_mm=(40.0, 70.0),
        name="four-contact-growth",
    )


def opposed_contacts_scenario() -> Scenario:
    """Two contacts pushing from opposite sides: the resultant nearly
    cancels while each local contact force stays large."""
    frames = [
        ScenarioFrame(
            t=i / 3.0,
            wire_length=220.0,
            contacts=[
                ContactSpec(s=80.0, deflection=(None, 8.0 + 0.5 * i)),
                ContactSpec(s=140.0, deflection=(None, -(7.5 + 0.5 * i))),
            ],
        )
        for i in range(4)
    ]
    return Scenario(name="opposed-contacts", base_mm=(40.0, 108.0), frames=frames)


def aligned_contacts_scenario() -> Scenario:
    """Two contacts pressed by the same wall side: the resultant exceeds
    every individual contact force. The deflection pair follows the free
    bending ratio of the span, which keeps both reactions co-directed."""
    frames = [
        ScenarioFrame(
            t=i / 3.0,
            wire_length=220.0,
            contacts=[
                ContactSpec(s=80.0, deflection=(None, 4.0 + 0.3 * i)),
                ContactSpec(s=150.0, deflection=(None, 10.0 + 0.75 * i)),
            ],
        )
        for i in range(4)
    ]
    return Scenario(name="aligned-contacts", base_mm=(40.0, 108.0), frames=frames)


def arch_like_geometry() -> PhantomGeometry:
    """Schematic aortic-arch-like channel with labeled branch ostia.

    A stylized fixture for contour-map demos; not anatomical data.
    """
    t = np.linspace(np.pi, 0.0, 60)
    cx, cy, r = 180.0, 150.0, 90.0
    arch = np.column_stack([cx + r * np.cos(t), cy - 0.6 * r * np.sin(t)])
    down = np.array([[cx - r, 260.0], [cx - r, cy + 10.0]])
    up = np.array([[cx + r, cy + 10.0], [cx + r, 260.0]])
    center = np.vstack([down, arch, up])

    def offset(poly, h):
        d = np.gradient(poly, axis=0)
        n = np.column_stack([-d[:, 1], d[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        return poly + h * n

    inner = offset(center, -12.0)
    outer = offset(center, 12.0)
    branches = {
        "RSA": np.array([cx - 0.75 * r, cy - 0.55 * r]),
        "RCCA": np.array([cx - 0.30 * r, cy - 0.72 * r]),
        "LCCA": np.array([cx + 0.30 * r, cy - 0.72 * r]),
        "LSA": np.array([cx + 0.75 * r, cy - 0.55 * r]),
    }
    return PhantomGeometry(
        walls={"inner": inner, "outer": outer}, centerline=center, branches=branches
    )
