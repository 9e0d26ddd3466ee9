"""Command-line pipeline driver.

Subcommands replay the pipeline stage by stage on files:

  simulate   geometry + scenario script -> rendered frames + ground truth
  segment    frames -> tracked shape CSVs
  estimate   shapes + rigidity profile -> force estimate stream
  report     forces (+ geometry) -> metrics, traces, contour and stress plots
  roundtrip  randomized forward/inverse verification suite

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import beam_fem, estimator, phantom, report, rigidity, segmentation


def _log(args, **payload) -> None:
    if getattr(args, "json_log", False):
        print(json.dumps(payload, sort_keys=True))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--json-log", action="store_true",
                   help="emit one structured log line per frame")


def cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    geometry = phantom.load_geometry(args.geometry) if args.geometry else None
    scenario = phantom.load_scenario(args.script)
    profile = rigidity.load_profile(args.profile) if args.profile else args.ei
    if profile is None:
        raise ValueError("provide --profile or --ei")
    reference, records = phantom.run_scenario(
        geometry, scenario, profile,
        n_elements=args.elements, increments=args.increments, tol=args.tol,
    )
    segmentation.write_pgm(reference, out / "vessel_reference.pgm")
    entries = []
    for i, rec in enumerate(records):
        rel = f"frames/frame_{i:04d}.pgm"
        segmentation.write_pgm(rec.frame, out / rel)
        entries.append((rec.t, rel))
        _log(args, event="simulate", frame=i, t=rec.t, contacts=len(rec.contacts))
    segmentation.write_manifest(entries, out / "frames_manifest.csv")
    phantom.write_ground_truth_csv(records, out / "ground_truth.csv")
    print(f"wrote {len(records)} frames, ground_truth.csv and vessel_reference.pgm to {out}")
    return 0


def cmd_segment(args) -> int:
    out = Path(args.out_dir)
    shapes_dir = out / "shapes"
    shapes_dir.mkdir(parents=True, exist_ok=True)
    frames = segmentation.read_manifest(args.frames)
    if not frames:
        raise ValueError("frame manifest is empty")
    ref_path = Path(args.vessel_frame) if args.vessel_frame else frames[0][1]
    reference = segmentation.read_frame(ref_path)
    vessel = segmentation.vessel_boundary_mask(
        reference, blur_kernel=args.blur_kernel,
        high_threshold=args.canny_high, low_high_ratio=args.canny_ratio,
    )
    seed_region = None
    if args.seed_region:
        seed_region = tuple(float(v) for v in args.seed_region.split(","))
        if len(seed_region) != 4:
            raise ValueError("--seed-region expects x0,y0,x1,y1")
    params = segmentation.SweepParams(
        window_px=2.0 * args.wire_width_px,
        contact_distance_px=args.contact_distance_px
        if args.contact_distance_px is not None
        else 1.5 * args.wire_width_px / 2.0,
        min_pixels=args.min_pixels,
        seed_region=seed_region or (0.0, 0.0, 3.0 * args.wire_width_px, float(reference.height)),
    )
    entries = []
    for i, (t, path) in enumerate(frames):
        frame = segmentation.read_frame(path, timestamp=t)
        shape = segmentation.segment_frame(
            frame, vessel, params, threshold=args.threshold,
            close_radius=args.close_radius,
            blur_kernel=args.blur_kernel if args.blur_frames else None,
            mm_per_px=args.calibration_mm_per_px,
        )
        rel = f"shapes/shape_{i:04d}.csv"
        segmentation.write_shape_csv(shape, out / rel)
        entries.append((t, rel))
        _log(args, event="segment", frame=i, t=t,
             contacts=len(shape.contacts), length_mm=shape.length)
    segmentation.write_manifest(entries, out / "shapes_manifest.csv")
    print(f"wrote {len(entries)} shape CSVs to {out}")
    return 0


def cmd_estimate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profile = rigidity.load_profile(args.profile)
    shapes = segmentation.read_manifest(args.shapes)
    estimates = []
    frame_rows = []
    stress_rows = []
    for i, (t, path) in enumerate(shapes):
        shape = segmentation.read_shape_csv(path, timestamp=t,
                                            calibration=args.calibration_mm_per_px or 1.0)
        if not shape.contacts:
            frame_rows.append((t, 0))
            _log(args, event="estimate", frame=i, t=t, contacts=0)
            continue
        est, sim, err = estimator.estimate_frame(
            shape, profile, n_elements=args.elements, increments=args.increments,
            tol=args.tol, radius=args.radius_mm,
            constrain_axial=not args.free_axial,
        )
        estimates.extend(est)
        frame_rows.append((t, len(est)))
        if args.radius_mm:
            model = estimator.build_model(shape, profile, n_elements=args.elements,
                                          radius=args.radius_mm,
                                          constrain_axial=not args.free_axial)
            res = beam_fem.solve_quasistatic(model.mesh, model.bcs,
                                             increments=args.increments, tol=args.tol)
            second = np.pi * args.radius_mm**4 / 4.0
            r = beam_fem.recover_resultants(res, model.mesh, radius=args.radius_mm,
                                            second_moment=second)
            mids = 0.5 * (model.mesh.arc[1:] + model.mesh.arc[:-1])
            for s_mid, sigma, moment in zip(mids, r.stress, r.moment):
                stress_rows.append((t, s_mid, sigma, moment))
        _log(args, event="estimate", frame=i, t=t, contacts=len(est),
             shape_rmse_mm=err.rmse)
    estimator.write_estimates_csv(estimates, out / "forces.csv")
    with open(out / "frames.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "n_contacts"])
        for t, n in frame_rows:
            w.writerow([f"{t:.6f}", n])
    if stress_rows:
        with open(out / "stress.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "s_mid_mm", "stress_Nmm2", "moment_Nmm"])
            for t, s_mid, sigma, moment in stress_rows:
                w.writerow([f"{t:.6f}", f"{s_mid:.6f}", f"{sigma:.9g}", f"{moment:.9g}"])
    print(f"wrote forces.csv ({len(estimates)} estimates) to {out}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    estimates = estimator.read_estimates_csv(args.forces)
    if args.frame_times:
        with open(args.frame_times, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            frame_times = [float(row[0]) for row in reader if row]
    else:
        frame_times = sorted({e.timestamp for e in estimates})
    if not frame_times:
        raise ValueError("no frames to report on")
    metrics = report.compute_metrics((estimates, frame_times))
    contour = None
    wire = None
    if args.geometry:
        geometry = phantom.load_geometry(args.geometry)
        contour = report.build_contour(estimates, geometry, radius=args.contour_radius_mm)
    stress_profile = None
    if args.stress:
        rows = {}
        with open(args.stress, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for t, s_mid, sigma, _ in ((r[0], r[1], r[2], r[3]) for r in reader if r):
                rows.setdefault(float(t), []).append((float(s_mid), float(sigma)))
        last = rows[max(rows)]
        last.sort()
        stress_profile = (np.array([s for s, _ in last]), np.array([v for _, v in last]))
    written = report.emit(out, metrics=metrics, estimates=estimates,
                          contour=contour, stress_profile=stress_profile, wire_xy=wire)
    print(f"report artifacts: {', '.join(str(p) for p in written.values())}")
    return 0


def cmd_roundtrip(args) -> int:
    from .rigidity import synthetic_reference_profile
    from .segmentation import ContactObservation, TrackedShape

    profile = synthetic_reference_profile()
    length, n_el = 300.0, args.elements
    rng_master = np.random.default_rng(args.seed)
    worst_mag = worst_ang = 0.0
    done = 0
    attempts = 0
    rows = []
    while done < args.n and attempts < 40 * args.n:
        attempts += 1
        seed = int(rng_master.integers(0, 2**31 - 1))
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 5))
        arcs = np.sort(rng.uniform(0.25 * length, 0.92 * length, k))
        if k > 1 and np.min(np.diff(arcs)) < 0.08 * length:
            continue
        coef = rng.normal(0.0, 1.0, 3)
        x = arcs / length
        p = coef[0] * x**2 + coef[1] * x**3 + coef[2] * x**4
        peak = np.max(np.abs(p))
        if peak < 1e-9:
            continue
        d = p * (rng.uniform(0.05, 0.25) * length / peak)
        if np.min(np.abs(d)) < 0.03 * length:
            continue
        node_arcs = beam_fem.snapped_node_arcs(length, n_el, arcs)
        mids = 0.5 * (node_arcs[1:] + node_arcs[:-1])
        mesh = beam_fem.straight_wire_mesh(node_arcs, profile.ei_at(length - mids))
        bcs = [beam_fem.DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]
        for s_c, dy in zip(arcs, d):
            bcs.append(beam_fem.DirichletBC(mesh.node_at_arc(s_c), None, float(dy)))
        try:
            gen = beam_fem.solve_quasistatic(mesh, bcs, increments=10, tol=1e-7)
        except beam_fem.ConvergenceError:
            continue
        loads = []
        for s_c in arcs:
            r = gen.reaction_at(mesh.node_at_arc(s_c))
            loads.append((float(s_c), r.fx, r.fy))
        mags = [float(np.hypot(fx, fy)) for _, fx, fy in loads]
        if max(mags) > 1.5 or min(mags) < 0.002:
            continue
        fwd = phantom.forward_simulate(mesh, loads, increments=10, tol=1e-7)
        xy = fwd.result.deformed_nodes[:, :2]
        contacts = [
            ContactObservation(x=xy[nd, 0], y=xy[nd, 1], s=float(mesh.arc[nd]))
            for nd in fwd.load_nodes
        ]
        shape = TrackedShape(
            centerline=np.column_stack([xy, mesh.arc]), contacts=contacts,
            tip=np.array([xy[-1, 0], xy[-1, 1], mesh.arc[-1]]),
        )
        est, _, _ = estimator.estimate_frame(shape, profile, n_elements=n_el, tol=1e-7)
        for (s_c, fx, fy), e in zip(loads, est):
            truth = -np.array([fx, fy])
            t_mag = float(np.linalg.norm(truth))
            mag_err = abs(e.magnitude - t_mag) / t_mag
            cosang = float(truth @ e.force / (t_mag * e.magnitude))
            ang_err = float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
            worst_mag = max(worst_mag, mag_err)
            worst_ang = max(worst_ang, ang_err)
            rows.append((done, s_c, t_mag, e.magnitude, mag_err, ang_err))
        _log(args, event="roundtrip", scenario=done, contacts=k)
        done += 1
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "roundtrip.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "s_mm", "F_true_N", "F_est_N", "mag_rel_err", "angle_err_deg"])
            for row in rows:
                w.writerow([row[0], f"{row[1]:.3f}", f"{row[2]:.6g}", f"{row[3]:.6g}",
                            f"{row[4]:.3e}", f"{row[5]:.3e}"])
    ok = worst_mag < 0.02 and worst_ang < 2.0
    print(
        f"roundtrip: {done} scenarios, worst magnitude error {worst_mag * 100:.4f}%, "
        f"worst direction error {worst_ang:.4f} deg -> {'PASS' if ok else 'FAIL'}"
    )
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lumenforce",
        description="image-based contact force monitoring pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scripted scenario: frames + ground truth")
    p.add_argument("--geometry", help="phantom geometry JSON")
    p.add_argument("--script", required=True, help="scenario script JSON")
    p.add_argument("--profile", help="rigidity profile CSV")
    p.add_argument("--ei", type=float, help="constant rigidity instead of a profile")
    p.add_argument("--elements", type=int, default=64)
    p.add_argument("--increments", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("segment", help="track tool shapes on a frame sequence")
    p.add_argument("--frames", required=True, help="frame manifest CSV (t_s,path)")
    p.add_argument("--vessel-frame", help="tool-free reference frame (default: first frame)")
    p.add_argument("--calibration-mm-per-px", type=float, default=None)
    p.add_argument("--wire-width-px", type=float, default=4.0)
    p.add_argument("--contact-distance-px", type=float, default=None)
    p.add_argument("--threshold", type=float, default=70.0)
    p.add_argument("--close-radius", type=int, default=1)
    p.add_argument("--min-pixels", type=int, default=3)
    p.add_argument("--blur-kernel", type=int, default=5)
    p.add_argument("--blur-frames", action="store_true",
                   help="smooth frames before thresholding (for noisy input)")
    p.add_argument("--canny-high", type=float, default=150.0)
    p.add_argument("--canny-ratio", type=float, default=5.0)
    p.add_argument("--seed-region", help="x0,y0,x1,y1 rectangle holding the tool base")
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("estimate", help="inverse force estimation on tracked shapes")
    p.add_argument("--shapes", required=True, help="shapes manifest CSV")
    p.add_argument("--profile", required=True, help="rigidity profile CSV")
    p.add_argument("--calibration-mm-per-px", type=float, default=None,
                   help="calibration already applied to the shape CSVs")
    p.add_argument("--elements", type=int, default=64)
    p.add_argument("--increments", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--radius-mm", type=float, default=None,
                   help="wire radius; enables stress recovery")
    p.add_argument("--free-axial", action="store_true",
                   help="prescribe only transverse deflections (frictionless walls)")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", help="metrics, traces, contour and stress artifacts")
    p.add_argument("--forces", required=True, help="force estimate CSV")
    p.add_argument("--frame-times", help="frames CSV (t_s,...) incl. contact-free frames")
    p.add_argument("--geometry", help="phantom geometry JSON for the contour map")
    p.add_argument("--contour-radius-mm", type=float, default=1.0)
    p.add_argument("--stress", help="stress CSV from the estimate stage")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("roundtrip", help="randomized forward/inverse verification")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--elements", type=int, default=64)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--json-log", action="store_true")
    p.set_defaults(func=cmd_roundtrip)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (beam_fem.ConvergenceError, beam_fem.SingularModelError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
