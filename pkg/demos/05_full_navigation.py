"""The whole pipeline on a scripted navigation run.

Simulates an advancing wire that picks up four wall contacts, renders
every frame, runs segmentation and force estimation on the rendered
images, compares the estimates with the simulation ground truth, and
writes the report artifacts (metrics, traces, force contour map and a
stress profile).

Run:  python3 demos/05_full_navigation.py   (takes ~1 minute)
"""

from pathlib import Path

import numpy as np

from lumenforce.beam_fem import recover_resultants, solve_quasistatic
from lumenforce.estimator import build_model, estimate_frame
from lumenforce.phantom import (
    four_contact_growth_scenario,
    run_scenario,
    scenario_sweep_params,
)
from lumenforce.report import build_contour, compute_metrics, emit
from lumenforce.rigidity import synthetic_reference_profile
from lumenforce.segmentation import segment_frame, vessel_boundary_mask, write_pgm

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

profile = synthetic_reference_profile()
print("building the scenario (solves the whole navigation once)...")
geometry, scenario = four_contact_growth_scenario(profile)
reference, records = run_scenario(geometry, scenario, profile, n_elements=64, tol=1e-7)
write_pgm(records[-1].frame, out / "navigation_last_frame.pgm")

vessel = vessel_boundary_mask(reference, high_threshold=150.0)
params = scenario_sweep_params(scenario)

estimates = []
errors = []
frame_times = []
last = None
print("replaying the rendered frames through segmentation + estimation:")
for rec in records:
    shape = segment_frame(rec.frame, vessel, params, threshold=70.0,
                          mm_per_px=scenario.style.mm_per_px)
    est, sim, err = estimate_frame(shape, profile, n_elements=64, tol=1e-7,
                                   constrain_axial=False)
    estimates.extend(est)
    errors.append(err)
    frame_times.append(rec.t)
    last = (rec, shape, est)
    truth = ", ".join(f"{np.linalg.norm(c.force):.3f}" for c in rec.contacts)
    found = ", ".join(f"{e.magnitude:.3f}" for e in est)
    print(f"  t={rec.t:4.0f}s len={rec.wire_arc[-1]:5.0f}mm  true N [{truth}]  est N [{found}]")

metrics = compute_metrics((estimates, frame_times), shape_errors=errors)
print(f"\nnavigation metrics: peak {metrics.average_max_cf:.3f} N, "
      f"mean {metrics.average_mean_cf:.3f} N, "
      f"force-time integral {metrics.force_time_integral:.2f} N*s, "
      f"shape rmse {metrics.shape_rmse:.2f} mm")

# stress along the wire at the final frame
rec, shape, est = last
model = build_model(shape, profile, n_elements=64, radius=scenario.wire_radius_mm,
                    constrain_axial=False)
res = solve_quasistatic(model.mesh, model.bcs, increments=10, tol=1e-7)
second = np.pi * scenario.wire_radius_mm**4 / 4.0
resultants = recover_resultants(res, model.mesh, radius=scenario.wire_radius_mm,
                                second_moment=second)
mids = 0.5 * (model.mesh.arc[1:] + model.mesh.arc[:-1])

contour = build_contour(estimates, geometry, radius=3.0)
written = emit(out, metrics=metrics, estimates=estimates, contour=contour,
               stress_profile=(mids, resultants.stress), wire_xy=rec.wire_xy)
print("artifacts:")
for name, path in written.items():
    print(f"  {name}: {path}")
