"""Working with lengthwise rigidity distributions.

Shows the shipped profiles, converts a handful of three-point-bending
measurements into EI samples, and queries the interpolated curve the way
the model builder does (keyed by distance from the distal tip).

Run:  python3 demos/02_rigidity_profiles.py
"""

import numpy as np

from lumenforce.rigidity import (
    BendingTestRecord,
    ei_from_bending,
    profile_from_bending_tests,
    stiff_guidewire_profile,
    synthetic_reference_profile,
)

print("== shipped profiles ==")
for name, profile in [
    ("synthetic reference", synthetic_reference_profile()),
    ("digitized stiff guidewire (approximate)", stiff_guidewire_profile()),
]:
    s_probe = np.array([0.0, 25.0, 75.0, 150.0, 300.0, 500.0])
    values = ", ".join(f"EI({s:g})={profile.ei_at(s):.0f}" for s in s_probe)
    print(f"  {name}: {len(profile)} samples; {values}")

print("\n== from bench measurements to a profile ==")
# central-load slope of the load-deflection line, measured over a 30 mm span
bench = [
    BendingTestRecord(span=30.0, load_deflection_slope=0.35, s_center=20.0, repeats=3),
    BendingTestRecord(span=30.0, load_deflection_slope=1.8, s_center=60.0, repeats=3),
    BendingTestRecord(span=30.0, load_deflection_slope=6.5, s_center=120.0, repeats=3),
    BendingTestRecord(span=30.0, load_deflection_slope=9.2, s_center=250.0, repeats=3),
]
for rec in bench:
    s, ei = ei_from_bending(rec)
    print(f"  specimen center {s:5.1f} mm from tip: slope {rec.load_deflection_slope:.2f} N/mm "
          f"-> EI = {ei:7.1f} N*mm^2")

profile = profile_from_bending_tests(bench)
print(f"\n  interpolated between samples: EI(90 mm) = {profile.ei_at(90.0):.1f} N*mm^2")
print(f"  clamped beyond the last sample: EI(400 mm) = {profile.ei_at(400.0):.1f} N*mm^2")
