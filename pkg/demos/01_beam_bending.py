"""Beam solver walkthrough: closed-form checks and large deflection.

A straight cantilever is loaded at the tip, first gently (where the
classic closed forms apply) and then hard enough that the tip rotates
by tens of degrees. The small-load answers are compared against
F*L^3/(3*EI) with and without the shear term, and the large-load shapes
are printed so the geometric nonlinearity is visible.

Run:  python3 demos/01_beam_bending.py
"""

import numpy as np

from lumenforce.beam_fem import (
    DirichletBC,
    snapped_node_arcs,
    solve_quasistatic,
    straight_wire_mesh,
)

L, EI = 100.0, 1000.0
clamp = [DirichletBC(0, 0.0, 0.0, rotation_constrained=True)]


def tip_load(mesh, f):
    loads = np.zeros(mesh.dof_count)
    loads[3 * (mesh.n_nodes - 1) + 1] = f
    return loads


print("== small deflection against the closed forms ==")
arcs = snapped_node_arcs(L, 64)
stiff_shear = straight_wire_mesh(arcs, EI, axial_rigidity=1e5, shear_rigidity=1e8)
soft_shear = straight_wire_mesh(arcs, EI, axial_rigidity=1e5, shear_rigidity=500.0)
f = 0.0015
for name, mesh, ref in [
    ("thin-beam limit", stiff_shear, f * L**3 / (3 * EI)),
    ("with shear term", soft_shear, f * L**3 / (3 * EI) + f * L / 500.0),
]:
    res = solve_quasistatic(mesh, clamp, external_loads=tip_load(mesh, f), tol=1e-8)
    delta = res.deformed_nodes[-1, 1]
    print(f"  {name}: tip deflection {delta:.6f} mm, closed form {ref:.6f} mm "
          f"({abs(delta - ref) / ref * 100:.4f}% off)")

print("\n== ramping into large deflection (load parameter F*L^2/EI) ==")
for p in (0.5, 1.0, 2.0, 5.0):
    res = solve_quasistatic(
        stiff_shear, clamp, increments=20, tol=1e-8,
        external_loads=tip_load(stiff_shear, p * EI / L**2),
    )
    x, y, phi = res.deformed_nodes[-1]
    print(f"  p = {p:3.1f}: tip at ({x:6.2f}, {y:6.2f}) mm, "
          f"tip rotation {np.degrees(phi):6.2f} deg")

print("\n== reactions balance the applied load ==")
res = solve_quasistatic(
    stiff_shear, clamp, increments=10, tol=1e-8,
    external_loads=tip_load(stiff_shear, 0.05),
)
base = res.reaction_at(0)
print(f"  applied 0.05 N at the tip; base reaction ({base.fx:+.4f}, {base.fy:+.4f}) N, "
      f"moment {base.moment:+.2f} N*mm")
