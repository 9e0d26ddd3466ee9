"""Segmenting and tracking a tool on synthetic frames.

Renders a bent wire between vessel walls, extracts the vessel boundary
mask from a tool-free reference frame, then sweeps the moving search
window along the tool to recover the centerline, the contact and the
tip. Writes the frames and an overlay of the tracked points next to
this script.

Run:  python3 demos/03_segmentation.py
"""

from pathlib import Path

import numpy as np

from lumenforce.phantom import PhantomGeometry, RenderStyle, render_frame
from lumenforce.segmentation import (
    SweepParams,
    segment_frame,
    vessel_boundary_mask,
    write_pgm,
)

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

style = RenderStyle(canvas_px=(640, 260), mm_per_px=0.5, wire_width_px=4.0,
                    noise_sigma=3.0)

# a gently bowed wire dipping toward one wall
xs = np.linspace(10.0, 300.0, 300)
wire = np.column_stack([xs, 65.0 + 18.0 * np.sin(np.pi * (xs - 10.0) / 290.0)])
x_c = 155.0
y_c = float(np.interp(x_c, xs, wire[:, 1])) + 2.2
wall = np.array([[x_c - 40, y_c + 14], [x_c - 6, y_c + 1], [x_c, y_c],
                 [x_c + 6, y_c + 1], [x_c + 40, y_c + 14]])
geometry = PhantomGeometry(walls={"lower": wall,
                                  "upper": [[5.0, 30.0], [315.0, 30.0]]})

reference = render_frame(geometry, None, style, seed=3)
frame = render_frame(geometry, wire, style, seed=4, timestamp=0.0)
write_pgm(reference, out / "segmentation_reference.pgm")
write_pgm(frame, out / "segmentation_frame.pgm")

vessel = vessel_boundary_mask(reference, high_threshold=150.0)
params = SweepParams(window_px=8.0, contact_distance_px=6.0,
                     seed_region=(0, 0, 40, 260))
shape = segment_frame(frame, vessel, params, threshold=70.0, blur_kernel=5,
                      mm_per_px=style.mm_per_px)

print(f"tracked {len(shape.centerline)} centerline points, "
      f"arc length {shape.length:.1f} mm")
print(f"tip at ({shape.tip[0]:.1f}, {shape.tip[1]:.1f}) mm")
for c in shape.contacts:
    print(f"contact at s = {c.s:.1f} mm, position ({c.x:.1f}, {c.y:.1f}) mm, "
          f"wall distance {c.wall_distance:.2f} mm, "
          f"normal ({c.wall_normal[0]:+.2f}, {c.wall_normal[1]:+.2f})")

# overlay for quick visual inspection
overlay = frame.pixels.copy()
for x, y, _ in shape.centerline:
    px, py = int(round(x / style.mm_per_px)), int(round(y / style.mm_per_px))
    if 0 <= py < overlay.shape[0] and 0 <= px < overlay.shape[1]:
        overlay[py, px] = 255
from lumenforce.segmentation import RasterFrame  # noqa: E402

write_pgm(RasterFrame(overlay), out / "segmentation_overlay.pgm")
print(f"frames written to {out}")
