"""Image-based contact force monitoring for flexible intraluminal tools.

The package covers the full pipeline: synthetic phantom simulation and
rendering, segmentation and contact tracking on grayscale frames,
lengthwise flexural rigidity profiles, a geometrically nonlinear planar
beam FEM, inverse multi-point contact force estimation, and metric /
contour reporting.

Modules
-------
beam_fem      corotational shear-deformable beam core and quasi-static solver
rigidity      EI(s) profiles and three-point-bending conversion
segmentation  frame operations, moving-window sweep tracking, calibration
estimator     cantilever model construction and inverse force estimation
phantom       synthetic vessel geometry, forward oracle, scenario scripting
report        navigation metrics, contour maps, SVG/CSV artifacts
cli           command-line pipeline driver
"""

__version__ = "0.1.0"

from . import beam_fem, cli, estimator, phantom, report, rigidity, segmentation
from .beam_fem import (
    BeamMesh,
    ConvergenceError,
    DirichletBC,
    SectionProperties,
    SolveResult,
    solve_quasistatic,
)
from .estimator import (
    CantileverModel,
    ForceEstimate,
    IntrinsicShape,
    ShapeError,
    build_model,
    decompose,
    estimate_forces,
    estimate_frame,
    shape_error,
)
from .phantom import (
    GroundTruthRecord,
    PhantomGeometry,
    Scenario,
    forward_simulate,
    render_frame,
    run_scenario,
)
from .report import NavigationMetrics, build_contour, compute_metrics, emit
from .rigidity import BendingTestRecord, RigidityProfile, ei_from_bending, load_profile
from .segmentation import (
    BinaryMask,
    ContactObservation,
    RasterFrame,
    SweepParams,
    TrackedShape,
    calibrate,
    canny_edges,
    gaussian_blur,
    segment_frame,
    sweep_track,
    threshold_tool,
)

__all__ = [
    "__version__",
    "beam_fem", "rigidity", "segmentation", "estimator", "phantom", "report", "cli",
    "BeamMesh", "ConvergenceError", "DirichletBC", "SectionProperties", "SolveResult",
    "solve_quasistatic",
    "CantileverModel", "ForceEstimate", "IntrinsicShape", "ShapeError",
    "build_model", "decompose", "estimate_forces", "estimate_frame", "shape_error",
    "GroundTruthRecord", "PhantomGeometry", "Scenario",
    "forward_simulate", "render_frame", "run_scenario",
    "NavigationMetrics", "build_contour", "compute_metrics", "emit",
    "BendingTestRecord", "RigidityProfile", "ei_from_bending", "load_profile",
    "BinaryMask", "ContactObservation", "RasterFrame", "SweepParams", "TrackedShape",
    "calibrate", "canny_edges", "gaussian_blur", "segment_frame", "sweep_track",
    "threshold_tool",
]
