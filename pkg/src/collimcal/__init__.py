"""Camera calibration from planar target views under spherical motion."""

from .bundle import BAOptions, BAReport, bundle_adjust
from .closed_form import solve_closed_form, solve_homographies
from .estimator import SphericalCalibrator
from .evaluation import evaluate
from .exceptions import CalibrationError, DegenerateConfiguration, NumericalError
from .geometry import (
    CameraIntrinsics,
    PlanarObservations,
    PlanarTarget,
    RadialDistortion,
    SphericalExtrinsics,
    View,
)
from .minimal import solve_minimal, solve_minimal_homographies
from .simulate import SimConfig, generate
from .validation import degeneracy_score, fit_sphere, sphere_motion_report

__version__ = "0.1.0"

__all__ = [
    "BAOptions", "BAReport", "bundle_adjust", "solve_closed_form", "solve_homographies",
    "SphericalCalibrator", "evaluate", "CalibrationError", "DegenerateConfiguration",
    "NumericalError", "CameraIntrinsics", "PlanarObservations", "PlanarTarget",
    "RadialDistortion", "SphericalExtrinsics", "View", "solve_minimal",
    "solve_minimal_homographies", "SimConfig", "generate", "degeneracy_score", "fit_sphere",
    "sphere_motion_report",
]
