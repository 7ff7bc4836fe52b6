import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from collimcal.geometry import PlanarObservations, View, project_points  # noqa: E402
from collimcal.simulate import SimConfig, generate  # noqa: E402


@pytest.fixture
def clean_data():
    """15 noise-free views with the default rig (distortion included)."""
    return generate(SimConfig(seed=3))


@pytest.fixture
def clean_pinhole():
    """15 noise-free views without lens distortion."""
    from collimcal.geometry import RadialDistortion

    return generate(SimConfig(seed=4, distortion=RadialDistortion()))


def axis_rotation_views(n=5, config=None, tilt=(0.12, -0.18, 0.0), span_deg=40.0):
    """Views ``R_i = R0 Rz(theta_i)``: rotation about one fixed axis only."""
    from collimcal.geometry import rotvec_to_matrix

    from collimcal.geometry import RadialDistortion

    config = config or SimConfig(distortion=RadialDistortion())
    R0 = rotvec_to_matrix(np.asarray(tilt))
    views, rots = [], []
    for i, th in enumerate(np.radians(np.linspace(-span_deg / 2, span_deg / 2, n))):
        c, s = np.cos(th), np.sin(th)
        R = R0 @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        uv = project_points(config.intrinsics, config.distortion, R, config.t_cp, config.target.points)
        views.append(View(np.arange(config.target.n_points), uv, view_id=i))
        rots.append(R)
    return PlanarObservations(config.target, views, config.image_size), rots


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
