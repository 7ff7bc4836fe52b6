"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import PlanarObservations


def check_observations(X, min_views: int = 1, min_points: int = 4) -> PlanarObservations:
    """Coerce ``X`` to :class:`PlanarObservations` and check its invariants.

    ``X`` may already be observations, a parsed observation document or a
    path to one.
    """
    from .io import load_observations, observations_from_dict

    if isinstance(X, (str, Path)):
        X = load_observations(X)
    elif isinstance(X, dict):
        X = observations_from_dict(X)
    if not isinstance(X, PlanarObservations):
        raise TypeError(f"expected PlanarObservations, got {type(X).__name__}")
    if X.n_views < min_views:
        raise ValueError(f"need at least {min_views} views, got {X.n_views}")
    n = X.target.n_points
    for i, view in enumerate(X.views):
        if len(view) < min_points:
            raise ValueError(f"view {i} has {len(view)} correspondences, need {min_points}")
        if view.indices.min() < 0 or view.indices.max() >= n:
            raise ValueError(f"view {i} references a point outside the target")
        if not np.all(np.isfinite(view.image_points)):
            raise ValueError(f"view {i} contains non-finite image points")
    return X
