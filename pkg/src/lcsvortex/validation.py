"""Input validation helpers shared by the estimator and the pipeline."""

from __future__ import annotations

import numbers

import numpy as np


def check_points(x, name="X") -> np.ndarray:
    """Coerce to a finite (N, 2) float array."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1 and pts.shape == (2,):
        pts = pts[None]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must be an (N, 2) array of planar points, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


def check_velocity_field(field_obj):
    """A velocity field exposes vectorized velocity(t, pts) plus bounds metadata."""
    for attr in ("velocity", "bounds", "time_bounds"):
        if not hasattr(field_obj, attr):
            raise TypeError(
                f"velocity field must define '{attr}' (got {type(field_obj).__name__})")
    return field_obj


def check_positive(value, name) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_domain(domain) -> tuple[float, float, float, float]:
    try:
        xmin, xmax, ymin, ymax = map(float, domain)
    except (TypeError, ValueError) as err:
        raise ValueError(f"domain must be (xmin, xmax, ymin, ymax), got {domain!r}") from err
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"domain must satisfy xmin < xmax and ymin < ymax, got {domain!r}")
    return xmin, xmax, ymin, ymax


def check_resolution(resolution) -> tuple[int, int]:
    try:
        nx, ny = int(resolution[0]), int(resolution[1])
    except (TypeError, ValueError, IndexError) as err:
        raise ValueError(f"resolution must be (nx, ny), got {resolution!r}") from err
    if nx < 2 or ny < 2:
        raise ValueError(f"resolution must be at least 2 nodes per axis, got {resolution!r}")
    return nx, ny


def check_lambda_grid(lam_min, lam_max, lam_step):
    check_positive(lam_min, "lambda_min")
    check_positive(lam_step, "lambda_step")
    if lam_max < lam_min:
        raise ValueError(f"lambda_max {lam_max} < lambda_min {lam_min}")
    return float(lam_min), float(lam_max), float(lam_step)
