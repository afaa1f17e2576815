"""Bundled synthetic scenario generators."""

from __future__ import annotations

from pathlib import Path

from .grid import Axis, write_grid
from .velocity import default_multi_vortex, sample_velocity


def multi_vortex_gridded(nx: int = 161, ny: int = 161, nt: int = 21,
                         extent: float = 8.0, t_step: float = 1.0):
    """Sample the three-vortex analytic field onto a space-time grid."""
    x_axis = Axis("x", 0.0, extent / (nx - 1), nx)
    y_axis = Axis("y", 0.0, extent / (ny - 1), ny)
    t_axis = Axis("t", 0.0, t_step, nt)
    return sample_velocity(default_multi_vortex(), x_axis, y_axis, t_axis)


def write_multi_vortex_sample(directory, **kwargs) -> Path:
    """Write the sampled multi-vortex field in the header+binary grid format.

    Returns the header path (``<directory>/multi_vortex.grid``); the config
    file ``configs/multi_vortex.cfg`` points at it.
    """
    fld = multi_vortex_gridded(**kwargs)
    header = Path(directory) / "multi_vortex.grid"
    write_grid(header, [fld.x_axis, fld.y_axis, fld.t_axis], {
        "u": (("t", "y", "x"), fld.u),
        "v": (("t", "y", "x"), fld.v),
    }, meta={"kind": "velocity", "units": "deg/day"})
    return header
