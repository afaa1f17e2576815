"""Time-dependent planar velocity fields.

Three kinds of field feed the trajectory integrator:

* the analytic double gyre benchmark flow,
* gridded (u, v) data with cubic-convolution interpolation in space and
  linear interpolation in time,
* geostrophic velocities derived from gridded sea-surface height.

Every field exposes ``velocity(t, pts)`` with ``pts`` of shape (N, 2) and
``t`` a scalar or per-point array, plus ``bounds``/``time_bounds`` metadata
(None means unbounded). Fields are immutable after construction and safe to
evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLatitude, OutOfBounds
from .grid import Axis

SECONDS_PER_DAY = 86400.0


# ---------------------------------------------------------------------------
# double gyre


@dataclass(frozen=True)
class DoubleGyreParams:
    """Amplitude, perturbation strength and angular frequency of the gyre."""

    A: float = 0.2
    epsilon: float = 0.2
    omega: float = math.pi / 5

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if not 0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon must be in [0, 0.5), got {self.epsilon}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


def eval_double_gyre(p: DoubleGyreParams, t, x, y):
    """Evaluate the double gyre velocity at (t, x, y); broadcasts over arrays.

    The stream pattern oscillates between the two cells of [0,1]x[0,1]:
    f(t,x) = eps*sin(omega*t)*x^2 + (1 - 2*eps*sin(omega*t))*x, and
    (u, v) = (-pi*A*sin(pi*f)*cos(pi*y), pi*A*cos(pi*f)*sin(pi*y)*df/dx).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = p.epsilon * np.sin(p.omega * t)
    f = s * x * x + (1.0 - 2.0 * s) * x
    dfdx = 2.0 * s * x + (1.0 - 2.0 * s)
    u = -math.pi * p.A * np.sin(math.pi * f) * np.cos(math.pi * y)
    v = math.pi * p.A * np.cos(math.pi * f) * np.sin(math.pi * y) * dfdx
    return u, v


class DoubleGyreField:
    """Velocity-field handle for the analytic double gyre."""

    def __init__(self, params: DoubleGyreParams | None = None):
        self.params = params or DoubleGyreParams()
        self.bounds = None
        self.time_bounds = None

    def velocity(self, t, pts, out_of_bounds="raise"):
        pts = np.asarray(pts, dtype=float)
        u, v = eval_double_gyre(self.params, t, pts[..., 0], pts[..., 1])
        return np.stack([u, v], axis=-1)


class AnalyticVelocityField:
    """Wrap a vectorized callable ``fn(t, x, y) -> (u, v)`` as a field."""

    def __init__(self, fn, bounds=None):
        self.fn = fn
        self.bounds = bounds
        self.time_bounds = None

    def velocity(self, t, pts, out_of_bounds="raise"):
        pts = np.asarray(pts, dtype=float)
        u, v = self.fn(np.asarray(t, dtype=float), pts[..., 0], pts[..., 1])
        return np.stack([np.broadcast_to(u, pts[..., 0].shape),
                         np.broadcast_to(v, pts[..., 1].shape)], axis=-1)


# ---------------------------------------------------------------------------
# gridded data with cubic-convolution interpolation


def _keys_weights(s: np.ndarray) -> np.ndarray:
    """Cubic-convolution (Keys, a=-1/2) weights for fractions s in [0,1]."""
    s2 = s * s
    s3 = s2 * s
    return np.stack(
        [
            0.5 * (-s3 + 2.0 * s2 - s),
            0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
            0.5 * (-3.0 * s3 + 4.0 * s2 + s),
            0.5 * (s3 - s2),
        ],
        axis=-1,
    )


def _pad_spatial(a: np.ndarray) -> np.ndarray:
    """Pad the two trailing axes by one sample of linear extrapolation."""
    p = np.pad(a, [(0, 0)] * (a.ndim - 2) + [(1, 1), (1, 1)], mode="edge").astype(float)
    p[..., 0, :] = 2.0 * p[..., 1, :] - p[..., 2, :]
    p[..., -1, :] = 2.0 * p[..., -2, :] - p[..., -3, :]
    p[..., :, 0] = 2.0 * p[..., :, 1] - p[..., :, 2]
    p[..., :, -1] = 2.0 * p[..., :, -2] - p[..., :, -3]
    return p


class GriddedVelocityField:
    """(u, v) samples on a uniform x/y/t grid.

    Arrays are indexed [time][y][x]. Spatial queries use cubic-convolution
    interpolation (exact at nodes, reproduces affine fields); time queries
    interpolate linearly between slices. NaN samples mark invalid data and
    poison any interpolation stencil that touches them.
    """

    def __init__(self, x_axis: Axis, y_axis: Axis, t_axis: Axis | None, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if t_axis is None:
            if u.ndim == 2:
                u = u[None]
                v = v[None]
        expect = (t_axis.size if t_axis is not None else 1, y_axis.size, x_axis.size)
        if u.shape != expect or v.shape != expect:
            raise ValueError(f"u/v shapes {u.shape}/{v.shape} != (nt, ny, nx) {expect}")
        if np.any(np.isinf(u)) or np.any(np.isinf(v)):
            raise ValueError("velocity samples must be finite or NaN")
        self.x_axis = x_axis
        self.y_axis = y_axis
        self.t_axis = t_axis
        self._pu = _pad_spatial(u)
        self._pv = _pad_spatial(v)
        self.bounds = ((x_axis.start, x_axis.stop), (y_axis.start, y_axis.stop))
        self.time_bounds = (t_axis.start, t_axis.stop) if t_axis is not None and t_axis.size > 1 else None

    @property
    def u(self) -> np.ndarray:
        return self._pu[:, 1:-1, 1:-1]

    @property
    def v(self) -> np.ndarray:
        return self._pv[:, 1:-1, 1:-1]

    def _check_axis(self, ax: Axis, vals, mode):
        eps = 1e-9 * max(abs(ax.step), abs(ax.stop - ax.start))
        bad = ~np.isfinite(vals) | (vals < ax.start - eps) | (vals > ax.stop + eps)
        if np.any(bad):
            if mode == "raise":
                i = int(np.argmax(bad))
                raise OutOfBounds(ax.name, float(np.asarray(vals).flat[i]), ax.start, ax.stop)
            return bad
        return np.zeros(np.shape(vals), dtype=bool) if mode != "raise" else None

    def velocity(self, t, pts, out_of_bounds="raise"):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x = pts[:, 0]
        y = pts[:, 1]
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape)

        oob = np.zeros(x.shape, dtype=bool)
        for ax, vals in ((self.x_axis, x), (self.y_axis, y)):
            bad = self._check_axis(ax, vals, out_of_bounds)
            if bad is not None:
                oob |= bad
        if self.time_bounds is not None:
            bad = self._check_axis(self.t_axis, t, out_of_bounds)
            if bad is not None:
                oob |= bad

        if np.any(oob):
            x = np.where(oob, self.x_axis.start, x)
            y = np.where(oob, self.y_axis.start, y)
            t = np.where(oob, self.t_axis.start if self.time_bounds is not None else 0.0, t)
        ix, sx = self.x_axis.cell_fraction(x)
        iy, sy = self.y_axis.cell_fraction(y)
        wx = _keys_weights(sx)
        wy = _keys_weights(sy)
        ofs = np.arange(4)
        # padded arrays shift node i to index i+1; stencil i-1..i+2 -> i..i+3
        rows = iy[:, None, None] + ofs[None, :, None]
        cols = ix[:, None, None] + ofs[None, None, :]

        if self.time_bounds is None:
            it0 = np.zeros(x.shape, dtype=np.int64)
            it1 = it0
            tau = np.zeros(x.shape)
        else:
            it0, tau = self.t_axis.cell_fraction(t)
            it1 = it0 + 1

        out = np.empty((x.size, 2))
        for k, arr in enumerate((self._pu, self._pv)):
            b0 = arr[it0[:, None, None], rows, cols]
            val = np.einsum("na,nab,nb->n", wy, b0, wx)
            if self.time_bounds is not None:
                b1 = arr[it1[:, None, None], rows, cols]
                val1 = np.einsum("na,nab,nb->n", wy, b1, wx)
                val = (1.0 - tau) * val + tau * val1
            out[:, k] = val
        if np.any(oob):
            out[oob] = np.nan
        return out


def interpolate_velocity(fld: GriddedVelocityField, t, x, y):
    """Interpolate the gridded field at one space-time point; returns (u, v)."""
    res = fld.velocity(float(t), np.array([[float(x), float(y)]]))
    return float(res[0, 0]), float(res[0, 1])


def sample_velocity(fld, x_axis: Axis, y_axis: Axis, t_axis: Axis | None) -> GriddedVelocityField:
    """Sample any velocity field onto a grid, producing a gridded field."""
    X, Y = np.meshgrid(x_axis.coords(), y_axis.coords())
    pts = np.column_stack([X.ravel(), Y.ravel()])
    times = t_axis.coords() if t_axis is not None else [0.0]
    nt = len(times)
    u = np.empty((nt, y_axis.size, x_axis.size))
    v = np.empty_like(u)
    for k, t in enumerate(times):
        uv = fld.velocity(float(t), pts)
        u[k] = uv[:, 0].reshape(X.shape)
        v[k] = uv[:, 1].reshape(X.shape)
    return GriddedVelocityField(x_axis, y_axis, t_axis, u, v)


# ---------------------------------------------------------------------------
# geostrophic velocities from sea-surface height


@dataclass(frozen=True)
class PhysicalConstants:
    """Gravity, mean Earth radius and mean angular velocity (SI units)."""

    g: float = 9.81
    R: float = 6.371e6
    Omega: float = 7.2921e-5

    def __post_init__(self):
        for name in ("g", "R", "Omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def coriolis(self, lat_deg):
        return 2.0 * self.Omega * np.sin(np.deg2rad(lat_deg))


@dataclass(frozen=True)
class ScalarSeries:
    """Scalar samples (e.g. sea-surface height in metres) on a lon/lat/time grid."""

    lon_axis: Axis
    lat_axis: Axis
    time_axis: Axis | None
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 2:
            vals = vals[None]
        expect = (self.time_axis.size if self.time_axis is not None else 1,
                  self.lat_axis.size, self.lon_axis.size)
        if vals.shape != expect:
            raise ValueError(f"values shape {vals.shape} != (nt, nlat, nlon) {expect}")
        object.__setattr__(self, "values", vals)


def geostrophic_from_ssh(h: ScalarSeries, consts: PhysicalConstants | None = None,
                         coriolis_floor: float = 1e-6) -> GriddedVelocityField:
    """Derive surface velocities treating sea-surface height as a streamfunction.

    In longitude-latitude coordinates (degrees) the particle motion is
    lon' = -g/(R^2 f(lat) cos(lat)) * dh/dlat,
    lat' = +g/(R^2 f(lat) cos(lat)) * dh/dlon,
    with f the Coriolis parameter and angular derivatives taken in radians
    (central differences inside, one-sided at the edges). The returned field
    is in degrees per day, matching grid axes in degrees and time in days.

    Raises DegenerateLatitude when |f(lat) cos(lat)| drops below
    ``coriolis_floor`` (1/s) anywhere on the grid.
    """
    consts = consts or PhysicalConstants()
    lat = h.lat_axis.coords()
    fcos = consts.coriolis(lat) * np.cos(np.deg2rad(lat))
    if np.any(np.abs(fcos) < coriolis_floor):
        worst = lat[int(np.argmin(np.abs(fcos)))]
        raise DegenerateLatitude(
            f"|f(lat) cos(lat)| < {coriolis_floor:g} 1/s at latitude {worst:g} deg")

    lon_rad = np.deg2rad(h.lon_axis.coords())
    lat_rad = np.deg2rad(lat)
    dh_dlon = np.gradient(h.values, lon_rad, axis=2, edge_order=2)
    dh_dlat = np.gradient(h.values, lat_rad, axis=1, edge_order=2)

    rad_per_s_to_deg_per_day = np.degrees(1.0) * SECONDS_PER_DAY
    scale = consts.g / (consts.R**2 * fcos)[None, :, None] * rad_per_s_to_deg_per_day
    u = -scale * dh_dlat
    v = scale * dh_dlon
    return GriddedVelocityField(h.lon_axis, h.lat_axis, h.time_axis, u, v)


# ---------------------------------------------------------------------------
# synthetic multi-vortex scenario


@dataclass(frozen=True)
class GaussianVortex:
    """Translating vortex with an (optionally elliptic) Gaussian streamfunction.

    An aspect ratio away from 1 makes the core generic: its isotropic point
    splits into a separated wedge pair instead of a structurally unstable
    center.
    """

    amplitude: float
    sigma_x: float
    sigma_y: float
    x0: float
    y0: float
    cx: float = 0.0
    cy: float = 0.0
    angle: float = 0.0


class MultiVortexField:
    """Sum of translating Gaussian-streamfunction vortices (incompressible)."""

    def __init__(self, vortices):
        self.vortices = tuple(vortices)
        self.bounds = None
        self.time_bounds = None

    def velocity(self, t, pts, out_of_bounds="raise"):
        pts = np.asarray(pts, dtype=float)
        t = np.asarray(t, dtype=float)
        x = pts[..., 0]
        y = pts[..., 1]
        u = np.zeros(np.broadcast_shapes(x.shape, t.shape))
        v = np.zeros_like(u)
        for w in self.vortices:
            dx = x - (w.x0 + w.cx * t)
            dy = y - (w.y0 + w.cy * t)
            ca, sa = math.cos(w.angle), math.sin(w.angle)
            xr = dx * ca + dy * sa
            yr = -dx * sa + dy * ca
            psi = w.amplitude * np.exp(-0.5 * (xr**2 / w.sigma_x**2 + yr**2 / w.sigma_y**2))
            # u = -dpsi/dy, v = dpsi/dx (rotated-frame chain rule)
            u = u + psi * (xr * sa / w.sigma_x**2 + yr * ca / w.sigma_y**2)
            v = v + psi * (-xr * ca / w.sigma_x**2 + yr * sa / w.sigma_y**2)
        return np.stack([u, v], axis=-1)


def default_multi_vortex() -> MultiVortexField:
    """Three-vortex configuration used by the bundled synthetic scenario."""
    return MultiVortexField([
        GaussianVortex(amplitude=1.0, sigma_x=0.8, sigma_y=0.62, x0=2.2, y0=2.6,
                       cx=0.012, cy=0.008, angle=0.4),
        GaussianVortex(amplitude=-0.9, sigma_x=0.78, sigma_y=0.52, x0=5.6, y0=5.2,
                       cx=-0.01, cy=0.006, angle=-0.7),
        GaussianVortex(amplitude=0.85, sigma_x=0.66, sigma_y=0.5, x0=3.6, y0=5.8,
                       cx=0.008, cy=-0.012, angle=1.2),
    ])
