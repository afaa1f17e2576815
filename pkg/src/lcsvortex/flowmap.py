"""Particle advection, flow-map grids and their finite-difference gradients.

Trajectories are integrated with either a fixed-step RK4 scheme or an
adaptive Dormand-Prince RK45 with per-point step control. Both are fully
vectorized over batches of initial positions; each point's result depends
only on its own trajectory, so batching, chunking and thread counts never
change the output bits.

The flow-map gradient uses an auxiliary grid: every main node carries four
companion points at offsets (+-rho*dx, 0) and (0, +-rho*dy) whose advected
images feed central differences.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidPoint, LeftDomain
from .grid import Axis, read_grid, write_grid

_CHUNK = 16384

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration scheme and accuracy controls.

    ``method`` is "rk45" (adaptive, abs_tol/rel_tol) or "rk4" (fixed step;
    ``step`` is the step length, defaulting to |T|/1000).
    """

    method: str = "rk45"
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    step: float | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.step is not None and not self.step > 0:
            raise ValueError("fixed step must be positive")


def _within_bounds(field_obj, pts):
    if field_obj.bounds is None:
        return np.isfinite(pts).all(axis=1)
    (x0, x1), (y0, y1) = field_obj.bounds
    ok = np.isfinite(pts).all(axis=1)
    ok &= (pts[:, 0] >= x0) & (pts[:, 0] <= x1)
    ok &= (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    return ok


def _rk4_batch(field_obj, pts, t0, T, cfg):
    n = len(pts)
    y = np.array(pts, dtype=float)
    valid = _within_bounds(field_obj, y)
    t_exit = np.where(valid, np.nan, t0)
    if T == 0:
        return y, valid, t_exit
    step = cfg.step if cfg.step is not None else abs(T) / 1000.0
    nsteps = max(1, math.ceil(abs(T) / step))
    h = T / nsteps
    t = t0
    for _ in range(nsteps):
        k1 = field_obj.velocity(t, y, out_of_bounds="nan")
        k2 = field_obj.velocity(t + 0.5 * h, y + 0.5 * h * k1, out_of_bounds="nan")
        k3 = field_obj.velocity(t + 0.5 * h, y + 0.5 * h * k2, out_of_bounds="nan")
        k4 = field_obj.velocity(t + h, y + h * k3, out_of_bounds="nan")
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        died = valid & ~np.isfinite(y_new).all(axis=1)
        if np.any(died):
            valid[died] = False
            t_exit[died] = t
        y = np.where(valid[:, None], y_new, y)
    return y, valid, t_exit


def _rk45_batch(field_obj, pts, t0, T, cfg):
    n = len(pts)
    y = np.array(pts, dtype=float)
    valid = _within_bounds(field_obj, y)
    t_exit = np.where(valid, np.nan, t0)
    if T == 0:
        return y, valid, t_exit
    t_end = t0 + T
    t = np.full(n, t0)
    h = np.full(n, T / 100.0)
    h_min = abs(T) * 1e-12
    active = np.flatnonzero(valid)

    for _ in range(cfg.max_steps):
        if active.size == 0:
            break
        ya = y[active]
        ta = t[active]
        rem = t_end - ta
        last = np.abs(h[active]) >= np.abs(rem) * (1.0 - 1e-12)
        ha = np.where(last, rem, h[active])

        ks = np.empty((7, active.size, 2))
        ks[0] = field_obj.velocity(ta, ya, out_of_bounds="nan")
        for s in range(1, 7):
            incr = np.zeros_like(ya)
            for j, a in enumerate(_DP_A[s]):
                if a != 0.0:
                    incr += a * ks[j]
            ks[s] = field_obj.velocity(ta + _DP_C[s] * ha, ya + ha[:, None] * incr,
                                       out_of_bounds="nan")
        y5 = ya + ha[:, None] * (
            _DP_A[6][0] * ks[0] + _DP_A[6][2] * ks[2] + _DP_A[6][3] * ks[3]
            + _DP_A[6][4] * ks[4] + _DP_A[6][5] * ks[5])
        err_vec = ha[:, None] * sum(e * ks[j] for j, e in enumerate(_DP_E) if e != 0.0)
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(ya), np.abs(y5))
        with np.errstate(invalid="ignore"):
            err = np.sqrt(np.mean((err_vec / sc) ** 2, axis=1))

        bad = ~np.isfinite(y5).all(axis=1) | ~np.isfinite(err)
        accept = ~bad & (err <= 1.0)

        idx_acc = active[accept]
        if idx_acc.size:
            y[idx_acc] = y5[accept]
            t[idx_acc] = np.where(last[accept], t_end, ta[accept] + ha[accept])
        # step-size update: grow on accept, shrink on reject, halve on NaN
        with np.errstate(divide="ignore", invalid="ignore"):
            grow = 0.9 * err ** -0.2
        fac = np.where(bad, 0.5, np.clip(np.where(np.isfinite(grow), grow, 5.0), 0.2, 5.0))
        h[active] = ha * fac

        dead = bad & (np.abs(h[active]) < h_min)
        idx_dead = active[dead]
        if idx_dead.size:
            valid[idx_dead] = False
            t_exit[idx_dead] = ta[dead]
        finished = np.zeros(active.size, dtype=bool)
        finished[accept] = last[accept]
        keep = ~(finished | dead)
        active = active[keep]
    else:
        raise RuntimeError("integration exceeded max_steps")
    return y, valid, t_exit


def _advect_batch(field_obj, pts, t0, T, cfg):
    if cfg.method == "rk4":
        return _rk4_batch(field_obj, pts, t0, T, cfg)
    return _rk45_batch(field_obj, pts, t0, T, cfg)


def advect(field_obj, x0, t0, T, cfg: IntegratorConfig | None = None):
    """Advect positions from t0 over horizon T (negative T runs backward).

    ``x0`` may be a single (2,) position or an (N, 2) batch; the return shape
    matches. Raises LeftDomain if any trajectory exits the field's valid
    region before t0+T.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    pts = x0[None] if single else x0
    out, valid, t_exit = _advect_batch(field_obj, pts, t0, T, cfg)
    if not valid.all():
        i = int(np.argmin(valid))
        raise LeftDomain(float(t_exit[i]), pts[i])
    return out[0] if single else out


@dataclass(frozen=True)
class FlowMapGrid:
    """Advected auxiliary-stencil images over a main grid.

    ``stencil_final`` has shape (4, ny, nx, 2); the leading index orders the
    companions (+x, -x, +y, -y). ``valid`` marks nodes whose four companions
    all stayed inside the data domain.
    """

    x_axis: Axis
    y_axis: Axis
    rho: float
    t0: float
    T: float
    stencil_final: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 < self.rho <= 0.5:
            raise ValueError(f"stencil half-width rho must be in (0, 0.5], got {self.rho}")
        expect = (4, self.y_axis.size, self.x_axis.size, 2)
        if self.stencil_final.shape != expect:
            raise ValueError(f"stencil_final shape {self.stencil_final.shape} != {expect}")


def stencil_points(x_axis: Axis, y_axis: Axis, rho: float) -> np.ndarray:
    """Initial positions of the four companions per node, shape (4, ny, nx, 2)."""
    X, Y = np.meshgrid(x_axis.coords(), y_axis.coords())
    ox = rho * x_axis.step
    oy = rho * y_axis.step
    pts = np.empty((4, y_axis.size, x_axis.size, 2))
    pts[0, ..., 0], pts[0, ..., 1] = X + ox, Y
    pts[1, ..., 0], pts[1, ..., 1] = X - ox, Y
    pts[2, ..., 0], pts[2, ..., 1] = X, Y + oy
    pts[3, ..., 0], pts[3, ..., 1] = X, Y - oy
    return pts


def compute_flow_map_grid(field_obj, domain, resolution, rho: float = 0.1,
                          cfg: IntegratorConfig | None = None, t0: float = 0.0,
                          T: float = 1.0, threads: int = 1) -> FlowMapGrid:
    """Advect the auxiliary stencil of every main-grid node from t0 to t0+T.

    ``domain`` is (xmin, xmax, ymin, ymax) and ``resolution`` the node counts
    (nx, ny). Points whose trajectories leave the data region are masked
    invalid rather than aborting the grid. Results are bit-identical for any
    ``threads`` value.
    """
    cfg = cfg or IntegratorConfig()
    xmin, xmax, ymin, ymax = map(float, domain)
    nx, ny = int(resolution[0]), int(resolution[1])
    x_axis = Axis("x", xmin, (xmax - xmin) / (nx - 1), nx)
    y_axis = Axis("y", ymin, (ymax - ymin) / (ny - 1), ny)
    if field_obj.bounds is not None:
        (bx0, bx1), (by0, by1) = field_obj.bounds
        mx = rho * x_axis.step
        my = rho * y_axis.step
        if xmin - mx < bx0 or xmax + mx > bx1 or ymin - my < by0 or ymax + my > by1:
            raise ValueError("domain plus stencil margin exceeds velocity field bounds")

    pts = stencil_points(x_axis, y_axis, rho).reshape(-1, 2)
    out = np.empty_like(pts)
    ok = np.empty(len(pts), dtype=bool)

    def run(lo, hi):
        res, valid, _ = _advect_batch(field_obj, pts[lo:hi], t0, T, cfg)
        out[lo:hi] = res
        ok[lo:hi] = valid

    spans = [(lo, min(lo + _CHUNK, len(pts))) for lo in range(0, len(pts), _CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: run(*s), spans))
    else:
        for span in spans:
            run(*span)

    stencil = out.reshape(4, ny, nx, 2)
    valid = ok.reshape(4, ny, nx).all(axis=0)
    stencil = np.where(valid[None, :, :, None], stencil, np.nan)
    return FlowMapGrid(x_axis, y_axis, rho, t0, T, stencil, valid)


def deformation_gradient(fm: FlowMapGrid, iy: int, ix: int) -> np.ndarray:
    """Flow-map gradient DF at node (row iy, column ix) by central differences."""
    if not fm.valid[iy, ix]:
        raise InvalidPoint(f"flow-map stencil invalid at node (iy={iy}, ix={ix})")
    return deformation_gradient_field(fm)[iy, ix]


def deformation_gradient_field(fm: FlowMapGrid) -> np.ndarray:
    """DF at every node, shape (ny, nx, 2, 2); NaN where invalid."""
    dx = 2.0 * fm.rho * fm.x_axis.step
    dy = 2.0 * fm.rho * fm.y_axis.step
    df = np.empty((fm.y_axis.size, fm.x_axis.size, 2, 2))
    df[..., :, 0] = (fm.stencil_final[0] - fm.stencil_final[1]) / dx
    df[..., :, 1] = (fm.stencil_final[2] - fm.stencil_final[3]) / dy
    return df


def save_flow_map(header_path, fm: FlowMapGrid):
    names = ("xp", "xm", "yp", "ym")
    arrays = {}
    for k, nm in enumerate(names):
        arrays[f"{nm}_x"] = (("y", "x"), fm.stencil_final[k, ..., 0])
        arrays[f"{nm}_y"] = (("y", "x"), fm.stencil_final[k, ..., 1])
    arrays["valid"] = (("y", "x"), fm.valid.astype(float))
    meta = {"rho": repr(fm.rho), "t0": repr(fm.t0), "T": repr(fm.T), "kind": "flowmap"}
    write_grid(header_path, [fm.x_axis, fm.y_axis], arrays, meta)


def load_flow_map(header_path) -> FlowMapGrid:
    axes, arrays, meta = read_grid(header_path)
    names = ("xp", "xm", "yp", "ym")
    ny, nx = axes["y"].size, axes["x"].size
    stencil = np.empty((4, ny, nx, 2))
    for k, nm in enumerate(names):
        stencil[k, ..., 0] = arrays[f"{nm}_x"][1]
        stencil[k, ..., 1] = arrays[f"{nm}_y"][1]
    valid = arrays["valid"][1] == 1.0
    return FlowMapGrid(axes["x"], axes["y"], float(meta["rho"]), float(meta["t0"]),
                       float(meta["T"]), stencil, valid)
