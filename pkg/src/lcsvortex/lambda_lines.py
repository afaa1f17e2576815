"""Stretching-parameter line fields and closed-orbit detection.

The field of directions that stretch by a uniform factor ``lam`` under the
flow map is spanned by

    eta = sqrt((lam2 - lam^2)/(lam2 - lam1)) * xi1
          +- sqrt((lam^2 - lam1)/(lam2 - lam1)) * xi2,

defined where lam1 < lam^2 < lam2 and continued by xi2 (where lam2 <= lam^2)
or xi1 (where lam1 >= lam^2) elsewhere. Orbits of this line field are
integrated as an ODE with orientation memory (line fields carry no global
orientation: each candidate direction is flipped to agree with the previous
step). Closed orbits are found on a horizontal Poincare section through the
return distance of each seed, refined by bisection, and swept over ``lam``
to pick the outermost admissible boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .cauchy_green import (
    RELATIVE_DEGENERACY,
    EigenField,
    SymmetricTensorField,
    eigen_at,
)
from .errors import BisectionStalled, DegenerateTensor, OutsideDomain, SectionLeavesDomain
from .flowmap import IntegratorConfig, advect
from .topology import ClosedPolygon, Singularity, WedgePair, census_enclosed

OCEAN_SECTION_LENGTH = 1.5   # degrees of longitude
DEFAULT_SECTION_SEEDS = 100
DEFAULT_LAMBDA_MIN = 0.85
DEFAULT_LAMBDA_MAX = 1.15
DEFAULT_LAMBDA_STEP = 0.01
MAX_ARCLENGTH_FACTOR = 20.0
CLOSURE_TOL_FACTOR = 1e-3
BISECTION_TOL_FACTOR = 1e-6
MAX_BISECTION_ITERATIONS = 50
_DIRECTION_JUMP_COS = math.cos(math.pi / 4)


class HaltReason(Enum):
    RETURNED = "returned"
    MAX_ARCLENGTH = "max-arclength"
    LEFT_DOMAIN = "left-domain"
    DEGENERATE_CELL = "degenerate-cell"
    DIRECTION_JUMP = "direction-jump"


@dataclass(frozen=True)
class EtaFieldSpec:
    """Stretching parameter, branch sign and the fields they act on."""

    lam: float
    sign: int
    tensor_field: SymmetricTensorField
    eigen_field: EigenField

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"stretching parameter must be positive, got {self.lam}")
        if self.sign not in (-1, 1):
            raise ValueError(f"branch sign must be +1 or -1, got {self.sign}")
        deg = self.eigen_field.degenerate | ~self.eigen_field.valid
        cells = deg[:-1, :-1] | deg[:-1, 1:] | deg[1:, :-1] | deg[1:, 1:]
        object.__setattr__(self, "_degenerate_cells", cells)

    def degenerate_cell(self, pts) -> np.ndarray:
        """True where the grid cell containing the point has a degenerate node."""
        pts = np.atleast_2d(pts)
        tf = self.tensor_field
        ok = tf.x_axis.contains(pts[:, 0]) & tf.y_axis.contains(pts[:, 1])
        ix, _ = tf.x_axis.cell_fraction(np.where(ok, pts[:, 0], tf.x_axis.start))
        iy, _ = tf.y_axis.cell_fraction(np.where(ok, pts[:, 1], tf.y_axis.start))
        return np.where(ok, self._degenerate_cells[iy, ix], False)


def eta_direction(lam1, lam2, xi1, xi2, lam, sign: int):
    """Representative vector of the uniform-stretching direction field.

    Valid where lam1 <= lam^2 <= lam2 (``lam`` may be a scalar or a
    per-point array); the result is automatically unit length because the
    two coefficients are a cosine/sine pair and xi1, xi2 are orthonormal.
    Raises OutsideDomain when lam^2 leaves the eigenvalue bracket and
    DegenerateTensor when the eigenvalues coincide.
    """
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    lam_sq = np.asarray(lam, dtype=float) ** 2
    gap = lam2 - lam1
    if np.any(gap <= 0):
        raise DegenerateTensor("eigenvalues coincide; direction field undefined")
    if np.any(lam_sq < lam1) or np.any(lam_sq > lam2):
        raise OutsideDomain("lam^2 outside [lam1, lam2]")
    a = np.sqrt((lam2 - lam_sq) / gap)
    b = np.sqrt((lam_sq - lam1) / gap)
    return a[..., None] * xi1 + sign * b[..., None] * xi2


def _eta_batch(spec: EtaFieldSpec, pts):
    """Direction representatives at arbitrary points with region continuation.

    The two eigenvectors must form a handedness-consistent frame: stored
    eigenvector signs are chosen per point, and an independent flip of xi2
    against xi1 would silently swap the +- branch families. Rebuilding the
    weak eigendirection as the right-handed rotation of xi2 pins each branch
    globally (up to an overall sign, which orientation memory absorbs).

    Returns (directions, ok); ok is False outside valid data or where the
    interpolated tensor is (near-)isotropic.
    """
    lam1, lam2, _, xi2, rel_gap, ok = eigen_at(spec.tensor_field, pts)
    xi1 = np.stack([xi2[:, 1], -xi2[:, 0]], axis=1)
    ok = ok & (rel_gap > RELATIVE_DEGENERACY)
    lam_sq = spec.lam**2
    gap = np.where(ok, lam2 - lam1, 1.0)
    a2 = np.clip((lam2 - lam_sq) / gap, 0.0, 1.0)
    b2 = np.clip((lam_sq - lam1) / gap, 0.0, 1.0)
    a = np.sqrt(a2)
    b = np.sqrt(b2)
    d = a[:, None] * xi1 + spec.sign * b[:, None] * xi2
    hi = lam_sq >= lam2   # continuation region: direction is xi2
    lo = lam_sq <= lam1   # continuation region: direction is xi1
    d = np.where(hi[:, None], xi2, d)
    d = np.where(lo[:, None], xi1, d)
    return np.where(ok[:, None], d, np.nan), ok, ~(hi | lo)


def extend_eta(spec: EtaFieldSpec, position):
    """Direction at one point, continued across the eigenvalue-bracket regions."""
    d, ok, _ = _eta_batch(spec, np.asarray(position, dtype=float)[None])
    if not ok[0]:
        raise DegenerateTensor(f"tensor undefined or isotropic near {tuple(position)}")
    return d[0]


# ---------------------------------------------------------------------------
# batched orbit integration


def _orient(d, ref):
    s = np.sign(np.sum(d * ref, axis=1))
    s = np.where(s == 0, 1.0, s)
    return d * s[:, None]


@dataclass
class _BatchResult:
    halt: np.ndarray                 # HaltReason values, dtype=object
    return_distance: np.ndarray      # x_cross - x_seed, NaN when no return
    arclength: np.ndarray
    natural_fraction: np.ndarray     # share of steps inside the natural domain
    polylines: list | None


def _integrate_orbits(spec_of, seeds, lams, signs, step, max_arclength,
                      orientation=(0.0, 1.0), section=None, record=False,
                      direction_jump_cos=_DIRECTION_JUMP_COS):
    """Integrate orbit batches of possibly different (lam, sign) parameters.

    ``spec_of(lam, sign)`` returns an EtaFieldSpec sharing the same tensor
    and eigen fields. Each trajectory evolves independently (fixed step RK4
    with stage-wise orientation alignment), so batching never changes
    results. With ``section=(anchor, length)`` integration stops at the
    first upward transversal crossing of the horizontal section segment.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    n = len(seeds)
    lams = np.broadcast_to(np.asarray(lams, dtype=float), (n,)).copy()
    signs = np.broadcast_to(np.asarray(signs, dtype=int), (n,)).copy()

    # group points by (lam, sign) for vectorized direction evaluation
    params = {}
    for i in range(n):
        params.setdefault((float(lams[i]), int(signs[i])), []).append(i)
    group_id = np.empty(n, dtype=np.int64)
    groups = []
    for g, (key, idx) in enumerate(params.items()):
        group_id[idx] = g
        groups.append(spec_of(*key))
    any_spec = groups[0]

    def dirs(pts, active_idx):
        if len(groups) == 1:
            return _eta_batch(groups[0], pts)
        d = np.full((len(pts), 2), np.nan)
        ok = np.zeros(len(pts), dtype=bool)
        nat = np.zeros(len(pts), dtype=bool)
        ga = group_id[active_idx]
        for g, spec in enumerate(groups):
            mask = ga == g
            if not mask.any():
                continue
            d[mask], ok[mask], nat[mask] = _eta_batch(spec, pts[mask])
        return d, ok, nat

    p = seeds.copy()
    arclen = np.zeros(n)
    halt = np.full(n, None, dtype=object)
    rdist = np.full(n, np.nan)
    prev_step_dir = np.zeros((n, 2))
    have_prev = np.zeros(n, dtype=bool)
    ref = np.tile(np.asarray(orientation, dtype=float), (n, 1))
    active = np.arange(n)
    snapshots = [] if record else None
    cross_at = np.full(n, -1, dtype=np.int64)
    cross_pt = np.full((n, 2), np.nan)
    steps_total = np.zeros(n, dtype=np.int64)
    steps_natural = np.zeros(n, dtype=np.int64)
    if record:
        snapshots.append(p.copy())

    if section is not None:
        anchor, sec_len = section
        y0 = float(anchor[1])
        xa = float(anchor[0])
        xb = xa + float(sec_len)
        # returns of a closed orbit may land a hair off the segment ends;
        # allow a closure-tolerance-sized window
        sec_eps = CLOSURE_TOL_FACTOR * float(sec_len)

    max_steps = int(math.ceil(max_arclength / step)) + 2
    for istep in range(max_steps):
        if active.size == 0:
            break
        pa = p[active]
        k1, ok, natural = dirs(pa, active)
        k1 = _orient(k1, ref[active])
        k2, ok2, _ = dirs(pa + 0.5 * step * k1, active)
        k2 = _orient(k2, k1)
        k3, ok3, _ = dirs(pa + 0.5 * step * k2, active)
        k3 = _orient(k3, k2)
        k4, ok4, _ = dirs(pa + step * k3, active)
        k4 = _orient(k4, k3)
        ok &= ok2 & ok3 & ok4
        delta = (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p_new = pa + delta
        dn = np.linalg.norm(delta, axis=1)
        step_dir = delta / np.where(dn > 0, dn, 1.0)[:, None]

        failed = ~ok | ~np.isfinite(p_new).all(axis=1)
        jump = have_prev[active] & (np.sum(step_dir * prev_step_dir[active], axis=1)
                                    < direction_jump_cos) & ~failed
        degen = any_spec.degenerate_cell(np.where(failed[:, None], pa, p_new)) & ~failed & ~jump

        crossed = np.zeros(active.size, dtype=bool)
        if section is not None:
            going_up = (pa[:, 1] < y0) & (p_new[:, 1] >= y0) & ~failed & ~jump & ~degen
            if going_up.any():
                sel = np.flatnonzero(going_up)
                xc = _crossing_x(pa[sel], p_new[sel], k1[sel], k4[sel], dn[sel], y0)
                hit = (xc >= xa - sec_eps) & (xc <= xb + sec_eps)
                sel = sel[hit]
                if sel.size:
                    crossed[sel] = True
                    gi = active[sel]
                    rdist[gi] = xc[hit] - seeds[gi, 0]
                    cross_at[gi] = istep + 1
                    cross_pt[gi] = np.column_stack([xc[hit], np.full(sel.size, y0)])

        # commit the step for everything that did not fail outright
        good = ~failed
        gi = active[good]
        p[gi] = p_new[good]
        arclen[gi] += dn[good]
        prev_step_dir[gi] = step_dir[good]
        have_prev[gi] = True
        ref[gi] = step_dir[good]
        steps_total[gi] += 1
        steps_natural[gi] += natural[good]

        over = arclen[active] >= max_arclength - 1e-12 * max_arclength
        halted = np.full(active.size, None, dtype=object)
        halted[failed] = HaltReason.LEFT_DOMAIN
        halted[jump] = HaltReason.DIRECTION_JUMP
        halted[degen] = HaltReason.DEGENERATE_CELL
        halted[crossed] = HaltReason.RETURNED
        need_halt = failed | jump | degen | crossed
        halted[over & ~need_halt] = HaltReason.MAX_ARCLENGTH
        need_halt |= over
        halt[active[need_halt]] = halted[need_halt]

        if record:
            snapshots.append(p.copy())
        active = active[~need_halt]
    # anything still active ran out of steps at max arclength
    halt[active] = HaltReason.MAX_ARCLENGTH

    polylines = None
    if record:
        stack = np.stack(snapshots)  # (steps+1, n, 2)
        polylines = []
        for i in range(n):
            if cross_at[i] >= 0:
                verts = np.vstack([stack[: cross_at[i], i], cross_pt[i][None]])
            else:
                verts = stack[:, i]
                finite = np.isfinite(verts).all(axis=1)
                verts = verts[finite]
            polylines.append(verts)
    with np.errstate(invalid="ignore"):
        nat_frac = np.where(steps_total > 0, steps_natural / np.maximum(steps_total, 1), 0.0)
    return _BatchResult(halt, rdist, arclen, nat_frac, polylines)


def _crossing_x(p0, p1, d0, d1, chord, y0):
    """Crossing abscissa of the cubic Hermite arc between step endpoints."""
    m0 = d0 * chord[:, None]
    m1 = d1 * chord[:, None]

    def eval_xy(t):
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        x = h00 * p0[:, 0] + h10 * m0[:, 0] + h01 * p1[:, 0] + h11 * m1[:, 0]
        y = h00 * p0[:, 1] + h10 * m0[:, 1] + h01 * p1[:, 1] + h11 * m1[:, 1]
        return x, y

    lo = np.zeros(len(p0))
    hi = np.ones(len(p0))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        _, ym = eval_xy(mid)
        below = ym < y0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    x, _ = eval_xy(t)
    return x


def integrate_lambda_line(spec: EtaFieldSpec, seed, max_arclength: float,
                          step: float, orientation=(0.0, 1.0)):
    """Integrate one orbit of the direction field from a seed point.

    Returns (vertices, HaltReason); the orbit stops on exceeding
    ``max_arclength``, leaving the valid data region, entering a grid cell
    with a degenerate node, or a direction discontinuity steeper than pi/4
    (a singularity crossing).
    """
    res = _integrate_orbits(lambda lam, sign: spec, np.asarray(seed, float)[None],
                            [spec.lam], [spec.sign], step, max_arclength,
                            orientation=orientation, record=True)
    return res.polylines[0], res.halt[0]


# ---------------------------------------------------------------------------
# Poincare sections


@dataclass
class PoincareSection:
    """Horizontal segment with equispaced seeds for the return map."""

    anchor: np.ndarray
    length: float
    seeds: np.ndarray = dc_field(repr=False)
    return_distances: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def endpoint(self) -> np.ndarray:
        return self.anchor + np.array([self.length, 0.0])

    @property
    def seed_offsets(self) -> np.ndarray:
        return self.seeds[:, 0] - self.anchor[0]


def build_section(pair, length: float = OCEAN_SECTION_LENGTH,
                  n_seeds: int = DEFAULT_SECTION_SEEDS, bounds=None) -> PoincareSection:
    """Span a section from a wedge-pair midpoint toward +x with n_seeds seeds.

    ``pair`` may be a WedgePair or a raw (x, y) anchor. If the segment would
    leave ``bounds`` (((xmin, xmax), (ymin, ymax))), it is truncated with a
    SectionLeavesDomain warning.
    """
    anchor = pair.midpoint if isinstance(pair, WedgePair) else np.asarray(pair, dtype=float)
    if n_seeds < 2:
        raise ValueError("a section needs at least 2 seeds")
    if bounds is not None:
        (xmin, xmax), (ymin, ymax) = bounds
        if not (xmin <= anchor[0] <= xmax and ymin <= anchor[1] <= ymax):
            raise ValueError(f"section anchor {tuple(anchor)} outside domain")
        room = xmax - anchor[0]
        if length > room:
            warnings.warn(
                f"section truncated from {length:g} to {room:g} at the domain boundary",
                SectionLeavesDomain)
            length = room
    offsets = np.linspace(0.0, length, n_seeds)
    seeds = np.column_stack([anchor[0] + offsets, np.full(n_seeds, anchor[1])])
    return PoincareSection(np.asarray(anchor, dtype=float), float(length), seeds)


@dataclass(frozen=True)
class ReturnResult:
    """Signed return distance of one seed, or the halt that prevented it."""

    distance: float | None
    halt: HaltReason


def _orbit_controls(spec, section, step, max_arclength):
    tf = spec.tensor_field
    if step is None:
        step = 0.5 * min(tf.x_axis.step, tf.y_axis.step)
    if max_arclength is None:
        max_arclength = MAX_ARCLENGTH_FACTOR * section.length
    return step, max_arclength


def return_distance(spec: EtaFieldSpec, section: PoincareSection, seed_index: int,
                    step: float | None = None, max_arclength: float | None = None) -> ReturnResult:
    """First-return distance P(x) - x of one seed along the section.

    The orbit launches with +y initial orientation; the return is the first
    upward transversal crossing of the section's supporting segment. Halts
    before returning map to a None distance with the halt reason.
    """
    step, max_arclength = _orbit_controls(spec, section, step, max_arclength)
    res = _integrate_orbits(lambda lam, sign: spec, section.seeds[seed_index][None],
                            [spec.lam], [spec.sign], step, max_arclength,
                            section=(section.anchor, section.length))
    halt = res.halt[0]
    if halt is HaltReason.RETURNED:
        return ReturnResult(float(res.return_distance[0]), halt)
    return ReturnResult(None, halt)


@dataclass(frozen=True)
class ClosedOrbit:
    """A closed orbit found on a section, located by its seed offset.

    ``natural_fraction`` is the share of integration steps spent where
    lam1 < lam^2 < lam2 holds (as opposed to the eigenvector-continuation
    regions); orbits living mostly in a continuation region are eigenvector
    orbits rather than uniform-stretching curves.
    """

    seed_offset: float
    vertices: np.ndarray
    lam: float
    sign: int
    natural_fraction: float = 1.0


@dataclass(frozen=True)
class VortexBoundary:
    """Outermost closed orbit around a wedge pair."""

    polygon: ClosedPolygon
    lam: float
    sign: int
    census: tuple[int, int]
    seed_offset: float

    def __post_init__(self):
        if self.census != (2, 0):
            raise ValueError(f"boundary census {self.census} != (2, 0)")


def _section_distances(spec_of, section, lam_sign_list, step, max_arclength):
    """Return distances for every (lam, sign) on every seed, one big batch."""
    n_seeds = len(section.seeds)
    n_par = len(lam_sign_list)
    seeds = np.tile(section.seeds, (n_par, 1))
    lams = np.repeat([ls[0] for ls in lam_sign_list], n_seeds)
    signs = np.repeat([ls[1] for ls in lam_sign_list], n_seeds)
    res = _integrate_orbits(spec_of, seeds, lams, signs, step, max_arclength,
                            section=(section.anchor, section.length))
    rd = res.return_distance.reshape(n_par, n_seeds)
    halts = res.halt.reshape(n_par, n_seeds)
    return rd, halts


def _bisect_brackets(spec_of, section, tasks, step, max_arclength, tol):
    """Refine sign-change brackets of the return distance, batched.

    ``tasks`` is a list of dicts with keys lam, sign, lo, hi, flo (offsets
    along the section and the return distance at lo). Returns refined seed
    offsets (or None where the bracket stalled).
    """
    y0 = section.anchor[1]
    x0 = section.anchor[0]
    lo = np.array([t["lo"] for t in tasks])
    hi = np.array([t["hi"] for t in tasks])
    flo = np.array([t["flo"] for t in tasks])
    lams = np.array([t["lam"] for t in tasks])
    signs = np.array([t["sign"] for t in tasks])
    alive = np.ones(len(tasks), dtype=bool)
    for _ in range(MAX_BISECTION_ITERATIONS):
        wide = (hi - lo) > tol
        todo = alive & wide
        if not todo.any():
            break
        mid = 0.5 * (lo[todo] + hi[todo])
        seeds = np.column_stack([x0 + mid, np.full(mid.size, y0)])
        res = _integrate_orbits(spec_of, seeds, lams[todo], signs[todo], step,
                                max_arclength, section=(section.anchor, section.length))
        fmid = res.return_distance
        stalled = ~np.isfinite(fmid)
        idx = np.flatnonzero(todo)
        for k, i in enumerate(idx):
            if stalled[k]:
                warnings.warn(
                    f"return distance undefined at section offset {mid[k]:.6g}; "
                    "bracket skipped", BisectionStalled)
                alive[i] = False
                continue
            if fmid[k] == 0.0:
                lo[i] = hi[i] = mid[k]
            elif (fmid[k] < 0) == (flo[i] < 0):
                lo[i] = mid[k]
                flo[i] = fmid[k]
            else:
                hi[i] = mid[k]
    return [0.5 * (lo[i] + hi[i]) if alive[i] else None for i in range(len(tasks))]


def find_closed_orbits(spec: EtaFieldSpec, section: PoincareSection,
                       step: float | None = None, max_arclength: float | None = None,
                       closure_tol: float | None = None) -> list[ClosedOrbit]:
    """All closed orbits crossing the section for one (lam, sign) branch.

    Zero crossings of the return distance between consecutive seeds are
    refined by bisection to 1e-6 of the section length; a refined seed is
    accepted only if its re-integrated orbit closes within the closure
    tolerance. Seeds whose return distance is already below the bisection
    tolerance are accepted directly (the identically-zero case). The result
    is ordered inner to outer.
    """
    spec_of = lambda lam, sign: spec
    return _find_orbits_multi(spec_of, section, [(spec.lam, spec.sign)], step,
                              max_arclength, closure_tol)


def _find_orbits_multi(spec_of, section, lam_sign_list, step=None,
                       max_arclength=None, closure_tol=None) -> list[ClosedOrbit]:
    probe = spec_of(*lam_sign_list[0])
    step, max_arclength = _orbit_controls(probe, section, step, max_arclength)
    if closure_tol is None:
        closure_tol = CLOSURE_TOL_FACTOR * section.length
    tol = BISECTION_TOL_FACTOR * section.length
    offsets = section.seed_offsets
    rd, _ = _section_distances(spec_of, section, lam_sign_list, step, max_arclength)

    candidates = []   # (lam, sign, seed offset)
    tasks = []
    for row, (lam, sign) in enumerate(lam_sign_list):
        f = rd[row]
        finite = np.isfinite(f)
        # a seed already within closure tolerance closes without bisection
        # (the identically-zero return-distance family)
        direct = finite & (np.abs(f) < closure_tol)
        for off in offsets[direct]:
            candidates.append((lam, sign, float(off)))
        for i in range(len(offsets) - 1):
            if not (finite[i] and finite[i + 1]) or direct[i] or direct[i + 1]:
                continue
            if f[i] * f[i + 1] < 0:
                tasks.append(dict(lam=lam, sign=sign, lo=offsets[i], hi=offsets[i + 1],
                                  flo=f[i]))
    if tasks:
        refined = _bisect_brackets(spec_of, section, tasks, step, max_arclength, tol)
        for t, off in zip(tasks, refined):
            if off is not None:
                candidates.append((t["lam"], t["sign"], float(off)))
    if not candidates:
        return []

    # re-integrate candidates with recording and keep those that close
    seeds = np.column_stack([section.anchor[0] + np.array([c[2] for c in candidates]),
                             np.full(len(candidates), section.anchor[1])])
    res = _integrate_orbits(spec_of, seeds,
                            [c[0] for c in candidates], [c[1] for c in candidates],
                            step, max_arclength, section=(section.anchor, section.length),
                            record=True)
    orbits = []
    for i, (lam, sign, off) in enumerate(candidates):
        if res.halt[i] is not HaltReason.RETURNED:
            continue
        verts = res.polylines[i]
        if np.linalg.norm(verts[-1] - verts[0]) > closure_tol:
            continue
        orbits.append(ClosedOrbit(off, verts, lam, sign,
                                  float(res.natural_fraction[i])))
    orbits.sort(key=lambda o: (o.seed_offset, o.lam, o.sign))
    return orbits


NATURAL_FRACTION_MIN = 0.5


def sweep_lambda(tensor_field: SymmetricTensorField, eigen_field: EigenField,
                 pair: WedgePair, section: PoincareSection,
                 singularities: list[Singularity],
                 lam_min: float = DEFAULT_LAMBDA_MIN, lam_max: float = DEFAULT_LAMBDA_MAX,
                 lam_step: float = DEFAULT_LAMBDA_STEP, signs=(1, -1),
                 step: float | None = None, max_arclength: float | None = None,
                 closure_tol: float | None = None,
                 natural_fraction_min: float = NATURAL_FRACTION_MIN,
                 verify=None) -> VortexBoundary | None:
    """Outermost admissible closed orbit over the stretching-parameter sweep.

    For every lam in [lam_min, lam_max] (inclusive, lam_step increments) and
    each branch sign, closed orbits are collected; an orbit is admissible
    only if it encloses exactly the two wedges of the anchoring pair and no
    other known singularity. Orbits that spend less than
    ``natural_fraction_min`` of their steps inside the natural domain are
    rejected as well: a curve living in a continuation region follows an
    eigenvector field and does not stretch by lam. ``verify``, when given,
    is a final predicate on each candidate boundary (the pipeline uses it to
    confirm the advected arclength ratio matches lam). The admissible orbit
    whose section crossing lies farthest from the anchor wins; None when
    nothing closes.
    """
    n_lam = int(round((lam_max - lam_min) / lam_step)) + 1
    lams = lam_min + lam_step * np.arange(n_lam)
    lams = lams[lams <= lam_max + 1e-12 * max(1.0, abs(lam_max))]
    lam_sign_list = [(float(l), int(s)) for l in lams for s in signs]
    cache: dict[tuple, EtaFieldSpec] = {}

    def spec_of(lam, sign):
        key = (lam, sign)
        if key not in cache:
            cache[key] = EtaFieldSpec(lam, sign, tensor_field, eigen_field)
        return cache[key]

    orbits = _find_orbits_multi(spec_of, section, lam_sign_list, step,
                                max_arclength, closure_tol)
    members = (pair.first, pair.second)
    for orbit in sorted(orbits, key=lambda o: -o.seed_offset):
        if orbit.natural_fraction < natural_fraction_min:
            continue
        try:
            poly = ClosedPolygon(orbit.vertices)
        except ValueError:
            continue
        if singularities:
            enclosed = poly.contains(np.array([[s.x, s.y] for s in singularities]))
            wanted = all(s in members for s, inside in zip(singularities, enclosed) if inside)
        else:
            wanted = True
        both = all(bool(poly.contains(np.array([[m.x, m.y]]))[0]) for m in members)
        if not (wanted and both):
            continue
        census = census_enclosed(poly, list(singularities))
        if census != (2, 0):
            continue
        candidate = VortexBoundary(poly, orbit.lam, orbit.sign, census, orbit.seed_offset)
        if verify is not None and not verify(candidate):
            continue
        return candidate
    return None


def polyline_length(vertices: np.ndarray, closed: bool = True) -> float:
    v = np.asarray(vertices, dtype=float)
    if closed:
        v = np.vstack([v, v[:1]])
    return float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))


def advected_length_ratio(field_obj, polygon: ClosedPolygon, t0: float, T: float,
                          cfg: IntegratorConfig | None = None) -> float:
    """Arclength ratio of a material polygon advected over [t0, t0+T].

    On a boundary of the uniform-stretching field this equals the orbit's
    stretching parameter.
    """
    before = polyline_length(polygon.vertices)
    after_pts = advect(field_obj, polygon.vertices, t0, T, cfg)
    after = polyline_length(after_pts)
    return after / before


def stretch_verifier(field_obj, t0: float, T: float,
                     cfg: IntegratorConfig | None = None, tolerance: float = 0.02):
    """Boundary predicate: the advected arclength ratio must match lam.

    Guards the sweep against numerically closed curves that are not actually
    uniform-stretching orbits (for example paths hugging sharp stretching
    ridges where the interpolated direction field is least accurate).
    """

    def verify(vb: VortexBoundary) -> bool:
        from .errors import LeftDomain

        try:
            ratio = advected_length_ratio(field_obj, vb.polygon, t0, T, cfg)
        except LeftDomain:
            return False
        return abs(ratio - vb.lam) <= tolerance * vb.lam

    return verify
