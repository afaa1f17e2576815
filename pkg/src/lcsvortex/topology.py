"""Tensor-line topology: singularities, their types, and curve indices.

Singularities of the eigenvector line fields are the isotropic points of the
tensor (c1 := C11 - C22 and c2 := C12 both zero). They are located per grid
cell from marching-squares zero-crossing segments whose intersections are
polished by Newton iteration on the bilinear interpolant, classified by the
3/3 separatrix-count circle test, and filtered into wedge pairs that seed
the closed-orbit search.

Curve indices (winding numbers) are computed for vector fields and, via the
angle-doubling representation of the projective line, for line fields, where
they take half-integer values: wedges carry +1/2 and trisectors -1/2. Every
closed orbit of such a line field encloses two more wedges than trisectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .cauchy_green import SymmetricTensorField, eigen_at
from .errors import (
    CriticalPointOnCurve,
    DegeneratePointOnCurve,
    RadiusTooLarge,
    UndersampledCurve,
)

CLASSIFY_CIRCLE_SAMPLES = 1000
MIN_SEPARATION_FACTOR = 2.0
CLASSIFY_RADIUS_CAP_FACTOR = 5.0
CLASSIFY_RADIUS_FLOOR_FACTOR = 2.0
DELAUNAY_CUTOVER = 1000

_WINDING_RESIDUAL = 1e-6


class SingularityType(Enum):
    WEDGE = "wedge"
    TRISECTOR = "trisector"
    UNCLASSIFIED = "unclassified"


@dataclass(eq=False)
class Singularity:
    """Subgrid-resolution isotropic point of the tensor field."""

    x: float
    y: float
    kind: SingularityType = SingularityType.UNCLASSIFIED
    nn_distance: float = math.nan

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class WedgePair:
    """Two wedge singularities anchoring a candidate vortex region."""

    first: Singularity
    second: Singularity

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.first.position + self.second.position)

    @property
    def separation(self) -> float:
        return float(np.hypot(self.first.x - self.second.x, self.first.y - self.second.y))


class ClassificationCounter:
    """Instrumentation: circle positions evaluated by the 3/3 type test."""

    def __init__(self):
        self.total = 0
        self.last_call = 0

    def record(self, n):
        self.total += n
        self.last_call = n


classification_counter = ClassificationCounter()


# ---------------------------------------------------------------------------
# closed polygons


class ClosedPolygon:
    """Simple closed polygon, stored anticlockwise (closure implied)."""

    def __init__(self, vertices, check_simple: bool = True):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs an (N, 2) vertex array with N >= 3")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise ValueError("polygon collapses to fewer than 3 distinct vertices")
        area2 = _signed_area2(v)
        if area2 < 0:
            v = v[::-1].copy()
        if check_simple and not _is_simple(v):
            raise ValueError("polygon is self-intersecting")
        self.vertices = v

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    def perimeter_points(self, n: int) -> np.ndarray:
        """n points equally spaced by arclength, starting at vertex 0."""
        v = np.vstack([self.vertices, self.vertices[:1]])
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = np.linspace(0.0, cum[-1], n, endpoint=False)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(seg[idx] > 0, (s - cum[idx]) / seg[idx], 0.0)
        return v[idx] + frac[:, None] * (v[idx + 1] - v[idx])

    def contains(self, pts) -> np.ndarray:
        """Ray-casting point-in-polygon test; boundary points count inside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = self.vertices
        x, y = pts[:, 0], pts[:, 1]
        x1, y1 = v[:, 0], v[:, 1]
        x2, y2 = np.roll(x1, -1), np.roll(y1, -1)

        straddle = ((y1[None] <= y[:, None]) & (y2[None] > y[:, None])) | (
            (y2[None] <= y[:, None]) & (y1[None] > y[:, None]))
        with np.errstate(invalid="ignore", divide="ignore"):
            xc = x1[None] + (y[:, None] - y1[None]) / (y2[None] - y1[None]) * (x2[None] - x1[None])
        crossings = np.sum(straddle & (xc > x[:, None]), axis=1)
        inside = crossings % 2 == 1

        # boundary tolerance: point within eps of any edge counts as inside
        scale = max(np.abs(v).max(), 1.0)
        eps = 1e-12 * scale
        ex, ey = x2 - x1, y2 - y1
        len2 = ex * ex + ey * ey
        px = x[:, None] - x1[None]
        py = y[:, None] - y1[None]
        with np.errstate(invalid="ignore", divide="ignore"):
            tpar = np.where(len2[None] > 0, (px * ex[None] + py * ey[None]) / len2[None], 0.0)
        tpar = np.clip(tpar, 0.0, 1.0)
        d2 = (px - tpar * ex[None]) ** 2 + (py - tpar * ey[None]) ** 2
        on_edge = np.any(d2 <= eps * eps, axis=1)
        return inside | on_edge


def _signed_area2(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _is_simple(v: np.ndarray) -> bool:
    """Proper-crossing test over all non-adjacent edge pairs (chunked O(n^2))."""
    n = len(v)
    p1 = v
    p2 = np.roll(v, -1, axis=0)
    idx = np.arange(n)
    for lo in range(0, n, 256):
        hi = min(lo + 256, n)
        a1 = p1[lo:hi, None]
        a2 = p2[lo:hi, None]
        b1 = p1[None, :]
        b2 = p2[None, :]
        d1 = _cross(a2 - a1, b1 - a1)
        d2 = _cross(a2 - a1, b2 - a1)
        d3 = _cross(b2 - b1, a1 - b1)
        d4 = _cross(b2 - b1, a2 - b1)
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        i = idx[lo:hi, None]
        j = idx[None, :]
        adjacent = (i == j) | ((i + 1) % n == j) | ((j + 1) % n == i)
        if np.any(proper & ~adjacent):
            return False
    return True


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# curve indices


def _winding_turns(w: np.ndarray, max_step: float, undersample_err: str) -> float:
    """Net turns of the nonvanishing vector samples w along a closed loop."""
    w2 = np.roll(w, -1, axis=0)
    dots = np.sum(w * w2, axis=1)
    crosses = _cross(w, w2)
    dtheta = np.arctan2(crosses, dots)
    if np.any(np.abs(dtheta) >= max_step):
        raise UndersampledCurve(
            f"direction turns by >= {max_step:.3f} rad between samples; {undersample_err}")
    return float(np.sum(dtheta) / (2.0 * math.pi))


def vector_field_index(vf, polygon: ClosedPolygon, n_samples: int = 720) -> int:
    """Winding number of the vector field along the polygon (anticlockwise).

    ``vf`` maps (N, 2) points to (N, 2) vectors. Raises CriticalPointOnCurve
    if a sample vanishes and UndersampledCurve if consecutive samples turn by
    pi/2 or more.
    """
    pts = polygon.perimeter_points(n_samples)
    w = np.asarray(vf(pts), dtype=float)
    norms = np.linalg.norm(w, axis=1)
    if np.any(~np.isfinite(norms)) or np.any(norms < 1e-300):
        raise CriticalPointOnCurve("vector field vanishes on the curve")
    turns = _winding_turns(w, math.pi / 2, "increase n_samples")
    index = round(turns)
    if abs(turns - index) >= _WINDING_RESIDUAL:
        raise UndersampledCurve(f"winding residual {turns - index:.2e} exceeds 1e-6")
    return index


def line_field_index(lf, polygon: ClosedPolygon, n_samples: int = 720) -> float:
    """Index of the line field along the polygon; a multiple of 1/2.

    ``lf`` maps (N, 2) points to representative (sign-irrelevant) vectors.
    Each line's angle is doubled, which maps the projective line onto the
    circle; the vector winding of that representation is then halved.
    """
    pts = polygon.perimeter_points(n_samples)
    v = np.asarray(lf(pts), dtype=float)
    n2 = v[:, 0] ** 2 + v[:, 1] ** 2
    if np.any(~np.isfinite(n2)) or np.any(n2 < 1e-300):
        raise DegeneratePointOnCurve("line field is undefined on the curve")
    w = np.stack([(v[:, 0] ** 2 - v[:, 1] ** 2) / n2, 2.0 * v[:, 0] * v[:, 1] / n2], axis=1)
    turns = _winding_turns(w, math.pi / 2, "line angles must change by < pi/4 per sample")
    doubled = round(turns)
    if abs(turns - doubled) >= _WINDING_RESIDUAL:
        raise UndersampledCurve(f"winding residual {turns - doubled:.2e} exceeds 1e-6")
    return doubled / 2.0


# ---------------------------------------------------------------------------
# locating singularities


def _ms_crossings(va, vb):
    """Zero crossing of the linear interpolant between scalar corner values."""
    neg_a = va < 0
    neg_b = vb < 0
    if neg_a == neg_b:
        return None
    return va / (va - vb)


def _ms_segments(a, b, c, d):
    """Marching-squares zero segments of a bilinear cell, unit coordinates.

    Corner values: a=(0,0), b=(1,0), c=(0,1), d=(1,1). Returns a list of
    ((x1,y1),(x2,y2)) segments.
    """
    crossings = []
    s = _ms_crossings(a, b)
    if s is not None:
        crossings.append(("b", (s, 0.0)))
    s = _ms_crossings(b, d)
    if s is not None:
        crossings.append(("r", (1.0, s)))
    s = _ms_crossings(c, d)
    if s is not None:
        crossings.append(("t", (s, 1.0)))
    s = _ms_crossings(a, c)
    if s is not None:
        crossings.append(("l", (0.0, s)))
    if len(crossings) == 0:
        return []
    if len(crossings) == 2:
        return [(crossings[0][1], crossings[1][1])]
    if len(crossings) == 4:
        pts = dict(crossings)
        center_neg = (a + b + c + d) / 4.0 < 0
        if center_neg == (a < 0):
            # zero curves cut off corners b and c
            return [(pts["b"], pts["r"]), (pts["l"], pts["t"])]
        return [(pts["b"], pts["l"]), (pts["r"], pts["t"])]
    # odd counts only occur with exact-zero corners; treat conservatively
    return []


def _segment_intersection(p1, p2, q1, q2):
    r = (p2[0] - p1[0], p2[1] - p1[1])
    s = (q2[0] - q1[0], q2[1] - q1[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0:
        return None
    dx = q1[0] - p1[0]
    dy = q1[1] - p1[1]
    t = (dx * s[1] - dy * s[0]) / denom
    u = (dx * r[1] - dy * r[0]) / denom
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= u <= 1 + 1e-9:
        return (p1[0] + t * r[0], p1[1] + t * r[1])
    return None


def _newton_bilinear(coef1, coef2, s, t, tol, max_iter=50):
    """Polish a root of two bilinear functions; coefs are (A, B, C, D) for
    f = A + B*s + C*t + D*s*t. Returns (s, t) or None."""
    a1, b1, c1, d1 = coef1
    a2, b2, c2, d2 = coef2
    for _ in range(max_iter):
        f1 = a1 + b1 * s + c1 * t + d1 * s * t
        f2 = a2 + b2 * s + c2 * t + d2 * s * t
        if abs(f1) < tol and abs(f2) < tol:
            if -1e-6 <= s <= 1 + 1e-6 and -1e-6 <= t <= 1 + 1e-6:
                return s, t
            return None
        j11 = b1 + d1 * t
        j12 = c1 + d1 * s
        j21 = b2 + d2 * t
        j22 = c2 + d2 * s
        det = j11 * j22 - j12 * j21
        if det == 0 or not math.isfinite(det):
            return None
        s -= (f1 * j22 - f2 * j12) / det
        t -= (f2 * j11 - f1 * j21) / det
        if not (-0.5 <= s <= 1.5 and -0.5 <= t <= 1.5):
            return None
    return None


INTERSECTION_TOLERANCE = 1e-10


def locate_singularities(tf: SymmetricTensorField) -> list[Singularity]:
    """Find isotropic points of the tensor field at subgrid resolution.

    Per cell, the zero level sets of c1 = C11 - C22 and c2 = C12 are
    approximated by marching-squares segments; their intersections start a
    Newton polish on the bilinear interpolants, so each reported point has
    both |c1| and |c2| below 1e-10 under bilinear interpolation.
    """
    c1 = tf.c11 - tf.c22
    c2 = tf.c12
    valid = tf.valid
    cell_ok = valid[:-1, :-1] & valid[:-1, 1:] & valid[1:, :-1] & valid[1:, 1:]

    def has_sign_change(f):
        mn = np.minimum(np.minimum(f[:-1, :-1], f[:-1, 1:]), np.minimum(f[1:, :-1], f[1:, 1:]))
        mx = np.maximum(np.maximum(f[:-1, :-1], f[:-1, 1:]), np.maximum(f[1:, :-1], f[1:, 1:]))
        return (mn < 0) & (mx >= 0)

    with np.errstate(invalid="ignore"):
        candidates = cell_ok & has_sign_change(c1) & has_sign_change(c2)
    found: list[Singularity] = []
    dx, dy = tf.x_axis.step, tf.y_axis.step
    for iy, ix in zip(*np.nonzero(candidates)):
        vals1 = (c1[iy, ix], c1[iy, ix + 1], c1[iy + 1, ix], c1[iy + 1, ix + 1])
        vals2 = (c2[iy, ix], c2[iy, ix + 1], c2[iy + 1, ix], c2[iy + 1, ix + 1])
        segs1 = _ms_segments(*vals1)
        segs2 = _ms_segments(*vals2)
        coef1 = (vals1[0], vals1[1] - vals1[0], vals1[2] - vals1[0],
                 vals1[0] - vals1[1] - vals1[2] + vals1[3])
        coef2 = (vals2[0], vals2[1] - vals2[0], vals2[2] - vals2[0],
                 vals2[0] - vals2[1] - vals2[2] + vals2[3])
        roots = []
        for sa in segs1:
            for sb in segs2:
                hit = _segment_intersection(sa[0], sa[1], sb[0], sb[1])
                if hit is None:
                    continue
                polished = _newton_bilinear(coef1, coef2, hit[0], hit[1],
                                            INTERSECTION_TOLERANCE)
                if polished is None:
                    continue
                if all(abs(polished[0] - r[0]) + abs(polished[1] - r[1]) > 1e-9
                       for r in roots):
                    roots.append(polished)
        for s, t in roots:
            found.append(Singularity(tf.x_axis.start + (ix + s) * dx,
                                     tf.y_axis.start + (iy + t) * dy))

    # roots sitting on shared cell edges can be reported by both cells
    found.sort(key=lambda s: (s.x, s.y))
    unique: list[Singularity] = []
    tol = 1e-9 * max(dx, dy)
    for s in found:
        if unique and abs(s.x - unique[-1].x) <= tol and abs(s.y - unique[-1].y) <= tol:
            continue
        unique.append(s)
    return unique


# ---------------------------------------------------------------------------
# selection, classification, pairing


def _nn_distances(positions: np.ndarray) -> np.ndarray:
    n = len(positions)
    if n < 2:
        return np.full(n, np.inf)
    if n <= DELAUNAY_CUTOVER:
        diff = positions[:, None] - positions[None]
        d = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(d, np.inf)
        return d.min(axis=1)
    from scipy.spatial import Delaunay

    tri = Delaunay(positions)
    indptr, indices = tri.vertex_neighbor_vertices
    out = np.full(n, np.inf)
    for i in range(n):
        nb = indices[indptr[i]:indptr[i + 1]]
        if nb.size:
            d = np.hypot(*(positions[nb] - positions[i]).T)
            out[i] = d.min()
    return out


def select_isolated(sings: list[Singularity], delta_x: float,
                    factor: float = MIN_SEPARATION_FACTOR) -> list[Singularity]:
    """Keep singularities whose nearest neighbor is at least factor*delta_x away.

    The discard is mutual: both members of a too-close pair (and every member
    of a tight cluster) are removed. Survivors get nn_distance recomputed
    within the surviving set, which later bounds the classification radius.
    """
    if not sings:
        return []
    pos = np.array([[s.x, s.y] for s in sings])
    nn = _nn_distances(pos)
    threshold = factor * delta_x
    kept = [s for s, d in zip(sings, nn) if d >= threshold]
    if kept:
        pos_kept = np.array([[s.x, s.y] for s in kept])
        for s, d in zip(kept, _nn_distances(pos_kept)):
            s.nn_distance = float(d)
    return kept


def _count_sign_changes(q: np.ndarray, wrap_sign: float) -> int:
    body = int(np.count_nonzero(q[:-1] * q[1:] < 0))
    wrap = int(q[-1] * (wrap_sign * q[0]) < 0)
    return body + wrap


def classify_singularity(tf: SymmetricTensorField, s: Singularity, r: float,
                         others=None, n_samples: int = CLASSIFY_CIRCLE_SAMPLES) -> SingularityType:
    """Type a singularity from the dominant eigenvector on a circle around it.

    On ``n_samples`` circle positions the signed alignment of the rotating
    radius with the (locally consistently oriented) dominant eigendirection
    is tracked; a trisector shows exactly three orthogonal and three parallel
    transversal zeros, anything else is a wedge. The tensor components are
    interpolated and eigendecomposed at each sample, which avoids the sign
    ambiguity of interpolating eigenvectors directly.
    """
    if others is not None:
        for o in others:
            if o is s:
                continue
            if math.hypot(o.x - s.x, o.y - s.y) <= r:
                raise RadiusTooLarge(
                    f"singularity at ({o.x:.6g}, {o.y:.6g}) lies within radius {r:.6g}")
    theta = 2.0 * math.pi * (np.arange(n_samples) + 0.5) / n_samples
    rx = np.cos(theta)
    ry = np.sin(theta)
    pts = np.column_stack([s.x + r * rx, s.y + r * ry])
    _, _, _, xi2, _, ok = eigen_at(tf, pts)
    classification_counter.record(n_samples)
    if not ok.all():
        return SingularityType.UNCLASSIFIED

    # orient xi2 consistently along the circle
    dots = np.sum(xi2[1:] * xi2[:-1], axis=1)
    sign = np.concatenate([[1.0], np.cumprod(np.where(dots < 0, -1.0, 1.0))])
    t = xi2 * sign[:, None]
    wrap_sign = -1.0 if float(np.dot(t[-1], t[0])) < 0 else 1.0

    orth = rx * t[:, 0] + ry * t[:, 1]      # zero where radius is orthogonal to xi2
    para = rx * t[:, 1] - ry * t[:, 0]      # zero where radius is parallel to xi2
    n_orth = _count_sign_changes(orth, wrap_sign)
    n_para = _count_sign_changes(para, wrap_sign)
    if n_orth == 3 and n_para == 3:
        return SingularityType.TRISECTOR
    return SingularityType.WEDGE


def classify_all(tf: SymmetricTensorField, sings: list[Singularity],
                 delta_x: float) -> list[Singularity]:
    """Classify every singularity in place with an adaptive circle radius.

    The radius is half the distance to the nearest other singularity, capped
    at 5*delta_x; singularities whose radius would fall below 2*delta_x stay
    unclassified.
    """
    floor = CLASSIFY_RADIUS_FLOOR_FACTOR * delta_x
    cap = CLASSIFY_RADIUS_CAP_FACTOR * delta_x
    for s in sings:
        r = min(0.5 * s.nn_distance, cap) if math.isfinite(s.nn_distance) else cap
        if r < floor:
            s.kind = SingularityType.UNCLASSIFIED
            continue
        s.kind = classify_singularity(tf, s, r)
    return sings


def pair_wedges(wedges: list[Singularity], trisectors: list[Singularity],
                max_pair_distance: float) -> list[WedgePair]:
    """Form candidate wedge pairs.

    Wedges whose nearest singularity is a trisector are discarded, then
    wedges with no other wedge within ``max_pair_distance``. Every surviving
    wedge pairs with its nearest surviving wedge; a wedge between two others
    may appear in two pairs, and symmetric duplicates collapse.
    """
    if not wedges:
        return []
    wpos = np.array([[w.x, w.y] for w in wedges])
    everything = list(wedges) + list(trisectors)
    apos = np.array([[s.x, s.y] for s in everything])
    keep = []
    for i, w in enumerate(wedges):
        d = np.hypot(apos[:, 0] - w.x, apos[:, 1] - w.y)
        d[i] = np.inf
        nearest = int(np.argmin(d))
        if np.isfinite(d[nearest]) and everything[nearest].kind == SingularityType.TRISECTOR:
            continue
        keep.append(i)
    if len(keep) < 2:
        return []

    kpos = wpos[keep]
    diff = kpos[:, None] - kpos[None]
    d = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(d, np.inf)
    nn = d.min(axis=1)
    near = nn <= max_pair_distance
    idx = [k for k, flag in zip(keep, near) if flag]
    if len(idx) < 2:
        return []

    fpos = wpos[idx]
    diff = fpos[:, None] - fpos[None]
    d = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(d, np.inf)
    partner = d.argmin(axis=1)
    seen = set()
    pairs = []
    for a, b in enumerate(partner):
        key = (min(a, int(b)), max(a, int(b)))
        if key in seen:
            continue
        seen.add(key)
        pairs.append(WedgePair(wedges[idx[key[0]]], wedges[idx[key[1]]]))
    pairs.sort(key=lambda p: (p.midpoint[0], p.midpoint[1]))
    return pairs


def census_enclosed(polygon: ClosedPolygon, sings: list[Singularity]) -> tuple[int, int]:
    """Count (wedges, trisectors) inside the polygon, boundary inclusive."""
    if not sings:
        return 0, 0
    pts = np.array([[s.x, s.y] for s in sings])
    inside = polygon.contains(pts)
    w = sum(1 for s, flag in zip(sings, inside)
            if flag and s.kind == SingularityType.WEDGE)
    t = sum(1 for s, flag in zip(sings, inside)
            if flag and s.kind == SingularityType.TRISECTOR)
    return w, t
