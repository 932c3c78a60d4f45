"""Fourier shape descriptors for comparing open output paths.

An open path is closed clockwise without self-intersection, then its
cumulative tangent angle is expanded over normalized arc length following
Zahn and Roskies. Shape lives in the harmonic coefficients, size in the
open-path length and orientation in the angle of the first segment.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePath, InvalidArgument, SelfIntersectingInput

N_HARMONICS = 50


@dataclass(frozen=True)
class PathPolyline:
    """Ordered points in mm. For a closed path, the first ``n_open`` segments are the original path."""

    points: np.ndarray
    closed: bool = False
    n_open: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidArgument("path points must be an (n, 2) array")
        object.__setattr__(self, "points", pts)

    @property
    def segments(self) -> np.ndarray:
        p = self.points
        if self.closed:
            return np.stack([p, np.roll(p, -1, axis=0)], axis=1)
        return np.stack([p[:-1], p[1:]], axis=1)

    @property
    def open_segments(self) -> np.ndarray:
        segs = self.segments
        return segs if self.n_open is None else segs[: self.n_open]

    def length(self) -> float:
        s = self.open_segments
        return float(np.linalg.norm(s[:, 1] - s[:, 0], axis=1).sum())

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def translated(self, dx: float, dy: float) -> "PathPolyline":
        return PathPolyline(self.points + [dx, dy], self.closed, self.n_open)

    def rotated(self, alpha: float, origin=(0.0, 0.0)) -> "PathPolyline":
        c, s = np.cos(alpha), np.sin(alpha)
        o = np.asarray(origin, dtype=float)
        pts = (self.points - o) @ np.array([[c, s], [-s, c]]) + o
        return PathPolyline(pts, self.closed, self.n_open)

    def scaled(self, k: float) -> "PathPolyline":
        return PathPolyline(self.points * k, self.closed, self.n_open)


@dataclass(frozen=True)
class PathDescriptor:
    A: np.ndarray
    B: np.ndarray
    L: float
    theta: float

    @property
    def n(self) -> int:
        return len(self.A)


@dataclass(frozen=True)
class ObjectiveWeights:
    w_a: float = 100.0
    w_b: float = 100.0
    w_L: float = 1.0
    w_theta: float = 0.1
    lambda_v: float = 20.0
    V_star: float = 0.30

    def __post_init__(self):
        if min(self.w_a, self.w_b, self.w_L, self.w_theta, self.lambda_v) < 0:
            raise InvalidArgument("objective weights must be non-negative")


@dataclass(frozen=True)
class ObjectiveBreakdown:
    A_err: float
    B_err: float
    L_err: float
    theta_err: float
    penalty: float
    total: float


def clean_points(points, tol: float = 1e-12) -> np.ndarray:
    """Drop consecutive duplicates (relative tolerance on the bounding-box size)."""
    p = np.asarray(points, dtype=float)
    if len(p) == 0:
        raise DegeneratePath("empty path")
    scale = max(float(np.ptp(p, axis=0).max()), 1.0)
    keep = [0]
    for i in range(1, len(p)):
        if np.linalg.norm(p[i] - p[keep[-1]]) > tol * scale:
            keep.append(i)
    return p[keep]


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _crossing_matrix(segs: np.ndarray, tol: float) -> np.ndarray:
    """Pairwise closed-segment intersection (touching and collinear overlap included)."""
    p, q = segs[:, 0], segs[:, 1]
    P, Q = p[:, None], q[:, None]
    R, S = p[None], q[None]
    d1 = _orient(R, S, P)
    d2 = _orient(R, S, Q)
    d3 = _orient(P, Q, R)
    d4 = _orient(P, Q, S)
    z1, z2, z3, z4 = (np.abs(d) <= tol for d in (d1, d2, d3, d4))
    proper = (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0) & ~(z1 | z2 | z3 | z4)

    def on(a, b, c):  # c collinear with a-b lies within its box
        lo, hi = np.minimum(a, b) - tol, np.maximum(a, b) + tol
        return np.all((c >= lo) & (c <= hi), axis=-1)

    touch = (z1 & on(R, S, P)) | (z2 & on(R, S, Q)) | (z3 & on(P, Q, R)) | (z4 & on(P, Q, S))
    return proper | touch


def _overlaps_adjacent(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    """Consecutive segments folding back onto each other."""
    cross = u[0] * v[1] - u[1] * v[0]
    return abs(cross) <= tol and float(np.dot(u, v)) < 0


def _is_simple(points: np.ndarray, closed: bool, tol: float) -> bool:
    n = len(points)
    segs = np.stack([points, np.roll(points, -1, axis=0)], axis=1) if closed else np.stack([points[:-1], points[1:]], axis=1)
    m = len(segs)
    if m < 2:
        return True
    hit = _crossing_matrix(segs, tol)
    i, j = np.triu_indices(m, k=1)
    adjacent = (j == i + 1) | (closed & (i == 0) & (j == m - 1))
    if np.any(hit[i[~adjacent], j[~adjacent]]):
        return False
    e = segs[:, 1] - segs[:, 0]
    for a, b in zip(i[adjacent], j[adjacent]):
        first, second = (a, b) if b == a + 1 else (b, a)
        if _overlaps_adjacent(e[first], e[second], tol):
            return False
    return n >= 2


def _collinear(points: np.ndarray, tol: float) -> bool:
    d = points - points[0]
    e = d[np.argmax(np.linalg.norm(d, axis=1))]
    return bool(np.all(np.abs(e[0] * d[:, 1] - e[1] * d[:, 0]) <= tol))


def _closures(points: np.ndarray):
    """Candidate closure waypoint lists from the end back to the start, shortest first.

    The detour box is aligned with the start-to-end chord so that the choice
    does not depend on how the path is oriented in the plane.
    """
    d = points[-1] - points[0]
    if np.hypot(*d) <= 0:
        d = points[1] - points[0]
    c, s = d / np.hypot(*d)
    frame = np.array([[c, s], [-s, c]])  # rows: chord direction and its normal
    ways = _box_closures(points @ frame.T)
    return [w @ frame for w in ways]


def _box_closures(points: np.ndarray):
    lo, hi = points.min(axis=0), points.max(axis=0)
    margin = 0.1 * max(float(np.max(hi - lo)), 1e-9)
    lo, hi = lo - margin, hi + margin
    # corners clockwise from top-left; side k runs from corner k to corner k+1
    corners = np.array([[lo[0], hi[1]], [hi[0], hi[1]], [hi[0], lo[1]], [lo[0], lo[1]]])

    def exit_point(p, side):
        return np.array([[p[0], hi[1]], [hi[0], p[1]], [p[0], lo[1]], [lo[0], p[1]]][side])

    start, end = points[0], points[-1]
    cands = [np.empty((0, 2))]
    for a, b in itertools.product(range(4), repeat=2):
        for step in (1, -1):
            k = (b - a) * step % 4
            for wrap in (k, k + 4) if k == 0 else (k,):
                if step == 1:
                    cs = [corners[(a + 1 + i) % 4] for i in range(wrap)]
                else:
                    cs = [corners[(a - i) % 4] for i in range(wrap)]
                for use_exit in itertools.product((True, False), repeat=2):
                    way = []
                    if use_exit[0]:
                        way.append(exit_point(end, a))
                    way.extend(cs)
                    if use_exit[1]:
                        way.append(exit_point(start, b))
                    if way:
                        cands.append(np.array(way))

    def closure_length(w):
        chain = np.vstack([end, w, start]) if len(w) else np.vstack([end, start])
        return float(np.linalg.norm(np.diff(chain, axis=0), axis=1).sum())

    return sorted(cands, key=closure_length)


def close_path(path: PathPolyline) -> PathPolyline:
    """Close an open path clockwise so that the loop does not self-intersect.

    The straight chord is used when that already gives a simple clockwise
    loop. Otherwise the closure detours around an expanded bounding box along
    the right-hand side of the path, choosing the shortest simple clockwise
    route. A straight path closes onto itself (zero-area lens).
    """
    if path.closed:
        return path
    pts = clean_points(path.points)
    if len(pts) < 2:
        raise DegeneratePath("path needs at least two distinct points")
    scale = max(float(np.ptp(pts, axis=0).max()), 1e-300)
    tol = 1e-12 * scale * scale
    if not _is_simple(pts, closed=False, tol=tol):
        raise SelfIntersectingInput("open path intersects itself")
    n_open = len(pts) - 1
    if _collinear(pts, tol):
        if len(pts) > 2:
            d = pts - pts[0]
            t = d @ (pts[-1] - pts[0])
            if np.any(np.diff(t) <= 0):
                raise SelfIntersectingInput("straight path doubles back on itself")
        return PathPolyline(pts, closed=True, n_open=n_open)
    for way in _closures(pts):
        loop = np.vstack([pts, way]) if len(way) else pts
        cand = PathPolyline(loop, closed=True, n_open=n_open)
        if cand.signed_area() < 0 and _is_simple(loop, closed=True, tol=tol):
            return cand
    raise DegeneratePath("no simple clockwise closure found")


def _turning(closed: PathPolyline):
    """Edge lengths and the exterior turn at each vertex (turn k is entering edge k)."""
    e = np.roll(closed.points, -1, axis=0) - closed.points
    ell = np.linalg.norm(e, axis=1)
    if np.any(ell <= 0):
        raise DegeneratePath("repeated consecutive points")
    ang = np.arctan2(e[:, 1], e[:, 0])
    turn = np.angle(np.exp(1j * (ang - np.roll(ang, 1))))
    # a full reversal is a clockwise half turn on a clockwise loop
    turn[np.isclose(np.abs(turn), np.pi, rtol=0, atol=1e-12)] = -np.pi
    return ell, turn


def descriptor(path: PathPolyline, n: int = N_HARMONICS) -> PathDescriptor:
    """Fourier coefficients of the normalized cumulative tangent-angle function.

    With turn ``d_k`` at normalized arc position ``t_k`` (the start of edge k),
    ``A_m = -1/(m pi) sum d_k sin(m t_k)`` and ``B_m = 1/(m pi) sum d_k cos(m t_k)``.
    ``L`` is the length of the original open part and ``theta`` the direction
    of its first segment.
    """
    if not path.closed:
        path = close_path(path)
    if len(path.points) < 2:
        raise DegeneratePath("path needs at least two points")
    ell, turn = _turning(path)
    perimeter = float(ell.sum())
    if not perimeter > 0:
        raise DegeneratePath("zero-length path")
    if abs(turn.sum() + 2.0 * np.pi) > 1e-6:
        raise InvalidArgument("descriptor needs a simple clockwise closed path")
    t = 2.0 * np.pi * np.concatenate([[0.0], np.cumsum(ell)[:-1]]) / perimeter
    m = np.arange(1, n + 1)[:, None]
    A = -(turn * np.sin(m * t)).sum(axis=1) / (m[:, 0] * np.pi)
    B = (turn * np.cos(m * t)).sum(axis=1) / (m[:, 0] * np.pi)
    first = path.open_segments[0]
    d = first[1] - first[0]
    L = path.length()
    if not L > 0:
        raise DegeneratePath("zero-length path")
    return PathDescriptor(A, B, L, float(np.arctan2(d[1], d[0])))


def wrap_angle(a: float) -> float:
    """Map an angle difference to (-pi, pi]."""
    w = float(np.angle(np.exp(1j * a)))
    return np.pi if w == -np.pi else w


def objective_terms(actual: PathDescriptor, specified: PathDescriptor, weights: ObjectiveWeights,
                    volume_fraction: float) -> ObjectiveBreakdown:
    if actual.n != specified.n:
        raise InvalidArgument(f"descriptor sizes differ: {actual.n} vs {specified.n}")
    A_err = float(np.sum((specified.A - actual.A) ** 2))
    B_err = float(np.sum((specified.B - actual.B) ** 2))
    L_err = (specified.L - actual.L) ** 2
    th_err = wrap_angle(specified.theta - actual.theta) ** 2
    V, Vs = volume_fraction, weights.V_star
    penalty = weights.lambda_v * (V - Vs) if V >= Vs else 0.0
    total = weights.w_a * A_err + weights.w_b * B_err + weights.w_L * L_err + weights.w_theta * th_err + penalty
    return ObjectiveBreakdown(A_err, B_err, L_err, th_err, penalty, total)


def objective(actual: PathDescriptor, specified: PathDescriptor, weights: ObjectiveWeights,
              volume_fraction: float) -> float:
    return objective_terms(actual, specified, weights, volume_fraction).total


def length_deviation(L_s: float, L_a: float) -> float:
    """Relative length discrepancy in percent."""
    if not L_s > 0:
        raise InvalidArgument("specified length must be positive")
    return abs(L_s - L_a) / L_s * 100.0


def read_path(path) -> PathPolyline:
    """Read an ``x,y`` CSV (mm); a header line and blank lines are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or not "".join(rec).strip():
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if rows:
                    raise InvalidArgument(f"{path}: bad path row {rec!r}")
    if len(rows) < 2:
        raise InvalidArgument(f"{path}: a path needs at least two points")
    return PathPolyline(np.array(rows))


def write_path(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(points, dtype=float):
            w.writerow([repr(float(x)), repr(float(y))])


def write_descriptor(path, desc: PathDescriptor) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "A", "B"])
        for m, (a, b) in enumerate(zip(desc.A, desc.B), start=1):
            w.writerow([m, repr(float(a)), repr(float(b))])
        w.writerow(["L", repr(desc.L), ""])
        w.writerow(["theta", repr(desc.theta), ""])
