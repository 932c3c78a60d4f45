"""Mean value coordinates on simple polygons, with analytic gradients.

Uses the signed half-angle tangent form ``tan(a/2) = (r_i r_j - d_i.d_j) / det(d_i, d_j)``,
which stays valid inside concave polygons.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegeneratePolygon

_ON_EDGE_TOL = 1e-12


def check_polygon(poly: np.ndarray) -> float:
    """Return the polygon diameter; raise DegeneratePolygon on collapsed geometry."""
    poly = np.asarray(poly, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise DegeneratePolygon("polygon needs at least 3 two-dimensional vertices")
    diam = float(np.max(np.linalg.norm(poly[:, None] - poly[None], axis=2)))
    edges = np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)
    if diam == 0 or edges.min() <= 1e-12 * diam:
        raise DegeneratePolygon("repeated vertices")
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if abs(area) <= 1e-12 * diam * diam:
        raise DegeneratePolygon("polygon has zero area")
    return diam


def mvc_batch(poly: np.ndarray, points: np.ndarray) -> tuple:
    """Shape values (..., P, n) and gradients (..., P, n, 2) at interior points.

    ``poly`` is (..., n, 2) and ``points`` (..., P, 2) with matching leading
    dimensions, so a stack of cells is evaluated in one call. No boundary
    handling: every point must be strictly inside its polygon.
    """
    poly = np.asarray(poly, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None]
    d = poly[..., None, :, :] - points[..., :, None, :]  # (..., P, n, 2)
    dn = np.roll(d, -1, axis=-2)
    r = np.linalg.norm(d, axis=-1)
    rn = np.roll(r, -1, axis=-1)
    dot = np.einsum("...i,...i->...", d, dn)
    cross = d[..., 0] * dn[..., 1] - d[..., 1] * dn[..., 0]
    t = (r * rn - dot) / cross  # tan of half the angle subtended by edge i

    # gradients w.r.t. the evaluation point; d(d_i)/dx = -I
    grad_r = -d / r[..., None]
    grad_rr = -(rn[..., None] * d / r[..., None] + r[..., None] * dn / rn[..., None])
    grad_dot = -(d + dn)
    grad_cross = np.stack([d[..., 1] - dn[..., 1], dn[..., 0] - d[..., 0]], axis=-1)
    grad_t = (grad_rr - grad_dot - t[..., None] * grad_cross) / cross[..., None]

    tp = np.roll(t, 1, axis=-1)
    grad_tp = np.roll(grad_t, 1, axis=-2)
    w = (tp + t) / r
    grad_w = (grad_tp + grad_t) / r[..., None] - w[..., None] * grad_r / r[..., None]
    W = w.sum(axis=-1)
    N = w / W[..., None]
    grad_W = grad_w.sum(axis=-2)
    dN = (grad_w - N[..., None] * grad_W[..., None, :]) / W[..., None, None]
    return N, dN


def _boundary_values(poly: np.ndarray, point: np.ndarray, diam: float):
    """Limit values when the point sits on a vertex or an edge, else None."""
    n = len(poly)
    d = poly - point
    r = np.linalg.norm(d, axis=1)
    tol = _ON_EDGE_TOL * diam
    k = int(np.argmin(r))
    if r[k] <= tol:
        N = np.zeros(n)
        N[k] = 1.0
        return N
    for i in range(n):
        j = (i + 1) % n
        e = poly[j] - poly[i]
        cross = e[0] * (point[1] - poly[i, 1]) - e[1] * (point[0] - poly[i, 0])
        s = np.dot(point - poly[i], e) / np.dot(e, e)
        if abs(cross) <= tol * np.linalg.norm(e) and 0.0 < s < 1.0:
            N = np.zeros(n)
            N[i], N[j] = 1.0 - s, s
            return N
    return None


def mvc_shape(polygon, point) -> tuple:
    """Mean value shape functions and their gradients at ``point``.

    On a vertex or edge the values are the linear-interpolation limit; the
    gradients there come from a point nudged a relative ``1e-7`` toward the
    vertex mean, because the gradient has no one-sided limit on the boundary.
    """
    poly = np.asarray(polygon, dtype=float)
    diam = check_polygon(poly)
    x = np.asarray(point, dtype=float)
    N = _boundary_values(poly, x, diam)
    if N is None:
        vals, grads = mvc_batch(poly, x[None])
        return vals[0], grads[0]
    inner = x + 1e-7 * (poly.mean(axis=0) - x)
    _, grads = mvc_batch(poly, inner[None])
    return N, grads[0]
