"""Triangle rules and the centroid-fan cell quadrature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED = (1, 3, 7, 25)


def triangle_rule(n_gp: int) -> tuple:
    """Barycentric points (n, 3) and weights summing to 1 on a triangle."""
    if n_gp == 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if n_gp == 3:
        a, b = 2 / 3, 1 / 6
        return np.array([[a, b, b], [b, a, b], [b, b, a]]), np.full(3, 1 / 3)
    if n_gp == 7:
        a1, b1 = 0.059715871789770, 0.470142064105115
        a2, b2 = 0.797426985353087, 0.101286507323456
        pts = [[1 / 3, 1 / 3, 1 / 3]]
        pts += [[a1, b1, b1], [b1, a1, b1], [b1, b1, a1]]
        pts += [[a2, b2, b2], [b2, a2, b2], [b2, b2, a2]]
        w = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
        return np.array(pts), np.array(w)
    if n_gp == 25:
        # 5x5 Gauss-Legendre on the unit square collapsed onto the triangle
        g, gw = np.polynomial.legendre.leggauss(5)
        g, gw = 0.5 * (g + 1.0), 0.5 * gw
        xi, eta = np.meshgrid(g, g, indexing="ij")
        wxi, weta = np.meshgrid(gw, gw, indexing="ij")
        s = xi * (1.0 - eta)
        t = eta
        w = 2.0 * wxi * weta * (1.0 - eta)
        s, t, w = s.ravel(), t.ravel(), w.ravel()
        return np.column_stack([1.0 - s - t, s, t]), w
    raise ValueError(f"unsupported Gauss point count {n_gp}; choose from {SUPPORTED}")


@dataclass(frozen=True)
class QuadratureRule:
    """Six centroid-fan triangles per cell with ``n_gp`` points each."""

    n_gp: int = 25

    def __post_init__(self):
        triangle_rule(self.n_gp)

    @property
    def points_per_cell(self) -> int:
        return 6 * self.n_gp

    def cell_points(self, polys: np.ndarray) -> tuple:
        """Quadrature points (C, Q, 2) and weights (C, Q) for polygons (C, n, 2).

        Weights are signed fan-triangle areas times the rule weights, so they
        sum to the polygon area.
        """
        bary, w = triangle_rule(self.n_gp)
        c = polys.mean(axis=1)
        v0 = polys
        v1 = np.roll(polys, -1, axis=1)
        pts = (
            bary[None, None, :, 0, None] * c[:, None, None, :]
            + bary[None, None, :, 1, None] * v0[:, :, None, :]
            + bary[None, None, :, 2, None] * v1[:, :, None, :]
        )
        e0, e1 = v0 - c[:, None], v1 - c[:, None]
        area = 0.5 * (e0[..., 0] * e1[..., 1] - e0[..., 1] * e1[..., 0])
        wts = area[:, :, None] * w[None, None, :]
        nc, n = polys.shape[:2]
        return pts.reshape(nc, n * len(w), 2), wts.reshape(nc, n * len(w))
