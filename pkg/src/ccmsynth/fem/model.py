"""Total-Lagrangian assembly over mean-value-coordinate polygon cells.

Internal forces are integrated as ``int P : Grad(dv) dV`` on the smoothed
reference geometry. That is the same virtual work as the updated-Lagrangian
``int B^T sigma dv`` since ``P = J sigma F^-T``, and it lets the shape function
gradients be computed once per candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import NonPositiveJacobian
from .material import MaterialParams, first_piola, strain_energy
from .mvc import mvc_batch
from .quadrature import QuadratureRule


@dataclass
class FEModel:
    X: np.ndarray  # (n, 2) reference coordinates of active nodes
    conn: np.ndarray  # (C, 6) compact connectivity
    cell_ids: np.ndarray  # parent-mesh cell id per row of conn
    node_ids: np.ndarray  # parent-mesh node id per compact node
    dN: np.ndarray  # (C, Q, 6, 2) reference shape gradients
    w: np.ndarray  # (C, Q) quadrature weights times thickness
    material: MaterialParams

    @classmethod
    def build(cls, continuum, material: MaterialParams, quad: QuadratureRule, thickness: float = 1.0):
        node_ids = continuum.active_nodes
        index = np.full(continuum.mesh.n_nodes, -1, dtype=np.int64)
        index[node_ids] = np.arange(len(node_ids))
        conn = index[continuum.cells]
        X = continuum.coords[node_ids]
        polys = X[conn]
        pts, w = quad.cell_points(polys)
        cell_ids = np.flatnonzero(continuum.retained)
        if np.any(w <= 0):
            bad = int(cell_ids[np.argmin(w.min(axis=1))])
            raise NonPositiveJacobian(bad)
        _, dN = mvc_batch(polys, pts)
        return cls(X, conn, cell_ids, node_ids, dN, w * thickness, material)

    @property
    def n_nodes(self) -> int:
        return len(self.X)

    @property
    def n_dof(self) -> int:
        return 2 * len(self.X)

    def node_index(self, mesh_nodes) -> np.ndarray:
        lookup = {int(n): i for i, n in enumerate(self.node_ids)}
        return np.array([lookup.get(int(n), -1) for n in np.atleast_1d(mesh_nodes)], dtype=np.int64)

    def compact_index(self, n_mesh_nodes: int) -> np.ndarray:
        index = np.full(n_mesh_nodes, -1, dtype=np.int64)
        index[self.node_ids] = np.arange(len(self.node_ids))
        return index

    def deformation_gradient(self, u: np.ndarray) -> np.ndarray:
        ue = u.reshape(-1, 2)[self.conn]  # (C, 6, 2)
        return np.eye(2) + np.matmul(ue.transpose(0, 2, 1)[:, None], self.dN)

    def _check(self, F):
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        if np.any(J <= 0):
            c = int(np.argmin(J.min(axis=1)))
            raise NonPositiveJacobian(int(self.cell_ids[c]))

    def energy(self, u: np.ndarray) -> float:
        F = self.deformation_gradient(u)
        self._check(F)
        C, Q = F.shape[:2]
        W = strain_energy(F.reshape(-1, 2, 2), self.material).reshape(C, Q)
        return float(np.sum(self.w * W))

    def assemble(self, u: np.ndarray, tangent: bool = True):
        """Internal force vector (N) and consistent tangent (N/mm, CSR)."""
        F = self.deformation_gradient(u)
        self._check(F)
        C, Q = F.shape[:2]
        P, A = first_piola(F.reshape(-1, 2, 2), self.material, tangent)
        wP = self.w[..., None, None] * P.reshape(C, Q, 2, 2)
        # fe[c, a, i] = sum_q sum_J dN[c, q, a, J] wP[c, q, i, J]
        fe = np.matmul(self.dN.transpose(0, 2, 1, 3).reshape(C, 6, 2 * Q), wP.transpose(0, 1, 3, 2).reshape(C, 2 * Q, 2))
        dofs = self._dofs
        f = np.bincount(dofs.ravel(), weights=fe.reshape(C, 12).ravel(), minlength=self.n_dof)
        if not tangent:
            return f, None
        Ke = _element_tangent(self.w, self.dN, A.reshape(C, Q, 2, 2, 2, 2))
        indptr, indices, slot = self._pattern
        data = np.bincount(slot, weights=Ke.ravel(), minlength=len(indices))
        K = sp.csr_matrix((data, indices, indptr), shape=(self.n_dof, self.n_dof))
        return f, K

    @cached_property
    def _dofs(self) -> np.ndarray:
        return np.stack([2 * self.conn, 2 * self.conn + 1], axis=2).reshape(len(self.conn), 12)

    @cached_property
    def _pattern(self):
        """CSR structure of the stiffness and the slot of every element entry in it."""
        dofs = self._dofs
        rows = np.repeat(dofs, 12, axis=1).ravel()
        cols = np.tile(dofs, (1, 12)).ravel()
        key = rows * self.n_dof + cols
        uniq, slot = np.unique(key, return_inverse=True)
        r, c = np.divmod(uniq, self.n_dof)
        indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=self.n_dof))])
        return indptr, c, slot


def _element_tangent(w, dN, A):
    """K_e[a i, b k] = sum_q w dN_aJ A_iJkL dN_bL, as two batched matmuls."""
    C, Q = w.shape
    wdN = (w[..., None, None] * dN).reshape(C * Q, 6, 2)
    Ajx = A.transpose(0, 1, 3, 2, 4, 5).reshape(C * Q, 2, 8)  # [J][i k L]
    T = np.matmul(wdN, Ajx).reshape(C, Q, 6, 2, 2, 2)  # [a][i][k][L]
    T = T.transpose(0, 2, 3, 4, 1, 5).reshape(C, 24, 2 * Q)
    D = dN.transpose(0, 1, 3, 2).reshape(C, 2 * Q, 6)  # [(q L)][b]
    Ke = np.matmul(T, D).reshape(C, 6, 2, 2, 6)  # [a][i][k][b]
    return Ke.transpose(0, 1, 2, 4, 3).reshape(C, 12, 12)
