"""Frictionless segment-to-segment contact with augmented Lagrange multipliers.

Boundary loops of the deformable body supply the slave segments (two Gauss
points each) and, for self contact, the master segments as well. Rigid
surfaces are motionless circles discretized into counter-clockwise polygons.
Every normal is outward: the tangent rotated by -90 degrees, because material
lies to the left of every loop.

Dof layout of a pair block: ``[slave_a, slave_b, master_1, master_2]`` with two
components each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

MUTUAL, SELF = 0, 1
MODE_NAMES = {MUTUAL: "mutual", SELF: "self"}

_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class ContactParams:
    eps_n: float
    eps_s: float
    g_tol: float
    max_augmentations: int = 10
    search_depth: float = 0.5  # self-contact depth window, fraction of mean edge length
    mutual: bool = True
    self_contact: bool = True

    @classmethod
    def from_material(cls, E: float, L0: float, mean_edge: float, **kw):
        return cls(eps_n=50.0 * E / L0, eps_s=4.0 * E / L0, g_tol=1e-3 * mean_edge, **kw)


@dataclass
class ContactState:
    """Nearest-candidate pairs found in one detection pass (active or not)."""

    slave: np.ndarray
    mode: np.ndarray
    master: np.ndarray
    xi: np.ndarray
    gap: np.ndarray
    lam: np.ndarray
    normal: np.ndarray
    slave_normal: np.ndarray
    active: np.ndarray

    @classmethod
    def empty(cls):
        z = np.empty(0)
        zi = np.empty(0, dtype=np.int64)
        return cls(zi, zi.copy(), zi.copy(), z, z.copy(), z.copy(), np.empty((0, 2)), np.empty((0, 2)),
                   np.empty(0, dtype=bool))

    @property
    def mutual_pairs_exist(self) -> bool:
        return bool(np.any(self.active & (self.mode == MUTUAL)))

    @property
    def self_pairs_exist(self) -> bool:
        return bool(np.any(self.active & (self.mode == SELF)))

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def max_penetration(self) -> float:
        if not self.active.any():
            return 0.0
        return float(max(0.0, -self.gap[self.active].min()))


def closest_point(x_s, a, b) -> tuple:
    """Project ``x_s`` onto segment a-b.

    Returns ``(xi_p, x_p, n_p)`` with ``xi_p`` clamped to [-1, 1] and ``n_p``
    the outward unit normal (tangent rotated by -90 degrees). Broadcasts over
    leading dimensions.
    """
    x_s, a, b = (np.asarray(v, dtype=float) for v in (x_s, a, b))
    e = b - a
    ll = np.einsum("...i,...i->...", e, e)
    s = np.clip(np.einsum("...i,...i->...", x_s - a, e) / ll, 0.0, 1.0)
    x_p = a + s[..., None] * e
    t = e / np.sqrt(ll)[..., None]
    n = np.broadcast_to(np.stack([t[..., 1], -t[..., 0]], axis=-1), x_p.shape)
    return 2.0 * s - 1.0, x_p, n


def normal_gap(x_s, x_p, n_p):
    return np.einsum("...i,...i->...", np.asarray(x_s) - np.asarray(x_p), np.asarray(n_p))


def pair_force_stiffness(W, M, xs_nodes, xm_nodes, lam, eps, tangent=True):
    """Contact force and stiffness for a batch of active pairs.

    ``W`` (P,) slave quadrature weights, ``M`` (P, 2) slave shape values,
    ``xs_nodes``/``xm_nodes`` (P, 2, 2) current slave and master segment
    endpoints, ``lam`` (P,) traction magnitudes. Returns ``f`` (P, 8), the
    residual contribution ``f_c``, and ``K`` (P, 8, 8) = d f_c / d x.
    """
    P = len(W)
    xa, xb = xs_nodes[:, 0], xs_nodes[:, 1]
    x1, x2 = xm_nodes[:, 0], xm_nodes[:, 1]
    x_s = M[:, :1] * xa + M[:, 1:] * xb
    e = x2 - x1
    ll = np.einsum("pi,pi->p", e, e)
    ell = np.sqrt(ll)
    t = e / ell[:, None]
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    s_raw = np.einsum("pi,pi->p", x_s - x1, e) / ll
    clamped = (s_raw < 0.0) | (s_raw > 1.0)
    s = np.clip(s_raw, 0.0, 1.0)
    N1, N2 = 1.0 - s, s
    x_p = x1 + s[:, None] * e
    tau = np.einsum("pi,pi->p", x_s - x_p, t)

    c = np.stack([-M[:, 0], -M[:, 1], N1, N2], axis=1)  # (P, 4)
    f = (W * lam)[:, None, None] * c[:, :, None] * n[:, None, :]
    f = f.reshape(P, 8)
    if not tangent:
        return f, None

    eye = np.eye(2)
    Z = np.zeros((P, 2, 2))
    I = np.broadcast_to(eye, (P, 2, 2))
    Js = np.concatenate([M[:, 0, None, None] * I, M[:, 1, None, None] * I, Z, Z], axis=2)
    J1 = np.concatenate([Z, Z, I, Z], axis=2)
    J2 = np.concatenate([Z, Z, Z, I], axis=2)
    dE = J2 - J1  # (P, 2, 8)
    n_dE = np.einsum("pi,pij->pj", n, dE)
    Dn = -(t[:, :, None] * n_dE[:, None, :]) / ell[:, None, None]
    dg = np.einsum("pi,pij->pj", n, Js - N1[:, None, None] * J1 - N2[:, None, None] * J2)
    dg = dg - (tau / ell)[:, None] * n_dE
    dlam = -eps[:, None] * dg if np.ndim(eps) else -eps * dg

    ds = (
        np.einsum("pi,pij->pj", e, Js - J1) + np.einsum("pi,pij->pj", x_s - x1, dE)
        - 2.0 * s_raw[:, None] * np.einsum("pi,pij->pj", e, dE)
    ) / ll[:, None]
    ds[clamped] = 0.0
    dc = np.zeros((P, 4, 8))
    dc[:, 2] = -ds
    dc[:, 3] = ds

    K = (
        c[:, :, None, None] * n[:, None, :, None] * dlam[:, None, None, :]
        + lam[:, None, None, None] * c[:, :, None, None] * Dn[:, None, :, :]
        + lam[:, None, None, None] * n[:, None, :, None] * dc[:, :, None, :]
    )
    K = W[:, None, None] * K.reshape(P, 8, 8)
    return f, K


@dataclass
class ContactModel:
    """Contact bookkeeping for one continuum in compact (active-node) numbering.

    ``segments`` (S, 2) node ids of boundary edges, ``seg_loop``/``seg_pos`` give
    each segment's loop and position for adjacency exclusion. Multipliers
    ``lam_old`` are stored per slave quadrature point and mode.
    """

    segments: np.ndarray
    seg_loop: np.ndarray
    seg_pos: np.ndarray
    loop_len: np.ndarray
    ref_length: np.ndarray
    rigid_segments: np.ndarray  # (R, 2, 2)
    params: ContactParams
    mean_edge: float
    lam_old: np.ndarray = field(default=None)
    x_prev: np.ndarray | None = None  # last converged configuration

    def __post_init__(self):
        if self.lam_old is None:
            self.lam_old = np.zeros((2, self.n_slave))

    def commit(self, x: np.ndarray) -> None:
        """Record a converged configuration for the self-contact crossing test."""
        self.x_prev = np.array(x, dtype=float)

    def snapshot(self):
        return self.lam_old.copy(), None if self.x_prev is None else self.x_prev.copy()

    def restore(self, snap) -> None:
        self.lam_old, self.x_prev = snap

    @classmethod
    def build(cls, continuum, node_index, params: ContactParams):
        segs, loop_id, pos, lens = [], [], [], []
        for li, loop in enumerate(continuum.boundary.loops):
            n = len(loop)
            lens.append(n)
            for k in range(n):
                segs.append((loop[k], loop[(k + 1) % n]))
                loop_id.append(li)
                pos.append(k)
        segs = np.asarray(segs, dtype=np.int64)
        ref = np.linalg.norm(continuum.coords[segs[:, 1]] - continuum.coords[segs[:, 0]], axis=1)
        h = float(ref.mean())
        rigid = [s.polygon(h) for s in continuum.rigid] if params.mutual else []
        if rigid:
            rs = np.concatenate([np.stack([p, np.roll(p, -1, axis=0)], axis=1) for p in rigid])
        else:
            rs = np.empty((0, 2, 2))
        nodes = np.flatnonzero(node_index >= 0)
        x0 = np.empty((len(nodes), 2))
        x0[node_index[nodes]] = continuum.coords[nodes]
        return cls(
            x_prev=x0,
            segments=node_index[segs],
            seg_loop=np.asarray(loop_id),
            seg_pos=np.asarray(pos),
            loop_len=np.asarray(lens),
            ref_length=ref,
            rigid_segments=rs,
            params=params,
            mean_edge=h,
        )

    @property
    def n_slave(self) -> int:
        return 2 * len(self.segments)

    def slave_points(self, x: np.ndarray) -> tuple:
        """Slave point coordinates (Q, 2), shape values (Q, 2), weights (Q,), segment ids (Q,)."""
        seg = np.repeat(np.arange(len(self.segments)), 2)
        xi = np.tile(_GP, len(self.segments))
        M = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0], axis=1)
        a = x[self.segments[seg, 0]]
        b = x[self.segments[seg, 1]]
        pts = M[:, :1] * a + M[:, 1:] * b
        W = self.ref_length[seg] / 2.0  # unit Gauss weights times half the reference length
        return pts, M, W, seg

    def _segment_normals(self, x):
        e = x[self.segments[:, 1]] - x[self.segments[:, 0]]
        t = e / np.linalg.norm(e, axis=1)[:, None]
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def detect(self, x: np.ndarray) -> ContactState:
        """Nearest valid master for every slave point.

        A broad phase keeps only segments whose midpoint lies within half the
        segment length plus ``reach`` of the slave point, where ``reach`` is
        twice the mean boundary edge (never less than the self-contact depth
        window). Farther masters cannot produce an active pair.
        """
        if len(self.segments) == 0:
            return ContactState.empty()
        pts, M, W, seg = self.slave_points(x)
        seg_n = self._segment_normals(x)
        reach = max(2.0, self.params.search_depth) * self.mean_edge
        parts = []
        if len(self.rigid_segments):
            parts.append(self._detect_mutual(pts, seg_n[seg], reach))
        if self.params.self_contact:
            parts.append(self._detect_self(x, pts, seg, seg_n, reach))
        parts = [p for p in parts if p is not None]
        if not parts:
            return ContactState.empty()
        return ContactState(*(np.concatenate(arrs) for arrs in zip(*parts)))

    @staticmethod
    def _near(pts, a, b, reach):
        """Candidate (slave, segment) index pairs from the midpoint distance filter."""
        mid = 0.5 * (a + b)
        half = 0.5 * np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
        dx = pts[:, 0, None] - mid[None, :, 0]
        dy = pts[:, 1, None] - mid[None, :, 1]
        return np.nonzero(dx * dx + dy * dy <= (half + reach) ** 2)

    @staticmethod
    def _nearest(q, j, d):
        """Keep the closest candidate per slave point (ties go to the lower segment id)."""
        order = np.lexsort((j, d, q))
        q, j = q[order], j[order]
        first = np.ones(len(q), dtype=bool)
        first[1:] = q[1:] != q[:-1]
        return order[first]

    def _detect_mutual(self, pts, ns, reach):
        a = self.rigid_segments[:, 0]
        b = self.rigid_segments[:, 1]
        q, j = self._near(pts, a, b, reach)
        if len(q) == 0:
            return None
        xi, xp, n = closest_point(pts[q], a[j], b[j])
        d = np.linalg.norm(pts[q] - xp, axis=1)
        k = self._nearest(q, j, d)
        q, j, xi, xp, n = q[k], j[k], xi[k], xp[k], n[k]
        g = normal_gap(pts[q], xp, n)
        lam = self.lam_old[MUTUAL, q] - self.params.eps_n * g
        active = lam >= 0.0
        return (q, np.full(len(q), MUTUAL), j, xi, g, lam, n, ns[q], active)

    def _detect_self(self, x, pts, seg, seg_n, reach):
        a = x[self.segments[:, 0]]
        b = x[self.segments[:, 1]]
        q, j = self._near(pts, a, b, reach)

        # exclude the slave's own segment and its two ring neighbours
        sq = seg[q]
        same_loop = self.seg_loop[j] == self.seg_loop[sq]
        L = self.loop_len[self.seg_loop[sq]]
        delta = np.abs(self.seg_pos[j] - self.seg_pos[sq])
        ring = np.minimum(delta, L - delta)
        keep = ~(same_loop & (ring <= 1))
        q, j = q[keep], j[keep]
        if len(q) == 0:
            return None
        xi, xp, n = closest_point(pts[q], a[j], b[j])
        g = normal_gap(pts[q], xp, n)
        ns = seg_n[seg[q]]
        dot = np.einsum("pi,pi->p", ns, n)
        depth = self.params.search_depth * self.mean_edge
        # only orthogonal projections: an endpoint-clamped foot gives a meaningless sign
        valid = (np.abs(xi) < 1.0) & (dot < 0.0) & (g > -depth)
        if self.x_prev is not None and valid.any():
            # a slave point can only penetrate a face it was outside of (or already
            # pressing on) in the last converged state; this rules out the opposite
            # face of a thin member
            xo = self.x_prev
            ps, _, _, _ = self.slave_points(xo)
            _, xp0, n0 = closest_point(ps[q], xo[self.segments[j, 0]], xo[self.segments[j, 1]])
            g0 = normal_gap(ps[q], xp0, n0)
            valid &= (g0 >= -self.params.g_tol) | (self.lam_old[SELF, q] > 0.0)
        if not valid.any():
            return None
        q, j, xi, xp, n, g, ns = (v[valid] for v in (q, j, xi, xp, n, g, ns))
        d = np.linalg.norm(pts[q] - xp, axis=1)
        k = self._nearest(q, j, d)
        q, j, xi, n, g, ns = q[k], j[k], xi[k], n[k], g[k], ns[k]
        lam = self.lam_old[SELF, q] - self.params.eps_s * g
        active = lam > 0.0
        return (q, np.full(len(q), SELF), j, xi, g, lam, n, ns, active)

    def forces(self, x: np.ndarray, state: ContactState, n_dof: int, tangent: bool = True):
        """Assembled contact force vector and sparse stiffness for the active pairs."""
        f = np.zeros(n_dof)
        act = np.flatnonzero(state.active)
        if len(act) == 0:
            return f, (sp.csr_matrix((n_dof, n_dof)) if tangent else None)
        q = state.slave[act]
        mode = state.mode[act]
        master = state.master[act]
        lam = np.maximum(state.lam[act], 0.0)
        _, M, W, seg = self.slave_points(x)
        M, W, sseg = M[q], W[q], seg[q]
        s_nodes = self.segments[sseg]
        is_self = mode == SELF
        xm = np.empty((len(act), 2, 2))
        xm[~is_self] = self.rigid_segments[master[~is_self]]
        m_nodes = np.full((len(act), 2), -1, dtype=np.int64)
        m_nodes[is_self] = self.segments[master[is_self]]
        xm[is_self] = x[m_nodes[is_self]]
        eps = np.where(is_self, self.params.eps_s, self.params.eps_n)
        fp, Kp = pair_force_stiffness(W, M, x[s_nodes], xm, lam, eps, tangent)

        nodes = np.concatenate([s_nodes, m_nodes], axis=1)  # (P, 4)
        dofs = np.stack([2 * nodes, 2 * nodes + 1], axis=2).reshape(-1, 8)
        ok = np.repeat(nodes >= 0, 2, axis=1)
        np.add.at(f, dofs[ok], fp[ok])
        if not tangent:
            return f, None
        mask = ok[:, :, None] & ok[:, None, :]
        rows = np.broadcast_to(dofs[:, :, None], Kp.shape)[mask]
        cols = np.broadcast_to(dofs[:, None, :], Kp.shape)[mask]
        K = sp.coo_matrix((Kp[mask], (rows, cols)), shape=(n_dof, n_dof)).tocsr()
        return f, K

    def update_multipliers(self, state: ContactState) -> None:
        """lam_old <- max(0, lam_old - eps g) on the current pairs; others reset to zero."""
        new = np.zeros_like(self.lam_old)
        for mode in (MUTUAL, SELF):
            sel = state.mode == mode
            new[mode, state.slave[sel]] = np.maximum(state.lam[sel], 0.0)
        self.lam_old = new

    def report_rows(self, state: ContactState, step: int) -> list:
        rows = []
        for k in np.flatnonzero(state.active):
            rows.append((step, int(state.slave[k]), MODE_NAMES[int(state.mode[k])], float(state.gap[k]), float(state.lam[k])))
        return rows


def rigid_overlaps(continuum) -> np.ndarray:
    """True for each rigid surface that already intersects the undeformed continuum.

    A disk overlaps when its center lies inside a retained cell or a boundary
    edge passes closer to the center than the radius.
    """
    out = np.zeros(len(continuum.rigid), dtype=bool)
    if not len(out):
        return out
    polys = continuum.coords[continuum.cells]  # (C, 6, 2)
    a, b = polys, np.roll(polys, -1, axis=1)
    edges = np.array(list(continuum.boundary.edges()), dtype=np.int64).reshape(-1, 2)
    ea, eb = continuum.coords[edges[:, 0]], continuum.coords[edges[:, 1]]
    for k, surf in enumerate(continuum.rigid):
        c = np.asarray(surf.center, dtype=float)
        # crossing-number test against every cell at once
        up = (a[..., 1] <= c[1]) != (b[..., 1] <= c[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[..., 0] + (c[1] - a[..., 1]) * (b[..., 0] - a[..., 0]) / (b[..., 1] - a[..., 1])
        inside = np.count_nonzero(up & (c[0] < xc), axis=1) % 2 == 1
        if inside.any():
            out[k] = True
            continue
        _, xp, _ = closest_point(c, ea, eb)
        out[k] = bool(np.min(np.linalg.norm(xp - c, axis=1)) < surf.radius)
    return out
