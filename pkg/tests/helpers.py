"""Shared geometry for the test suites."""

from dataclasses import replace

import numpy as np
import shapely

from ccmsynth.contact import ContactModel, ContactParams, closest_point
from ccmsynth.design import RigidSurface
from ccmsynth.fem import FEModel, MaterialParams, PointLoad, QuadratureRule, Solver, SolverSettings
from ccmsynth.mesh import SQRT3, generate_honeycomb
from ccmsynth.smoothing import make_continuum, smooth_boundary


def strip_on_disk(n_steps=20, force=30.0, n_gp=7, **contact):
    """Cantilever strip pushed down onto a motionless disk; returns (solver, solution, tip, contact)."""
    mesh = generate_honeycomb(10, 2, 1.0)
    c = smooth_boundary(make_continuum(mesh, np.ones(mesh.n_cells, bool)), 2)
    c.rigid = [RigidSurface((11.0, -3.0), 2.5)]
    mat = MaterialParams()
    model = FEModel.build(c, mat, QuadratureRule(n_gp))
    idx = model.compact_index(mesh.n_nodes)
    fixed = idx[mesh.nodes_in_box(-1, -1, 0.6, 100)]
    tip = int(idx[mesh.nearest_node([mesh.domain_size[0], mesh.domain_size[1] / 2])])
    params = replace(ContactParams.from_material(mat.E, mesh.characteristic_length, c.mean_boundary_edge()), **contact)
    cm = ContactModel.build(c, idx, params)
    solver = Solver(model, fixed, PointLoad(tip, (0, -1), force), contact=cm,
                    settings=SolverSettings(n_steps=n_steps), length_scale=mesh.characteristic_length)
    return solver, solver.solve(), tip, cm


def folded_strip(overlap=0.02, nx=8, ny=4):
    """A C-shaped strip whose upper arm is pushed ``overlap`` mm into the lower arm.

    Returns ``(contact_model, X, x, interface)`` where ``X`` are reference and
    ``x`` deformed compact coordinates and ``interface`` flags the compact
    nodes on the two facing surfaces.
    """
    mesh = generate_honeycomb(nx, ny)
    retained = np.zeros(mesh.n_cells, bool)
    for c in range(mesh.n_cells):
        j, i = divmod(c, nx)
        retained[c] = j == 0 or j == ny - 1 or i == 0
    cont = make_continuum(mesh, retained)
    model = FEModel.build(cont, MaterialParams(), QuadratureRule(1))
    idx = model.compact_index(mesh.n_nodes)
    params = ContactParams.from_material(2100.0, mesh.characteristic_length, cont.mean_boundary_edge(), mutual=False)
    cm = ContactModel.build(cont, idx, params)
    X = model.X.copy()
    shift = (ny - 2) * SQRT3
    arm = (X[:, 1] > shift + 0.5) & (X[:, 0] > 3.0)
    x = X.copy()
    x[arm, 1] -= shift + overlap
    # facing surfaces: top of the lower arm and bottom of the upper arm, away from the fold
    # (both arms are one cell thick, so every node is on a surface)
    low_top = (X[:, 1] > 0.6 * SQRT3) & (X[:, 1] < 2.0 * SQRT3) & (X[:, 0] > 3.0)
    up_bottom = arm & (X[:, 1] < (ny - 1) * SQRT3 + 0.6 * SQRT3)
    return cm, X, x, low_top | up_bottom


def random_hexagon(rng, concave=True):
    """Star-shaped hexagon about the origin; strongly varying radii make it concave."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, 6))
    ang = ang + np.linspace(0, 0.4, 6)  # keep angles apart
    lo = 0.3 if concave else 0.95
    r = rng.uniform(lo, 1.0, 6)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def interior_points(poly, n, rng):
    shape = shapely.Polygon(poly)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(4 * n, 2))
        ok = shapely.contains_xy(shape, cand[:, 0], cand[:, 1])
        # stay clear of the boundary where the gradient degrades
        far = shapely.distance(shape.exterior, shapely.points(cand)) > 1e-6
        out = np.vstack([out, cand[ok & far]])
    return out[:n]


def raw_nearest(cm, x):
    """Brute-force nearest non-adjacent segment per slave point, ignoring orientation."""
    pts, _, _, seg = cm.slave_points(x)
    a, b = x[cm.segments[:, 0]], x[cm.segments[:, 1]]
    out = []
    for q, p in enumerate(pts):
        sq = seg[q]
        best, best_d = -1, np.inf
        for j in range(len(cm.segments)):
            if cm.seg_loop[j] == cm.seg_loop[sq]:
                dl = abs(cm.seg_pos[j] - cm.seg_pos[sq])
                if min(dl, cm.loop_len[cm.seg_loop[sq]] - dl) <= 1:
                    continue
            _, xp, _ = closest_point(p, a[j], b[j])
            dist = np.linalg.norm(p - xp)
            if dist < best_d:
                best, best_d = j, dist
        out.append(best)
    return np.array(out)
