import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from ccmsynth.errors import DegeneratePolygon, InvalidArgument, NonPositiveJacobian
from ccmsynth.fem import (
    FEModel,
    MaterialParams,
    PointLoad,
    QuadratureRule,
    Solver,
    SolverSettings,
    cauchy_stress,
    first_piola,
    mvc_batch,
    mvc_shape,
    strain_energy,
    triangle_rule,
)
from ccmsynth.mesh import generate_honeycomb
from ccmsynth.smoothing import make_continuum, smooth_boundary

from helpers import interior_points, random_hexagon


# ---------------------------------------------------------------- shape functions

def test_vertex_kronecker():
    poly = generate_honeycomb(1, 1).nodes
    for k in range(6):
        N, _ = mvc_shape(poly, poly[k])
        expect = np.zeros(6)
        expect[k] = 1.0
        np.testing.assert_array_equal(N, expect)


def test_regular_centroid_equal_weights():
    poly = generate_honeycomb(1, 1).nodes
    N, dN = mvc_shape(poly, poly.mean(axis=0))
    np.testing.assert_allclose(N, 1 / 6, rtol=1e-14)
    np.testing.assert_allclose(dN.sum(axis=0), 0.0, atol=1e-13)


def test_edge_point_uses_linear_limit():
    poly = generate_honeycomb(1, 1).nodes
    p = 0.25 * poly[2] + 0.75 * poly[3]
    N, _ = mvc_shape(poly, p)
    np.testing.assert_allclose(N[[2, 3]], [0.25, 0.75], atol=1e-14)
    assert N.sum() == pytest.approx(1.0)


def test_gradients_match_finite_differences(rng):
    for _ in range(20):
        poly = random_hexagon(rng)
        diam = np.max(np.linalg.norm(poly[:, None] - poly[None], axis=2))
        x = interior_points(poly, 1, rng)[0]
        _, dN = mvc_shape(poly, x)
        h = 1e-6 * diam
        fd = np.empty((6, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd[:, k] = (mvc_shape(poly, x + e)[0] - mvc_shape(poly, x - e)[0]) / (2 * h)
        assert np.linalg.norm(dN - fd) <= 1e-5 * np.linalg.norm(dN)


def test_convex_values_nonnegative(rng):
    for _ in range(20):
        poly = random_hexagon(rng, concave=False)
        if not shapely.Polygon(poly).convex_hull.equals(shapely.Polygon(poly)):
            continue
        N, _ = mvc_batch(poly, interior_points(poly, 200, rng))
        assert N.min() >= -1e-14


@pytest.mark.parametrize(
    "poly",
    [
        [[0, 0], [1, 0]],
        [[0, 0], [1, 0], [1, 0], [0, 1]],
        [[0, 0], [1, 0], [2, 0], [3, 0]],
    ],
)
def test_degenerate_polygon(poly):
    with pytest.raises(DegeneratePolygon):
        mvc_shape(np.array(poly, dtype=float), [0.5, 0.1])


# ---------------------------------------------------------------- material

def test_lame_constants():
    mat = MaterialParams(2100.0, 0.33)
    # mu = 2100 / 2.66, Lambda = 2 mu 0.33 / 0.34 = 2100 * 0.33 / (1.33 * 0.34)
    assert mat.mu == pytest.approx(789.4736842105263, rel=1e-9)
    assert mat.lam == pytest.approx(1532.5077399380805, rel=1e-9)
    assert mat.lam == pytest.approx(2100 * 0.33 / (1.33 * 0.34), rel=1e-12)


def test_material_validation():
    for kw in ({"E": 0.0}, {"nu": 0.5}, {"nu": -0.1}, {"plane": "axisym"}):
        with pytest.raises(InvalidArgument):
            MaterialParams(**kw)


@pytest.mark.parametrize("plane", ["strain", "stress"])
def test_identity_is_stress_free(plane):
    mat = MaterialParams(plane=plane)
    assert np.array_equal(cauchy_stress(np.eye(2), mat), np.zeros((2, 2)))
    P, _ = first_piola(np.eye(2)[None], mat)
    assert np.array_equal(P[0], np.zeros((2, 2)))
    assert strain_energy(np.eye(2)[None], mat)[0] == 0.0


def test_simple_shear():
    mat = MaterialParams()
    g = 1e-4
    sig = cauchy_stress(np.array([[1.0, g], [0.0, 1.0]]), mat)
    assert sig[0, 1] == pytest.approx(mat.mu * g, rel=1e-6)
    np.testing.assert_allclose(sig, sig.T)


def test_cauchy_formula(rng):
    mat = MaterialParams()
    F = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    J = np.linalg.det(F)
    expect = mat.mu / J * (F @ F.T - np.eye(2)) + mat.lam / J * np.log(J) * np.eye(2)
    np.testing.assert_allclose(cauchy_stress(F, mat), expect, rtol=1e-13, atol=1e-10)


def test_negative_jacobian_raises():
    F = np.array([[-1.0, 0.0], [0.0, 1.0]])
    mat = MaterialParams()
    for fn in (lambda: cauchy_stress(F, mat), lambda: first_piola(F[None], mat), lambda: strain_energy(F[None], mat)):
        with pytest.raises(NonPositiveJacobian):
            fn()


@pytest.mark.parametrize("plane", ["strain", "stress"])
def test_piola_and_tangent_are_derivatives(plane, rng):
    mat = MaterialParams(plane=plane)
    F = np.eye(2) + 0.15 * rng.normal(size=(5, 2, 2))
    P, A = first_piola(F, mat)
    h = 1e-6
    for i in range(2):
        for j in range(2):
            d = np.zeros((2, 2))
            d[i, j] = h
            dW = (strain_energy(F + d, mat) - strain_energy(F - d, mat)) / (2 * h)
            np.testing.assert_allclose(P[:, i, j], dW, rtol=1e-6, atol=1e-6)
            dP = (first_piola(F + d, mat, False)[0] - first_piola(F - d, mat, False)[0]) / (2 * h)
            np.testing.assert_allclose(A[:, :, :, i, j], dP, rtol=1e-6, atol=1e-5)


def test_plane_stress_zero_out_of_plane_stress(rng):
    from ccmsynth.fem.material import _inv_det, _stretch33

    mat = MaterialParams(plane="stress")
    F = np.eye(2) + 0.2 * rng.normal(size=(6, 2, 2))
    _, J = _inv_det(F)
    s = _stretch33(F, J, mat)
    s33 = mat.mu * (s * s - 1) + mat.lam * np.log(J * s)
    np.testing.assert_allclose(s33, 0.0, atol=1e-9)


# ---------------------------------------------------------------- quadrature

@pytest.mark.parametrize("n,degree", [(1, 1), (3, 2), (7, 5), (25, 8)])
def test_triangle_rules_exact_to_degree(n, degree):
    bary, w = triangle_rule(n)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    s, t = bary[:, 1], bary[:, 2]
    from math import factorial

    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            exact = 2 * factorial(p) * factorial(q) / factorial(p + q + 2)  # over reference area 1/2
            assert np.dot(w, s**p * t**q) == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_unsupported_rule():
    with pytest.raises(ValueError):
        QuadratureRule(4)


@pytest.mark.parametrize("n", [1, 3, 7, 25])
def test_fan_weights_sum_to_area(n, rng):
    polys = np.stack([random_hexagon(rng) for _ in range(8)])
    pts, w = QuadratureRule(n).cell_points(polys)
    areas = [shapely.Polygon(p).area for p in polys]
    np.testing.assert_allclose(w.sum(axis=1), areas, rtol=1e-12)
    assert pts.shape == (8, 6 * n, 2)


# ---------------------------------------------------------------- assembly

def _strip_model(nx=5, ny=2, plane="strain", n_gp=3, beta=2):
    mesh = generate_honeycomb(nx, ny)
    c = smooth_boundary(make_continuum(mesh, np.ones(mesh.n_cells, bool)), beta)
    return mesh, c, FEModel.build(c, MaterialParams(plane=plane), QuadratureRule(n_gp))


def test_zero_displacement_zero_force():
    _, _, model = _strip_model()
    f, K = model.assemble(np.zeros(model.n_dof))
    assert np.array_equal(f, np.zeros(model.n_dof))
    assert K.shape == (model.n_dof, model.n_dof)


def test_rigid_translation_force_free():
    _, _, model = _strip_model()
    u = np.tile([0.37, -1.2], model.n_nodes)
    f, K = model.assemble(u)
    assert np.abs(f).max() <= 1e-10 * abs(K).max()


def test_rigid_rotation_force_free():
    _, _, model = _strip_model()
    a = 0.9
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    u = (model.X @ R.T - model.X).ravel()
    f, K = model.assemble(u)
    assert np.abs(f).max() <= 1e-9 * abs(K).max()


@pytest.mark.parametrize("plane", ["strain", "stress"])
def test_tangent_matches_finite_differences(plane, rng):
    _, _, model = _strip_model(plane=plane)
    u = 0.05 * rng.normal(size=model.n_dof)
    _, K = model.assemble(u)
    K = K.toarray()
    h = 1e-6
    fd = np.empty_like(K)
    for j in range(model.n_dof):
        e = np.zeros(model.n_dof)
        e[j] = h
        fd[:, j] = (model.assemble(u + e, False)[0] - model.assemble(u - e, False)[0]) / (2 * h)
    assert np.linalg.norm(K - fd) <= 1e-5 * np.linalg.norm(fd)
    np.testing.assert_allclose(K, K.T, atol=1e-8 * np.abs(K).max())


def test_force_is_energy_gradient(rng):
    _, _, model = _strip_model(nx=3, ny=1)
    u = 0.05 * rng.normal(size=model.n_dof)
    f, _ = model.assemble(u, False)
    h = 1e-6
    g = np.empty_like(f)
    for j in range(model.n_dof):
        e = np.zeros(model.n_dof)
        e[j] = h
        g[j] = (model.energy(u + e) - model.energy(u - e)) / (2 * h)
    assert np.linalg.norm(f - g) <= 1e-5 * np.linalg.norm(f)


def test_inverted_state_raises():
    mesh, _, model = _strip_model()
    # a mirror image turns every cell inside out
    u = (np.column_stack([-model.X[:, 0], model.X[:, 1]]) - model.X).ravel()
    with pytest.raises(NonPositiveJacobian) as exc:
        model.assemble(u)
    assert exc.value.cell in set(model.cell_ids.tolist())


# ---------------------------------------------------------------- solver

def _cantilever(nx=6, ny=2):
    mesh, c, model = _strip_model(nx, ny, n_gp=7, beta=0)
    idx = model.compact_index(mesh.n_nodes)
    fixed = idx[mesh.nodes_in_box(-0.1, -1, 0.6, 100)]
    tip = int(idx[mesh.nearest_node([mesh.domain_size[0], mesh.domain_size[1] / 2])])
    return mesh, model, fixed, tip


def test_zero_load():
    mesh, model, fixed, tip = _cantilever()
    sol = Solver(model, fixed, PointLoad(tip, (0, -1), 0.0), settings=SolverSettings(n_steps=3)).solve()
    assert np.array_equal(sol.u, np.zeros(model.n_dof))
    assert all(len(r) == 1 for r in sol.residual_history)


def test_single_hexagon_small_load_matches_linear_solve():
    mesh = generate_honeycomb(1, 1)
    c = make_continuum(mesh, np.ones(1, bool))
    model = FEModel.build(c, MaterialParams(), QuadratureRule(25))
    fixed = [3]  # left vertex
    free_side = [4, 2]
    load = PointLoad(0, (0.0, -1.0), 1e-3)
    solver = Solver(model, fixed + free_side[:1], load, settings=SolverSettings(n_steps=1))
    sol = solver.solve()
    _, K0 = model.assemble(np.zeros(model.n_dof))
    free = solver.free
    lin = np.zeros(model.n_dof)
    lin[free] = np.linalg.solve(K0.toarray()[np.ix_(free, free)], load.vector(model.n_dof)[free])
    assert np.linalg.norm(sol.u - lin) <= 0.01 * np.linalg.norm(lin)


def test_step_doubling_path_independent():
    mesh, model, fixed, tip = _cantilever()
    tips = []
    for n in (10, 20):
        sol = Solver(model, fixed, PointLoad(tip, (0, -1), 40.0), settings=SolverSettings(n_steps=n),
                     length_scale=mesh.characteristic_length).solve()
        tips.append(sol.u.reshape(-1, 2)[tip])
        assert sol.converged
    assert np.linalg.norm(tips[1]) > 0.5  # genuinely large deflection
    assert np.linalg.norm(tips[0] - tips[1]) < 0.005 * np.linalg.norm(tips[1])


def test_converged_residual_below_tolerance():
    mesh, model, fixed, tip = _cantilever()
    s = SolverSettings(n_steps=5)
    solver = Solver(model, fixed, PointLoad(tip, (0, -1), 20.0), settings=s)
    sol = solver.solve()
    R, _, _ = solver.residual(sol.u, 1.0, tangent=False)
    assert np.linalg.norm(R[solver.free]) <= s.tol_r * 20.0
    assert len(sol.history) == 6


def test_point_load_direction_normalized():
    f = PointLoad(1, (3.0, 4.0), 10.0).vector(6)
    np.testing.assert_allclose(f, [0, 0, 6.0, 8.0, 0, 0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partition_of_unity_property(seed):
    rng = np.random.default_rng(seed)
    poly = random_hexagon(rng)
    pts = interior_points(poly, 20, rng)
    N, dN = mvc_batch(poly, pts)
    diam = np.max(np.linalg.norm(poly[:, None] - poly[None], axis=2))
    assert np.abs(N.sum(axis=1) - 1).max() <= 1e-12
    assert np.linalg.norm(N @ poly - pts, axis=1).max() <= 1e-10 * diam
    np.testing.assert_allclose(dN.sum(axis=1), 0.0, atol=1e-9)
