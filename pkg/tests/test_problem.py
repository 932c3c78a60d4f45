import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA
from ccmsynth.errors import SpecError
from ccmsynth.problem import Problem, format_spec, load_spec, parse_spec

MINIMAL = """\
[boundary]
input = 0 8.66
output = 15.5 8.66
fixed = -0.1 -0.1 1.1 3.5; -0.1 13.8 1.1 17.4

[objective]
path = {path}
"""


@pytest.fixture
def minimal(tmp_path, mini_spec_path):
    path = mini_spec_path.parent / "mini_path.csv"
    return MINIMAL.format(path=path)


def test_defaults_filled(minimal):
    spec = parse_spec(minimal)
    assert (spec.domain.nx, spec.domain.ny, spec.domain.circumradius) == (25, 25, 1.0)
    assert (spec.masks.nx, spec.masks.ny, spec.masks.radius) == (8, 8, None)
    assert (spec.material.E, spec.material.nu, spec.material.plane) == (2100.0, 0.33, "strain")
    assert spec.analysis.gauss_points == 25 and spec.analysis.beta == 10
    assert spec.search.pr == 0.08
    assert spec.boundary.fixed == ((-0.1, -0.1, 1.1, 3.5), (-0.1, 13.8, 1.1, 17.4))
    assert spec.boundary.direction == (1.0, 0.0)


@pytest.mark.parametrize(
    "edit, line, words",
    [
        (lambda t: t.replace("[objective]", "[objectives]"), 6, "unknown section"),
        (lambda t: t.replace("input = 0 8.66", "inptu = 0 8.66"), 2, "inptu"),
        (lambda t: t.replace("input = 0 8.66", "input = 0 8.66\ninput = 1 1"), 3, "duplicate"),
        (lambda t: t.replace("input = 0 8.66", "input = 0"), 2, "input"),
        (lambda t: t.replace("input = 0 8.66", "input 0 8.66"), 2, "key = value"),
        (lambda t: "nx = 3\n" + t, 1, "outside"),
        (lambda t: t.replace("[boundary]", "[boundary"), 1, "header"),
        (lambda t: t + "[domain]\nnx = -4\n", 9, "out of range"),
        (lambda t: t + "[analysis]\ngauss_points = 5\n", 9, "gauss_points"),
        (lambda t: t.replace("1.1 3.5;", "0.5 -3.5;"), 4, "box"),
    ],
)
def test_parse_errors_name_line(minimal, edit, line, words):
    with pytest.raises(SpecError) as exc:
        parse_spec(edit(minimal))
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")
    assert words in str(exc.value)


def test_missing_required_keys(minimal):
    text = minimal.replace("output = 15.5 8.66\n", "")
    with pytest.raises(SpecError, match="output"):
        parse_spec(text)


def test_comments_and_blank_lines(minimal):
    text = "# header\n\n" + minimal.replace("input = 0 8.66", "input = 0 8.66   # the input port")
    assert parse_spec(text).boundary.input == (0.0, 8.66)


def test_relative_path_resolves_against_spec_dir(mini_spec_path):
    spec = load_spec(mini_spec_path)
    assert spec.objective.path == str((mini_spec_path.parent / "mini_path.csv").resolve())


def test_load_missing_file(tmp_path):
    with pytest.raises(SpecError, match="cannot read"):
        load_spec(tmp_path / "nope.spec")


def test_format_round_trip(mini_spec_path):
    spec = load_spec(mini_spec_path)
    text = format_spec(spec)
    assert parse_spec(text) == spec
    assert "radius = auto" in text


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.1, 5.0),
    st.floats(0.0, 0.49),
    st.integers(0, 2**31),
    st.sampled_from([1, 3, 7, 25]),
    st.booleans(),
)
def test_format_round_trip_property(a, nu, seed, gp, mutual):
    spec = load_spec(DATA / "mini.spec").with_overrides(
        domain={"circumradius": a},
        material={"nu": nu},
        search={"seed": seed},
        analysis={"gauss_points": gp, "mutual": mutual},
    )
    assert parse_spec(format_spec(spec)) == spec


def test_with_overrides(mini_spec_path):
    spec = load_spec(mini_spec_path)
    s2 = spec.with_overrides(search={"seed": 9}, analysis={"beta": 4})
    assert s2.search.seed == 9 and s2.analysis.beta == 4
    assert spec.search.seed == 1  # original untouched
    with pytest.raises(SpecError, match="bogus"):
        spec.with_overrides(search={"bogus": 1})
    with pytest.raises(SpecError, match="unknown section"):
        spec.with_overrides(nothing={})
    with pytest.raises(SpecError, match="out of range"):
        spec.with_overrides(analysis={"gauss_points": 4})


def test_scaled_mesh(mini_spec_path):
    spec = load_spec(mini_spec_path)
    s3 = spec.scaled_mesh(3)
    assert (s3.domain.nx, s3.domain.ny) == (30, 30)
    assert s3.domain.circumradius == pytest.approx(1 / 3)
    assert spec.scaled_mesh(1) == spec
    for bad in (0, -1, 1.5):
        with pytest.raises(SpecError):
            spec.scaled_mesh(bad)


def test_problem_from_spec(mini_spec_path):
    spec = load_spec(mini_spec_path)
    pb = Problem.from_spec(spec)
    mesh = pb.mesh
    b = spec.boundary
    # ports resolve to the nearest node (brute force)
    for node, p in ((pb.input_node, b.input), (pb.output_node, b.output)):
        d = np.linalg.norm(mesh.nodes - p, axis=1)
        assert d[node] == d.min()
    inside = np.zeros(mesh.n_nodes, bool)
    for x0, y0, x1, y1 in b.fixed:
        x, y = mesh.nodes.T
        inside |= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    np.testing.assert_array_equal(pb.fixed_nodes, np.flatnonzero(inside))
    assert np.linalg.norm(pb.direction) == pytest.approx(1.0)
    assert pb.specified.n == spec.objective.harmonics
    v0 = pb.initial_design()
    assert len(v0.masks) == spec.masks.nx * spec.masks.ny
    assert all(m.r == pytest.approx(pb.initial_radius) for m in v0.masks)
    assert v0.force == b.force


def test_problem_errors(mini_spec_path, tmp_path):
    spec = load_spec(mini_spec_path)
    with pytest.raises(SpecError, match="fixed regions"):
        Problem.from_spec(dataclasses.replace(
            spec, boundary=dataclasses.replace(spec.boundary, fixed=((100.0, 100.0, 101.0, 101.0),))))
    with pytest.raises(SpecError, match="path file"):
        Problem.from_spec(dataclasses.replace(
            spec, objective=dataclasses.replace(spec.objective, path=str(tmp_path / "none.csv"))))
