"""Problem specification files and their runtime assembly.

A specification is line-oriented text with ``[section]`` headers and
``key = value`` lines; ``#`` starts a comment. Every key is optional except
the port locations, the fixed regions and the specified path. Ports are given
as coordinates (mm) and resolve to the nearest parent-mesh node; fixed
regions are boxes ``xmin ymin xmax ymax`` separated by ``;``.

Example::

    [domain]
    nx = 10
    ny = 10

    [boundary]
    input = 0 8.66
    direction = 1 0
    output = 15.5 8.66
    fixed = -0.1 -0.1 1.1 3.5; -0.1 13.8 1.1 17.4

    [objective]
    path = path.csv
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import DesignBounds, DesignVector, mask_grid
from .errors import InvalidArgument, SpecError
from .fem import MaterialParams, QuadratureRule, SolverSettings
from .fsd import ObjectiveWeights, PathDescriptor, descriptor, read_path
from .mesh import HexMesh, generate_honeycomb


def _point(text):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != 2:
        raise ValueError("expected two numbers")
    return tuple(vals)


def _boxes(text):
    boxes = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = [float(v) for v in chunk.replace(",", " ").split()]
        if len(vals) != 4:
            raise ValueError("each box needs 'xmin ymin xmax ymax'")
        if vals[0] > vals[2] or vals[1] > vals[3]:
            raise ValueError("box minimum exceeds maximum")
        boxes.append(tuple(vals))
    return tuple(boxes)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return "; ".join(" ".join(repr(float(v)) for v in box) for box in value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "auto") else float(t)


def _key(parse=float, default=dataclasses.MISSING, check=None):
    return field(default=default, metadata={"parse": parse, "check": check})


def _positive(v):
    return v > 0


@dataclass(frozen=True)
class DomainSpec:
    nx: int = _key(int, 25, _positive)
    ny: int = _key(int, 25, _positive)
    circumradius: float = _key(float, 1.0, _positive)


@dataclass(frozen=True)
class MaskSpec:
    nx: int = _key(int, 8, _positive)
    ny: int = _key(int, 8, _positive)
    radius: float | None = _key(_opt_float, None, lambda v: v is None or v > 0)
    contact: int = _key(int, 1, lambda v: v in (0, 1))
    f: float = _key(float, 0.5, lambda v: 0 <= v <= 1)


@dataclass(frozen=True)
class MaterialSpec:
    E: float = _key(float, 2100.0, _positive)
    nu: float = _key(float, 0.33, lambda v: 0 <= v < 0.5)
    plane: str = _key(str, "strain", lambda v: v in ("strain", "stress"))
    thickness: float = _key(float, 1.0, _positive)


@dataclass(frozen=True)
class BoundarySpec:
    input: tuple = _key(_point)
    output: tuple = _key(_point)
    fixed: tuple = _key(_boxes, check=lambda v: len(v) > 0)
    direction: tuple = _key(_point, (1.0, 0.0), lambda v: math.hypot(*v) > 0)
    force: float = _key(float, 100.0)


@dataclass(frozen=True)
class ObjectiveSpec:
    path: str = _key(str)
    w_a: float = _key(float, 100.0, lambda v: v >= 0)
    w_b: float = _key(float, 100.0, lambda v: v >= 0)
    w_L: float = _key(float, 1.0, lambda v: v >= 0)
    w_theta: float = _key(float, 0.1, lambda v: v >= 0)
    lambda_v: float = _key(float, 20.0, lambda v: v >= 0)
    volume_fraction: float = _key(float, 0.30, lambda v: 0 < v <= 1)
    harmonics: int = _key(int, 50, _positive)


@dataclass(frozen=True)
class AnalysisSpec:
    beta: int = _key(int, 10, lambda v: v >= 0)
    gauss_points: int = _key(int, 25, lambda v: v in (1, 3, 7, 25))
    load_steps: int = _key(int, 20, _positive)
    max_iter: int = _key(int, 30, _positive)
    tol: float = _key(float, 1e-8, _positive)
    max_halvings: int = _key(int, 4, lambda v: v >= 0)
    stage2: str = _key(str, "intersect", lambda v: v in ("intersect", "none"))
    jacobian_floor: float = _key(float, 0.0, lambda v: 0 <= v < 1)
    mutual: bool = _key(_bool, True)
    self_contact: bool = _key(_bool, True)
    eps_n_factor: float = _key(float, 50.0, _positive)
    eps_s_factor: float = _key(float, 4.0, _positive)
    g_tol_factor: float = _key(float, 1e-3, _positive)
    max_augmentations: int = _key(int, 10, _positive)


@dataclass(frozen=True)
class SearchSpec:
    pr: float = _key(float, 0.08, lambda v: 0 < v < 1)
    m_max: float = _key(float, 6.0, _positive)
    max_evals: int = _key(int, 20000, _positive)
    seed: int = _key(int, 0, lambda v: v >= 0)
    penalty: float = _key(float, 1e6, _positive)
    r_min: float = _key(float, 0.1, _positive)
    r_max: float = _key(float, 8.0, _positive)
    f_max: float = _key(float, 0.9, lambda v: 0 <= v < 1)
    force_limit: float = _key(float, 500.0, _positive)
    min_fixed: int = _key(int, 2, lambda v: v >= 1)
    checkpoint_every: int = _key(int, 100, _positive)


SECTIONS = {
    "domain": DomainSpec,
    "masks": MaskSpec,
    "material": MaterialSpec,
    "boundary": BoundarySpec,
    "objective": ObjectiveSpec,
    "analysis": AnalysisSpec,
    "search": SearchSpec,
}


@dataclass(frozen=True)
class ProblemSpec:
    domain: DomainSpec
    masks: MaskSpec
    material: MaterialSpec
    boundary: BoundarySpec
    objective: ObjectiveSpec
    analysis: AnalysisSpec
    search: SearchSpec

    def with_overrides(self, **sections) -> "ProblemSpec":
        """``with_overrides(search={"seed": 3})`` returns a validated copy."""
        parts = {}
        for name, changes in sections.items():
            if name not in SECTIONS:
                raise SpecError(f"unknown section [{name}]")
            cur = getattr(self, name)
            for key in changes:
                if key not in {f.name for f in dataclasses.fields(cur)}:
                    raise SpecError(f"unknown key '{key}' in [{name}]")
            new = dataclasses.replace(cur, **changes)
            _validate(name, new)
            parts[name] = new
        return dataclasses.replace(self, **parts)

    def scaled_mesh(self, k: int) -> "ProblemSpec":
        """Refine the honeycomb ``k`` times in each direction over the same domain."""
        if int(k) != k or k < 1:
            raise SpecError("mesh scale must be a positive integer")
        d = self.domain
        return self.with_overrides(domain={"nx": d.nx * k, "ny": d.ny * k, "circumradius": d.circumradius / k})


def _validate(name, section, line_of=None):
    for f in dataclasses.fields(section):
        check = f.metadata.get("check")
        value = getattr(section, f.name)
        if check is not None and not check(value):
            line = None if line_of is None else line_of.get(f.name)
            raise SpecError(f"value {_fmt(value)!r} out of range for '{f.name}' in [{name}]", line)


def parse_spec(text: str, base_dir=None) -> ProblemSpec:
    """Parse specification text; relative path references resolve against ``base_dir``."""
    raw: dict = {name: {} for name in SECTIONS}
    lines: dict = {name: {} for name in SECTIONS}
    section = None
    for lineno, full in enumerate(text.splitlines(), 1):
        line = full.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SpecError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise SpecError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise SpecError("key outside of any section", lineno)
        if "=" not in line:
            raise SpecError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        fields = {f.name: f for f in dataclasses.fields(SECTIONS[section])}
        if key not in fields:
            raise SpecError(f"unknown key '{key}' in [{section}]", lineno)
        if key in raw[section]:
            raise SpecError(f"duplicate key '{key}' in [{section}]", lineno)
        try:
            raw[section][key] = fields[key].metadata["parse"](value)
        except ValueError as exc:
            raise SpecError(f"bad value for '{key}' in [{section}]: {exc}", lineno) from None
        lines[section][key] = lineno

    parts = {}
    for name, cls in SECTIONS.items():
        try:
            parts[name] = cls(**raw[name])
        except TypeError:
            missing = [f.name for f in dataclasses.fields(cls)
                       if f.default is dataclasses.MISSING and f.name not in raw[name]]
            raise SpecError(f"missing required key(s) {', '.join(missing)} in [{name}]") from None
        _validate(name, parts[name], lines[name])

    obj = parts["objective"]
    p = Path(obj.path).expanduser()
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    parts["objective"] = dataclasses.replace(obj, path=str(p.resolve()))
    return ProblemSpec(**parts)


def load_spec(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read specification {path}: {exc.strerror}") from None
    return parse_spec(text, base_dir=path.parent)


def format_spec(spec: ProblemSpec) -> str:
    """Canonical text with every key written out, so defaults are explicit."""
    out = []
    for name in SECTIONS:
        section = getattr(spec, name)
        out.append(f"[{name}]")
        for f in dataclasses.fields(section):
            value = getattr(section, f.name)
            out.append(f"{f.name} = {'auto' if value is None else _fmt(value)}")
        out.append("")
    return "\n".join(out)


@dataclass
class Problem:
    """Everything a candidate evaluation needs, resolved once per run."""

    spec: ProblemSpec
    mesh: HexMesh
    input_node: int
    output_node: int
    fixed_nodes: np.ndarray
    direction: np.ndarray
    specified: PathDescriptor
    specified_points: np.ndarray
    weights: ObjectiveWeights
    bounds: DesignBounds
    material: MaterialParams
    quadrature: QuadratureRule
    settings: SolverSettings

    @classmethod
    def from_spec(cls, spec: ProblemSpec) -> "Problem":
        d, b, o, a, s = spec.domain, spec.boundary, spec.objective, spec.analysis, spec.search
        mesh = generate_honeycomb(d.nx, d.ny, d.circumradius)
        fixed = np.unique(np.concatenate([mesh.nodes_in_box(*box) for box in b.fixed]))
        if len(fixed) == 0:
            raise SpecError("fixed regions contain no mesh nodes")
        try:
            path = read_path(o.path)
        except OSError as exc:
            raise SpecError(f"cannot read path file {o.path}: {exc.strerror}") from None
        except InvalidArgument as exc:
            raise SpecError(str(exc)) from None
        weights = ObjectiveWeights(o.w_a, o.w_b, o.w_L, o.w_theta, o.lambda_v, o.volume_fraction)
        return cls(
            spec=spec,
            mesh=mesh,
            input_node=mesh.nearest_node(b.input),
            output_node=mesh.nearest_node(b.output),
            fixed_nodes=fixed,
            direction=np.asarray(b.direction, dtype=float) / math.hypot(*b.direction),
            specified=descriptor(path, o.harmonics),
            specified_points=path.points,
            weights=weights,
            bounds=DesignBounds.for_domain(mesh.domain_size, s.r_min, s.r_max, s.f_max, s.force_limit),
            material=MaterialParams(spec.material.E, spec.material.nu, spec.material.plane),
            quadrature=QuadratureRule(a.gauss_points),
            settings=SolverSettings(a.load_steps, a.max_iter, a.tol, a.max_halvings),
        )

    @property
    def initial_radius(self) -> float:
        m = self.spec.masks
        if m.radius is not None:
            return m.radius
        lx, ly = self.mesh.domain_size
        # second-stage removal widens each hole by about a cell, so start small
        return min(lx / m.nx, ly / m.ny) / 6.0

    def initial_design(self) -> DesignVector:
        m = self.spec.masks
        masks = mask_grid(self.mesh.domain_size, m.nx, m.ny, self.initial_radius, m.contact, m.f)
        return self.bounds.clamp(DesignVector(masks, self.spec.boundary.force))
