"""Negative circular masks, the design vector, and rigid contact surfaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument
from .mesh import HexMesh

R_MIN, R_MAX = 0.1, 8.0
F_MAX = 0.9
FORCE_LIMIT = 500.0


@dataclass(frozen=True)
class Mask:
    x: float
    y: float
    r: float
    s: int = 0
    f: float = 0.0


@dataclass(frozen=True)
class DesignVector:
    masks: tuple
    force: float

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))

    @property
    def n_masks(self) -> int:
        return len(self.masks)

    def to_array(self) -> np.ndarray:
        flat = [v for m in self.masks for v in (m.x, m.y, m.r, float(m.s), m.f)]
        return np.array(flat + [self.force], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "DesignVector":
        arr = np.asarray(arr, dtype=float)
        if (len(arr) - 1) % 5:
            raise InvalidArgument(f"design array length {len(arr)} is not 5M+1")
        masks = [
            Mask(float(x), float(y), float(r), int(round(s)), float(f))
            for x, y, r, s, f in arr[:-1].reshape(-1, 5)
        ]
        return cls(masks, float(arr[-1]))


@dataclass(frozen=True)
class RigidSurface:
    center: tuple
    radius: float
    motionless: bool = field(default=True)

    def polygon(self, h: float) -> np.ndarray:
        """Counter-clockwise vertices of the segment discretization for edge length ``h``."""
        n = max(16, math.ceil(2 * math.pi * self.radius / h))
        t = 2 * math.pi * np.arange(n) / n
        cx, cy = self.center
        return np.column_stack([cx + self.radius * np.cos(t), cy + self.radius * np.sin(t)])


def material_state(mesh: HexMesh, masks) -> np.ndarray:
    """Binary material per cell: 0 iff the cell centroid lies strictly inside a mask."""
    rho = np.ones(mesh.n_cells, dtype=np.int8)
    cen = mesh.centroids
    for m in masks:
        d2 = (cen[:, 0] - m.x) ** 2 + (cen[:, 1] - m.y) ** 2
        rho[d2 < m.r * m.r] = 0
    return rho


def rigid_surfaces(masks) -> list:
    return [RigidSurface((m.x, m.y), m.f * m.r) for m in masks if m.s == 1 and m.f * m.r > 0]


def mask_grid(domain_size, nx: int, ny: int, radius: float, s: int = 1, f: float = 0.5) -> list:
    """Masks centered on a regular ``nx`` by ``ny`` grid over the domain."""
    lx, ly = domain_size
    return [
        Mask((i + 0.5) * lx / nx, (j + 0.5) * ly / ny, float(radius), int(s), float(f))
        for j in range(ny)
        for i in range(nx)
    ]


@dataclass(frozen=True)
class DesignBounds:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    r_min: float = R_MIN
    r_max: float = R_MAX
    f_max: float = F_MAX
    force_limit: float = FORCE_LIMIT

    @classmethod
    def for_domain(cls, domain_size, r_min=R_MIN, r_max=R_MAX, f_max=F_MAX, force_limit=FORCE_LIMIT):
        lx, ly = domain_size
        return cls(-r_max, lx + r_max, -r_max, ly + r_max, r_min, r_max, f_max, force_limit)

    def clamp(self, v: DesignVector) -> DesignVector:
        masks = [
            replace(
                m,
                x=min(max(m.x, self.xmin), self.xmax),
                y=min(max(m.y, self.ymin), self.ymax),
                r=min(max(m.r, self.r_min), self.r_max),
                s=1 if m.s else 0,
                f=min(max(m.f, 0.0), self.f_max),
            )
            for m in v.masks
        ]
        force = min(max(v.force, -self.force_limit), self.force_limit)
        return DesignVector(masks, force)

    def contains(self, v: DesignVector) -> bool:
        return v == self.clamp(v)


def write_design(v: DesignVector, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_design(v))


def format_design(v: DesignVector) -> str:
    lines = [f"{float(m.x)!r} {float(m.y)!r} {float(m.r)!r} {int(m.s):d} {float(m.f)!r}" for m in v.masks]
    lines.append(f"F {float(v.force)!r}")
    return "\n".join(lines) + "\n"


def parse_design(text: str) -> DesignVector:
    masks, force = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "F":
            if len(parts) != 2:
                raise InvalidArgument(f"line {lineno}: expected 'F <value>'")
            force = float(parts[1])
            continue
        if force is not None:
            raise InvalidArgument(f"line {lineno}: mask line after force line")
        if len(parts) != 5:
            raise InvalidArgument(f"line {lineno}: expected 'x y r s f', got {len(parts)} fields")
        x, y, r, s, f = parts
        if s not in ("0", "1"):
            raise InvalidArgument(f"line {lineno}: contact flag must be 0 or 1")
        masks.append(Mask(float(x), float(y), float(r), int(s), float(f)))
    if force is None:
        raise InvalidArgument("missing final 'F <value>' line")
    return DesignVector(masks, force)


def read_design(path) -> DesignVector:
    with open(path) as fh:
        return parse_design(fh.read())
