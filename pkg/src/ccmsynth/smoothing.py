"""Boundary smoothing, two-stage cell removal and element-flip detection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .design import material_state, rigid_surfaces
from .errors import EmptyContinuum, FlippedElement
from .mesh import SQRT3, BoundaryChain, HexMesh, extract_boundary

logger = logging.getLogger(__name__)

DEFAULT_JACOBIAN_FLOOR = 0.05


@dataclass
class Continuum:
    mesh: HexMesh
    retained: np.ndarray  # bool per parent cell
    coords: np.ndarray  # (n_nodes, 2) reference coordinates after smoothing
    boundary: BoundaryChain
    rigid: list = field(default_factory=list)
    input_node: int | None = None
    output_node: int | None = None
    fixed_nodes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def cells(self) -> np.ndarray:
        return self.mesh.cells[self.retained]

    @property
    def active_nodes(self) -> np.ndarray:
        return np.unique(self.cells)

    def cell_areas(self) -> np.ndarray:
        pts = self.coords[self.cells]
        x, y = pts[..., 0], pts[..., 1]
        return 0.5 * (np.sum(x * np.roll(y, -1, axis=1), axis=1) - np.sum(np.roll(x, -1, axis=1) * y, axis=1))

    def volume_fraction(self) -> float:
        regular = 1.5 * SQRT3 * self.mesh.circumradius**2
        return float(self.cell_areas().sum() / (self.mesh.n_cells * regular))

    def mean_boundary_edge(self) -> float:
        lengths = [np.linalg.norm(self.coords[b] - self.coords[a]) for a, b in self.boundary.edges()]
        return float(np.mean(lengths))


def make_continuum(mesh: HexMesh, retained, masks=(), **ports) -> Continuum:
    retained = np.asarray(retained, dtype=bool)
    if not retained.any():
        raise EmptyContinuum("no cells retained")
    return Continuum(
        mesh=mesh,
        retained=retained.copy(),
        coords=mesh.nodes.copy(),
        boundary=extract_boundary(mesh, retained),
        rigid=rigid_surfaces(masks),
        **ports,
    )


def jacobian_ratios(continuum: Continuum) -> np.ndarray:
    """Per-cell minimum of det(J)/det(J_regular) over the centroid-fan triangles.

    The integration map of each fan triangle is affine, so its Jacobian is
    constant and proportional to the signed triangle area.
    """
    pts = continuum.coords[continuum.cells]
    c = pts.mean(axis=1, keepdims=True)
    d0 = pts - c
    d1 = np.roll(pts, -1, axis=1) - c
    tri = 0.5 * (d0[..., 0] * d1[..., 1] - d0[..., 1] * d1[..., 0])
    regular = SQRT3 / 4.0 * continuum.mesh.circumradius**2
    return tri.min(axis=1) / regular


def jacobian_ok(continuum: Continuum, floor: float = DEFAULT_JACOBIAN_FLOOR) -> bool:
    return bool(jacobian_ratios(continuum).min() > floor)


def chord_feet(coords: np.ndarray, boundary: BoundaryChain) -> tuple:
    """Foot of the perpendicular from every boundary node onto its midpoint chord.

    Returns ``(nodes, feet, distances)``.
    """
    nodes, feet = [], []
    for loop in boundary.loops:
        idx = np.asarray(loop)
        p = coords[np.roll(idx, 1)]
        k = coords[idx]
        n = coords[np.roll(idx, -1)]
        m1, m2 = 0.5 * (p + k), 0.5 * (k + n)
        t = m2 - m1
        tt = np.einsum("ij,ij->i", t, t)
        ok = tt > 1e-24
        s = np.where(ok, np.einsum("ij,ij->i", k - m1, t) / np.where(ok, tt, 1.0), 0.0)
        foot = np.where(ok[:, None], m1 + s[:, None] * t, k)
        nodes.append(idx)
        feet.append(foot)
    nodes = np.concatenate(nodes)
    feet = np.concatenate(feet)
    return nodes, feet, np.linalg.norm(feet - coords[nodes], axis=1)


def smooth_boundary(continuum: Continuum, beta: int, jacobian_floor: float = 0.0) -> Continuum:
    """Project boundary nodes onto the chords joining adjacent edge midpoints, ``beta`` times.

    All projections in a step use the coordinates from the start of that step.
    Raises ``FlippedElement`` when a fan-triangle Jacobian ratio drops to
    ``jacobian_floor`` or below.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    coords = continuum.coords.copy()
    out = replace(continuum, coords=coords)
    for step in range(1, int(beta) + 1):
        nodes, feet, _ = chord_feet(coords, continuum.boundary)
        coords[nodes] = feet
        ratios = jacobian_ratios(out)
        if ratios.min() <= jacobian_floor:
            bad = int(np.flatnonzero(continuum.retained)[np.argmin(ratios)])
            raise FlippedElement(step, bad)
    return out


def disk_hits_cells(mesh: HexMesh, x: float, y: float, r: float) -> np.ndarray:
    """True for cells whose regular hexagon has points strictly within distance ``r`` of (x, y)."""
    pts = mesh.nodes[mesh.cells]
    a = pts
    b = np.roll(pts, -1, axis=1)
    e = b - a
    w = np.array([x, y]) - a
    t = np.clip(np.einsum("cki,cki->ck", w, e) / np.einsum("cki,cki->ck", e, e), 0.0, 1.0)
    dist = np.linalg.norm(w - t[..., None] * e, axis=2).min(axis=1)
    cross = e[..., 0] * w[..., 1] - e[..., 1] * w[..., 0]
    inside = np.all(cross >= 0, axis=1)
    return inside | (dist < r)


def second_stage_cells(mesh: HexMesh, retained: np.ndarray, masks, rule: str = "intersect") -> np.ndarray:
    if rule == "none":
        return np.zeros_like(retained)
    if rule != "intersect":
        raise ValueError(f"unknown second-stage rule {rule!r}")
    hit = np.zeros(mesh.n_cells, dtype=bool)
    for m in masks:
        hit |= disk_hits_cells(mesh, m.x, m.y, m.r)
    return retained & hit


def two_stage_removal(
    mesh: HexMesh,
    masks,
    beta: int,
    rule: str = "intersect",
    jacobian_floor: float = 0.0,
    prune=None,
    **ports,
) -> Continuum:
    """Remove masked cells, smooth, remove the second-stage set, then smooth the regular remnant.

    ``prune`` optionally maps the stage-two retained mask to a reduced one
    (island removal) before the final smoothing.
    """
    retained = material_state(mesh, masks).astype(bool)
    if not retained.any():
        raise EmptyContinuum("all cells removed by masks")
    stage1 = smooth_boundary(make_continuum(mesh, retained, masks, **ports), beta, jacobian_floor)

    retained2 = stage1.retained & ~second_stage_cells(mesh, stage1.retained, masks, rule)
    if prune is not None and retained2.any():
        retained2 = prune(retained2)
    if not retained2.any():
        raise EmptyContinuum("all cells removed in second stage")
    logger.debug(
        "stage 1 kept %d cells, stage 2 kept %d", int(stage1.retained.sum()), int(retained2.sum())
    )
    stage2 = make_continuum(mesh, retained2, masks, **ports)
    return smooth_boundary(stage2, beta, jacobian_floor)
