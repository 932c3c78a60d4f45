"""Honeycomb parent tessellation of a rectangular design domain.

Hexagons are flat-top (a vertex at angle 0) and columns are staggered
vertically: odd columns sit half a cell higher than even ones. With
circumradius ``a`` every vertex lies on the lattice ``(i*a/2, j*sqrt(3)*a/2)``,
so nodes are deduplicated through integer lattice keys and node identity is
exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class HexMesh:
    nodes: np.ndarray  # (n_nodes, 2) mm
    cells: np.ndarray  # (n_cells, 6) counter-clockwise node indices
    nx: int
    ny: int
    circumradius: float
    domain_size: tuple = field(default=(0.0, 0.0))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def characteristic_length(self) -> float:
        return float(max(self.domain_size))

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.cells].mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted node pairs, shape (n_edges, 2)."""
        return np.array(sorted(self._edge_cells), dtype=np.int64)

    @cached_property
    def _edge_cells(self) -> dict:
        out: dict = {}
        for c, cell in enumerate(self.cells):
            for k in range(6):
                a, b = int(cell[k]), int(cell[(k + 1) % 6])
                out.setdefault((min(a, b), max(a, b)), []).append(c)
        return out

    def edge_cells(self, a: int, b: int) -> list:
        return self._edge_cells.get((min(a, b), max(a, b)), [])

    @cached_property
    def neighbors(self) -> list:
        """Edge-adjacent cells for each cell."""
        nbr = [set() for _ in range(self.n_cells)]
        for cs in self._edge_cells.values():
            if len(cs) == 2:
                nbr[cs[0]].add(cs[1])
                nbr[cs[1]].add(cs[0])
        return [sorted(s) for s in nbr]

    @cached_property
    def cell_pairs(self) -> np.ndarray:
        """Pairs of cells sharing an edge, shape (n_pairs, 2)."""
        pairs = [cs for cs in self._edge_cells.values() if len(cs) == 2]
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def node_cells(self) -> list:
        out = [[] for _ in range(self.n_nodes)]
        for c, cell in enumerate(self.cells):
            for n in cell:
                out[int(n)].append(c)
        return out

    def cell_area(self, cell: int, coords: np.ndarray | None = None) -> float:
        pts = (self.nodes if coords is None else coords)[self.cells[cell]]
        return polygon_area(pts)

    def nearest_node(self, point) -> int:
        d = np.linalg.norm(self.nodes - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def nodes_in_box(self, xmin, ymin, xmax, ymax) -> np.ndarray:
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        tol = 1e-9
        inside = (x >= xmin - tol) & (x <= xmax + tol) & (y >= ymin - tol) & (y <= ymax + tol)
        return np.flatnonzero(inside)


def polygon_area(pts) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    pts = np.asarray(pts, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def generate_honeycomb(nx: int, ny: int, cell_circumradius: float = 1.0) -> HexMesh:
    """Build an ``nx`` by ``ny`` staggered honeycomb of regular hexagons.

    The nominal domain is ``L_x = 1.5*a*nx + 0.5*a`` wide and ``L_y = sqrt(3)*a*ny``
    tall; odd columns protrude half a cell above ``L_y``.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgument(f"cell counts must be positive integers, got ({nx}, {ny})")
    if not cell_circumradius > 0:
        raise InvalidArgument(f"circumradius must be positive, got {cell_circumradius}")
    nx, ny, a = int(nx), int(ny), float(cell_circumradius)

    # vertex k offset in lattice units (a/2 horizontally, sqrt(3)a/2 vertically)
    dx = (2, 1, -1, -2, -1, 1)
    dy = (0, 1, 1, 0, -1, -1)
    keys: dict = {}
    cells = np.empty((nx * ny, 6), dtype=np.int64)
    c = 0
    for j in range(ny):
        for i in range(nx):
            cx, cy = 2 + 3 * i, 1 + 2 * j + (i % 2)
            for k in range(6):
                key = (cx + dx[k], cy + dy[k])
                cells[c, k] = keys.setdefault(key, len(keys))
            c += 1
    lattice = np.array(list(keys), dtype=float)
    nodes = np.column_stack([lattice[:, 0] * a / 2.0, lattice[:, 1] * SQRT3 * a / 2.0])
    domain = (1.5 * a * nx + 0.5 * a, SQRT3 * a * ny)
    return HexMesh(nodes=nodes, cells=cells, nx=nx, ny=ny, circumradius=a, domain_size=domain)


def cell_centroid(mesh: HexMesh, cell: int, coords: np.ndarray | None = None) -> np.ndarray:
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    pts = (mesh.nodes if coords is None else coords)[mesh.cells[cell]]
    return pts.mean(axis=0)


@dataclass
class BoundaryChain:
    """Closed boundary loops of a retained cell set.

    Each loop is a node-index sequence; consecutive entries (cyclically) are the
    directed boundary edges, oriented so the material lies on the left. Exterior
    loops therefore run counter-clockwise and holes clockwise.
    """

    loops: list
    exterior: list

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    def edges(self):
        for loop in self.loops:
            n = len(loop)
            for k in range(n):
                yield loop[k], loop[(k + 1) % n]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        if not self.loops:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([np.asarray(l, dtype=np.int64) for l in self.loops]))


def extract_boundary(mesh: HexMesh, retained, coords: np.ndarray | None = None) -> BoundaryChain:
    retained = np.asarray(retained, dtype=bool)
    if not retained.any():
        raise InvalidArgument("retained cell set is empty")
    coords = mesh.nodes if coords is None else coords

    # directed edges from each retained cell's CCW ordering; interior edges cancel
    directed: dict = {}
    for c in np.flatnonzero(retained):
        cell = mesh.cells[c]
        for k in range(6):
            a, b = int(cell[k]), int(cell[(k + 1) % 6])
            if (b, a) in directed:
                del directed[(b, a)]
            else:
                directed[(a, b)] = c
    succ: dict = {}
    for a, b in directed:
        # honeycomb vertices have degree 3, so a node never starts two boundary edges
        assert a not in succ, "pinch point in honeycomb boundary"
        succ[a] = b

    loops, exterior = [], []
    seen = set()
    for start in sorted(succ):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        nxt = succ[start]
        while nxt != start:
            loop.append(nxt)
            seen.add(nxt)
            nxt = succ[nxt]
        loops.append(loop)
        exterior.append(polygon_area(coords[loop]) > 0)
    return BoundaryChain(loops=loops, exterior=exterior)


def write_mesh(mesh: HexMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# nodes {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes.tolist()):
            fh.write(f"{i} {x!r} {y!r}\n")
        fh.write(f"# cells {mesh.n_cells}\n")
        for i, cell in enumerate(mesh.cells):
            fh.write(f"{i} " + " ".join(str(int(n)) for n in cell) + "\n")
