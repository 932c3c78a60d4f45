"""Random-mutation hill climbing over mask designs.

Each candidate goes through mask removal, smoothing, a feasibility gate,
a contact-aware nonlinear solve and the Fourier-descriptor objective. Any
failure along the way maps to a fixed penalty so the search never stops on a
bad candidate.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .contact import ContactModel, ContactParams, rigid_overlaps
from .design import DesignBounds, DesignVector, format_design
from .errors import CCMError
from .fem import FEModel, PointLoad, Solver, SolveState
from .fsd import ObjectiveBreakdown, PathPolyline, descriptor, objective_terms
from .mesh import HexMesh
from .problem import Problem
from .smoothing import Continuum, two_stage_removal

logger = logging.getLogger(__name__)

FEASIBLE = "feasible"
NO_INPUT = "no-input-port"
NO_OUTPUT = "no-output-port"
NO_FIXED = "insufficient-fixed-nodes"
DISCONNECTED = "disconnected"
RIGID_OVERLAP = "rigid-overlap"


@dataclass(frozen=True)
class SearchConfig:
    pr: float = 0.08
    m_max: float = 6.0
    max_evals: int = 20000
    seed: int = 0
    penalty: float = 1e6
    f_step: float = 1.0  # mutation scale of the contact-surface factor
    checkpoint_every: int = 100

    def __post_init__(self):
        if not 0.0 <= self.pr < 1.0:
            raise ValueError("pr must lie in [0, 1)")
        if not self.m_max > 0:
            raise ValueError("m_max must be positive")

    @classmethod
    def from_problem(cls, problem: Problem) -> "SearchConfig":
        s = problem.spec.search
        return cls(pr=s.pr, m_max=s.m_max, max_evals=s.max_evals, seed=s.seed, penalty=s.penalty,
                   checkpoint_every=s.checkpoint_every)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def mutate(v: DesignVector, cfg: SearchConfig, rng: np.random.Generator, bounds: DesignBounds) -> DesignVector:
    """One mutation pass over all 5M+1 variables, then clamping to the bounds.

    Every variable draws its own ``eta``, ``c`` and sign, whether or not it
    mutates, so the random stream advances identically for every design.
    """
    arr = v.to_array()
    n = len(arr)
    eta = rng.random(n)
    c = rng.random(n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    hit = eta < cfg.pr
    step = np.full(n, cfg.m_max)
    kind = np.arange(n) % 5
    kind[-1] = -1  # force
    step[kind == 4] = cfg.f_step
    out = arr.copy()
    cont = hit & (kind != 3)
    out[cont] = arr[cont] + sign[cont] * c[cont] * step[cont]
    flag = hit & (kind == 3)
    out[flag] = (c[flag] > 0.5).astype(float)
    return bounds.clamp(DesignVector.from_array(out))


def _cell_graph(mesh: HexMesh, retained: np.ndarray):
    """Component labels of retained cells under shared-edge adjacency."""
    ids = np.flatnonzero(retained)
    index = np.full(mesh.n_cells, -1, dtype=np.int64)
    index[ids] = np.arange(len(ids))
    pairs = mesh.cell_pairs
    pairs = index[pairs[retained[pairs].all(axis=1)]]
    adj = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(ids), len(ids)))
    _, labels = connected_components(adj, directed=False)
    full = np.full(mesh.n_cells, -1, dtype=np.int64)
    full[ids] = labels
    return full


def node_components(mesh: HexMesh, retained: np.ndarray, nodes) -> np.ndarray:
    """Component label per node (-1 when the node touches no retained cell)."""
    labels = _cell_graph(mesh, retained)
    out = []
    for n in np.atleast_1d(nodes):
        ls = {int(labels[c]) for c in mesh.node_cells[int(n)] if labels[c] >= 0}
        out.append(min(ls) if ls else -1)
    return np.array(out, dtype=np.int64)


def make_pruner(mesh: HexMesh, anchor: int, others=()):
    """Island removal: keep the component(s) touching the ``anchor`` node.

    When the anchor is gone, components touching any of ``others`` survive so
    the feasibility check can still report which port is missing.
    """
    others = np.asarray(others, dtype=np.int64)

    def touching(labels, nodes):
        return {int(labels[c]) for n in nodes for c in mesh.node_cells[int(n)] if labels[c] >= 0}

    def prune(retained):
        labels = _cell_graph(mesh, retained)
        good = touching(labels, [anchor]) or touching(labels, others)
        return retained & np.isin(labels, sorted(good))

    return prune


def feasibility(continuum: Continuum, min_fixed: int = 2) -> str:
    """Reason code for the first failed check, or ``FEASIBLE``."""
    mesh, retained = continuum.mesh, continuum.retained
    present = np.zeros(mesh.n_nodes, dtype=bool)
    present[continuum.active_nodes] = True
    if continuum.input_node is None or not present[continuum.input_node]:
        return NO_INPUT
    if continuum.output_node is None or not present[continuum.output_node]:
        return NO_OUTPUT
    fixed = np.asarray(continuum.fixed_nodes, dtype=np.int64)
    fixed = fixed[present[fixed]]
    if len(fixed) < min_fixed:
        return NO_FIXED
    labels = node_components(mesh, retained, [continuum.input_node, continuum.output_node])
    if labels[0] != labels[1]:
        return DISCONNECTED
    fixed_labels = node_components(mesh, retained, fixed)
    if np.count_nonzero(fixed_labels == labels[0]) < min_fixed:
        return DISCONNECTED
    if rigid_overlaps(continuum).any():
        return RIGID_OVERLAP
    return FEASIBLE


@dataclass
class Evaluation:
    design: DesignVector
    objective: float
    feasible: bool
    reason: str
    breakdown: ObjectiveBreakdown | None = None
    continuum: Continuum | None = None
    solution: SolveState | None = None
    path: np.ndarray | None = None
    volume_fraction: float | None = None
    seconds: float = 0.0

    @property
    def n_contact_pairs(self) -> int:
        return 0 if self.solution is None else self.solution.max_active


def build_continuum(design: DesignVector, problem: Problem) -> Continuum:
    a = problem.spec.analysis
    ports = dict(input_node=problem.input_node, output_node=problem.output_node, fixed_nodes=problem.fixed_nodes)
    others = np.concatenate([[problem.output_node], problem.fixed_nodes])
    return two_stage_removal(
        problem.mesh, design.masks, a.beta, rule=a.stage2, jacobian_floor=a.jacobian_floor,
        prune=make_pruner(problem.mesh, problem.input_node, others), **ports,
    )


def analyze(continuum: Continuum, problem: Problem, force: float, quadrature=None) -> tuple:
    """Nonlinear contact solve; returns the solve state and the output-node trajectory."""
    a = problem.spec.analysis
    model = FEModel.build(continuum, problem.material, quadrature or problem.quadrature,
                          problem.spec.material.thickness)
    index = model.compact_index(problem.mesh.n_nodes)
    fixed = index[continuum.fixed_nodes]
    fixed = fixed[fixed >= 0]
    contact = None
    if a.mutual or a.self_contact:
        L0 = problem.mesh.characteristic_length
        E = problem.material.E
        h = continuum.mean_boundary_edge()
        params = ContactParams(
            eps_n=a.eps_n_factor * E / L0, eps_s=a.eps_s_factor * E / L0, g_tol=a.g_tol_factor * h,
            max_augmentations=a.max_augmentations, mutual=a.mutual, self_contact=a.self_contact,
        )
        contact = ContactModel.build(continuum, index, params)
    load = PointLoad(int(index[problem.input_node]), tuple(problem.direction), float(force))
    solver = Solver(model, fixed, load, contact, problem.settings, problem.mesh.characteristic_length)
    sol = solver.solve()
    out = int(index[problem.output_node])
    path = np.array([model.X[out] + u.reshape(-1, 2)[out] for u in sol.history])
    return sol, path


def evaluate_candidate(design: DesignVector, problem: Problem, penalty: float = 1e6, quadrature=None) -> Evaluation:
    t0 = time.perf_counter()
    ev = Evaluation(design, penalty, False, "")
    try:
        cont = build_continuum(design, problem)
        ev.continuum = cont
        ev.volume_fraction = cont.volume_fraction()
        reason = feasibility(cont, problem.spec.search.min_fixed)
        if reason != FEASIBLE:
            ev.reason = reason
            return ev
        sol, path = analyze(cont, problem, design.force, quadrature)
        ev.solution, ev.path = sol, path
        actual = descriptor(PathPolyline(path), problem.specified.n)
        ev.breakdown = objective_terms(actual, problem.specified, problem.weights, ev.volume_fraction)
        ev.objective = ev.breakdown.total
        ev.feasible = True
        ev.reason = FEASIBLE
    except CCMError as exc:
        ev.reason = type(exc).__name__
        logger.debug("candidate penalized: %s", exc)
    finally:
        ev.seconds = time.perf_counter() - t0
    if not np.isfinite(ev.objective):
        ev.objective, ev.feasible, ev.reason = penalty, False, "non-finite objective"
    return ev


def evaluate(design: DesignVector, problem: Problem, penalty: float = 1e6) -> float:
    return evaluate_candidate(design, problem, penalty).objective


@dataclass
class TraceRecord:
    iteration: int
    feasible: bool
    objective: float
    best: float
    accepted: bool


@dataclass
class SearchTrace:
    records: list = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    @property
    def best(self) -> np.ndarray:
        return np.array([r.best for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "feasible", "objective", "best"])
            for r in self.records:
                w.writerow([r.iteration, int(r.feasible), repr(float(r.objective)), repr(float(r.best))])


@dataclass
class SearchResult:
    best: DesignVector
    best_eval: Evaluation
    trace: SearchTrace


def write_checkpoint(path, design: DesignVector, best: float, rng: np.random.Generator, trace: SearchTrace,
                     tail: int = 50) -> None:
    state = {
        "iteration": trace.records[-1].iteration if trace.records else 0,
        "best_objective": best,
        "design": format_design(design),
        "rng_state": rng.bit_generator.state,
        "trace_tail": [vars(r) for r in trace.records[-tail:]],
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(state, indent=1))
    tmp.replace(path)


def hill_climb(v0: DesignVector, problem: Problem, cfg: SearchConfig, checkpoint=None, callback=None) -> SearchResult:
    """Strict-improvement hill climbing with a budget of ``cfg.max_evals`` evaluations."""
    if cfg.max_evals < 1:
        raise ValueError("evaluation budget must be positive")
    rng = make_rng(cfg.seed)
    current = problem.bounds.clamp(v0)
    cur_eval = evaluate_candidate(current, problem, cfg.penalty)
    trace = SearchTrace()
    trace.append(TraceRecord(0, cur_eval.feasible, cur_eval.objective, cur_eval.objective, True))
    if callback:
        callback(0, cur_eval)
    for it in range(1, cfg.max_evals):
        cand = mutate(current, cfg, rng, problem.bounds)
        ev = evaluate_candidate(cand, problem, cfg.penalty)
        accepted = ev.objective < cur_eval.objective
        if accepted:
            current, cur_eval = cand, ev
        trace.append(TraceRecord(it, ev.feasible, ev.objective, cur_eval.objective, accepted))
        if callback:
            callback(it, ev)
        if checkpoint is not None and it % cfg.checkpoint_every == 0:
            write_checkpoint(checkpoint, current, cur_eval.objective, rng, trace)
    if checkpoint is not None:
        write_checkpoint(checkpoint, current, cur_eval.objective, rng, trace)
    return SearchResult(current, cur_eval, trace)


def with_seed(cfg: SearchConfig, seed: int) -> SearchConfig:
    return replace(cfg, seed=seed)
