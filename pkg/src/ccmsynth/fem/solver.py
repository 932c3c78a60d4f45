"""Incremental Newton-Raphson with step halving and contact augmentation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..contact import ContactModel
from ..errors import AugmentationStall, NonConvergence, NonPositiveJacobian
from .model import FEModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    n_steps: int = 20
    max_iter: int = 30
    tol_r: float = 1e-8
    max_halvings: int = 4
    stagnation: float = 1e-10  # times the characteristic length


@dataclass(frozen=True)
class PointLoad:
    node: int  # compact node index
    direction: tuple
    magnitude: float

    def vector(self, n_dof: int) -> np.ndarray:
        f = np.zeros(n_dof)
        d = np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        f[2 * self.node : 2 * self.node + 2] = self.magnitude * d
        return f


@dataclass
class SolveState:
    u: np.ndarray
    step: int = 0
    converged: bool = False
    residual_history: list = field(default_factory=list)
    history: list = field(default_factory=list)  # displacement at each nominal load level
    iterations: int = 0
    contact_rows: list = field(default_factory=list)
    penetration_history: list = field(default_factory=list)  # per step: penetrations per augmentation
    active_history: list = field(default_factory=list)  # per step: active (slave, mode) sets per augmentation
    max_active: int = 0
    active_modes: set = field(default_factory=set)


def _active_set(state) -> frozenset:
    return frozenset(zip(state.slave[state.active].tolist(), state.mode[state.active].tolist()))


def _linear_solve(K, rhs):
    try:
        lu = spla.splu(K.tocsc())
    except RuntimeError as exc:
        raise NonConvergence(f"singular tangent: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise NonConvergence("non-finite Newton update")
    return x


class Solver:
    def __init__(self, model: FEModel, fixed_nodes, load: PointLoad, contact: ContactModel | None = None,
                 settings: SolverSettings = SolverSettings(), length_scale: float = 1.0):
        self.model = model
        self.contact = contact
        self.settings = settings
        self.length_scale = length_scale
        n = model.n_dof
        fixed = np.zeros(n, dtype=bool)
        fixed_nodes = np.asarray(fixed_nodes, dtype=np.int64)
        fixed[2 * fixed_nodes] = True
        fixed[2 * fixed_nodes + 1] = True
        self.free = np.flatnonzero(~fixed)
        self.f_ext = load.vector(n)

    def residual(self, u, load_factor, tangent=True):
        f, K = self.model.assemble(u, tangent)
        state = None
        if self.contact is not None:
            x = self.model.X + u.reshape(-1, 2)
            state = self.contact.detect(x)
            fc, Kc = self.contact.forces(x, state, self.model.n_dof, tangent)
            f = f + fc
            if tangent:
                K = K + Kc
        return f - load_factor * self.f_ext, K, state

    def newton(self, u, load_factor, record):
        s = self.settings
        fnorm = np.linalg.norm(load_factor * self.f_ext[self.free])
        target = s.tol_r * max(fnorm, 1e-12)
        u = u.copy()
        for it in range(1, s.max_iter + 1):
            R, K, state = self.residual(u, load_factor)
            rn = float(np.linalg.norm(R[self.free]))
            record.append(rn)
            if rn <= target:
                return u, state, it
            du = _linear_solve(K[self.free][:, self.free], -R[self.free])
            u[self.free] += du
            if np.linalg.norm(du) < s.stagnation * self.length_scale:
                _, _, state = self.residual(u, load_factor, tangent=False)
                return u, state, it
        raise NonConvergence(f"Newton-Raphson did not converge in {s.max_iter} iterations (|R| = {rn:.3e})")

    def increment(self, u, load_factor, record):
        """Equilibrium at one load level, with augmentation when contact is present."""
        if self.contact is None:
            u, state, it = self.newton(u, load_factor, record)
            return u, state, it, [], []
        params = self.contact.params
        pens, sets, total = [], [], 0
        for aug in range(params.max_augmentations):
            u, state, it = self.newton(u, load_factor, record)
            total += it
            pen = state.max_penetration()
            pens.append(pen)
            sets.append(_active_set(state))
            if not sets[-1]:
                break
            # converged once within tolerance and the active set has settled
            if pen <= params.g_tol and len(sets) >= 2 and sets[-1] == sets[-2]:
                break
            if pen > params.g_tol and len(pens) >= 3 and pens[-1] >= pens[-2] >= pens[-3]:
                raise AugmentationStall(f"penetration not decreasing: {pens[-3:]}")
            self.contact.update_multipliers(state)
        else:
            if pens[-1] > params.g_tol:
                raise AugmentationStall(f"penetration {pens[-1]:.3e} above tolerance after {len(pens)} augmentations")
            logger.debug("active set still changing after %d augmentations", len(pens))
        self.contact.commit(self.model.X + u.reshape(-1, 2))
        return u, state, total, pens, sets

    def solve(self, magnitude_scale: float = 1.0) -> SolveState:
        s = self.settings
        u = np.zeros(self.model.n_dof)
        out = SolveState(u=u, history=[u.copy()])
        if self.contact is not None:
            out.contact_rows = []
        for step in range(1, s.n_steps + 1):
            lf0 = magnitude_scale * (step - 1) / s.n_steps
            lf1 = magnitude_scale * step / s.n_steps
            u, state = self._advance(u, lf0, lf1, 0, out)
            out.step = step
            out.history.append(u.copy())
            if state is not None and self.contact is not None:
                out.contact_rows.extend(self.contact.report_rows(state, step))
                out.max_active = max(out.max_active, state.n_active)
                if state.mutual_pairs_exist:
                    out.active_modes.add("mutual")
                if state.self_pairs_exist:
                    out.active_modes.add("self")
        out.u = u
        out.converged = True
        return out

    def _advance(self, u, lf0, lf1, depth, out):
        saved = None if self.contact is None else self.contact.snapshot()
        try:
            record = []
            u_new, state, it, pens, sets = self.increment(u, lf1, record)
            out.residual_history.append(record)
            out.iterations += it
            if pens:
                out.penetration_history.append(pens)
                out.active_history.append(sets)
            return u_new, state
        except (NonConvergence, NonPositiveJacobian, AugmentationStall) as exc:
            if depth >= self.settings.max_halvings:
                raise
            logger.debug("halving load increment %.4g -> %.4g (%s)", lf0, lf1, exc)
            if saved is not None:
                self.contact.restore(saved)
            mid = 0.5 * (lf0 + lf1)
            u_mid, _ = self._advance(u, lf0, mid, depth + 1, out)
            return self._advance(u_mid, mid, lf1, depth + 1, out)
