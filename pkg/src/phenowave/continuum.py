"""Explicit finite-volume solver for the rescaled continuum system.

Unknowns live on the lattice nodes ``x_i = i*hx`` and ``y_j = j*hy`` (the same
nodes the individual-based engine uses).  Each node owns a control volume of
width ``hx`` (``hx/2`` at the two ends), so mass is measured with trapezoidal
weights and zero-flux boundaries telescope exactly.

Per unit of rescaled time the update is

    dn/dt = eps n_xx - (n mu(y) E_x)_x + R(y, rho) n / eps + eps n_yy
    dM/dt = M_xx + (int p n dy - kappa_M M) / eps
    dE/dt = -kappa_E E M / eps

with central diffusion, first-order upwind haptotactic flux and forward Euler.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ConfigError, InitialProfile, ModelParams, PhenotypeLaws

log = logging.getLogger(__name__)

SAFETY = 0.9
NEG_TOL = 1e-12


class SchemeError(RuntimeError):
    """The explicit update produced negative densities."""


def trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    if n > 1:
        w[0] = w[-1] = 0.5
    return w


def marginal_density(n: np.ndarray, hy: float) -> np.ndarray:
    """Trapezoidal quadrature of ``n`` over the last (phenotype) axis."""
    w = trapezoid_weights(n.shape[-1])
    return hy * (n @ w)


@dataclass(frozen=True)
class ContinuumGrid:
    nx: int
    ny: int
    hx: float
    hy: float

    @classmethod
    def from_params(cls, params: ModelParams, refine: int = 1, refine_y: int | None = None):
        refine_y = refine if refine_y is None else refine_y
        hx = params.dx / refine
        hy = params.dy / refine_y
        return cls(int(round(params.X / hx)) + 1, int(round(params.Y / hy)) + 1, hx, hy)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @property
    def wx(self) -> np.ndarray:
        return trapezoid_weights(self.nx)

    @property
    def wy(self) -> np.ndarray:
        return trapezoid_weights(self.ny)


@dataclass
class ContinuumState:
    n: np.ndarray
    M: np.ndarray
    E: np.ndarray
    t: float
    hy: float

    @property
    def rho(self) -> np.ndarray:
        return marginal_density(self.n, self.hy)

    def copy(self) -> "ContinuumState":
        return ContinuumState(self.n.copy(), self.M.copy(), self.E.copy(), self.t, self.hy)


@dataclass
class Snapshot:
    """Engine-agnostic field snapshot on a node grid (1D space)."""

    t: float
    x: np.ndarray
    y: np.ndarray
    n: np.ndarray
    rho: np.ndarray
    M: np.ndarray
    E: np.ndarray
    meta: dict = field(default_factory=dict)


class ContinuumSolver:
    def __init__(self, params: ModelParams, laws: PhenotypeLaws, grid: ContinuumGrid | None = None):
        if params.rho_max is None:
            raise ConfigError("rho_max must be resolved before building the continuum solver")
        self.params = params
        self.laws = laws
        self.grid = grid or ContinuumGrid.from_params(params)
        y = self.grid.y
        self.mu = laws.mu(y)
        self.r = laws.r(y)
        self.p = laws.p(y)
        self._wx = self.grid.wx
        self._wy = self.grid.wy
        self.max_advection_speed = 0.0

    # ---------------------------------------------------------------- state

    def initial_state(self, profile: InitialProfile, truncate: bool = True) -> ContinuumState:
        """Continuum analogue of the lattice initial data.

        With ``truncate`` the density is ``int(F) / (dx * dy)`` sampled at the
        solver nodes, which coincides with the lattice data on the lattice
        nodes and has the same compact support.  Without it the smooth
        ``F / (dx * dy)`` is used.
        """
        g, p = self.grid, self.params
        F = profile.density(g.x[:, None], g.y[None, :])
        if truncate:
            F = np.floor(F)
        n = F / (p.dx * p.dy)
        return ContinuumState(n, np.zeros(g.nx), np.full(g.nx, p.E_max), 0.0, g.hy)

    def state_from_fields(self, n, M, E, t=0.0) -> ContinuumState:
        return ContinuumState(np.asarray(n, float), np.asarray(M, float), np.asarray(E, float), t, self.grid.hy)

    # ---------------------------------------------------------------- operators

    def face_velocity(self, E: np.ndarray) -> np.ndarray:
        """Haptotactic velocity mu(y) E_x on the x-faces, shape (nx-1, ny)."""
        return (np.diff(E) / self.grid.hx)[:, None] * self.mu[None, :]

    def growth(self, rho: np.ndarray) -> np.ndarray:
        p = self.params
        return p.alpha * (self.r[None, :] - rho[:, None] / p.rho_max)

    def cell_rhs(self, n: np.ndarray, E: np.ndarray, rho: np.ndarray) -> np.ndarray:
        p, g = self.params, self.grid
        out = self.growth(rho) * n / p.eps
        if g.nx > 1:
            v = self.face_velocity(E)
            flux = (-p.eps / g.hx) * np.diff(n, axis=0)
            flux += np.maximum(v, 0.0) * n[:-1] - np.maximum(-v, 0.0) * n[1:]
            out[:-1] -= flux / (self._wx[:-1, None] * g.hx)
            out[1:] += flux / (self._wx[1:, None] * g.hx)
        if g.ny > 1:
            gflux = (-p.eps / g.hy) * np.diff(n, axis=1)
            out[:, :-1] -= gflux / (self._wy[None, :-1] * g.hy)
            out[:, 1:] += gflux / (self._wy[None, 1:] * g.hy)
        return out

    def mde_source(self, n: np.ndarray) -> np.ndarray:
        return marginal_density(n * self.p[None, :], self.grid.hy)

    def mde_rhs(self, M: np.ndarray, n: np.ndarray) -> np.ndarray:
        p, g = self.params, self.grid
        out = (self.mde_source(n) - p.kappa_M * M) / p.eps
        if g.nx > 1:
            flux = -np.diff(M) / g.hx
            out[:-1] -= flux / (self._wx[:-1] * g.hx)
            out[1:] += flux / (self._wx[1:] * g.hx)
        return out

    def ecm_rhs(self, E: np.ndarray, M: np.ndarray) -> np.ndarray:
        p = self.params
        return -p.kappa_E * E * M / p.eps

    # ---------------------------------------------------------------- time step

    def stability_bounds(self, state: ContinuumState) -> dict[str, float]:
        """Every individual time-step restriction, before the safety factor."""
        p, g = self.params, self.grid
        inf = math.inf
        eps = p.eps
        rho = state.rho
        R = self.growth(rho)
        v = self.face_velocity(state.E) if g.nx > 1 else np.zeros((0, g.ny))
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        sup_R = float(np.max(np.abs(R)))
        max_M = float(np.max(state.M))

        # total outflow rate per node: positivity of forward Euler needs dt * rate <= 1
        rate = np.maximum(-R, 0.0) / eps
        if g.nx > 1:
            rate = rate + 2 * eps / g.hx**2
            out_face = np.zeros((g.nx, g.ny))
            out_face[:-1] += np.maximum(v, 0.0)
            out_face[1:] += np.maximum(-v, 0.0)
            rate = rate + out_face / (self._wx[:, None] * g.hx)
        if g.ny > 1:
            rate = rate + 2 * eps / g.hy**2
        mde_rate = p.kappa_M / eps + (2.0 / g.hx**2 if g.nx > 1 else 0.0)

        return {
            "x_diffusion": g.hx**2 / (2 * eps) if g.nx > 1 else inf,
            "advection": g.hx / vmax if vmax > 0 else inf,
            "y_diffusion": g.hy**2 / (2 * eps) if g.ny > 1 else inf,
            "growth": eps / sup_R if sup_R > 0 else inf,
            "mde_decay": eps / p.kappa_M,
            "ecm_degradation": eps / (p.kappa_E * max_M) if max_M > 0 else inf,
            "mde_diffusion": g.hx**2 / 2 if g.nx > 1 else inf,
            "cell_positivity": 1.0 / float(np.max(rate)) if np.max(rate) > 0 else inf,
            "mde_positivity": 1.0 / mde_rate,
        }

    def stable_dt(self, state: ContinuumState, safety: float = SAFETY) -> float:
        dt = safety * min(self.stability_bounds(state).values())
        if not (math.isfinite(dt) and dt > 0):
            raise SchemeError(f"degenerate stable time step {dt!r}")
        return dt

    def advance(self, state: ContinuumState, dt: float) -> ContinuumState:
        rho = state.rho
        dn = self.cell_rhs(state.n, state.E, rho)
        dM = self.mde_rhs(state.M, state.n)
        dE = self.ecm_rhs(state.E, state.M)
        n = state.n + dt * dn
        M = state.M + dt * dM
        E = state.E + dt * dE
        self._check(n, M, E, state, dt)
        if self.grid.nx > 1:
            self.max_advection_speed = max(
                self.max_advection_speed, float(np.max(np.abs(np.diff(state.E)))) / self.grid.hx * float(self.mu.max())
            )
        return ContinuumState(n, M, E, state.t + dt, state.hy)

    def _check(self, n, M, E, state, dt):
        scale_n = max(float(np.max(state.n)), 1e-300)
        scale_M = max(float(np.max(state.M)), float(np.max(M)), 1e-300)
        problems = []
        if np.min(n) < -NEG_TOL * scale_n:
            i, j = np.unravel_index(np.argmin(n), n.shape)
            problems.append(f"n[{i},{j}] = {n[i, j]:.3e} (scale {scale_n:.3e})")
        if np.min(M) < -NEG_TOL * scale_M:
            problems.append(f"M[{int(np.argmin(M))}] = {np.min(M):.3e}")
        if np.min(E) < -NEG_TOL * self.params.E_max:
            problems.append(f"E[{int(np.argmin(E))}] = {np.min(E):.3e}")
        if problems:
            raise SchemeError(f"negative values after step t={state.t:.6g}, dt={dt:.3e}: " + "; ".join(problems))

    # ---------------------------------------------------------------- driver

    def snapshot(self, state: ContinuumState) -> Snapshot:
        return Snapshot(state.t, self.grid.x, self.grid.y, state.n.copy(), state.rho,
                        state.M.copy(), state.E.copy(),
                        {"engine": "continuum", "max_advection_speed": self.max_advection_speed})

    def run(self, state: ContinuumState, times, callback=None) -> list[Snapshot]:
        """Integrate to each requested rescaled time, returning one snapshot per time."""
        times = sorted(float(t) for t in times)
        snaps = []
        steps = 0
        for target in times:
            while state.t < target - 1e-12 * max(1.0, target):
                dt = min(self.stable_dt(state), target - state.t)
                state = self.advance(state, dt)
                steps += 1
            state.t = target if abs(state.t - target) <= 1e-9 * max(1.0, target) else state.t
            snap = self.snapshot(state)
            snap.meta["steps"] = steps
            snaps.append(snap)
            if callback is not None:
                callback(snap)
            log.debug("continuum t=%.4g after %d steps", state.t, steps)
        self.final_state = state
        return snaps


def run_continuum(params: ModelParams, laws: PhenotypeLaws, profile: InitialProfile, times,
                  refine: int = 1, refine_y: int | None = None) -> list[Snapshot]:
    solver = ContinuumSolver(params, laws, ContinuumGrid.from_params(params, refine, refine_y))
    return solver.run(solver.initial_state(profile), times)
