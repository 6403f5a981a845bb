"""Stochastic lattice simulator: branching random walk in space x phenotype.

Cells sharing a lattice site are exchangeable, so each sub-step draws the
number of cells taking every outcome from a binomial split of the site count
rather than one uniform per cell.  The resulting law of the lattice state is
the same as processing cells one by one.

Per step, in order: random move, haptotactic move, phenotype switch,
division/death.  Division/death uses the density of the cell's current site as
it was at the start of the step.  MDE and ECM then advance with the step-k
fields, so their ordering relative to the cell update does not matter.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .continuum import Snapshot
from .model import ConfigError, InitialProfile, ModelParams, PhenotypeLaws, steps_to

log = logging.getLogger(__name__)

THREADS_ENV = "PHENOWAVE_THREADS"

# kernel status codes
OK = 0
BAD_PROBABILITY = 1
ECM_NEGATIVE = 2


class InitializationError(ValueError):
    pass


class PositivityError(RuntimeError):
    pass


@dataclass
class IBState:
    N: np.ndarray  # int64 counts, shape (nx, ny) or (nx1, nx2, ny)
    M: np.ndarray
    E: np.ndarray
    k: int = 0
    rng_seed: object = None

    def copy(self) -> "IBState":
        return IBState(self.N.copy(), self.M.copy(), self.E.copy(), self.k, self.rng_seed)

    @property
    def dim(self) -> int:
        return self.N.ndim - 1


# ---------------------------------------------------------------- probabilities


def random_move_probs(params: ModelParams):
    h = params.theta / 2
    return h, h, 1.0 - params.theta


def hapto_move_probs(E_left, E_here, E_right, y, params: ModelParams, laws: PhenotypeLaws):
    """Left/right/stay probabilities; pass ``None`` for a missing neighbour."""
    scale = params.eta * float(laws.mu(y)) / (2 * params.E_max)
    pl = 0.0 if E_left is None else scale * max(E_left - E_here, 0.0)
    pr = 0.0 if E_right is None else scale * max(E_right - E_here, 0.0)
    return pl, pr, 1.0 - pl - pr


def phenotype_switch_probs(j, params: ModelParams):
    # the nominal triple; switches leaving [0, Y] are aborted by the stepper
    h = params.beta / 2
    return h, h, 1.0 - params.beta


def proliferation_probs(y, rho, params: ModelParams, laws: PhenotypeLaws):
    """(death, division, quiescence) probabilities."""
    R = params.alpha * (float(laws.r(y)) - rho / params.rho_max)
    pa = params.tau * max(-R, 0.0)
    pb = params.tau * max(R, 0.0)
    return pa, pb, 1.0 - pa - pb


# ---------------------------------------------------------------- kernels


@njit(cache=True, nogil=True)
def _binom(rng, n, p):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    return rng.binomial(n, p)


@njit(cache=True, nogil=True)
def _split3(rng, c, pl, pr):
    left = _binom(rng, c, pl)
    q = 1.0 - pl
    right = 0
    if q > 0.0:
        right = _binom(rng, c - left, min(pr / q, 1.0))
    return left, right


@njit(cache=True, nogil=True)
def _cells_1d(N, A, E, rho, mu, r, theta, eta, beta, tau, alpha, rho_max, E_max, rng):
    """Four sub-steps on N, using A as scratch.  Returns a status code."""
    nx, ny = N.shape
    half = 0.5 * theta
    # (i) random movement
    A[:, :] = 0
    for i in range(nx):
        for j in range(ny):
            c = N[i, j]
            if c == 0:
                continue
            left, right = _split3(rng, c, half, half)
            stay = c - left - right
            if i > 0:
                A[i - 1, j] += left
            else:
                stay += left
            if i < nx - 1:
                A[i + 1, j] += right
            else:
                stay += right
            A[i, j] += stay
    # (ii) haptotactic movement, gradients of the step-k ECM
    N[:, :] = 0
    for i in range(nx):
        gl = 0.0
        gr = 0.0
        if i > 0:
            gl = max(E[i - 1] - E[i], 0.0) * eta / (2.0 * E_max)
        if i < nx - 1:
            gr = max(E[i + 1] - E[i], 0.0) * eta / (2.0 * E_max)
        for j in range(ny):
            c = A[i, j]
            if c == 0:
                continue
            pl = gl * mu[j]
            pr = gr * mu[j]
            if pl < 0.0 or pr < 0.0 or pl + pr > 1.0 + 1e-12:
                return BAD_PROBABILITY
            left, right = _split3(rng, c, pl, pr)
            N[i, j] += c - left - right
            if left:
                N[i - 1, j] += left
            if right:
                N[i + 1, j] += right
    # (iii) phenotype switching, aborted at y = 0 and y = Y
    hb = 0.5 * beta
    A[:, :] = 0
    for i in range(nx):
        for j in range(ny):
            c = N[i, j]
            if c == 0:
                continue
            down, up = _split3(rng, c, hb, hb)
            stay = c - down - up
            if j > 0:
                A[i, j - 1] += down
            else:
                stay += down
            if j < ny - 1:
                A[i, j + 1] += up
            else:
                stay += up
            A[i, j] += stay
    # (iv) division and death with the pre-step site density
    for i in range(nx):
        load = rho[i] / rho_max
        for j in range(ny):
            c = A[i, j]
            if c == 0:
                N[i, j] = 0
                continue
            R = alpha * (r[j] - load)
            if R > 0.0:
                pb = tau * R
                if pb > 1.0 + 1e-12:
                    return BAD_PROBABILITY
                N[i, j] = c + _binom(rng, c, pb)
            else:
                pa = -tau * R
                if pa > 1.0 + 1e-12:
                    return BAD_PROBABILITY
                N[i, j] = c - _binom(rng, c, pa)
    return OK


@njit(cache=True, nogil=True)
def _advance_1d(N, M, E, nsteps, mu, r, p, theta, eta, beta, tau, alpha, rho_max, E_max,
                D_M, kappa_M, kappa_E, dx, rng):
    """Advance ``nsteps`` full steps in place.  Returns (status, site, max rho/rho_max)."""
    nx, ny = N.shape
    A = np.empty_like(N)
    rho = np.empty(nx)
    src = np.empty(nx)
    Mn = np.empty(nx)
    worst = 0.0
    for _ in range(nsteps):
        for i in range(nx):
            s = 0
            q = 0.0
            for j in range(ny):
                s += N[i, j]
                q += p[j] * N[i, j]
            rho[i] = s / dx
            src[i] = q / dx
            if rho[i] / rho_max > worst:
                worst = rho[i] / rho_max
        for i in range(nx):
            if 1.0 - tau * kappa_E * M[i] < 0.0:
                return ECM_NEGATIVE, i, worst
        status = _cells_1d(N, A, E, rho, mu, r, theta, eta, beta, tau, alpha, rho_max, E_max, rng)
        if status != OK:
            return status, -1, worst
        for i in range(nx):
            lo = M[i - 1] if i > 0 else (M[1] if nx > 1 else M[0])
            hi = M[i + 1] if i < nx - 1 else (M[nx - 2] if nx > 1 else M[0])
            lap = (lo + hi - 2.0 * M[i]) / (dx * dx)
            Mn[i] = M[i] + tau * (D_M * lap - kappa_M * M[i] + src[i])
        for i in range(nx):
            E[i] = E[i] * (1.0 - tau * kappa_E * M[i])
            M[i] = Mn[i]
    return OK, -1, worst


# ---------------------------------------------------------------- state setup


def initial_counts(profile: InitialProfile, params: ModelParams, dim: int = 1) -> np.ndarray:
    x = params.x_grid()
    y = params.y_grid()
    if dim == 1:
        F = profile.density(x[:, None], y[None, :])
    elif dim == 2:
        r2 = x[:, None] ** 2 + x[None, :] ** 2
        F = profile.density(np.sqrt(r2)[:, :, None], y[None, None, :])
    else:
        raise ConfigError(f"unsupported spatial dimension {dim}")
    return np.floor(F).astype(np.int64)


def density_from_counts(N: np.ndarray, params: ModelParams) -> np.ndarray:
    dim = N.ndim - 1
    return N.sum(axis=-1) / params.dx**dim


def resolve_rho_max(params: ModelParams, profile: InitialProfile, dim: int = 1) -> ModelParams:
    """Fill in rho_max as the largest initial lattice density, unless already set."""
    if params.rho_max is not None:
        return params
    N = initial_counts(profile, params, dim)
    peak = float(density_from_counts(N, params).max())
    if peak <= 0:
        raise InitializationError("initial lattice holds no cells; cannot derive rho_max")
    return params.with_(rho_max=peak)


def init_state(profile: InitialProfile, params: ModelParams, dim: int = 1, seed=None) -> IBState:
    N = initial_counts(profile, params, dim)
    if not N.any():
        raise InitializationError("initial lattice holds no cells (every count floors to zero)")
    shape = N.shape[:-1]
    return IBState(N, np.zeros(shape), np.full(shape, params.E_max), 0, seed)


# ---------------------------------------------------------------- single-step API


def _check_mde_stability(params: ModelParams, dim: int):
    value = params.tau * (2 * dim * params.D_M / params.dx**2 + params.kappa_M)
    if value > 1 + 1e-12:
        raise ConfigError(
            f"MDE update positivity tau * (2 d D_M / dx^2 + kappa_M) <= 1 violated: {value:.6g}")


def step_mde(state: IBState, params: ModelParams, laws: PhenotypeLaws) -> np.ndarray:
    dim = state.dim
    _check_mde_stability(params, dim)
    M = state.M
    src = (state.N * laws.p(params.y_grid())).sum(axis=-1) / params.dx**dim
    lap = np.zeros_like(M)
    for ax in range(dim):
        if M.shape[ax] < 2:
            continue
        padded = np.pad(M, [(1, 1) if a == ax else (0, 0) for a in range(dim)], mode="reflect")
        sl = lambda a, b: tuple(slice(a, b) if q == ax else slice(None) for q in range(dim))
        lap += padded[sl(2, None)] + padded[sl(None, -2)] - 2 * M
    lap /= params.dx**2
    return M + params.tau * (params.D_M * lap - params.kappa_M * M + src)


def step_ecm(state: IBState, params: ModelParams) -> np.ndarray:
    factor = 1.0 - params.tau * params.kappa_E * state.M
    if np.any(factor < 0):
        site = np.unravel_index(int(np.argmin(factor)), factor.shape)
        raise PositivityError(
            f"ECM update would turn negative at site {tuple(int(s) for s in site)}: "
            f"tau * kappa_E * M = {1 - factor[site]:.6g} > 1")
    return state.E * factor


def _law_arrays(params: ModelParams, laws: PhenotypeLaws):
    y = params.y_grid()
    return (np.ascontiguousarray(laws.mu(y), dtype=float), np.ascontiguousarray(laws.r(y), dtype=float),
            np.ascontiguousarray(laws.p(y), dtype=float))


def step_cells(state: IBState, params: ModelParams, laws: PhenotypeLaws, rng: np.random.Generator) -> IBState:
    """One pass of the four cell sub-steps; M and E are left untouched."""
    if state.dim != 1:
        raise ConfigError("step_cells handles the 1D lattice; use the 2D engine for planar runs")
    mu, r, _ = _law_arrays(params, laws)
    N = state.N.copy()
    rho = density_from_counts(state.N, params)
    status = _cells_1d(N, np.empty_like(N), state.E, rho, mu, r, params.theta, params.eta, params.beta,
                       params.tau, params.alpha, params.rho_max, params.E_max, rng)
    if status != OK:
        raise ConfigError("a per-cell event probability left [0, 1]; check the parameter bounds")
    return IBState(N, state.M.copy(), state.E.copy(), state.k, state.rng_seed)


# ---------------------------------------------------------------- driver


@dataclass
class RunStats:
    steps: int = 0
    max_rho_ratio: float = 0.0
    invariant_checks: dict = field(default_factory=dict)


class IBSimulation:
    """One replicate of the 1D lattice model."""

    def __init__(self, params: ModelParams, laws: PhenotypeLaws, state: IBState, rng: np.random.Generator,
                 debug: bool | None = None):
        if params.rho_max is None:
            raise ConfigError("rho_max must be resolved before running the lattice model")
        _check_mde_stability(params, 1)
        self.params, self.laws, self.state, self.rng = params, laws, state, rng
        self.mu, self.r, self.p = _law_arrays(params, laws)
        self.debug = bool(os.environ.get("PHENOWAVE_DEBUG")) if debug is None else debug
        self.stats = RunStats()

    def advance(self, nsteps: int):
        p, s = self.params, self.state
        chunk = 1 if self.debug else nsteps
        done = 0
        while done < nsteps:
            todo = min(chunk, nsteps - done)
            E_prev = s.E.copy() if self.debug else None
            status, site, worst = _advance_1d(s.N, s.M, s.E, todo, self.mu, self.r, self.p, p.theta, p.eta,
                                              p.beta, p.tau, p.alpha, p.rho_max, p.E_max, p.D_M,
                                              p.kappa_M, p.kappa_E, p.dx, self.rng)
            self.stats.max_rho_ratio = max(self.stats.max_rho_ratio, worst)
            if status == ECM_NEGATIVE:
                raise PositivityError(f"ECM update would turn negative at site {site}")
            if status == BAD_PROBABILITY:
                raise ConfigError("a per-cell event probability left [0, 1]; check the parameter bounds")
            s.k += todo
            done += todo
            if self.debug:
                self._check(E_prev)
        self.stats.steps = s.k

    def _check(self, E_prev):
        s = self.state
        bad = []
        if s.N.min() < 0:
            bad.append("negative cell count")
        if s.M.min() < 0:
            bad.append("negative MDE")
        if s.E.min() < 0 or s.E.max() > self.params.E_max:
            bad.append("ECM outside [0, E_max]")
        if np.any(s.E > E_prev):
            bad.append("ECM increased")
        if bad:
            raise PositivityError(f"invariant failure after step {s.k}: " + ", ".join(bad))

    def invariants(self) -> dict:
        s = self.state
        return {
            "counts_nonnegative": bool(s.N.min() >= 0),
            "mde_nonnegative": bool(s.M.min() >= 0),
            "ecm_in_range": bool(s.E.min() >= 0 and s.E.max() <= self.params.E_max),
            "max_rho_ratio": float(self.stats.max_rho_ratio),
        }

    def snapshot(self) -> Snapshot:
        p, s = self.params, self.state
        return Snapshot(
            t=s.k * p.eps * p.tau, x=p.x_grid(), y=p.y_grid(), n=s.N / (p.dx * p.dy),
            rho=density_from_counts(s.N, p), M=s.M.copy(), E=s.E.copy(),
            meta={"engine": "ibm", "step": s.k, "cells": int(s.N.sum()), **self.invariants()},
        )

    def run(self, times) -> list[Snapshot]:
        out = []
        for t in sorted(times):
            target = steps_to(t, self.params)
            if target < self.state.k:
                raise ValueError(f"snapshot time {t} lies before the current step")
            self.advance(target - self.state.k)
            out.append(self.snapshot())
        return out


def replicate_seeds(seed, n_reps: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_reps)


def make_rng(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def run_ibm(params: ModelParams, laws: PhenotypeLaws, profile: InitialProfile, times, seed=0,
            debug: bool | None = None) -> list[Snapshot]:
    params = resolve_rho_max(params, profile)
    sim = IBSimulation(params, laws, init_state(profile, params, seed=seed), make_rng(seed), debug)
    return sim.run(times)


def thread_count(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return default or os.cpu_count() or 1


@dataclass
class Ensemble:
    times: list[float]
    mean: list[Snapshot]
    replicates: list[list[Snapshot]]
    seeds: list

    def rho_stack(self, idx: int) -> np.ndarray:
        return np.stack([rep[idx].rho for rep in self.replicates])


def mean_snapshot(snaps: list[Snapshot]) -> Snapshot:
    first = snaps[0]
    k = len(snaps)
    return Snapshot(
        t=first.t, x=first.x, y=first.y,
        n=sum(s.n for s in snaps) / k, rho=sum(s.rho for s in snaps) / k,
        M=sum(s.M for s in snaps) / k, E=sum(s.E for s in snaps) / k,
        meta={"engine": first.meta.get("engine", "ibm") + "-mean", "replicates": k,
              "max_rho_ratio": max(s.meta.get("max_rho_ratio", 0.0) for s in snaps)},
    )


def run_replicates(params: ModelParams, laws: PhenotypeLaws, profile: InitialProfile, times, n_reps: int = 5,
                   seed=0, seeds=None, threads: int | None = None, runner=run_ibm) -> Ensemble:
    """Independent replicates, each on its own PCG64 stream.

    ``seeds`` overrides the streams spawned from ``seed``; results do not depend
    on ``threads`` because no stream is shared.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if seeds is None:
        seeds = replicate_seeds(seed, n_reps)
    elif len(seeds) != n_reps:
        raise ValueError("need one seed per replicate")
    params = resolve_rho_max(params, profile, getattr(runner, "dim", 1))
    times = sorted(float(t) for t in times)
    workers = min(thread_count() if threads is None else threads, n_reps)

    def one(sd):
        return runner(params, laws, profile, times, seed=sd)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(one, seeds))
    else:
        reps = [one(sd) for sd in seeds]
    means = [mean_snapshot([rep[i] for rep in reps]) for i in range(len(times))]
    return Ensemble(times, means, reps, list(seeds))
