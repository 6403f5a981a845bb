"""Planar version of the lattice model with a radial transect summary.

Each movement sub-step draws one independent left/right/stay outcome per axis,
with haptotactic probabilities read from the ECM around the cell's site at the
start of the sub-step.  Moves leaving the square are aborted axis by axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .continuum import Snapshot
from .ibm import (BAD_PROBABILITY, ECM_NEGATIVE, OK, IBState, PositivityError, _binom, _check_mde_stability,
                  _law_arrays, _split3, density_from_counts, init_state, make_rng, resolve_rho_max)
from .model import ConfigError, InitialProfile, ModelParams, PhenotypeLaws, steps_to


@njit(cache=True, nogil=True)
def _put(A, i1, i2, j, d1, d2, cnt):
    if cnt == 0:
        return
    n1, n2 = A.shape[0], A.shape[1]
    a = i1 + d1
    b = i2 + d2
    if a < 0 or a >= n1:
        a = i1
    if b < 0 or b >= n2:
        b = i2
    A[a, b, j] += cnt


@njit(cache=True, nogil=True)
def _split_axes(A, rng, i1, i2, j, c, l1p, r1p, l2p, r2p):
    left, right = _split3(rng, c, l1p, r1p)
    for d1 in (-1, 1, 0):
        if d1 == -1:
            cnt = left
        elif d1 == 1:
            cnt = right
        else:
            cnt = c - left - right
        if cnt == 0:
            continue
        down, up = _split3(rng, cnt, l2p, r2p)
        _put(A, i1, i2, j, d1, -1, down)
        _put(A, i1, i2, j, d1, 1, up)
        _put(A, i1, i2, j, d1, 0, cnt - down - up)


@njit(cache=True, nogil=True)
def _cells_2d(N, A, E, rho, mu, r, theta, eta, beta, tau, alpha, rho_max, E_max, rng):
    n1, n2, ny = N.shape
    half = 0.5 * theta
    A[:, :, :] = 0
    for i1 in range(n1):
        for i2 in range(n2):
            for j in range(ny):
                c = N[i1, i2, j]
                if c:
                    _split_axes(A, rng, i1, i2, j, c, half, half, half, half)
    N[:, :, :] = 0
    k = eta / (2.0 * E_max)
    for i1 in range(n1):
        for i2 in range(n2):
            e = E[i1, i2]
            gl1 = k * max(E[i1 - 1, i2] - e, 0.0) if i1 > 0 else 0.0
            gr1 = k * max(E[i1 + 1, i2] - e, 0.0) if i1 < n1 - 1 else 0.0
            gl2 = k * max(E[i1, i2 - 1] - e, 0.0) if i2 > 0 else 0.0
            gr2 = k * max(E[i1, i2 + 1] - e, 0.0) if i2 < n2 - 1 else 0.0
            for j in range(ny):
                c = A[i1, i2, j]
                if c == 0:
                    continue
                m = mu[j]
                if (gl1 + gr1) * m > 1.0 + 1e-12 or (gl2 + gr2) * m > 1.0 + 1e-12:
                    return BAD_PROBABILITY
                _split_axes(N, rng, i1, i2, j, c, gl1 * m, gr1 * m, gl2 * m, gr2 * m)
    hb = 0.5 * beta
    A[:, :, :] = 0
    for i1 in range(n1):
        for i2 in range(n2):
            for j in range(ny):
                c = N[i1, i2, j]
                if c == 0:
                    continue
                down, up = _split3(rng, c, hb, hb)
                stay = c - down - up
                if j > 0:
                    A[i1, i2, j - 1] += down
                else:
                    stay += down
                if j < ny - 1:
                    A[i1, i2, j + 1] += up
                else:
                    stay += up
                A[i1, i2, j] += stay
    for i1 in range(n1):
        for i2 in range(n2):
            load = rho[i1, i2] / rho_max
            for j in range(ny):
                c = A[i1, i2, j]
                if c == 0:
                    N[i1, i2, j] = 0
                    continue
                R = alpha * (r[j] - load)
                if R > 0.0:
                    N[i1, i2, j] = c + _binom(rng, c, tau * R)
                else:
                    N[i1, i2, j] = c - _binom(rng, c, -tau * R)
    return OK


@njit(cache=True, nogil=True)
def _advance_2d(N, M, E, nsteps, mu, r, p, theta, eta, beta, tau, alpha, rho_max, E_max,
                D_M, kappa_M, kappa_E, dx, rng):
    n1, n2, ny = N.shape
    A = np.empty_like(N)
    rho = np.empty((n1, n2))
    src = np.empty((n1, n2))
    Mn = np.empty((n1, n2))
    area = dx * dx
    worst = 0.0
    for _ in range(nsteps):
        for i1 in range(n1):
            for i2 in range(n2):
                s = 0
                q = 0.0
                for j in range(ny):
                    s += N[i1, i2, j]
                    q += p[j] * N[i1, i2, j]
                rho[i1, i2] = s / area
                src[i1, i2] = q / area
                if rho[i1, i2] / rho_max > worst:
                    worst = rho[i1, i2] / rho_max
                if 1.0 - tau * kappa_E * M[i1, i2] < 0.0:
                    return ECM_NEGATIVE, i1 * n2 + i2, worst
        status = _cells_2d(N, A, E, rho, mu, r, theta, eta, beta, tau, alpha, rho_max, E_max, rng)
        if status != OK:
            return status, -1, worst
        for i1 in range(n1):
            for i2 in range(n2):
                m = M[i1, i2]
                a = M[i1 - 1, i2] if i1 > 0 else M[min(1, n1 - 1), i2]
                b = M[i1 + 1, i2] if i1 < n1 - 1 else M[max(n1 - 2, 0), i2]
                c = M[i1, i2 - 1] if i2 > 0 else M[i1, min(1, n2 - 1)]
                d = M[i1, i2 + 1] if i2 < n2 - 1 else M[i1, max(n2 - 2, 0)]
                lap = (a + b + c + d - 4.0 * m) / area
                Mn[i1, i2] = m + tau * (D_M * lap - kappa_M * m + src[i1, i2])
        for i1 in range(n1):
            for i2 in range(n2):
                E[i1, i2] = E[i1, i2] * (1.0 - tau * kappa_E * M[i1, i2])
                M[i1, i2] = Mn[i1, i2]
    return OK, -1, worst


class IBSimulation2D:
    def __init__(self, params: ModelParams, laws: PhenotypeLaws, state: IBState, rng: np.random.Generator):
        if params.rho_max is None:
            raise ConfigError("rho_max must be resolved before running the lattice model")
        _check_mde_stability(params, 2)
        self.params, self.laws, self.state, self.rng = params, laws, state, rng
        self.mu, self.r, self.p = _law_arrays(params, laws)
        self.max_rho_ratio = 0.0

    def advance(self, nsteps: int):
        p, s = self.params, self.state
        status, site, worst = _advance_2d(s.N, s.M, s.E, nsteps, self.mu, self.r, self.p, p.theta, p.eta,
                                          p.beta, p.tau, p.alpha, p.rho_max, p.E_max, p.D_M, p.kappa_M,
                                          p.kappa_E, p.dx, self.rng)
        self.max_rho_ratio = max(self.max_rho_ratio, worst)
        if status == ECM_NEGATIVE:
            n2 = s.E.shape[1]
            raise PositivityError(f"ECM update would turn negative at site {(site // n2, site % n2)}")
        if status == BAD_PROBABILITY:
            raise ConfigError("a per-cell event probability left [0, 1]; check the parameter bounds")
        s.k += nsteps

    def snapshot(self) -> "PlanarSnapshot":
        p, s = self.params, self.state
        return PlanarSnapshot(
            t=s.k * p.eps * p.tau, x=p.x_grid(), y=p.y_grid(), n=s.N / (p.dx**2 * p.dy),
            rho=density_from_counts(s.N, p), M=s.M.copy(), E=s.E.copy(),
            meta={"engine": "ibm2d", "step": s.k, "cells": int(s.N.sum()), "max_rho_ratio": self.max_rho_ratio},
        )

    def run(self, times):
        out = []
        for t in sorted(times):
            self.advance(steps_to(t, self.params) - self.state.k)
            out.append(self.snapshot())
        return out


class PlanarSnapshot(Snapshot):
    """Snapshot whose spatial fields carry two axes (x1, x2); ``x`` serves both."""


def run_2d(params: ModelParams, laws: PhenotypeLaws, profile: InitialProfile, times, seed=0):
    params = resolve_rho_max(params, profile, dim=2)
    sim = IBSimulation2D(params, laws, init_state(profile, params, dim=2, seed=seed), make_rng(seed))
    return sim.run(times)


run_2d.dim = 2


def radial_transect(snap: Snapshot, max_radius: float | None = None) -> Snapshot:
    """Average the planar fields over rings of width dx around the origin."""
    x = np.asarray(snap.x)
    h = x[1] - x[0]
    radius = np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)
    limit = x[-1] if max_radius is None else max_radius
    nb = int(np.floor(limit / h + 0.5)) + 1
    idx = np.floor(radius / h + 0.5).astype(int)
    keep = idx < nb
    flat = idx[keep]
    counts = np.bincount(flat, minlength=nb).astype(float)

    def ring(field):
        f = np.asarray(field)[keep]
        if f.ndim == 1:
            return np.bincount(flat, weights=f, minlength=nb) / counts
        return np.stack([np.bincount(flat, weights=f[:, j], minlength=nb) for j in range(f.shape[1])], axis=1) \
            / counts[:, None]

    return Snapshot(t=snap.t, x=np.arange(nb) * h, y=snap.y, n=ring(snap.n), rho=ring(snap.rho), M=ring(snap.M),
                    E=ring(snap.E), meta={**snap.meta, "transect": "radial", "ring_sites": counts.tolist()})


def angular_profile(snap: Snapshot, radius: float, width: float | None = None):
    """Values of rho on the ring |x| ~ radius, with their polar angles."""
    x = np.asarray(snap.x)
    h = x[1] - x[0] if width is None else width
    rr = np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)
    sel = np.abs(rr - radius) < h / 2
    ang = np.arctan2(np.broadcast_to(x[None, :], rr.shape), np.broadcast_to(x[:, None], rr.shape))
    return ang[sel], np.asarray(snap.rho)[sel]


def _mean_of(snaps: list[Snapshot]) -> Snapshot:
    k = len(snaps)
    f = snaps[0]
    return Snapshot(f.t, f.x, f.y, sum(s.n for s in snaps) / k, sum(s.rho for s in snaps) / k,
                    sum(s.M for s in snaps) / k, sum(s.E for s in snaps) / k, dict(f.meta))


@dataclass
class TransectSummary:
    mean: Snapshot
    ybar_se: np.ndarray
    rho_se: np.ndarray


def transect_ensemble(replicates: list[Snapshot], n_boot: int = 200, seed=0) -> TransectSummary:
    """Replicate-mean radial transect with bootstrap standard errors of ybar and rho."""
    from .wave import extract_ybar

    rings = [radial_transect(s) for s in replicates]
    mean = _mean_of(rings)
    rng = np.random.default_rng(seed)
    k = len(rings)
    ybars, rhos = [], []
    for _ in range(n_boot):
        pick = _mean_of([rings[i] for i in rng.integers(0, k, k)])
        ybars.append(extract_ybar(pick.n, pick.y))
        rhos.append(pick.rho)
    mean.meta["replicates"] = k
    return TransectSummary(mean, np.std(ybars, axis=0), np.std(rhos, axis=0))
