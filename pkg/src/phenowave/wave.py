"""Travelling-front diagnostics and the small-eps closed-form relations.

In the small-eps regime the dominant phenotype ybar(x) fixes the front:

    rho = rho_max * r(ybar)
    M   = p(ybar) * rho_max * r(ybar) / kappa_M   inside the support
    E   = E_max * (1 - indicator of the support)

These are evaluated on measured ybar and compared against either engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, PhenotypeLaws

SUPPORT_FRACTION = 1e-3
EDGE_BAND = 0.10
STRUCTURE_TOL = 0.05
RHO_FLAT_TOL = 1e-6


class EmptySupportError(ValueError):
    pass


def support_mask(rho, rho_max: float, fraction: float = SUPPORT_FRACTION) -> np.ndarray:
    return np.asarray(rho) > fraction * rho_max


def support_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive index ranges of the contiguous True runs of ``mask``."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    d = np.diff(m.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def extract_ybar(n: np.ndarray, y: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Phenotype argmax per x; ties go to the smaller y, NaN outside ``mask``."""
    ybar = np.asarray(y, float)[np.argmax(n, axis=-1)]
    if mask is not None:
        ybar = np.where(mask, ybar, np.nan)
    return ybar


def concentration_width(n: np.ndarray, y: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Standard deviation of the normalised phenotype marginal at each x."""
    n = np.asarray(n, float)
    y = np.asarray(y, float)
    w = np.ones(y.size)
    if y.size > 1:
        w[0] = w[-1] = 0.5
    mass = n @ w
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (n @ (w * y)) / mass
        var = (n @ (w * y**2)) / mass - mean**2
    sigma = np.sqrt(np.maximum(var, 0.0))
    sigma = np.where(mass > 0, sigma, np.nan)
    if mask is not None:
        sigma = np.where(mask, sigma, np.nan)
    return sigma


# ------------------------------------------------------------------ oracles


def oracle_rho(ybar, laws: PhenotypeLaws, params: ModelParams):
    return params.rho_max * laws.r(ybar)


def oracle_M(ybar, mask, laws: PhenotypeLaws, params: ModelParams):
    yb = np.where(mask, ybar, params.Y)
    val = laws.p(yb) * params.rho_max * laws.r(yb) / params.kappa_M
    return np.where(mask, val, 0.0)


def oracle_E(mask, params: ModelParams):
    return np.where(mask, 0.0, params.E_max)


# ------------------------------------------------------------------ profiles


@dataclass
class WaveProfile:
    t: float
    x: np.ndarray
    rho: np.ndarray
    M: np.ndarray
    E: np.ndarray
    ybar: np.ndarray
    sigma_y: np.ndarray
    mask: np.ndarray
    runs: list[tuple[int, int]]
    meta: dict = field(default_factory=dict)

    @property
    def single_interval(self) -> bool:
        return len(self.runs) == 1

    @property
    def support(self) -> tuple[int, int] | None:
        """Inclusive index span of the support (first to last supported node)."""
        if not self.runs:
            return None
        return self.runs[0][0], self.runs[-1][1]

    @property
    def ell(self) -> float:
        span = self.support
        return math.nan if span is None else float(self.x[span[1]])


def wave_profile(snapshot, params: ModelParams, fraction: float = SUPPORT_FRACTION) -> WaveProfile:
    mask = support_mask(snapshot.rho, params.rho_max, fraction)
    return WaveProfile(
        t=snapshot.t,
        x=np.asarray(snapshot.x),
        rho=np.asarray(snapshot.rho),
        M=np.asarray(snapshot.M),
        E=np.asarray(snapshot.E),
        ybar=extract_ybar(snapshot.n, snapshot.y, mask),
        sigma_y=concentration_width(snapshot.n, snapshot.y, mask),
        mask=mask,
        runs=support_runs(mask),
    )


def _pair_slack(tol, i0, i1):
    """Slack per adjacent pair from a scalar or a per-node standard error array."""
    if np.ndim(tol) == 0:
        return float(tol)
    t = np.asarray(tol, float)
    return np.hypot(t[i0:i1], t[i0 + 1:i1 + 1])


def structure_checks(profile: WaveProfile, tol: float = STRUCTURE_TOL, rho_tol=None, ybar_tol=0.0,
                     rear_max: float | None = None, edge_min: float | None = None) -> dict:
    """Count adjacent support pairs where ybar decreases or rho increases.

    ``rho_tol`` and ``ybar_tol`` are slacks on a reversal: scalars, or per-node
    arrays (e.g. 3 standard errors of an ensemble mean) combined in quadrature
    for each pair.  The default rho slack is a 1e-6 fraction of the largest
    supported rho so that flat plateaus do not count.
    """
    span = profile.support
    if span is None:
        raise EmptySupportError("profile has empty support")
    i0, i1 = span
    yb = profile.ybar[i0:i1 + 1]
    rho = profile.rho[i0:i1 + 1]
    if rho_tol is None:
        rho_tol = RHO_FLAT_TOL * float(np.nanmax(rho))
    pairs = max(len(yb) - 1, 0)
    y_bad = int(np.sum(~(np.diff(yb) >= -_pair_slack(ybar_tol, i0, i1))))  # NaN gaps count
    r_bad = int(np.sum(np.diff(rho) > _pair_slack(rho_tol, i0, i1)))
    frac_y = y_bad / pairs if pairs else 0.0
    frac_r = r_bad / pairs if pairs else 0.0
    rear, edge = float(yb[0]), float(yb[-1])
    passed = frac_y <= tol and frac_r <= tol
    if rear_max is not None:
        passed = passed and rear <= rear_max
    if edge_min is not None:
        passed = passed and edge >= edge_min
    return {
        "pairs": pairs,
        "ybar_violations": y_bad,
        "rho_violations": r_bad,
        "ybar_violation_fraction": frac_y,
        "rho_violation_fraction": frac_r,
        "rear_ybar": rear,
        "edge_ybar": edge,
        "single_interval": profile.single_interval,
        "passed": bool(passed),
    }


def interior_slice(profile: WaveProfile, band: float = EDGE_BAND) -> slice:
    span = profile.support
    if span is None:
        raise EmptySupportError("profile has empty support")
    i0, i1 = span
    length = i1 - i0 + 1
    cut = int(math.ceil(band * length))
    return slice(i0, max(i0 + 1, i1 + 1 - cut))


def compare_to_oracle(profile: WaveProfile, laws: PhenotypeLaws, params: ModelParams,
                      band: float = EDGE_BAND) -> dict:
    """Relative errors of rho and M against the closed-form relations on the support
    interior (the outer ``band`` of the support next to the edge is skipped), and of
    E against the indicator profile over the whole domain."""
    sl = interior_slice(profile, band)
    yb = profile.ybar[sl]
    rho, M = profile.rho[sl], profile.M[sl]
    mask = profile.mask[sl]
    rho_or = oracle_rho(yb, laws, params)
    M_or = oracle_M(yb, mask, laws, params)
    E_or = oracle_E(profile.mask, params)
    w = np.ones(profile.x.size)
    w[0] = w[-1] = 0.5
    d_rho = np.abs(rho - rho_or)
    d_M = np.abs(M - M_or)
    full = profile.mask
    M_full = oracle_M(np.where(full, profile.ybar, params.Y), full, laws, params)
    M_scale = float(np.max(M_full)) if np.any(M_full) else 1.0
    return {
        "rho_linf": float(np.max(d_rho)) / params.rho_max,
        "rho_l1": float(np.sum(d_rho) / np.sum(rho_or)),
        "M_linf": float(np.max(d_M)) / M_scale,
        "M_l1": float(np.sum(d_M) / max(np.sum(M_or), 1e-300)),
        "E_l1": float(np.sum(w * np.abs(profile.E - E_or)) / (params.E_max * np.sum(w))),
        "interior_points": int(sl.stop - sl.start),
    }


ORACLE_METRICS = ("rho_linf", "rho_l1", "M_linf", "M_l1", "E_l1")


def relative_l1(a, b) -> float:
    """Trapezoid-weighted L1 distance of ``a`` from ``b`` relative to the L1 norm of ``b``."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    w = np.ones(b.shape[0])
    if w.size > 1:
        w[0] = w[-1] = 0.5
    return float(np.sum(w * np.abs(a - b)) / np.sum(w * np.abs(b)))


def front_speed(times, ells) -> tuple[float, float]:
    """Least-squares slope of the edge position; returns ``(c, rms residual)``."""
    t = np.asarray(times, float)
    ell = np.asarray(ells, float)
    ok = np.isfinite(ell)
    t, ell = t[ok], ell[ok]
    if t.size < 2:
        raise ValueError("front speed needs at least two snapshots with a front edge")
    A = np.vstack([t, np.ones_like(t)]).T
    (c, b), *_ = np.linalg.lstsq(A, ell, rcond=None)
    resid = ell - (c * t + b)
    return float(c), float(np.sqrt(np.mean(resid**2)))


def profile_speed(profiles) -> tuple[float, float]:
    return front_speed([p.t for p in profiles], [p.ell for p in profiles])
