"""Model parameters, phenotype laws and discrete-to-continuum scalings.

A single frozen :class:`ModelParams` value is shared by the lattice engine,
the continuum solver and the front analysis, so the engines can never drift
apart through configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


class ConfigError(ValueError):
    """Raised when a parameter set cannot be run."""


@dataclass(frozen=True)
class ModelParams:
    tau: float
    dx: float
    dy: float
    eps: float
    X: float = 100.0
    Y: float = 1.0
    T: float = 30.0
    alpha: float = 0.1
    rho_max: float | None = None
    E_max: float = 1.0
    kappa_M: float = 1.0
    kappa_E: float = 1.0
    p_min: float = 1e-7
    zeta: float = 1e-5
    # derived per-step probabilities and MDE diffusivity
    theta: float = field(init=False)
    eta: float = field(init=False)
    beta: float = field(init=False)
    D_M: float = field(init=False)

    def __post_init__(self):
        theta, eta, beta, D_M = _scalings(self.tau, self.dx, self.dy, self.eps, self.E_max)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "D_M", D_M)

    @property
    def nx(self) -> int:
        return int(round(self.X / self.dx)) + 1

    @property
    def ny(self) -> int:
        return int(round(self.Y / self.dy)) + 1

    def x_grid(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    def y_grid(self) -> np.ndarray:
        return np.arange(self.ny) * self.dy

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def _scalings(tau, dx, dy, eps, E_max):
    theta = 2.0 * tau * eps**2 / dx**2
    eta = 2.0 * E_max * tau * eps / dx**2
    beta = 2.0 * tau * eps**2 / dy**2
    return theta, eta, beta, eps


def derive_scaled_params(tau: float, dx: float, dy: float, eps: float, E_max: float = 1.0):
    """Return ``(theta, eta, beta, D_M)`` for the rescaled lattice model.

    The scalings are chosen so that the continuum limit has random motility
    ``eps**2``, haptotactic scale ``eps``, phenotypic diffusivity ``eps**2``
    and MDE diffusivity ``eps``.
    """
    for name, value in (("tau", tau), ("dx", dx), ("dy", dy), ("eps", eps), ("E_max", E_max)):
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value!r}")
    theta, eta, beta, D_M = _scalings(tau, dx, dy, eps, E_max)
    if theta > 1:
        raise ConfigError(f"random-move probability theta = {theta:.6g} exceeds 1 (theta <= 1)")
    if beta > 1:
        raise ConfigError(f"phenotype-switch probability beta = {beta:.6g} exceeds 1 (beta <= 1)")
    return theta, eta, beta, D_M


# --------------------------------------------------------------------------
# phenotype laws

Law = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhenotypeLaws:
    mu: Law
    r: Law
    p: Law
    names: tuple[str, str, str] = ("quadratic", "quadratic", "quadratic")


def _mu_quadratic(params):
    return lambda y: np.asarray(y, dtype=float) ** 2


def _mu_linear(params):
    return lambda y: np.asarray(y, dtype=float) / params.Y


def _r_quadratic(params):
    Y = params.Y
    return lambda y: 1.0 - (np.asarray(y, dtype=float) / Y) ** 2


def _r_linear(params):
    Y = params.Y
    return lambda y: 1.0 - np.asarray(y, dtype=float) / Y


def _p_quadratic(params):
    p_min, zeta = params.p_min, params.zeta
    return lambda y: p_min + zeta * np.asarray(y, dtype=float) ** 2


def _p_linear(params):
    p_min, zeta = params.p_min, params.zeta
    return lambda y: p_min + zeta * np.asarray(y, dtype=float)


# factories take the ModelParams so laws can close over Y, p_min, zeta
LAW_REGISTRY: dict[str, dict[str, Callable[[ModelParams], Law]]] = {
    "mu": {"quadratic": _mu_quadratic, "linear": _mu_linear},
    "r": {"quadratic": _r_quadratic, "linear": _r_linear},
    "p": {"quadratic": _p_quadratic, "linear": _p_linear},
}


def register_law(kind: str, name: str, factory: Callable[[ModelParams], Law]) -> None:
    if kind not in LAW_REGISTRY:
        raise KeyError(f"unknown law kind {kind!r}")
    LAW_REGISTRY[kind][name] = factory


def build_laws(params: ModelParams, mu: str = "quadratic", r: str = "quadratic",
               p: str = "quadratic") -> PhenotypeLaws:
    try:
        mu_f = LAW_REGISTRY["mu"][mu](params)
        r_f = LAW_REGISTRY["r"][r](params)
        p_f = LAW_REGISTRY["p"][p](params)
    except KeyError as exc:
        raise ConfigError(f"unknown phenotype law {exc.args[0]!r}") from None
    return PhenotypeLaws(mu_f, r_f, p_f, (mu, r, p))


def growth_rate(y, rho, laws: PhenotypeLaws, params: ModelParams):
    """Net growth rate alpha * (r(y) - rho / rho_max)."""
    if params.rho_max is None:
        raise ConfigError("rho_max is unresolved; build the initial profile first")
    return params.alpha * (laws.r(y) - np.asarray(rho, dtype=float) / params.rho_max)


def sup_abs_growth(params: ModelParams, laws: PhenotypeLaws, n_scan: int = 1001) -> float:
    """sup |R| over y in [0, Y] and rho in [0, rho_max]."""
    y = np.linspace(0.0, params.Y, n_scan)
    r = laws.r(y)
    # R is affine in rho, so extremes sit at rho = 0 and rho = rho_max
    return float(params.alpha * max(np.max(np.abs(r)), np.max(np.abs(r - 1.0))))


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str

    def __str__(self):
        return f"{self.constraint}: {self.detail}"


def validate_config(params: ModelParams, laws: PhenotypeLaws, n_scan: int = 1001,
                    dim: int = 1) -> list[Violation]:
    """Collect every violated admissibility constraint; empty means runnable."""
    out: list[Violation] = []

    def bad(constraint, detail):
        out.append(Violation(constraint, detail))

    for name in ("tau", "dx", "dy", "eps", "X", "Y", "T", "alpha", "E_max", "kappa_M", "kappa_E"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            bad("positive parameters", f"{name} = {v!r} must be > 0")
    if params.rho_max is not None and not params.rho_max > 0:
        bad("positive parameters", f"rho_max = {params.rho_max!r} must be > 0")
    for name in ("p_min", "zeta"):
        if not getattr(params, name) >= 0:
            bad("non-negative secretion", f"{name} = {getattr(params, name)!r} must be >= 0")
    if out:
        return out  # derived checks are meaningless without positive inputs

    if abs(params.X / params.dx - round(params.X / params.dx)) > 1e-9 * params.X / params.dx:
        bad("lattice fits domain", f"X / dx = {params.X / params.dx:.6g} is not an integer")
    if abs(params.Y / params.dy - round(params.Y / params.dy)) > 1e-9 * params.Y / params.dy:
        bad("lattice fits domain", f"Y / dy = {params.Y / params.dy:.6g} is not an integer")

    if not 0 < params.theta <= 1:
        bad("random-move probability theta in (0, 1]", f"theta = {params.theta:.6g}")
    if not 0 < params.beta <= 1:
        bad("phenotype-switch probability beta in (0, 1]", f"beta = {params.beta:.6g}")

    y = np.linspace(0.0, params.Y, n_scan)
    mu, r, p = laws.mu(y), laws.r(y), laws.p(y)
    if float(np.max(params.eta * mu)) > 1 + 1e-12:
        bad("haptotaxis bound eta * mu(y) <= 1",
            f"eta * max mu = {params.eta * float(np.max(mu)):.6g}")
    sup_R = sup_abs_growth(params, laws, n_scan)
    if params.tau * sup_R > 1 + 1e-12:
        bad("proliferation bound tau * sup|R| <= 1", f"tau * sup|R| = {params.tau * sup_R:.6g}")
    lap = 2 * dim * params.D_M / params.dx**2
    if params.tau * (lap + params.kappa_M) > 1 + 1e-12:
        bad("MDE update positivity tau * (2 d D_M / dx^2 + kappa_M) <= 1",
            f"value = {params.tau * (lap + params.kappa_M):.6g}")

    if abs(mu[0]) > 1e-12:
        bad("mu(0) = 0", f"mu(0) = {mu[0]:.6g}")
    if not np.all(np.diff(mu) > 0):
        bad("mu strictly increasing", "mu is not strictly increasing on the phenotype grid")
    if abs(r[0] - 1.0) > 1e-12:
        bad("r(0) = 1", f"r(0) = {r[0]:.6g}")
    if abs(r[-1]) > 1e-12:
        bad("r(Y) = 0", f"r(Y) = {r[-1]:.6g}")
    if not np.all(np.diff(r) < 0):
        bad("r strictly decreasing", "r is not strictly decreasing on the phenotype grid")
    if not p[0] > 0:
        bad("p(0) = p_min > 0", f"p(0) = {p[0]:.6g}")
    elif abs(p[0] - params.p_min) > 1e-12 * max(1.0, params.p_min):
        bad("p(0) = p_min", f"p(0) = {p[0]:.6g} but p_min = {params.p_min:.6g}")
    if not np.all(np.diff(p) > 0):
        bad("p strictly increasing", "p is not strictly increasing on the phenotype grid")
    return out


def require_valid(params: ModelParams, laws: PhenotypeLaws, dim: int = 1) -> None:
    report = validate_config(params, laws, dim=dim)
    if report:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(map(str, report)))


# --------------------------------------------------------------------------
# time bookkeeping: one lattice step of duration tau advances rescaled time by eps * tau


def rescaled_time_of_step(k: int, params: ModelParams) -> float:
    return k * params.eps * params.tau


def steps_to(t: float, params: ModelParams) -> int:
    """Number of lattice steps needed to reach rescaled time ``t``."""
    ratio = t / (params.eps * params.tau)
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


# --------------------------------------------------------------------------
# initial phenotype profile

_C_QUADRATURE_POINTS = 200_001


@dataclass(frozen=True)
class InitialProfile:
    """Gaussian-in-phenotype, exp(-x^2)-in-space initial cell distribution."""

    A0: float = 100.0
    ybar0: float = 0.2
    eps: float = 1e-2
    Y: float = 1.0
    C: float = field(init=False)

    def __post_init__(self):
        y = np.linspace(0.0, self.Y, _C_QUADRATURE_POINTS)
        integral = np.trapezoid(np.exp(-((y - self.ybar0) ** 2) / self.eps), y)
        object.__setattr__(self, "C", 1.0 / float(integral))

    def density(self, x, y):
        """Expected cell count per lattice site, A0 * C * exp(-|x|^2) * exp(-(y - ybar0)^2 / eps).

        ``x`` may carry a trailing axis of coordinates for the 2D lattice.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.A0 * self.C * np.exp(-(x**2)) * np.exp(-((y - self.ybar0) ** 2) / self.eps)
