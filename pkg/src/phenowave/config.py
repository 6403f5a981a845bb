"""Flat YAML run configuration, built-in presets and the validated run bundle."""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import ConfigError, InitialProfile, ModelParams, PhenotypeLaws, build_laws, validate_config

MODES = ("ibm", "continuum", "compare", "sweep", "ibm2d")

# tau may be a number, "half-dx2" (dx^2 / 2) or "auto" (a fraction of the largest admissible step)
_FULL_BASE = {
    "dim": 1, "dx": 0.05, "dy": 0.02, "tau": "half-dx2", "X": 100.0, "Y": 1.0, "T": 30.0,
    "alpha": 0.1, "E_max": 1.0, "kappa_M": 1.0, "kappa_E": 1.0, "p_min": 1e-7, "zeta": 1e-5,
    "A0": 100.0, "ybar0": 0.2, "mu": "quadratic", "r": "quadratic", "p": "quadratic",
    "replicates": 5, "seed": 0,
}

PRESETS: dict[str, dict] = {
    "full-1d-eps1e2": {**_FULL_BASE, "eps": 1e-2, "snapshots": [10, 20, 30]},
    "full-1d-eps5e3": {**_FULL_BASE, "eps": 5e-3, "snapshots": [10, 20, 30]},
    "full-1d-eps1e3": {**_FULL_BASE, "eps": 1e-3, "T": 15.0, "snapshots": [5, 10, 15]},
    "full-2d": {**_FULL_BASE, "dim": 2, "dx": 0.1, "X": 10.0, "T": 5.0, "A0": 1.0, "eps": 1e-2,
                 "replicates": 15, "snapshots": [5]},
    # desk-scale variants: coarser space step and the largest comfortable tau
    "desk-1d-eps1e2": {**_FULL_BASE, "dx": 0.1, "tau": "auto", "X": 50.0, "T": 10.0, "eps": 1e-2,
                       "snapshots": [2.5, 5, 7.5, 10], "cross_l1_tol": 0.15},
    "desk-sweep": {**_FULL_BASE, "dx": 0.1, "tau": "auto", "X": 80.0, "eps": 1e-2,
                   "sweep_eps": [1e-2, 5e-3, 1e-3], "sweep_ibm": False,
                   "oracle_rho_linf_tol": 0.05, "structure_tol": 0.05, "rear_ybar_max": 0.3,
                   "edge_ybar_min": 0.9, "sigma_ratio_min": 2.0},
    "desk-2d": {**_FULL_BASE, "dim": 2, "dx": 0.1, "tau": "auto", "auto_tau_fraction": 0.95, "X": 6.0,
                "T": 5.0, "A0": 1.0, "eps": 1e-2, "replicates": 15, "snapshots": [5], "structure_tol": 0.05},
}

PARAM_KEYS = ("dx", "dy", "eps", "X", "Y", "T", "alpha", "rho_max", "E_max", "kappa_M", "kappa_E", "p_min", "zeta")
RUN_KEYS = ("preset", "mode", "dim", "tau", "A0", "ybar0", "mu", "r", "p", "snapshots", "replicates", "seed",
            "out", "sweep_eps", "sweep_ibm", "continuum_refine", "cross_l1_tol", "oracle_rho_linf_tol",
            "structure_tol", "rear_ybar_max", "edge_ybar_min", "sigma_ratio_min", "auto_tau_fraction")
ALLOWED = set(PARAM_KEYS) | set(RUN_KEYS)

AUTO_TAU_FRACTION = 0.75


@dataclass
class RunSpec:
    mode: str = "ibm"
    config_path: str | None = None
    snapshots: list[float] = field(default_factory=list)
    replicates: int = 1
    seed: int = 0
    out: str = "out"
    dim: int = 1
    sweep_eps: list[float] = field(default_factory=list)
    sweep_ibm: bool = False
    continuum_refine: int = 1
    checks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    config_hash: str = ""

    def validate(self, T: float) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if list(self.snapshots) != sorted(self.snapshots):
            raise ConfigError("snapshot times must be sorted")
        if any(t < 0 or t > T + 1e-12 for t in self.snapshots):
            raise ConfigError(f"snapshot times must lie in [0, T={T}]")
        if self.mode == "sweep" and not self.sweep_eps:
            raise ConfigError("sweep mode needs a non-empty sweep_eps list")
        if self.mode == "ibm2d" and self.dim != 2:
            raise ConfigError("ibm2d mode needs dim: 2")
        if self.mode in ("ibm", "continuum", "compare") and self.dim != 1:
            raise ConfigError(f"{self.mode} mode runs the 1D model; use ibm2d for dim: 2")


def default_snapshots(eps: float, T: float) -> list[float]:
    base = [5.0, 10.0, 15.0] if eps < 5e-3 - 1e-15 else [10.0, 20.0, 30.0]
    picked = [t for t in base if t <= T + 1e-12]
    return picked or [T]


def auto_tau(dx: float, dy: float, eps: float, alpha: float, kappa_M: float, dim: int = 1,
             fraction: float = AUTO_TAU_FRACTION, mu_max: float = 1.0) -> float:
    """Largest tau meeting every per-step probability bound, times ``fraction``."""
    bounds = [
        dx**2 / (2 * eps * mu_max),           # eta * max mu <= 1
        1.0 / (2 * dim * eps / dx**2 + kappa_M),  # explicit MDE positivity
        dx**2 / (2 * eps**2),                 # theta <= 1
        dy**2 / (2 * eps**2),                 # beta <= 1
        1.0 / alpha,                          # tau * sup|R| <= 1 with r in [0, 1]
    ]
    return fraction * min(bounds)


def resolve_tau(raw: dict) -> float:
    tau = raw.get("tau", "half-dx2")
    if isinstance(tau, str):
        if tau == "half-dx2":
            return raw["dx"] ** 2 / 2
        if tau == "auto":
            return auto_tau(raw["dx"], raw["dy"], raw["eps"], raw["alpha"], raw["kappa_M"], raw.get("dim", 1),
                            raw.get("auto_tau_fraction", AUTO_TAU_FRACTION))
        raise ConfigError(f"tau must be a number, 'half-dx2' or 'auto', got {tau!r}")
    return float(tau)


def merged_raw(data: dict) -> dict:
    unknown = set(data) - ALLOWED
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    raw: dict = {}
    if "preset" in data:
        name = data["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
        raw.update(copy.deepcopy(PRESETS[name]))
    else:
        raw.update(copy.deepcopy(_FULL_BASE))
    raw.update(data)
    if "eps" not in raw:
        raise ConfigError("eps is required")
    return raw


def build_bundle(raw: dict, config_path: str | None = None, text: str = ""):
    from .ibm import resolve_rho_max

    tau = resolve_tau(raw)
    kwargs = {k: raw[k] for k in PARAM_KEYS if k in raw}
    try:
        params = ModelParams(tau=tau, **{k: float(v) if v is not None else None for k, v in kwargs.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameter value: {exc}") from None
    laws = build_laws(params, raw.get("mu", "quadratic"), raw.get("r", "quadratic"), raw.get("p", "quadratic"))
    dim = int(raw.get("dim", 1))
    report = validate_config(params, laws, dim=dim)
    if report:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(map(str, report)))
    profile = InitialProfile(A0=float(raw["A0"]), ybar0=float(raw["ybar0"]), eps=params.eps, Y=params.Y)
    params = resolve_rho_max(params, profile, dim)
    snaps = raw.get("snapshots")
    snaps = default_snapshots(params.eps, params.T) if snaps is None else [float(t) for t in snaps]
    checks = {k: raw[k] for k in ("cross_l1_tol", "oracle_rho_linf_tol", "structure_tol", "rear_ybar_max",
                                  "edge_ybar_min", "sigma_ratio_min") if raw.get(k) is not None}
    spec = RunSpec(
        mode=raw.get("mode", "ibm2d" if dim == 2 else "ibm"), config_path=config_path, snapshots=snaps,
        replicates=int(raw.get("replicates", 1)), seed=int(raw.get("seed", 0)), out=str(raw.get("out", "out")),
        dim=dim, sweep_eps=[float(e) for e in raw.get("sweep_eps", [])], sweep_ibm=bool(raw.get("sweep_ibm", False)),
        continuum_refine=int(raw.get("continuum_refine", 1)), checks=checks, raw=raw,
        config_hash=hashlib.sha256(text.encode()).hexdigest() if text else
        hashlib.sha256(yaml.safe_dump(raw, sort_keys=True).encode()).hexdigest(),
    )
    spec.validate(params.T)
    return params, laws, profile, spec


def load_config(path: str | Path) -> tuple[ModelParams, PhenotypeLaws, InitialProfile, RunSpec]:
    """Load a YAML file, or a bare preset name, into a validated run bundle."""
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            return build_bundle(merged_raw({"preset": str(path)}), str(path), f"preset: {path}\n")
        raise ConfigError(f"configuration file {path} does not exist")
    text = p.read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of keys to values")
    return build_bundle(merged_raw(data), str(p), text)


def with_overrides(raw: dict, **changes) -> dict:
    out = copy.deepcopy(raw)
    out.update({k: v for k, v in changes.items() if v is not None})
    return out
