"""Phenotype-structured haptotactic invasion: lattice and continuum engines."""
from .config import RunSpec, load_config
from .continuum import ContinuumGrid, ContinuumSolver, SchemeError, Snapshot, run_continuum
from .ibm import IBSimulation, IBState, run_ibm, run_replicates
from .ibm2d import IBSimulation2D, radial_transect, run_2d, transect_ensemble
from .model import (
    ConfigError,
    InitialProfile,
    ModelParams,
    PhenotypeLaws,
    build_laws,
    derive_scaled_params,
    growth_rate,
    rescaled_time_of_step,
    steps_to,
    validate_config,
)
from .wave import compare_to_oracle, structure_checks, wave_profile

__all__ = [
    "ConfigError",
    "ContinuumGrid",
    "ContinuumSolver",
    "IBSimulation",
    "IBSimulation2D",
    "IBState",
    "InitialProfile",
    "ModelParams",
    "PhenotypeLaws",
    "RunSpec",
    "SchemeError",
    "Snapshot",
    "build_laws",
    "compare_to_oracle",
    "derive_scaled_params",
    "growth_rate",
    "load_config",
    "radial_transect",
    "rescaled_time_of_step",
    "run_2d",
    "run_continuum",
    "run_ibm",
    "run_replicates",
    "steps_to",
    "structure_checks",
    "transect_ensemble",
    "validate_config",
    "wave_profile",
]
