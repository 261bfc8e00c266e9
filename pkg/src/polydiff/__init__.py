"""Finite-difference simulator for coupled concentration/stress diffusion in
viscoelastic polymers, with long-time diagnostics (energy dissipation,
continuous dependence, trajectory attraction)."""

from .grid import (
    DiscreteOperators,
    GridSpec,
    build_operators,
    frechet_prenorm,
    inner_hm1,
    inner_l2,
    norm_h1,
    norm_hm1,
    norm_hmdelta,
    norm_l2,
)
from .model import (
    BoundaryLift,
    ModelParams,
    beta0,
    build_lift,
    drop_state,
    gamma_rhs,
    homogeneous_lift,
    lift_state,
    make_preset,
    solve_boundary_compat,
)
from .solver import (
    IMEXIntegrator,
    SolverConfig,
    SolverDivergence,
    State,
    TrajectoryRecord,
    integrate,
    recover_u_sigma,
    step,
)
from .config import ConfigError, RunConfig, default_config, load_config, parse_config

__version__ = "0.1.0"
