"""IMEX time stepping for the homogenised concentration/stress system.

    v'   = d Lap v + E Lap tau + h
    tau' = gamma(x, v, tau)

The diffusion of ``v`` is implicit (backward Euler or Crank-Nicolson, one
sparse factorisation per ``dt``); the pointwise ``tau`` equation is advanced
with the explicit midpoint rule.  One step:

1. ``tau_half = tau + dt/2 * gamma(v, tau)``
2. ``(I - theta dt d Lap) v_new = v + dt [E Lap tau_half + h + (1 - theta) d Lap v]``
3. ``tau_new = tau + dt * gamma((v + v_new)/2, tau_half)``

which is second order for ``theta = 1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DiscreteOperators, norm_h1, norm_hm1, norm_l2
from .model import BoundaryLift, ModelParams, beta0_grad, gamma_rhs, lift_state

SCHEMES = {"imex-euler": 1.0, "imex-cn": 0.5}

Forcing = Callable[[float], "tuple[np.ndarray, np.ndarray]"]
Reaction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SolverDivergence(RuntimeError):
    """Raised when a step produces non-finite values or exceeds the guard.

    ``partial`` holds the trajectory sampled up to the failure, when known.
    """

    def __init__(self, message, step_index, partial=None):
        super().__init__(message)
        self.step_index = step_index
        self.partial = partial


@dataclass(frozen=True)
class State:
    t: float
    v: np.ndarray
    tau: np.ndarray

    def varpi(self, p: ModelParams) -> np.ndarray:
        return self.tau + p.nu * self.v


def zero_state(ops: DiscreteOperators, t: float = 0.0) -> State:
    n = ops.grid.size
    return State(t, np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "imex-euler"
    sample_stride: int = 1
    max_value_guard: float = 1e12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be at least dt, got t_end={self.t_end}, dt={self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")
        if not self.max_value_guard > 0:
            raise ValueError("max_value_guard must be positive")

    @property
    def theta(self) -> float:
        return SCHEMES[self.scheme]


def default_dt(ops: DiscreteOperators, p: ModelParams) -> float:
    return min(0.25 / p.beta_R, min(ops.grid.spacing))


def aligned_dt(dt: float, stride: int = 1) -> float:
    """Largest step ``<= dt`` whose sample spacing ``stride * step`` is ``1/m``, m integer.

    Unit-time shifts then fall exactly on samples.
    """
    m = int(np.ceil(1.0 / (dt * stride) - 1e-12))
    return 1.0 / (m * stride)


@dataclass(eq=False)
class TrajectoryRecord:
    """Sampled trajectory ``(v, tau)`` on a uniform time stride.

    ``v`` and ``tau`` are ``(n_samples, n_nodes)`` arrays; ``norms`` maps
    ``v_l2``, ``v_hm1``, ``varpi_l2`` and ``tau_h1`` to per-sample series.
    Sample ``j`` sits at ``t0 + j * sample_dt``.
    """

    t0: float
    sample_dt: float
    v: np.ndarray
    tau: np.ndarray
    norms: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.v)) * self.sample_dt

    @property
    def span(self) -> float:
        return (len(self.v) - 1) * self.sample_dt

    def __len__(self):
        return len(self.v)

    def state(self, j: int) -> State:
        return State(float(self.times[j]), self.v[j], self.tau[j])


def sample_norms(v, tau, ops: DiscreteOperators, p: ModelParams) -> dict:
    return {
        "v_l2": norm_l2(v, ops.grid),
        "v_hm1": norm_hm1(v, ops),
        "varpi_l2": norm_l2(tau + p.nu * v, ops.grid),
        "tau_h1": norm_h1(tau, ops),
    }


class IMEXIntegrator:
    """Stepper bound to one set of operators, boundary lift, parameters and ``dt``.

    ``forcing(t)`` optionally returns extra sources ``(f_v, f_tau)``;
    ``reaction(v, tau)`` optionally replaces ``gamma`` (used by tests that
    freeze the stress equation).
    """

    def __init__(
        self,
        ops: DiscreteOperators,
        lift: BoundaryLift,
        params: ModelParams,
        cfg: SolverConfig,
        forcing: Optional[Forcing] = None,
        reaction: Optional[Reaction] = None,
    ):
        if lift.grid != ops.grid:
            raise ValueError("boundary lift and operators live on different grids")
        self.ops, self.lift, self.params, self.cfg = ops, lift, params, cfg
        self.forcing = forcing
        self.reaction = reaction
        theta = cfg.theta
        n = ops.grid.size
        lhs = sp.identity(n, format="csc") - theta * cfg.dt * params.d * ops.laplacian
        self._lu = spla.splu(sp.csc_matrix(lhs))

    def _gamma(self, v, tau):
        if self.reaction is not None:
            return self.reaction(v, tau)
        return gamma_rhs(v, tau, self.lift, self.params)

    def _advance(self, v, tau, t):
        dt, theta = self.cfg.dt, self.cfg.theta
        p, lap = self.params, self.ops.laplacian
        if self.forcing is not None:
            fv, ftau0 = self.forcing(t)
            _, ftau_half = self.forcing(t + 0.5 * dt)
            fv = self.forcing(t + theta * dt)[0]
        else:
            fv = ftau0 = ftau_half = 0.0

        tau_half = tau + 0.5 * dt * (self._gamma(v, tau) + ftau0)
        rhs = v + dt * (p.E * (lap @ tau_half) + self.lift.h + fv)
        if theta != 1.0:
            rhs += dt * (1.0 - theta) * p.d * (lap @ v)
        v_new = self._lu.solve(rhs)
        tau_new = tau + dt * (self._gamma(0.5 * (v + v_new), tau_half) + ftau_half)
        return v_new, tau_new

    def _guard(self, v, tau, index):
        bad = not (np.all(np.isfinite(v)) and np.all(np.isfinite(tau)))
        if bad or np.max(np.abs(v)) > self.cfg.max_value_guard:
            raise SolverDivergence(f"solution diverged at step {index}", index)

    def step(self, s: State, index: int = 0) -> State:
        v, tau = self._advance(s.v, s.tau, s.t)
        self._guard(v, tau, index)
        return State(s.t + self.cfg.dt, v, tau)

    def relax_stress(self, v, tau, n_steps: int) -> np.ndarray:
        """Advance only the stress equation ``n_steps`` times with ``v`` frozen."""
        dt = self.cfg.dt
        for _ in range(n_steps):
            tau_half = tau + 0.5 * dt * self._gamma(v, tau)
            tau = tau + dt * self._gamma(v, tau_half)
        return tau

    def integrate(self, s0: State) -> TrajectoryRecord:
        """Step from ``s0`` to ``cfg.t_end``, sampling every ``sample_stride`` steps."""
        grid, p, cfg = self.ops.grid, self.params, self.cfg
        v, tau = grid.check(s0.v, "v0").copy(), grid.check(s0.tau, "tau0").copy()
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(tau))):
            raise ValueError("initial state must be finite")
        n_steps = int(np.ceil((cfg.t_end - s0.t) / cfg.dt - 1e-9))
        stride = int(cfg.sample_stride)
        vs, taus = [v.copy()], [tau.copy()]
        for k in range(1, n_steps + 1):
            t = s0.t + (k - 1) * cfg.dt
            v, tau = self._advance(v, tau, t)
            try:
                self._guard(v, tau, k)
            except SolverDivergence as exc:
                exc.partial = self._record(s0.t, vs, taus)
                raise
            if k % stride == 0:
                vs.append(v.copy())
                taus.append(tau.copy())
        return self._record(s0.t, vs, taus)

    def _record(self, t0, vs, taus) -> TrajectoryRecord:
        V, T = np.array(vs), np.array(taus)
        keys = ("v_l2", "v_hm1", "varpi_l2", "tau_h1")
        rows = [sample_norms(v, tau, self.ops, self.params) for v, tau in zip(V, T)]
        norms = {k: np.array([r[k] for r in rows]) for k in keys}
        return TrajectoryRecord(t0, self.cfg.dt * self.cfg.sample_stride, V, T, norms)


def step(s: State, cfg: SolverConfig, ops, lift, p, **kwargs) -> State:
    return IMEXIntegrator(ops, lift, p, cfg, **kwargs).step(s)


def integrate(s0: State, cfg: SolverConfig, ops, lift, p, **kwargs) -> TrajectoryRecord:
    return IMEXIntegrator(ops, lift, p, cfg, **kwargs).integrate(s0)


def recover_u_sigma(traj: TrajectoryRecord, lift: BoundaryLift, p: ModelParams):
    """Per-sample ``(u, sigma)`` arrays, shape ``(n_samples, n_nodes)`` each."""
    pairs = [lift_state(v, tau, lift, p) for v, tau in zip(traj.v, traj.tau)]
    return np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])


# -- continuous dependence -------------------------------------------------


@dataclass(frozen=True)
class GronwallBound:
    """Growth bound ``dist(t) <= prefactor * dist(0) * exp(rate * t)``.

    ``dist`` is ``(||w||^2 + ||xi||^2)^(1/2)`` for differences ``w`` of ``v``
    and ``xi`` of ``varpi``.  ``L_u``, ``L_sigma`` bound the partial
    derivatives of ``beta_0(u, sigma) * sigma``.
    """

    rate: float
    prefactor: float
    L_u: float
    L_sigma: float

    def log_bound(self, eps, t):
        return np.log(self.prefactor * eps) + self.rate * np.asarray(t, dtype=float)


def stress_flux_lipschitz(p: ModelParams, n_samples: int = 801, safety: float = 1.05):
    """Sup of ``|d(beta_0 sigma)/du|`` and ``|d(beta_0 sigma)/dsigma|`` over the plane.

    Outside ``|u| + |sigma| <= 2 R_cut`` the flux is ``beta_inf * sigma``, so
    sampling the closed diamond suffices.  The tanh transition layer gets a
    dedicated fine sampling so its peak is not missed.
    """
    R = p.R_cut
    if R is None or not np.isfinite(R):
        raise ValueError("Lipschitz bound needs a finite cutoff radius")
    span = 2.0 * R
    u = np.concatenate(
        [
            np.linspace(-span, span, n_samples),
            p.u_RG + p.delta_beta * np.linspace(-6, 6, 241),
        ]
    )
    u = np.unique(u[np.abs(u) <= span])
    s = np.linspace(-span, span, n_samples)
    U, S = np.meshgrid(u, s, indexing="ij")
    inside = np.abs(U) + np.abs(S) <= span * (1 + 1e-12)
    beta, beta_u, beta_s = beta0_grad(U[inside], S[inside], p)
    L_u = float(np.max(np.abs(S[inside] * beta_u)))
    L_s = float(np.max(np.abs(beta + S[inside] * beta_s)))
    return safety * L_u, safety * max(L_s, p.beta_inf)


def gronwall_bound(ops: DiscreteOperators, p: ModelParams) -> GronwallBound:
    """Continuous-dependence constant from the energy argument on differences.

    With ``Y = mu/2 ||w||_-1^2 + nu D/2 ||w||^2 + E/2 ||xi||^2`` one gets
    ``Y' <= kappa Y`` where ``kappa = E L_u/(nu D) + L_u + 2 L_sigma``.
    """
    L_u, L_s = stress_flux_lipschitz(p)
    kappa = p.E * L_u / (p.nu * p.D) + L_u + 2.0 * L_s
    upper = max(p.mu / ops.lambda1 + p.nu * p.D, p.E)
    lower = min(p.nu * p.D, p.E)
    return GronwallBound(0.5 * kappa, float(np.sqrt(upper / lower)), L_u, L_s)
