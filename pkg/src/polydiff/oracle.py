"""Independent reference computations used to check the solver.

* :func:`stress_closed_form` evaluates the exponential-integral representation
  of ``varsigma = sigma - nu u`` at one spatial point along a prescribed
  concentration path.
* :func:`manufactured_forcing` produces the sources that make a chosen
  closed-form pair ``(v*, tau*)`` an exact solution.
* :func:`dense_reference_step` advances the semi-discrete system with
  classical RK4 on dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .grid import DiscreteOperators, GridSpec
from .model import BoundaryLift, ModelParams, beta0, gamma_rhs
from .solver import State


@dataclass(frozen=True)
class StressODEProblem:
    """Pointwise stress relaxation along a prescribed concentration path.

    ``u_path`` must accept an array of times and return the concentration.
    """

    u_path: Callable[[np.ndarray], np.ndarray]
    varsigma0: float
    params: ModelParams


def _lobatto_nodes(m: int) -> np.ndarray:
    """Gauss-Lobatto-Legendre nodes on [0, 1]."""
    interior = legendre.Legendre.basis(m - 1).deriv().roots()
    x = np.concatenate([[-1.0], np.sort(interior.real), [1.0]])
    return 0.5 * (x + 1.0)


def _integration_matrix(nodes: np.ndarray) -> np.ndarray:
    """``Q[i, j] = int_0^{nodes[i]} l_j(s) ds`` for the Lagrange basis ``l_j``."""
    m = len(nodes)
    x = 2.0 * nodes - 1.0
    V = legendre.legvander(x, m - 1)
    # antiderivative of each Legendre basis polynomial, zero at x = -1
    A = np.zeros((m, m))
    for k in range(m):
        c = np.zeros(m)
        c[k] = 1.0
        A[:, k] = legendre.legval(x, legendre.legint(c, lbnd=-1.0))
    # map to [0, 1]: ds = dx / 2
    return 0.5 * A @ np.linalg.inv(V)


_NODES = _lobatto_nodes(12)
_QMAT = _integration_matrix(_NODES)


class SelfConsistencyError(RuntimeError):
    pass


def stress_closed_form(
    prob: StressODEProblem,
    t,
    substep: float = 0.05,
    tol: float = 1e-12,
    max_iter: int = 100,
):
    """Evaluate ``varsigma(t)`` for scalar or array ``t`` (nondecreasing not required).

    The representation

        varsigma(t) = varsigma(0) exp(-int_0^t b) + int_0^t exp(-int_s^t b) (mu - nu b(s)) u(s) ds,
        b(s) = beta_0(u(s), nu u(s) + varsigma(s)),

    is applied on consecutive short windows.  On each window the integrals
    use a 12-point Gauss-Lobatto collocation and the dependence of ``b`` on
    ``varsigma`` is resolved by fixed-point iteration.
    """
    p = prob.params
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be nonnegative")
    order = np.argsort(ts)
    out = np.empty_like(ts)
    level = float(prob.varsigma0)
    a = 0.0
    for idx in order:
        target = ts[idx]
        while a < target:
            b = min(a + substep, target)
            level = _window(prob, a, b, level, tol, max_iter)
            a = b
        out[idx] = level
    return out if np.ndim(t) else float(out[0])


def _window(prob, a, b, level, tol, max_iter):
    p = prob.params
    width = b - a
    s = a + width * _NODES
    Q = width * _QMAT
    u = np.asarray(prob.u_path(s), dtype=float)
    vs = np.full_like(s, level)
    for _ in range(max_iter):
        beta = beta0(u, p.nu * u + vs, p)
        B = Q @ beta  # int_a^s beta
        inner = Q @ (np.exp(B) * (p.mu - p.nu * beta) * u)
        new = np.exp(-B) * (level + inner)
        if np.max(np.abs(new - vs)) <= tol * max(1.0, np.max(np.abs(new))):
            return float(new[-1])
        vs = new
    raise SelfConsistencyError(f"fixed-point iteration did not converge on [{a}, {b}]")


def stress_bound(prob: StressODEProblem, t):
    """Right-hand side ``e^{-t beta_G} |varsigma(0)| + (mu + nu beta_R) / beta_G``."""
    p = prob.params
    t = np.asarray(t, dtype=float)
    return np.exp(-t * p.beta_G) * abs(prob.varsigma0) + (p.mu + p.nu * p.beta_R) / p.beta_G


# -- manufactured solutions ------------------------------------------------


@dataclass(frozen=True)
class ManufacturedField:
    """Closed-form space-time field with its time derivative and Laplacian.

    Each callable takes ``(t, *coords)``.
    """

    value: Callable
    time_derivative: Callable
    laplacian: Callable


def sine_mode(grid: GridSpec, amplitude: float = 1.0, rate: float = 1.0, modes=None) -> ManufacturedField:
    """``amplitude * exp(-rate t) * prod_i sin(k_i pi x_i / L_i)``."""
    modes = (1,) * grid.dimension if modes is None else tuple(modes)
    wav = [k * np.pi / L for k, L in zip(modes, grid.lengths)]
    wav2 = sum(w * w for w in wav)

    def value(t, *x):
        out = amplitude * np.exp(-rate * t)
        for w, xi in zip(wav, x):
            out = out * np.sin(w * xi)
        return out

    return ManufacturedField(
        value=value,
        time_derivative=lambda t, *x: -rate * value(t, *x),
        laplacian=lambda t, *x: -wav2 * value(t, *x),
    )


def manufactured_forcing(
    v_star: ManufacturedField,
    tau_star: ManufacturedField,
    ops: DiscreteOperators,
    lift: BoundaryLift,
    p: ModelParams,
):
    """Return ``forcing(t) -> (f_v, f_tau)`` for the pair ``(v*, tau*)``.

    ``f_v = dv*/dt - d Lap v* - E Lap tau* - h`` with exact Laplacians, and
    ``f_tau = dtau*/dt - gamma(x, v*, tau*)``.
    """
    grid = ops.grid
    X = grid.coordinates()

    def sample(fn, t):
        return np.broadcast_to(fn(t, *X), grid.shape).ravel().astype(float)

    def forcing(t):
        v = sample(v_star.value, t)
        tau = sample(tau_star.value, t)
        f_v = (
            sample(v_star.time_derivative, t)
            - p.d * sample(v_star.laplacian, t)
            - p.E * sample(tau_star.laplacian, t)
            - lift.h
        )
        f_tau = sample(tau_star.time_derivative, t) - gamma_rhs(v, tau, lift, p)
        return f_v, f_tau

    return forcing


def exact_state(v_star: ManufacturedField, tau_star: ManufacturedField, grid: GridSpec, t: float) -> State:
    X = grid.coordinates()
    v = np.broadcast_to(v_star.value(t, *X), grid.shape).ravel().astype(float)
    tau = np.broadcast_to(tau_star.value(t, *X), grid.shape).ravel().astype(float)
    return State(t, v, tau)


# -- dense reference integrator ---------------------------------------------

DENSE_LIMIT = 512


def dense_reference_step(
    s: State,
    dt: float,
    ops: DiscreteOperators,
    lift: BoundaryLift,
    p: ModelParams,
    substeps: int = 100,
    forcing=None,
    reaction=None,
) -> State:
    """Advance by ``dt`` with classical RK4 on dense matrices.

    At least ``substeps`` RK4 steps are taken; more when the diffusion
    spectrum would otherwise leave the RK4 stability interval.
    """
    n = ops.grid.size
    if n > DENSE_LIMIT:
        raise ValueError(f"dense reference limited to {DENSE_LIMIT} nodes, grid has {n}")
    lap = ops.laplacian.toarray()
    stiff = p.d * float(np.max(ops.eigenvalues))
    m = max(int(substeps), int(np.ceil(dt * stiff / 2.0)))
    k = dt / m
    gamma = reaction if reaction is not None else (lambda v, tau: gamma_rhs(v, tau, lift, p))

    def rhs(t, y):
        v, tau = y[:n], y[n:]
        dv = p.d * (lap @ v) + p.E * (lap @ tau) + lift.h
        dtau = gamma(v, tau)
        if forcing is not None:
            fv, ftau = forcing(t)
            dv = dv + fv
            dtau = dtau + ftau
        return np.concatenate([dv, dtau])

    y = np.concatenate([ops.grid.check(s.v, "v"), ops.grid.check(s.tau, "tau")])
    t = s.t
    for _ in range(m):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * k, y + 0.5 * k * k1)
        k3 = rhs(t + 0.5 * k, y + 0.5 * k * k2)
        k4 = rhs(t + k, y + k * k3)
        y = y + (k / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += k
    return State(s.t + dt, y[:n], y[n:])
