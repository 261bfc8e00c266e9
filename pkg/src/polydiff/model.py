"""Material parameters, relaxation rate, boundary lift and the stress reaction term.

Variables: ``u`` concentration, ``sigma`` stress.  With the boundary lift
``(phi, stress_bc)`` the solver works with

    v = u - phi,    varpi = sigma - stress_bc,    tau = varpi - nu * v,

all of which vanish on the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.optimize import brentq

from .grid import GridSpec

BetaCore = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the concentration/stress system.

    ``R_cut`` is the l1 radius ``|u| + |sigma|`` beyond which the relaxation
    rate starts blending to ``beta_inf`` (it equals ``beta_inf`` from
    ``2 * R_cut`` on).  ``None`` means "derive from the boundary data", which
    :func:`build_lift` does; ``inf`` disables the cutoff.

    ``beta_core``, if given, replaces the tanh glass/rubber profile.  It must
    map ``(u, sigma)`` arrays into ``[beta_G, beta_R]``.
    """

    D: float = 1.0
    E: float = 1.0
    mu: float = 0.5
    nu: float = 1.0
    beta_R: float = 2.0
    beta_G: float = 0.5
    delta_beta: float = 0.2
    u_RG: float = 0.5
    beta_inf: float = 1.0
    R_cut: Optional[float] = None
    beta_core: Optional[BetaCore] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("D", "E", "nu", "delta_beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if not self.beta_R > self.beta_G > 0:
            raise ValueError("need beta_R > beta_G > 0")
        if not self.beta_G <= self.beta_inf <= self.beta_R:
            raise ValueError("need beta_G <= beta_inf <= beta_R")
        if self.R_cut is not None and not self.R_cut > 0:
            raise ValueError(f"R_cut must be positive, got {self.R_cut}")

    @property
    def d(self) -> float:
        return self.D + self.nu * self.E


def _smoothstep5(s):
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _smoothstep5_prime(s):
    return 30.0 * s * s * (1.0 - s) ** 2


def _tanh_core(u, p: ModelParams):
    return 0.5 * (p.beta_R + p.beta_G) + 0.5 * (p.beta_R - p.beta_G) * np.tanh((u - p.u_RG) / p.delta_beta)


def _cutoff(p: ModelParams) -> float:
    if p.R_cut is None:
        raise ValueError("R_cut is unresolved; build a BoundaryLift or set R_cut explicitly")
    return p.R_cut


def beta0(u, sigma, p: ModelParams):
    """Relaxation rate ``beta_0(u, sigma)`` with its far-field cutoff.

    Inside ``|u| + |sigma| <= R_cut`` this is the core profile; beyond
    ``2 R_cut`` it is exactly ``beta_inf``; in between a quintic smoothstep in
    the l1 radius blends the two, which keeps the map C^2.
    """
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    core = p.beta_core(u, sigma) if p.beta_core is not None else _tanh_core(u, p)
    core = np.broadcast_to(core, np.broadcast(u, sigma).shape)
    R = _cutoff(p)
    if np.isinf(R):
        return core.copy() if core.ndim else float(core)
    s = np.clip((np.abs(u) + np.abs(sigma) - R) / R, 0.0, 1.0)
    out = np.where(s >= 1.0, p.beta_inf, core + _smoothstep5(s) * (p.beta_inf - core))
    return out if out.ndim else float(out)


def beta0_grad(u, sigma, p: ModelParams):
    """Return ``(beta_0, d beta_0/du, d beta_0/dsigma)``.

    Analytic for the tanh core, centred differences for a user core.
    """
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    u, sigma = np.broadcast_arrays(u, sigma)
    if p.beta_core is None:
        core = _tanh_core(u, p)
        core_u = 0.5 * (p.beta_R - p.beta_G) / p.delta_beta / np.cosh((u - p.u_RG) / p.delta_beta) ** 2
        core_s = np.zeros_like(u)
    else:
        eps = 1e-6
        core = np.broadcast_to(p.beta_core(u, sigma), u.shape)
        core_u = (p.beta_core(u + eps, sigma) - p.beta_core(u - eps, sigma)) / (2 * eps)
        core_s = (p.beta_core(u, sigma + eps) - p.beta_core(u, sigma - eps)) / (2 * eps)
    R = _cutoff(p)
    if np.isinf(R):
        return core, core_u, core_s
    s = np.clip((np.abs(u) + np.abs(sigma) - R) / R, 0.0, 1.0)
    S = _smoothstep5(s)
    dS = _smoothstep5_prime(s) / R
    gap = p.beta_inf - core
    beta = np.where(s >= 1.0, p.beta_inf, core + S * gap)
    beta_u = (1.0 - S) * core_u + dS * np.sign(u) * gap
    beta_s = (1.0 - S) * core_s + dS * np.sign(sigma) * gap
    return beta, beta_u, beta_s


# -- boundary data ---------------------------------------------------------


class BoundaryPreset:
    """Concentration datum ``phi`` extended smoothly to the closed domain.

    Subclasses give ``value``; ``laplacian`` and ``grad_sq`` return ``None``
    when no closed form exists, in which case the lift falls back to
    finite differences.
    """

    name = "preset"

    def value(self, *x):
        raise NotImplementedError

    def laplacian(self, *x):
        return None

    def grad_sq(self, *x):
        return None

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class ConstantBoundary(BoundaryPreset):
    level: float = 0.0
    name = "constant"

    def value(self, *x):
        return np.full(np.shape(x[0]), self.level, dtype=float)

    def laplacian(self, *x):
        return np.zeros(np.shape(x[0]))

    def grad_sq(self, *x):
        return np.zeros(np.shape(x[0]))

    def describe(self):
        return {"name": self.name, "level": self.level}


@dataclass(frozen=True)
class RampBoundary(BoundaryPreset):
    """``phi = start + slope * x_0`` (linear along the first axis)."""

    start: float = 0.0
    slope: float = 1.0
    name = "ramp"

    def value(self, *x):
        return self.start + self.slope * np.asarray(x[0], dtype=float)

    def laplacian(self, *x):
        return np.zeros(np.shape(x[0]))

    def grad_sq(self, *x):
        return np.full(np.shape(x[0]), self.slope**2)

    def describe(self):
        return {"name": self.name, "start": self.start, "slope": self.slope}


@dataclass(frozen=True)
class GaussianBoundary(BoundaryPreset):
    """``phi = base + amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    base: float = 0.3
    amplitude: float = 0.5
    center: tuple = (0.5,)
    width: float = 0.1
    name = "gaussian"

    def _r2(self, x):
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (len(x),))
        return sum((np.asarray(xi, dtype=float) - ci) ** 2 for xi, ci in zip(x, c))

    def value(self, *x):
        return self.base + self.amplitude * np.exp(-self._r2(x) / (2 * self.width**2))

    def laplacian(self, *x):
        r2 = self._r2(x)
        w2 = self.width**2
        g = self.amplitude * np.exp(-r2 / (2 * w2))
        return g * (r2 / w2**2 - len(x) / w2)

    def grad_sq(self, *x):
        r2 = self._r2(x)
        w2 = self.width**2
        g = self.amplitude * np.exp(-r2 / (2 * w2))
        return g**2 * r2 / w2**2

    def describe(self):
        return {
            "name": self.name,
            "base": self.base,
            "amplitude": self.amplitude,
            "center": list(np.atleast_1d(self.center).astype(float)),
            "width": self.width,
        }


class TabulatedBoundary(BoundaryPreset):
    """Tabulated ``phi`` on a tensor grid, extended by cubic splines.

    No analytic Laplacian: ``h`` is then built with the discrete stencil and
    carries an O(h^2) consistency error.
    """

    name = "tabulated"

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=float)
        if len(self.axes) == 1:
            self._spline = CubicSpline(self.axes[0], self.values)
        elif len(self.axes) == 2:
            self._spline = RectBivariateSpline(self.axes[0], self.axes[1], self.values)
        else:
            raise ValueError("tabulated boundary data must be 1-D or 2-D")

    def value(self, *x):
        if len(self.axes) == 1:
            return self._spline(np.asarray(x[0], dtype=float))
        return self._spline(np.asarray(x[0]), np.asarray(x[1]), grid=False)

    def describe(self):
        return {
            "name": self.name,
            "axes": [a.tolist() for a in self.axes],
            "values": self.values.tolist(),
        }


PRESETS = {
    "constant": ConstantBoundary,
    "ramp": RampBoundary,
    "gaussian": GaussianBoundary,
    "tabulated": TabulatedBoundary,
}


def make_preset(name: str, **kwargs) -> BoundaryPreset:
    try:
        cls = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown boundary preset {name!r}; choose from {sorted(PRESETS)}") from None
    if name == "gaussian" and "center" in kwargs:
        kwargs["center"] = tuple(np.atleast_1d(kwargs["center"]).astype(float))
    return cls(**kwargs)


# -- compatibility of boundary data ----------------------------------------


def _compat_scalar(phi: float, p: ModelParams) -> float:
    target = p.mu * phi
    if target == 0.0:
        return 0.0

    def F(s):
        return beta0(phi, s, p) * s - target

    lo, hi = sorted((0.0, target / p.beta_G))
    f_lo, f_hi = F(lo), F(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ArithmeticError(
            f"no sign change of beta0*s - mu*phi on [{lo}, {hi}] for phi={phi}; beta0 is out of range"
        )
    s = brentq(F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # Newton polish
    for _ in range(3):
        eps = 1e-7 * max(1.0, abs(s))
        dF = (F(s + eps) - F(s - eps)) / (2 * eps)
        if dF == 0.0:
            break
        s_new = s - F(s) / dF
        if not lo <= s_new <= hi or abs(F(s_new)) >= abs(F(s)):
            break
        s = s_new
    if abs(F(s)) > 1e-12 * max(1.0, abs(target)):
        raise ArithmeticError(f"compatibility residual {abs(F(s)):.3e} too large at phi={phi}")
    return float(s)


def solve_boundary_compat(phi, p: ModelParams) -> np.ndarray:
    """Stress datum ``s`` with ``beta_0(phi, s) * s = mu * phi`` pointwise."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("boundary concentration must be finite")
    uniq, inverse = np.unique(phi.ravel(), return_inverse=True)
    roots = np.array([_compat_scalar(float(x), p) for x in uniq])
    return roots[inverse].reshape(phi.shape)


def _compat_derivatives(phi: np.ndarray, p: ModelParams):
    """First and second derivative of the scalar map phi -> stress datum."""
    eta = 2e-3 * (1.0 + np.abs(phi))
    vals = [solve_boundary_compat(phi + k * eta, p) for k in (-2, -1, 0, 1, 2)]
    m2, m1, c0, p1, p2 = vals
    d1 = (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * eta)
    d2 = (-p2 + 16 * p1 - 30 * c0 + 16 * m1 - m2) / (12 * eta**2)
    return d1, d2


def _closed_laplacian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Centred-difference Laplacian at interior nodes of closed-grid values."""
    out = np.zeros(grid.shape)
    for ax, h in enumerate(grid.spacing):
        lo = [slice(1, -1)] * grid.dimension
        mid = [slice(1, -1)] * grid.dimension
        hi = [slice(1, -1)] * grid.dimension
        lo[ax], hi[ax] = slice(0, -2), slice(2, None)
        out += (values[tuple(lo)] - 2 * values[tuple(mid)] + values[tuple(hi)]) / h**2
    return out.ravel()


@dataclass(frozen=True, eq=False)
class BoundaryLift:
    """Boundary data extended to the domain, and the derived source ``h``.

    ``phi``/``stress`` are interior-node fields; the ``*_closed`` arrays hold
    the same data on the closed grid (boundary nodes included).
    ``params`` carries the resolved cutoff radius.
    """

    grid: GridSpec
    params: ModelParams
    preset: BoundaryPreset
    phi: np.ndarray
    stress: np.ndarray
    h: np.ndarray
    phi_closed: np.ndarray
    stress_closed: np.ndarray

    def compat_residual(self) -> float:
        """Max of ``|beta_0(phi, s) s - mu phi|`` over boundary nodes."""
        mask = self.grid.boundary_mask()
        phi, s = self.phi_closed[mask], self.stress_closed[mask]
        return float(np.max(np.abs(beta0(phi, s, self.params) * s - self.params.mu * phi)))


def default_cutoff(phi_closed, stress_closed) -> float:
    return 10.0 * (1.0 + float(np.max(np.abs(stress_closed))) + float(np.max(np.abs(phi_closed))))


def build_lift(grid: GridSpec, preset: BoundaryPreset, params: ModelParams) -> BoundaryLift:
    """Sample ``phi``, derive the compatible stress datum and ``h = D Lap phi + E Lap s``.

    The stress datum is obtained pointwise on the whole closed domain from the
    compatibility relation, which extends it smoothly and makes the reaction
    term vanish at the rest state everywhere, not only on the boundary.
    """
    coords = grid.coordinates(closed=True)
    phi_closed = np.asarray(preset.value(*coords), dtype=float)
    if params.R_cut is None:
        trial = solve_boundary_compat(phi_closed, replace(params, R_cut=np.inf))
        params = replace(params, R_cut=default_cutoff(phi_closed, trial))
    stress_closed = solve_boundary_compat(phi_closed, params)

    lap_phi = preset.laplacian(*coords)
    grad_sq = preset.grad_sq(*coords)
    if lap_phi is None or grad_sq is None:
        lap_phi_int = _closed_laplacian(phi_closed, grid)
        lap_stress_int = _closed_laplacian(stress_closed, grid)
    else:
        lap_phi_int = grid.interior(lap_phi)
        phi_int = grid.interior(phi_closed)
        d1, d2 = _compat_derivatives(phi_int, params)
        lap_stress_int = d1 * lap_phi_int + d2 * grid.interior(grad_sq)
    h = params.D * lap_phi_int + params.E * lap_stress_int
    if not np.all(np.isfinite(h)):
        raise ValueError("source field h is not finite")
    return BoundaryLift(
        grid=grid,
        params=params,
        preset=preset,
        phi=grid.interior(phi_closed),
        stress=grid.interior(stress_closed),
        h=h,
        phi_closed=phi_closed,
        stress_closed=stress_closed,
    )


def homogeneous_lift(grid: GridSpec, params: ModelParams) -> BoundaryLift:
    return build_lift(grid, ConstantBoundary(0.0), params)


# -- transformed system ----------------------------------------------------


def _check_pair(v, tau, lift: BoundaryLift):
    return lift.grid.check(v, "v"), lift.grid.check(tau, "tau")


def gamma_rhs(v, tau, lift: BoundaryLift, p: ModelParams) -> np.ndarray:
    """Reaction term of the ``tau`` equation.

    ``mu v - beta tau - nu beta v + g`` with ``beta`` and ``g`` evaluated at
    ``varpi = tau + nu v``.
    """
    v, tau = _check_pair(v, tau, lift)
    varpi = tau + p.nu * v
    beta = beta0(v + lift.phi, varpi + lift.stress, p)
    g = p.mu * lift.phi - beta * lift.stress
    return p.mu * v - beta * tau - p.nu * beta * v + g


def lift_state(v, tau, lift: BoundaryLift, p: ModelParams):
    """``(v, tau) -> (u, sigma)``."""
    v, tau = _check_pair(v, tau, lift)
    return v + lift.phi, tau + p.nu * v + lift.stress


def drop_state(u, sigma, lift: BoundaryLift, p: ModelParams):
    """``(u, sigma) -> (v, tau)``, inverse of :func:`lift_state`."""
    u, sigma = _check_pair(u, sigma, lift)
    v = u - lift.phi
    return v, sigma - lift.stress - p.nu * v
