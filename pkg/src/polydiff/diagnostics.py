"""Long-time diagnostics: energy decay, absorbing sets, continuity and attraction.

The energy functional tracked throughout is

    chi = mu/2 ||v||_-1^2 + nu D/2 ||v||^2 + E/2 ||varpi||^2,   varpi = tau + nu v.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import DiscreteOperators, frechet_prenorm, norm_hmdelta, norm_l2
from .model import ModelParams
from .solver import (
    GronwallBound,
    IMEXIntegrator,
    State,
    TrajectoryRecord,
    gronwall_bound,
    sample_norms,
)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _text_block(title: str, items: dict, table: Optional[tuple] = None) -> str:
    lines = [f"# {title}"]
    lines += [f"{k}: {_fmt(v)}" for k, v in items.items()]
    if table is not None:
        header, rows = table
        lines.append("")
        lines.append(" | ".join(header))
        lines += [" | ".join(_fmt(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- energy ----------------------------------------------------------------


@dataclass(frozen=True)
class EnergyRecord:
    t: np.ndarray
    chi: np.ndarray
    v_l2: np.ndarray
    v_hm1: np.ndarray
    varpi_l2: np.ndarray
    tau_h1: np.ndarray
    weights: tuple  # (mu/2, nu D/2, E/2)

    def reconstruct(self) -> np.ndarray:
        a, b, c = self.weights
        return a * self.v_hm1**2 + b * self.v_l2**2 + c * self.varpi_l2**2


def chi_weights(p: ModelParams) -> tuple:
    return (0.5 * p.mu, 0.5 * p.nu * p.D, 0.5 * p.E)


def chi_from_norms(norms: dict, p: ModelParams):
    a, b, c = chi_weights(p)
    return a * np.asarray(norms["v_hm1"]) ** 2 + b * np.asarray(norms["v_l2"]) ** 2 + c * np.asarray(norms["varpi_l2"]) ** 2


def chi(v, tau, ops: DiscreteOperators, p: ModelParams) -> float:
    return float(chi_from_norms(sample_norms(v, tau, ops, p), p))


def energy_record(traj: TrajectoryRecord, p: ModelParams) -> EnergyRecord:
    n = traj.norms
    return EnergyRecord(
        t=traj.times,
        chi=chi_from_norms(n, p),
        v_l2=n["v_l2"],
        v_hm1=n["v_hm1"],
        varpi_l2=n["varpi_l2"],
        tau_h1=n["tau_h1"],
        weights=chi_weights(p),
    )


def compute_gamma(ops: DiscreteOperators, p: ModelParams) -> float:
    """Certified decay rate for ``chi``.

    For ``mu > 0`` this is ``min(mu D / (mu/lambda_1 + nu D), beta_G)``: the
    largest rate with ``mu D/2 ||v||^2 + E beta_G/2 ||varpi||^2 >= rate * chi``
    given ``||v||_-1^2 <= ||v||^2 / lambda_1``.

    For ``mu = 0`` that argument degenerates; the rate used is
    ``0.9 * min(beta_G, D lambda_1, 2 D beta_G / d)``, the last term being the
    decay rate of ``chi`` along the slowest linearised mode.
    """
    lam1 = ops.lambda1
    if p.mu > 0:
        return float(min(p.mu * p.D / (p.mu / lam1 + p.nu * p.D), p.beta_G))
    return float(0.9 * min(p.beta_G, p.D * lam1, 2.0 * p.D * p.beta_G / p.d))


# -- dissipation -----------------------------------------------------------


@dataclass(frozen=True)
class DissipationEstimate:
    gamma_hat: float
    Gamma_hat: float
    method: str = "two-phase: Gamma_hat fitted on a calibration ensemble, validated on held-out runs"
    calibration: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.gamma_hat > 0:
            raise ValueError("gamma_hat must be positive")
        if not self.Gamma_hat >= 0:
            raise ValueError("Gamma_hat must be nonnegative")


def calibrate_dissipation(
    trajectories: Sequence[TrajectoryRecord],
    ops: DiscreteOperators,
    p: ModelParams,
    t_late: float,
    safety: float = 1.5,
) -> DissipationEstimate:
    """Fit ``Gamma_hat = safety * max chi(t), t >= t_late`` over a calibration ensemble."""
    late = []
    for traj in trajectories:
        c = chi_from_norms(traj.norms, p)
        sel = traj.times >= t_late
        if not np.any(sel):
            raise ValueError(f"calibration trajectory ends before t_late={t_late}")
        late.append(float(np.max(c[sel])))
    level = safety * max(late)
    return DissipationEstimate(
        compute_gamma(ops, p),
        level,
        calibration={"t_late": t_late, "safety": safety, "runs": len(late), "max_late_chi": max(late)},
    )


@dataclass
class DissipationReport:
    passed: bool
    gamma_hat: float
    Gamma_hat: float
    tol: float
    chi0: float
    max_excess: float
    first_violation: Optional[tuple]
    entry_time: Optional[float]
    exited_after_entry: bool
    series: np.ndarray  # columns: t, chi, bound, margin

    @property
    def absorbed(self) -> bool:
        return self.entry_time is not None and not self.exited_after_entry

    def to_text(self, run_id="run") -> str:
        items = {
            "run": run_id,
            "method": "two-phase (calibrate Gamma_hat, validate held-out)",
            "passed": self.passed,
            "absorbed": self.absorbed,
            "gamma_hat": self.gamma_hat,
            "Gamma_hat": self.Gamma_hat,
            "tolerance": self.tol,
            "chi0": self.chi0,
            "max_excess": self.max_excess,
            "entry_time": self.entry_time if self.entry_time is not None else "never",
            "exited_after_entry": self.exited_after_entry,
            "first_violation": self.first_violation if self.first_violation else "none",
        }
        return _text_block("dissipation", items)


def dissipation_check(
    traj: TrajectoryRecord,
    est: DissipationEstimate,
    p: ModelParams,
    tol: float = 0.05,
) -> DissipationReport:
    """Check ``chi(t) <= exp(-gamma t) chi(0) + (1 + tol) Gamma`` at every sample.

    Also finds the first sample with ``chi <= 2 Gamma`` and whether any later
    sample leaves ``{chi <= 2 Gamma (1 + tol)}``.
    """
    t = traj.times - traj.t0
    c = chi_from_norms(traj.norms, p)
    bound = np.exp(-est.gamma_hat * t) * c[0] + (1.0 + tol) * est.Gamma_hat
    margin = bound - c
    bad = np.nonzero(margin < 0)[0]
    first = None
    if bad.size:
        j = int(bad[0])
        first = (j, float(t[j]), float(c[j]), float(bound[j]))
    inside = np.nonzero(c <= 2.0 * est.Gamma_hat)[0]
    entry = None
    exited = False
    if inside.size:
        j0 = int(inside[0])
        entry = float(t[j0])
        exited = bool(np.any(c[j0:] > 2.0 * est.Gamma_hat * (1.0 + tol)))
    return DissipationReport(
        passed=first is None,
        gamma_hat=est.gamma_hat,
        Gamma_hat=est.Gamma_hat,
        tol=tol,
        chi0=float(c[0]),
        max_excess=float(np.max(c - bound)),
        first_violation=first,
        entry_time=entry,
        exited_after_entry=exited,
        series=np.column_stack([traj.times, c, bound, margin]),
    )


# -- continuous dependence / semiflow ----------------------------------------


def pair_distance(v_a, tau_a, v_b, tau_b, ops: DiscreteOperators, p: ModelParams, variables: str = "varpi"):
    """``(||dv||^2 + ||dz||^2)^(1/2)`` with ``z = varpi`` or ``z = tau``."""
    dv = np.asarray(v_a) - np.asarray(v_b)
    dz = np.asarray(tau_a) - np.asarray(tau_b)
    if variables == "varpi":
        dz = dz + p.nu * dv
    elif variables != "tau":
        raise ValueError("variables must be 'varpi' or 'tau'")
    g = ops.grid
    return float(np.hypot(norm_l2(dv, g), norm_l2(dz, g)))


def trajectory_distances(a: TrajectoryRecord, b: TrajectoryRecord, ops, p, variables="varpi") -> np.ndarray:
    _check_compatible(a, b)
    n = min(len(a), len(b))
    return np.array([pair_distance(a.v[j], a.tau[j], b.v[j], b.tau[j], ops, p, variables) for j in range(n)])


@dataclass
class ContinuityReport:
    passed: bool
    horizon: float
    radius: float
    log_bound_rate: float
    prefactor: float
    amplification: np.ndarray  # per member: sup_t dist(t) / dist(0)
    modulus: np.ndarray  # per t in grid: sup over members of dist(t) / dist(0)
    t_grid: np.ndarray

    def to_text(self) -> str:
        items = {
            "passed": self.passed,
            "horizon": self.horizon,
            "radius": self.radius,
            "gronwall_rate": self.log_bound_rate,
            "prefactor": self.prefactor,
            "max_amplification": float(np.max(self.amplification)) if self.amplification.size else 0.0,
        }
        rows = list(zip(self.t_grid, self.modulus))
        return _text_block("semiflow continuity", items, (("t", "sup dist(t)/dist(0)"), rows))


def semiflow_continuity_check(
    base: State,
    radius: float,
    t_grid: Sequence[float],
    integrator: IMEXIntegrator,
    members: int = 6,
    seed: int = 0,
    bound: Optional[GronwallBound] = None,
    slack: float = 1.1,
) -> ContinuityReport:
    """Perturb ``base`` within ``radius`` (L2 on ``(v, tau)``) and track divergence.

    Every member must satisfy ``dist(t) <= slack * c * dist(0) * exp(rate t)``
    at all ``t`` in ``t_grid``; ``c`` converts between the ``(v, tau)`` metric
    and the ``(v, varpi)`` metric of the growth bound.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    ops, p = integrator.ops, integrator.params
    t_grid = np.asarray(t_grid, dtype=float)
    if bound is None:
        bound = gronwall_bound(ops, p)
    # ||(w, w nu + z)|| <= cond * ||(w, z)||, both directions
    nu = p.nu
    cond = 0.5 * (nu + np.sqrt(nu * nu + 4.0))
    cond = cond * cond

    if radius == 0:
        zeros = np.zeros_like(t_grid)
        return ContinuityReport(True, float(t_grid.max(initial=0.0)), 0.0, bound.rate, bound.prefactor, np.zeros(members), zeros, t_grid)

    base_traj = integrator.integrate(base)
    idx = np.rint((t_grid - base_traj.t0) / base_traj.sample_dt).astype(int)
    if np.any(idx >= len(base_traj)) or np.any(np.abs(base_traj.times[idx] - t_grid) > 1e-9 * max(1.0, t_grid.max())):
        raise ValueError("t_grid must lie on the integrator's sample times")
    rng = np.random.default_rng(seed)
    g = ops.grid
    amp = np.zeros(members)
    modulus = np.zeros(len(t_grid))
    ok = True
    for m in range(members):
        dv, dt_ = rng.standard_normal(g.size), rng.standard_normal(g.size)
        scale = radius * rng.uniform(0.1, 1.0) / np.hypot(norm_l2(dv, g), norm_l2(dt_, g))
        pert = State(base.t, base.v + scale * dv, base.tau + scale * dt_)
        traj = integrator.integrate(pert)
        d0 = pair_distance(pert.v, pert.tau, base.v, base.tau, ops, p, "tau")
        d = trajectory_distances(traj, base_traj, ops, p, "tau")[idx]
        ratio = d / d0
        amp[m] = ratio.max()
        modulus = np.maximum(modulus, ratio)
        lb = np.log(slack * cond) + bound.log_bound(d0, t_grid - base.t)
        ok &= bool(np.all(np.log(np.maximum(d, 1e-300)) <= lb))
    return ContinuityReport(ok, float(t_grid.max()), radius, bound.rate, bound.prefactor * cond, amp, modulus, t_grid)


@dataclass
class DependenceReport:
    passed: bool
    eps: float
    t: np.ndarray
    distance: np.ndarray
    log_bound: np.ndarray

    @property
    def worst_log_margin(self) -> float:
        return float(np.min(self.log_bound - np.log(np.maximum(self.distance, 1e-300))))


def continuous_dependence_check(
    a: TrajectoryRecord,
    b: TrajectoryRecord,
    ops: DiscreteOperators,
    p: ModelParams,
    bound: Optional[GronwallBound] = None,
    slack: float = 1.1,
    t_max: Optional[float] = None,
) -> DependenceReport:
    """Check ``dist(t) <= slack * eps * exp(rate t)`` in the ``(v, varpi)`` metric.

    ``eps`` is the initial distance.  Comparisons are made in log space so
    that large ``rate * t`` cannot overflow.
    """
    if bound is None:
        bound = gronwall_bound(ops, p)
    d = trajectory_distances(a, b, ops, p, "varpi")
    t = a.times[: len(d)] - a.t0
    if t_max is not None:
        sel = t <= t_max + 1e-12
        d, t = d[sel], t[sel]
    eps = float(d[0])
    if eps == 0.0:
        return DependenceReport(bool(np.all(d == 0.0)), 0.0, t, d, np.full_like(t, -np.inf))
    lb = np.log(slack * eps) + bound.rate * t
    passed = bool(np.all(np.log(np.maximum(d, 1e-300)) <= lb))
    return DependenceReport(passed, eps, t, d, lb)


# -- trajectory space --------------------------------------------------------


def _check_compatible(a: TrajectoryRecord, b: TrajectoryRecord):
    if a.v.shape[1:] != b.v.shape[1:]:
        raise ValueError("trajectories live on different grids")
    if not np.isclose(a.sample_dt, b.sample_dt, rtol=1e-12, atol=0.0):
        raise ValueError("trajectories use different sample strides")


def shift_trajectory(traj: TrajectoryRecord, h: float) -> TrajectoryRecord:
    """Translation ``(T(h) y)(t) = y(t + h)``, re-indexed to start at 0."""
    k = h / traj.sample_dt
    m = int(round(k))
    if h < 0 or abs(k - m) > 1e-9 * max(1.0, abs(k)):
        raise ValueError(f"shift {h} is not a nonnegative multiple of the sample spacing {traj.sample_dt}")
    if m >= len(traj):
        raise ValueError(f"shift {h} exceeds the trajectory span {traj.span}")
    norms = {key: val[m:] for key, val in traj.norms.items()}
    return TrajectoryRecord(0.0, traj.sample_dt, traj.v[m:], traj.tau[m:], norms)


def traj_distance(a: TrajectoryRecord, b: TrajectoryRecord, delta: float, M: float, ops: DiscreteOperators) -> float:
    """``max_{t <= M} (||dv(t)||_-delta^2 + ||dtau(t)||_-delta^2)^(1/2)``."""
    return float(np.max(_window_distances(a, b, delta, M, ops)))


def _samples_in_window(traj, M):
    n = int(np.floor(M / traj.sample_dt + 1e-9)) + 1
    if n > len(traj):
        raise ValueError(f"trajectory does not cover the horizon M={M}")
    return n


def _spectral_window(traj, delta, M, ops):
    """Weighted H^-delta coefficients of ``v`` and ``tau`` for samples in ``[0, M]``."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    n = _samples_in_window(traj, M)
    return np.hstack([ops.weighted_coefficients(traj.v[:n], delta), ops.weighted_coefficients(traj.tau[:n], delta)])


def _window_distances(a, b, delta, M, ops):
    _check_compatible(a, b)
    ca, cb = _spectral_window(a, delta, M, ops), _spectral_window(b, delta, M, ops)
    return np.sqrt(np.sum((ca - cb) ** 2, axis=1))


def _interval_sups(d, sample_dt, M):
    t = np.arange(len(d)) * sample_dt
    return [float(np.max(d[t <= i + 1e-9])) for i in range(1, int(M) + 1)]


def frechet_distance(a: TrajectoryRecord, b: TrajectoryRecord, delta: float, M: int, ops) -> tuple:
    """Truncated Frechet pre-norm of ``a - b`` in ``C([0, M]; H^-delta x H^-delta)``."""
    d = _window_distances(a, b, delta, float(M), ops)
    return frechet_prenorm(_interval_sups(d, a.sample_dt, M))


@dataclass
class AttractionReport:
    shifts: np.ndarray
    A: np.ndarray
    frechet_A: np.ndarray
    section_diameter: float
    regularity_ratio: np.ndarray  # ||y||_E / ||y||_E0 for each section element
    delta: float
    M: float
    proxy_shift: float = 0.0
    monotone_tol: float = 0.05

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(self.A[1:] <= self.A[:-1] * (1.0 + self.monotone_tol) + 1e-300))

    @property
    def decay_ratio(self) -> float:
        return float(self.A[-1] / self.A[0]) if self.A[0] > 0 else 0.0

    def to_text(self) -> str:
        items = {
            "delta": self.delta,
            "horizon_M": self.M,
            "proxy_shift": self.proxy_shift,
            "nonincreasing_within_tol": self.nonincreasing,
            "A_last_over_A_first": self.decay_ratio,
            "section_size": len(self.regularity_ratio),
            "section_E0_diameter": self.section_diameter,
            "regularity_ratio_min": float(np.min(self.regularity_ratio)) if self.regularity_ratio.size else 0.0,
            "regularity_ratio_max": float(np.max(self.regularity_ratio)) if self.regularity_ratio.size else 0.0,
            "note": "attractor proxy = tails at proxy_shift; compactness is measured, not asserted",
        }
        rows = list(zip(self.shifts, self.A, self.frechet_A))
        return _text_block("attraction", items, (("h", "A(h)", "A_frechet(h)"), rows))


def attraction_diagnostic(
    ensemble: Sequence[TrajectoryRecord],
    shifts: Sequence[float],
    delta: float,
    M: float,
    ops: DiscreteOperators,
    proxy_shift: Optional[float] = None,
) -> AttractionReport:
    """``A(h) = max_i min_j dist(T(h) y_i, T(h_p) y_j)`` over an ensemble.

    The tails ``T(h_p) y_j`` stand in for the trajectory attractor, with
    ``h_p = proxy_shift`` defaulting to the largest shift (so the last entry
    of ``A`` is then zero by construction).  Their values at time 0 form the
    section proxy whose ``E_0``-diameter and ``E``-to-``E_0`` norm ratio are
    reported.
    """
    shifts = np.asarray(sorted(shifts), dtype=float)
    if not len(ensemble):
        raise ValueError("empty ensemble")
    h_p = float(shifts[-1]) if proxy_shift is None else float(proxy_shift)
    need = max(float(shifts[-1]), h_p) + M
    for y in ensemble:
        if y.span + 1e-9 * max(1.0, y.span) < need:
            raise ValueError(f"trajectory span {y.span} shorter than max shift + horizon = {need}")
    bundle = [shift_trajectory(y, h_p) for y in ensemble]
    bundle_c = [_spectral_window(w, delta, M, ops) for w in bundle]
    A = np.zeros(len(shifts))
    F = np.zeros(len(shifts))
    for k, h in enumerate(shifts):
        worst = worst_f = 0.0
        for y in ensemble:
            cy = _spectral_window(shift_trajectory(y, h), delta, M, ops)
            dists = [np.sqrt(np.sum((cy - cw) ** 2, axis=1)) for cw in bundle_c]
            best = min(float(np.max(d)) for d in dists)
            if M >= 1:
                best_f = min(frechet_prenorm(_interval_sups(d, y.sample_dt, M))[0] for d in dists)
            else:
                best_f = 0.0
            worst, worst_f = max(worst, best), max(worst_f, best_f)
        A[k], F[k] = worst, worst_f

    g = ops.grid
    section = [(w.v[0], w.tau[0]) for w in bundle]
    diam = 0.0
    for i in range(len(section)):
        for j in range(i + 1, len(section)):
            dv = norm_hmdelta(section[i][0] - section[j][0], ops, delta)
            dt_ = norm_hmdelta(section[i][1] - section[j][1], ops, delta)
            diam = max(diam, float(np.hypot(dv, dt_)))
    ratios = []
    for v, tau in section:
        e0 = np.hypot(norm_hmdelta(v, ops, delta), norm_hmdelta(tau, ops, delta))
        e = np.hypot(norm_l2(v, g), norm_l2(tau, g))
        ratios.append(e / e0 if e0 > 0 else np.nan)
    return AttractionReport(shifts, A, F, diam, np.array(ratios), delta, M, h_p)
