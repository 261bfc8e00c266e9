"""Experiment drivers behind the ``polydiff`` subcommands.

Each driver takes a validated :class:`~polydiff.config.RunConfig` and an
output directory, writes its artifacts there (always including
``config.resolved.yaml``) and returns an :class:`Outcome`.

Random initial data are truncated eigenexpansions with normally distributed
coefficients scaled by ``k^-decay``; every ensemble member draws from its own
PCG64 stream spawned from ``diagnostics.seed``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io
from .config import RunConfig
from .diagnostics import (
    attraction_diagnostic,
    calibrate_dissipation,
    chi,
    compute_gamma,
    continuous_dependence_check,
    dissipation_check,
    energy_record,
    shift_trajectory,
)
from .grid import (
    DiscreteOperators,
    GridSpec,
    build_operators,
    inner_hm1,
    inner_l2,
    norm_h1,
    norm_hm1,
    norm_hmdelta,
    norm_l2,
)
from .model import BoundaryLift, ConstantBoundary, ModelParams, beta0, build_lift, gamma_rhs, homogeneous_lift
from .oracle import StressODEProblem, exact_state, manufactured_forcing, sine_mode, stress_bound, stress_closed_form
from .solver import (
    IMEXIntegrator,
    SolverConfig,
    SolverDivergence,
    State,
    TrajectoryRecord,
    gronwall_bound,
    recover_u_sigma,
    zero_state,
)

# amplitude spread of the attraction ensemble, relative to diagnostics.ic_amplitude
ATTRACT_SPREAD = (0.1, 30.0)


@dataclass
class Setup:
    """Everything a run needs, derived once from a config."""

    cfg: RunConfig
    grid: GridSpec
    ops: DiscreteOperators
    params: ModelParams
    lift: BoundaryLift
    solver: SolverConfig

    def integrator(self, **overrides) -> IMEXIntegrator:
        scfg = replace(self.solver, **overrides) if overrides else self.solver
        return IMEXIntegrator(self.ops, self.lift, self.params, scfg)


def build_setup(cfg: RunConfig) -> Setup:
    grid = cfg.grid_spec()
    ops = build_operators(grid)
    lift = build_lift(grid, cfg.boundary_preset(), cfg.model_params())
    params = lift.params
    return Setup(cfg, grid, ops, params, lift, cfg.solver_config(ops, params))


@dataclass
class Outcome:
    ok: bool
    summary: str
    files: list = field(default_factory=list)


# -- randomness and initial data ---------------------------------------------


def member_rngs(seed: int, n: int) -> list:
    """Independent PCG64 generators for ``n`` ensemble members."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def random_field(rng: np.random.Generator, ops: DiscreteOperators, amplitude=1.0, decay=1.0, modes=32) -> np.ndarray:
    """Truncated random eigenexpansion with coefficient envelope ``|k|^-decay``."""
    shape = ops.grid.shape
    c = np.zeros(shape)
    ks = [np.arange(1, min(modes, n) + 1) for n in shape]
    K = np.sqrt(sum(k**2 for k in np.meshgrid(*ks, indexing="ij")))
    block = tuple(slice(0, len(k)) for k in ks)
    c[block] = rng.standard_normal(K.shape) * K ** (-float(decay))
    return amplitude * ops.from_spectral(c)


def initial_state(kind: str, setup: Setup, rng: np.random.Generator, amplitude=None) -> State:
    d = setup.cfg.diagnostics
    ops, p, lift = setup.ops, setup.params, setup.lift
    if kind == "zero":
        return zero_state(ops)
    if kind == "uptake":
        # dry interior, no stress: u = sigma = 0 inside
        v = -lift.phi
        return State(0.0, v.copy(), -lift.stress - p.nu * v)
    if kind == "random":
        a = float(d["ic_amplitude"]) if amplitude is None else float(amplitude)
        kw = dict(decay=float(d["ic_decay"]), modes=int(d["ic_modes"]))
        return State(0.0, random_field(rng, ops, a, **kw), random_field(rng, ops, a, **kw))
    raise ValueError(f"unknown initial kind {kind!r}")


def scaled_to_chi(s: State, target: float, ops, p) -> State:
    """Rescale ``(v, tau)`` so that ``chi`` equals ``target`` (chi is quadratic)."""
    c = chi(s.v, s.tau, ops, p)
    k = np.sqrt(target / c)
    return State(s.t, k * s.v, k * s.tau)


def thread_count(requested=None) -> int:
    if requested is None:
        requested = os.environ.get("POLYDIFF_THREADS", 1)
    try:
        n = int(requested)
    except (TypeError, ValueError):
        raise ValueError(f"thread count must be an integer, got {requested!r}") from None
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def run_ordered(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- output helpers ------------------------------------------------------------


def _prepare(out, cfg: RunConfig) -> tuple[Path, set]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.yaml").write_text(cfg.dump(), encoding="utf-8", newline="\n")
    return out, set(cfg.output["formats"])


def _text(out: Path, formats, name, body, files):
    if "text" in formats:
        path = out / name
        path.write_text(body, encoding="utf-8", newline="\n")
        files.append(path)


def _csv(out: Path, formats, name, header, rows, files):
    if "csv" in formats:
        files.append(io.write_csv(out / name, header, rows))


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# -- simulate --------------------------------------------------------------------


ENERGY_HEADER = ["t", "chi", "v_l2", "v_hm1", "varpi_l2", "tau_h1"]


def simulate(cfg: RunConfig, out, threads: int = 1) -> Outcome:
    """One trajectory from ``diagnostics.initial``: energy CSV plus final-field snapshots."""
    setup = build_setup(cfg)
    out, formats = _prepare(out, cfg)
    files = []
    rng = member_rngs(cfg.diagnostics["seed"], 1)[0]
    s0 = initial_state(cfg.diagnostics["initial"], setup, rng)
    ok, note = True, "completed"
    try:
        traj = setup.integrator().integrate(s0)
    except SolverDivergence as exc:
        if exc.partial is None:
            raise
        traj, ok, note = exc.partial, False, str(exc)

    rec = energy_record(traj, setup.params)
    rows = zip(rec.t, rec.chi, rec.v_l2, rec.v_hm1, rec.varpi_l2, rec.tau_h1)
    _csv(out, formats, "energy.csv", ENERGY_HEADER, rows, files)

    u, sigma = recover_u_sigma(traj, setup.lift, setup.params)
    if "pdif" in formats:
        meta = {"grid": setup.grid.signature, "t": float(traj.times[-1])}
        for name, arr in (("u", u[-1]), ("sigma", sigma[-1]), ("v", traj.v[-1]), ("tau", traj.tau[-1])):
            files.append(io.write_snapshot(out / f"{name}_final.pdif", arr.reshape(setup.grid.shape), {**meta, "field": name}))
    summary = (
        f"# simulate\nstatus: {note}\ngrid: {setup.grid.signature}\ninitial: {cfg.diagnostics['initial']}\n"
        f"dt: {io.format_float(setup.solver.dt)}\nscheme: {setup.solver.scheme}\nsamples: {len(traj)}\n"
        f"t_final: {io.format_float(traj.times[-1])}\nchi_initial: {io.format_float(rec.chi[0])}\n"
        f"chi_final: {io.format_float(rec.chi[-1])}\nmax_abs_u: {io.format_float(np.max(np.abs(u)))}\n"
    )
    _text(out, formats, "simulate.txt", summary, files)
    return Outcome(ok, summary, files)


# -- dissipation -------------------------------------------------------------------


def dissipation(cfg: RunConfig, out, threads: int = 1) -> Outcome:
    """Two-phase absorbing-level experiment.

    Calibrate ``Gamma_hat`` on ``calibration_size`` runs, then validate on
    ``validation_size`` held-out runs whose initial ``chi`` is spread
    geometrically from ``Gamma_hat`` up to ``chi_max_factor * Gamma_hat``.
    """
    setup = build_setup(cfg)
    out, formats = _prepare(out, cfg)
    d = cfg.diagnostics
    n_cal, n_val = int(d["calibration_size"]), int(d["validation_size"])
    rngs = member_rngs(d["seed"], n_cal + n_val)
    integ = setup.integrator()
    ops, p = setup.ops, setup.params

    cal_states = [initial_state("random", setup, r) for r in rngs[:n_cal]]
    cal = run_ordered(integ.integrate, cal_states, threads)
    est = calibrate_dissipation(cal, ops, p, float(d["t_late"]), float(d["gamma_safety"]))

    factors = np.geomspace(1.0, float(d["chi_max_factor"]), n_val)
    val_states = [
        scaled_to_chi(initial_state("random", setup, r), f * est.Gamma_hat, ops, p) for r, f in zip(rngs[n_cal:], factors)
    ]
    trajs = run_ordered(integ.integrate, val_states, threads)
    tol = float(d["tolerance"])
    reports = [dissipation_check(tr, est, p, tol) for tr in trajs]

    files = []
    for k, rep in enumerate(reports):
        _csv(out, formats, f"dissipation_run{k:02d}.csv", ["t", "chi", "bound", "margin"], rep.series, files)
    rows = [
        (k, float(rep.chi0), float(rep.chi0 / est.Gamma_hat), _verdict(rep.passed and rep.absorbed),
         rep.entry_time if rep.entry_time is not None else "never", float(rep.max_excess))
        for k, rep in enumerate(reports)
    ]
    _csv(out, formats, "dissipation_summary.csv", ["run", "chi0", "chi0_over_Gamma", "verdict", "entry_time", "max_excess"], rows, files)

    ok = all(r.passed and r.absorbed for r in reports)
    lines = [
        "# dissipation",
        "method: two-phase (Gamma_hat fitted on calibration runs, checked on held-out runs)",
        f"verdict: {_verdict(ok)}",
        f"gamma_hat: {io.format_float(est.gamma_hat)}",
        f"Gamma_hat: {io.format_float(est.Gamma_hat)}",
        f"calibration_runs: {n_cal}",
        f"calibration_t_late: {io.format_float(float(d['t_late']))}",
        f"calibration_max_late_chi: {io.format_float(est.calibration['max_late_chi'])}",
        f"safety: {io.format_float(float(d['gamma_safety']))}",
        f"tolerance: {io.format_float(tol)}",
        f"t_end: {io.format_float(setup.solver.t_end)}",
        "",
        "run | chi0/Gamma_hat | bound | absorbed | entry_time | max_excess",
    ]
    for k, rep in enumerate(reports):
        entry = io.format_float(rep.entry_time) if rep.entry_time is not None else "never"
        lines.append(
            f"{k:02d} | {io.format_float(rep.chi0 / est.Gamma_hat)} | {_verdict(rep.passed)} | "
            f"{rep.absorbed} | {entry} | {io.format_float(rep.max_excess)}"
        )
    lines.append("")
    body = "\n".join(lines) + "\n" + "".join("\n" + rep.to_text(f"run{k:02d}") for k, rep in enumerate(reports))
    _text(out, formats, "dissipation.txt", body, files)
    return Outcome(ok, "\n".join(lines) + "\n", files)


# -- attraction ---------------------------------------------------------------------


def attraction_ensemble(setup: Setup, threads: int = 1) -> list:
    d = setup.cfg.diagnostics
    n = int(d["ensemble_size"])
    amps = float(d["ic_amplitude"]) * np.geomspace(*ATTRACT_SPREAD, n) if n > 1 else [float(d["ic_amplitude"])]
    states = [initial_state("random", setup, r, a) for r, a in zip(member_rngs(d["seed"], n), amps)]
    need = max(float(h) for h in d["shifts"]) + float(d["horizon"])
    t_end = max(setup.solver.t_end, need)
    integ = setup.integrator(t_end=t_end)
    return run_ordered(integ.integrate, states, threads)


def attract(cfg: RunConfig, out, threads: int = 1) -> Outcome:
    """Attraction functional ``A(h)`` on an ensemble of diverse initial data."""
    setup = build_setup(cfg)
    out, formats = _prepare(out, cfg)
    d = cfg.diagnostics
    ens = attraction_ensemble(setup, threads)
    rep = attraction_diagnostic(ens, [float(h) for h in d["shifts"]], float(d["delta"]), float(d["horizon"]), setup.ops)
    ok = rep.nonincreasing and rep.decay_ratio <= 0.1
    files = []
    _csv(out, formats, "attraction.csv", ["h", "A", "A_frechet"], zip(rep.shifts, rep.A, rep.frechet_A), files)
    body = rep.to_text() + f"\nverdict: {_verdict(ok)}\n"
    _text(out, formats, "attraction.txt", body, files)
    return Outcome(ok, body, files)


# -- manufactured solutions ------------------------------------------------------------


def _observed_orders(errors) -> list:
    e = np.asarray(errors, dtype=float)
    return [float("nan")] + list(np.log2(e[:-1] / e[1:]))


def _mms_pair(grid: GridSpec):
    return sine_mode(grid), sine_mode(grid)


def _mms_run(cfg: RunConfig, grid: GridSpec, dt: float, t_end: float, scheme: str):
    ops = build_operators(grid)
    lift = build_lift(grid, cfg.boundary_preset(), cfg.model_params())
    p = lift.params
    vs, ts = _mms_pair(grid)
    forcing = manufactured_forcing(vs, ts, ops, lift, p)
    scfg = SolverConfig(dt, t_end, scheme, sample_stride=10**9)
    integ = IMEXIntegrator(ops, lift, p, scfg, forcing=forcing)
    s = exact_state(vs, ts, grid, 0.0)
    n = int(round(t_end / dt))
    for k in range(n):
        s = integ.step(s, k)
    return s, ops, exact_state(vs, ts, grid, s.t)


def _grid_like(cfg: RunConfig, count: int) -> GridSpec:
    g = cfg.grid_spec()
    return GridSpec(g.dimension, g.lengths, (count,) * g.dimension)


def mms_tables(cfg: RunConfig, threads: int = 1) -> dict:
    """Spatial and temporal refinement tables for the manufactured pair.

    The spatial table uses Crank-Nicolson with a step well below the
    smallest ``mms_dts`` entry so the time error is negligible.  Temporal
    orders come from differences of successive ``dt`` runs on the finest
    grid, which removes the fixed spatial error from the comparison.
    """
    d = cfg.diagnostics
    t_end = float(d["mms_t_end"])
    counts = [int(n) for n in d["mms_counts"]]
    dts = [float(x) for x in d["mms_dts"]]
    dt_fine = min(dts) / 4.0

    def spatial(n):
        g = _grid_like(cfg, n)
        s, ops, ex = _mms_run(cfg, g, dt_fine, t_end, "imex-cn")
        return min(g.spacing), float(np.hypot(norm_l2(s.v - ex.v, g), norm_l2(s.tau - ex.tau, g)))

    sp_rows = run_ordered(spatial, counts, threads)
    sp_orders = _observed_orders([e for _, e in sp_rows])

    g_fine = _grid_like(cfg, counts[-1])
    temporal = {}
    for scheme in ("imex-euler", "imex-cn"):
        runs = run_ordered(lambda dt: _mms_run(cfg, g_fine, dt, t_end, scheme)[0], dts, threads)
        diffs = [
            float(np.hypot(norm_l2(a.v - b.v, g_fine), norm_l2(a.tau - b.tau, g_fine))) for a, b in zip(runs[:-1], runs[1:])
        ]
        temporal[scheme] = (dts[:-1], diffs, _observed_orders(diffs))
    return {"spatial": (counts, sp_rows, sp_orders), "temporal": temporal}


MMS_LIMITS = {"spatial": (1.8, 2.2), "imex-euler": 0.9, "imex-cn": 1.8}


def mms_verdicts(tables: dict) -> dict:
    sp = [o for o in tables["spatial"][2][1:]]
    out = {"spatial": all(MMS_LIMITS["spatial"][0] <= o <= MMS_LIMITS["spatial"][1] for o in sp)}
    for scheme, (_, _, orders) in tables["temporal"].items():
        out[scheme] = all(o >= MMS_LIMITS[scheme] for o in orders[1:])
    return out


def mms(cfg: RunConfig, out, threads: int = 1) -> Outcome:
    out, formats = _prepare(out, cfg)
    tables = mms_tables(cfg, threads)
    verdicts = mms_verdicts(tables)
    files = []
    counts, rows, orders = tables["spatial"]
    sp = [(n, h, e, o) for n, (h, e), o in zip(counts, rows, orders)]
    _csv(out, formats, "mms_spatial.csv", ["n", "h", "error", "order"], sp, files)
    tp = [
        (scheme, dt, diff, o)
        for scheme, (dts, diffs, ords) in tables["temporal"].items()
        for dt, diff, o in zip(dts, diffs, ords)
    ]
    _csv(out, formats, "mms_temporal.csv", ["scheme", "dt", "self_difference", "order"], tp, files)

    lines = ["# mms", "manufactured pair: v* = tau* = exp(-t) prod sin(pi x_i / L_i)", ""]
    lines.append(f"spatial ({_verdict(verdicts['spatial'])}, accepted order range {MMS_LIMITS['spatial']})")
    lines.append("n | h | error | order")
    lines += [" | ".join(io.format_float(c) if isinstance(c, float) else str(c) for c in r) for r in sp]
    for scheme in ("imex-euler", "imex-cn"):
        lines += ["", f"temporal {scheme} ({_verdict(verdicts[scheme])}, minimum order {MMS_LIMITS[scheme]})"]
        lines.append("dt | |y(dt) - y(dt/2)| | order")
        lines += [f"{io.format_float(dt)} | {io.format_float(df)} | {io.format_float(o)}" for _, dt, df, o in (r for r in tp if r[0] == scheme)]
    body = "\n".join(lines) + "\n"
    _text(out, formats, "mms.txt", body, files)
    return Outcome(all(verdicts.values()), body, files)


# -- verify -----------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{_verdict(self.passed)} {self.name}: {self.detail}"


def _check_calculus(setup: Setup, rng) -> list:
    ops, g = setup.ops, setup.grid
    worst = 0.0
    for _ in range(100):
        u, v = rng.standard_normal(g.size), rng.standard_normal(g.size)
        err = abs(inner_hm1(u, ops.apply(v), ops) + inner_l2(u, v, g))
        worst = max(worst, err / (norm_l2(u, g) * norm_l2(v, g)))
    K = ops.friedrichs_constant
    fields = rng.standard_normal((1000, g.size))
    fried = max(norm_l2(f, g) / (K * norm_h1(f, ops)) for f in fields)
    e1 = ops.eigenfield(*(1,) * g.dimension)
    eq = abs(norm_l2(e1, g) - K * norm_h1(e1, ops))
    rel = max(abs(norm_hmdelta(f, ops, 1.0) - norm_hm1(f, ops)) / norm_hm1(f, ops) for f in fields[:100])
    return [
        Check("duality", worst <= 1e-8, f"max relative defect {worst:.3e} over 100 pairs"),
        Check("friedrichs", fried <= 1 + 1e-12 and eq <= 1e-8, f"max ratio {fried:.15f}, defect on e1 {eq:.3e}"),
        Check("hmdelta_vs_hm1", rel <= 1e-8, f"max relative difference {rel:.3e}"),
    ]


def _check_sine_norm() -> Check:
    target = 1.0 / (np.pi * np.sqrt(2.0))
    errs = []
    for n in (31, 63, 127):
        g = GridSpec.interval(1.0, n)
        errs.append(abs(norm_hm1(g.sample(lambda x: np.sin(np.pi * x)), build_operators(g)) - target))
    orders = _observed_orders(errs)[1:]
    ok = all(1.8 <= o <= 2.2 for o in orders)
    return Check("hm1_sine_order", ok, "orders " + ", ".join(f"{o:.3f}" for o in orders))


def _check_model(setup: Setup, rng) -> list:
    p = setup.params
    u = rng.uniform(-3 * p.R_cut, 3 * p.R_cut, 100_000)
    s = rng.uniform(-3 * p.R_cut, 3 * p.R_cut, 100_000)
    b = beta0(u, s, p)
    in_range = bool(np.all((b >= p.beta_G) & (b <= p.beta_R)))
    res = setup.lift.compat_residual()
    zero = np.zeros(setup.grid.size)
    g0 = float(np.max(np.abs(gamma_rhs(zero, zero, setup.lift, p))))
    return [
        Check("beta0_range", in_range, f"range [{b.min():.6g}, {b.max():.6g}] on 1e5 samples"),
        Check("compatibility", res <= 1e-10, f"boundary residual {res:.3e}"),
        Check("gamma_at_rest", g0 <= 1e-12, f"max |gamma(x,0,0)| = {g0:.3e}"),
    ]


def _short(setup: Setup, t_end: float, stride: int = 1) -> IMEXIntegrator:
    return setup.integrator(t_end=t_end, sample_stride=stride)


def _check_rest(setup: Setup) -> list:
    g, p = setup.grid, setup.params
    hom = homogeneous_lift(g, p)
    integ = IMEXIntegrator(setup.ops, hom, hom.params, replace(setup.solver, t_end=1.0, sample_stride=1))
    tr = integ.integrate(zero_state(setup.ops))
    zero_ok = not np.any(tr.v) and not np.any(tr.tau)
    const = build_lift(g, ConstantBoundary(0.4), p)
    integ = IMEXIntegrator(setup.ops, const, const.params, replace(setup.solver, t_end=1.0, sample_stride=1))
    tr2 = integ.integrate(zero_state(setup.ops))
    rec = energy_record(tr2, const.params)
    u, s = recover_u_sigma(tr2, const, const.params)
    flat_ok = not np.any(rec.chi) and np.array_equal(u[-1], const.phi) and np.array_equal(s[-1], const.stress)
    return [
        Check("rest_homogeneous", zero_ok, "zero state preserved exactly for t <= 1"),
        Check("rest_constant_boundary", flat_ok, "chi == 0 and (u, sigma) == (phi, stress datum) for t <= 1"),
    ]


def _check_determinism_and_shifts(setup: Setup, rng) -> list:
    s0 = initial_state("random", setup, rng)
    integ = _short(setup, 2.0, 4)
    a, b = integ.integrate(s0), integ.integrate(s0)
    same = np.array_equal(a.v, b.v) and np.array_equal(a.tau, b.tau)
    hs = a.sample_dt
    ident = shift_trajectory(a, 0.0)
    law0 = np.array_equal(ident.v, a.v) and np.array_equal(ident.tau, a.tau)
    ab = shift_trajectory(shift_trajectory(a, 3 * hs), 5 * hs)
    c = shift_trajectory(a, 8 * hs)
    law = np.array_equal(ab.v, c.v) and np.array_equal(ab.tau, c.tau)
    return [
        Check("determinism", same, "two integrations bit-identical"),
        Check("shift_laws", law0 and law, "T(0) = id and T(a)T(b) = T(a+b) exactly"),
    ]


def _check_dependence(setup: Setup, rng) -> list:
    integ = _short(setup, 5.0, 8)
    bound = gronwall_bound(setup.ops, setup.params)
    s0 = initial_state("random", setup, rng)
    base = integ.integrate(s0)
    g = setup.grid
    out = []
    for eps in (1e-3, 1e-6):
        dv, dz = rng.standard_normal(g.size), rng.standard_normal(g.size)
        k = eps / np.hypot(norm_l2(dv, g), norm_l2(dz, g))
        # perturb v and varpi by (k dv, k dz)
        pert = State(0.0, s0.v + k * dv, s0.tau + k * dz - setup.params.nu * k * dv)
        rep = continuous_dependence_check(integ.integrate(pert), base, setup.ops, setup.params, bound, 1.1, 5.0)
        out.append(
            Check(
                f"continuous_dependence_eps{eps:g}",
                rep.passed,
                f"max dist/eps {np.max(rep.distance) / rep.eps:.4g}, rate {bound.rate:.4g}, log margin {rep.worst_log_margin:.4g}",
            )
        )
    return out


def _check_stress_oracle(setup: Setup, rng) -> list:
    p = setup.params
    # frozen concentration at a single node, homogeneous data so varsigma = tau
    g1 = GridSpec.interval(1.0, 2)
    ops1 = build_operators(g1)
    hom = homogeneous_lift(g1, p)
    u_val, s0, T = 0.8, 1.5, 2.0
    errs = []
    for dt in (0.02, 0.01, 0.005):
        integ = IMEXIntegrator(ops1, hom, hom.params, SolverConfig(dt, T))
        tau = integ.relax_stress(np.full(2, u_val), np.full(2, s0), int(round(T / dt)))
        ref = stress_closed_form(StressODEProblem(lambda t: np.full_like(t, u_val), s0, hom.params), T)
        errs.append(abs(tau[0] - ref))
    orders = _observed_orders(errs)[1:]
    conv = all(o >= 1.8 for o in orders)

    slack, eventual = np.inf, True
    level = (p.mu + p.nu * p.beta_R) / p.beta_G
    ts = np.linspace(0.0, 10.0 / p.beta_G, 41)
    for _ in range(20):
        a, w, ph = rng.uniform(-1, 1, 3) * np.array([1.0, 3.0, np.pi])
        path = (lambda a, w, ph: lambda t: np.clip(a * np.cos(w * t + ph), -1, 1))(a, w, ph)
        prob = StressODEProblem(path, float(rng.uniform(-20, 20)), hom.params)
        vals = stress_closed_form(prob, ts)
        slack = min(slack, float(np.min(stress_bound(prob, ts) - np.abs(vals))))
        eventual &= abs(vals[-1]) <= level + 0.01
    return [
        Check("stress_frozen_u_order", conv, "orders " + ", ".join(f"{o:.3f}" for o in orders)),
        Check("stress_bound", slack >= -1e-8 and eventual, f"min slack {slack:.4g}; eventual level {level:.4g} reached"),
    ]


def _check_dense_reference(setup: Setup) -> Check:
    from .oracle import dense_reference_step

    g = GridSpec(setup.grid.dimension, setup.grid.lengths, (32,) if setup.grid.dimension == 1 else (12, 12))
    ops = build_operators(g)
    lift = build_lift(g, setup.cfg.boundary_preset(), setup.cfg.model_params())
    p = lift.params
    rng = np.random.default_rng(0)
    s0 = State(0.0, random_field(rng, ops, 0.5, modes=8), random_field(rng, ops, 0.5, modes=8))
    T = 0.25
    ref = dense_reference_step(s0, T, ops, lift, p)
    errs = []
    for dt in (T / 8, T / 16, T / 32):
        integ = IMEXIntegrator(ops, lift, p, SolverConfig(dt, T, "imex-cn"))
        s = s0
        for k in range(int(round(T / dt))):
            s = integ.step(s, k)
        errs.append(float(np.hypot(norm_l2(s.v - ref.v, g), norm_l2(s.tau - ref.tau, g))))
    orders = _observed_orders(errs)[1:]
    return Check("dense_reference_cn", all(o >= 1.8 for o in orders), "orders " + ", ".join(f"{o:.3f}" for o in orders))


def verify_checks(cfg: RunConfig, threads: int = 1) -> list:
    """The identity and oracle suite; each entry is a :class:`Check`."""
    setup = build_setup(cfg)
    rngs = member_rngs(cfg.diagnostics["seed"], 6)
    groups = [
        lambda: _check_calculus(setup, rngs[0]),
        lambda: [_check_sine_norm()],
        lambda: _check_model(setup, rngs[1]),
        lambda: _check_rest(setup),
        lambda: _check_determinism_and_shifts(setup, rngs[2]),
        lambda: _check_dependence(setup, rngs[3]),
        lambda: _check_stress_oracle(setup, rngs[4]),
        lambda: [_check_dense_reference(setup)],
    ]
    return [c for grp in run_ordered(lambda f: f(), groups, threads) for c in grp]


def verify(cfg: RunConfig, out, threads: int = 1) -> Outcome:
    out, formats = _prepare(out, cfg)
    checks = verify_checks(cfg, threads)
    files = []
    _csv(out, formats, "verify.csv", ["check", "verdict", "detail"], [(c.name, _verdict(c.passed), c.detail) for c in checks], files)
    ok = all(c.passed for c in checks)
    body = "# verify\n" + "\n".join(c.line() for c in checks) + f"\nverdict: {_verdict(ok)}\n"
    _text(out, formats, "verify.txt", body, files)
    return Outcome(ok, body, files)


COMMANDS = {
    "simulate": simulate,
    "dissipation": dissipation,
    "attract": attract,
    "mms": mms,
    "verify": verify,
}
