"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

All runs are desk scale (1D n = 128, 2D 32 x 32).  Where a quantity is
recomputed here it is done with dense numpy linear algebra rather than the
package's sparse/spectral code paths.
"""

import filecmp
from dataclasses import replace

import numpy as np
import pytest

from conftest import DEFAULT_CONFIG, record
from polydiff import cli
from polydiff.diagnostics import (
    attraction_diagnostic,
    calibrate_dissipation,
    compute_gamma,
    shift_trajectory,
)
from polydiff.experiments import (
    attraction_ensemble,
    build_setup,
    initial_state,
    member_rngs,
    mms_tables,
    scaled_to_chi,
)
from polydiff.grid import (
    GridSpec,
    build_operators,
    inner_hm1,
    inner_l2,
    norm_h1,
    norm_hm1,
    norm_hmdelta,
    norm_l2,
)
from polydiff.model import ConstantBoundary, build_lift, homogeneous_lift
from polydiff.oracle import StressODEProblem, stress_bound, stress_closed_form
from polydiff.solver import IMEXIntegrator, SolverConfig, State, gronwall_bound, recover_u_sigma, zero_state


def dense_chi(v, tau, ops, p):
    """chi with a dense inverse Laplacian, independent of the sparse factorisation."""
    w = ops.grid.cell_volume
    L = ops.laplacian.toarray()
    x = np.linalg.solve(L, v)
    hm1_sq = -w * x @ (L @ x)
    varpi = tau + p.nu * v
    return 0.5 * p.mu * hm1_sq + 0.5 * p.nu * p.D * w * v @ v + 0.5 * p.E * w * varpi @ varpi


# -- 1 ----------------------------------------------------------------------------


@pytest.mark.parametrize("which", ["1d", "2d"])
def test_criterion_01_calculus_identities(which, ops1d, ops2d):
    ops = ops1d if which == "1d" else ops2d
    g = ops.grid
    rng = np.random.default_rng(1 if which == "1d" else 2)
    duality = 0.0
    for _ in range(100):
        u, v = rng.standard_normal(g.size), rng.standard_normal(g.size)
        duality = max(duality, abs(inner_hm1(u, ops.apply(v), ops) + inner_l2(u, v, g)) / (norm_l2(u, g) * norm_l2(v, g)))

    # Friedrichs constant from a dense eigensolve, not the closed form
    lam1 = np.linalg.eigvalsh(-ops.laplacian.toarray())[0]
    K = lam1**-0.5
    fields = rng.standard_normal((1000, g.size)) * rng.uniform(0.01, 10, (1000, 1))
    fried = max(norm_l2(f, g) - K * norm_h1(f, ops) for f in fields)
    e1 = ops.eigenfield(*(1,) * g.dimension)
    equality = abs(norm_l2(e1, g) - K * norm_h1(e1, ops))

    spectral = max(abs(norm_hmdelta(f, ops, 1.0) - norm_hm1(f, ops)) / norm_hm1(f, ops) for f in fields[:100])

    ok = duality <= 1e-8 and fried <= 1e-12 and equality <= 1e-8 and spectral <= 1e-8
    record(
        1,
        f"calculus identities ({which})",
        ok,
        f"duality {duality:.2e} <= 1e-8; Friedrichs max(||u|| - K||u||_1) {fried:.2e} <= 0; "
        f"e1 defect {equality:.2e} <= 1e-8; hmdelta(1)/hm1 rel {spectral:.2e} <= 1e-8",
    )
    assert ok


# -- 2 ----------------------------------------------------------------------------


def test_criterion_02_sine_hm1_norm():
    target = 1.0 / (np.pi * np.sqrt(2.0))
    errs = []
    for n in (31, 63, 127):  # h = 1/32, 1/64, 1/128
        g = GridSpec.interval(1.0, n)
        errs.append(abs(norm_hm1(g.sample(lambda x: np.sin(np.pi * x)), build_operators(g)) - target))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(np.abs(orders - 2.0) <= 0.2))
    record(2, "||sin(pi x)||_-1 -> 1/(pi sqrt 2)", ok, f"errors {', '.join(f'{e:.3e}' for e in errs)}; orders {orders.round(4).tolist()} in 2 +/- 0.2")
    assert ok


# -- 3 ----------------------------------------------------------------------------


def test_criterion_03_manufactured_convergence(default_cfg):
    tables = mms_tables(default_cfg)
    sp = tables["spatial"][2][1:]
    te = tables["temporal"]["imex-euler"][2][1:]
    tc = tables["temporal"]["imex-cn"][2][1:]
    ok = all(abs(o - 2.0) <= 0.2 for o in sp) and min(te) >= 0.9 and min(tc) >= 1.8
    record(
        3,
        "manufactured-solution orders",
        ok,
        f"spatial {np.round(sp, 3).tolist()} (2 +/- 0.2); imex-euler {np.round(te, 3).tolist()} (>= 0.9); "
        f"imex-cn {np.round(tc, 3).tolist()} (>= 1.8)",
    )
    assert ok


# -- 4 ----------------------------------------------------------------------------


def _random_path(rng):
    a = rng.normal(0, 1.0, 4)
    w = rng.uniform(0.1, 3.0, 4)
    ph = rng.uniform(0, 2 * np.pi, 4)
    c = rng.uniform(-1.5, 1.5)

    def u(t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.tanh(c + np.sum(a * np.sin(w * t + ph), axis=-1))  # |u| < 1

    return u


def test_criterion_04_stress_oracle(params):
    # (a) frozen u: solver's stress update against the closed form, under dt refinement
    g = GridSpec.interval(1.0, 4)
    ops = build_operators(g)
    lift = homogeneous_lift(g, params)
    p = lift.params
    u_vals = np.array([-0.9, 0.2, 0.5, 0.95])
    s0 = np.array([3.0, -2.0, 0.5, 8.0])
    T = 3.0
    ref = np.array(
        [stress_closed_form(StressODEProblem(lambda t, c=c: np.full_like(t, c), s, p), T) for c, s in zip(u_vals, s0)]
    )
    errs = []
    for dt in (0.04, 0.02, 0.01, 0.005):
        integ = IMEXIntegrator(ops, lift, p, SolverConfig(dt, T))
        # homogeneous data: tau equals varsigma = sigma - nu u
        tau = integ.relax_stress(u_vals, s0, int(round(T / dt)))
        errs.append(float(np.max(np.abs(tau - ref))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    converge = bool(np.all(orders >= 1.8)) and errs[-1] < errs[0]

    # (b) bound on 100 random bounded paths, (c) eventual level by t = 10/beta_G
    rng = np.random.default_rng(4)
    t_eventual = 10.0 / p.beta_G
    ts = np.linspace(0.0, t_eventual + 5.0, 101)
    level = (p.mu + p.nu * p.beta_R) / p.beta_G
    worst_slack, worst_late = np.inf, -np.inf
    for _ in range(100):
        prob = StressODEProblem(_random_path(rng), float(rng.uniform(-20, 20)), p)
        vals = stress_closed_form(prob, ts)
        worst_slack = min(worst_slack, float(np.min(stress_bound(prob, ts) - np.abs(vals))))
        worst_late = max(worst_late, float(np.max(np.abs(vals[ts >= t_eventual]))))
    ok = converge and worst_slack >= -1e-8 and worst_late <= level + 0.01
    record(
        4,
        "stress closed form and bounds",
        ok,
        f"frozen-u errors {', '.join(f'{e:.2e}' for e in errs)} orders {orders.round(3).tolist()} (scheme order 2); "
        f"min bound slack {worst_slack:.3e} >= -1e-8; max |varsigma| for t >= {t_eventual:g}: {worst_late:.4f} <= {level + 0.01:.2f}",
    )
    assert ok


# -- 5 ----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_05_dissipation(default_cfg):
    setup = build_setup(default_cfg)
    ops, p = setup.ops, setup.params
    d = default_cfg.diagnostics
    assert setup.solver.t_end == 50.0
    n_cal, n_val = int(d["calibration_size"]), int(d["validation_size"])
    assert n_val == 10
    rngs = member_rngs(d["seed"], n_cal + n_val)
    integ = setup.integrator()
    cal = [integ.integrate(initial_state("random", setup, r)) for r in rngs[:n_cal]]
    est = calibrate_dissipation(cal, ops, p, float(d["t_late"]), float(d["gamma_safety"]))
    gamma = compute_gamma(ops, p)
    G = est.Gamma_hat

    factors = np.geomspace(1.0, 1e6, n_val)
    failures, entries, chi0s = [], [], []
    for r, f in zip(rngs[n_cal:], factors):
        s0 = scaled_to_chi(initial_state("random", setup, r), f * G, ops, p)
        tr = integ.integrate(s0)
        c = np.array([dense_chi(v, tau, ops, p) for v, tau in zip(tr.v, tr.tau)])
        t = tr.times
        chi0s.append(c[0])
        bound_ok = bool(np.all(c <= np.exp(-gamma * t) * c[0] + 1.05 * G))
        inside = np.nonzero(c <= 2.0 * G)[0]
        entered = inside.size > 0
        stays = entered and bool(np.all(c[inside[0]:] <= 2.0 * G))
        entries.append(t[inside[0]] if entered else np.inf)
        if not (bound_ok and stays):
            failures.append(f)
    ok = not failures
    record(
        5,
        "dissipation estimate and absorption",
        ok,
        f"gamma_hat {gamma:.4f}, Gamma_hat {G:.4e} (calibrated on {n_cal} runs); 10 held-out runs with chi0/Gamma_hat "
        f"from 1 to {max(chi0s) / G:.3g}; all within bound and absorbed: {ok}; latest entry t = {max(entries):.3f}",
    )
    assert ok


# -- 6 ----------------------------------------------------------------------------


def test_criterion_06_continuous_dependence(default_cfg):
    setup = build_setup(default_cfg)
    ops, p, g = setup.ops, setup.params, setup.grid
    integ = setup.integrator(t_end=5.0, sample_stride=4)
    rng = np.random.default_rng(6)
    s0 = initial_state("random", setup, rng)
    a, b = integ.integrate(s0), integ.integrate(s0)
    identical = np.array_equal(a.v, b.v) and np.array_equal(a.tau, b.tau)

    C = gronwall_bound(ops, p).rate
    w = g.cell_volume
    details, ok = [], identical
    for eps in (1e-3, 1e-6):
        dv, dz = rng.standard_normal(g.size), rng.standard_normal(g.size)
        k = eps / np.sqrt(w * (dv @ dv + dz @ dz))
        pert = State(0.0, s0.v + k * dv, s0.tau + k * dz - p.nu * k * dv)  # varpi moves by k dz
        c = integ.integrate(pert)
        DV = c.v - a.v
        DZ = (c.tau + p.nu * c.v) - (a.tau + p.nu * a.v)
        dist = np.sqrt(w * (np.sum(DV**2, axis=1) + np.sum(DZ**2, axis=1)))
        t = a.times
        ok &= abs(dist[0] - eps) <= 1e-6 * eps
        ok &= bool(np.all(np.log(dist) <= np.log(1.1 * eps) + C * t))
        details.append(f"eps={eps:g}: max dist/eps {np.max(dist) / eps:.4f}")
    record(
        6,
        "uniqueness and continuous dependence",
        ok,
        f"identical ICs bit-identical: {identical}; C_hat = {C:.3f}; " + "; ".join(details) + " (bound 1.1 e^{C t})",
    )
    assert ok


# -- 7 ----------------------------------------------------------------------------


def test_criterion_07_shift_laws(default_cfg):
    setup = build_setup(default_cfg)
    integ = setup.integrator(t_end=4.0, sample_stride=8)
    s0 = initial_state("random", setup, np.random.default_rng(7))
    tr = integ.integrate(s0)
    h = tr.sample_dt
    same = lambda x, y: np.array_equal(x.v, y.v) and np.array_equal(x.tau, y.tau)
    identity = same(shift_trajectory(tr, 0.0), tr)
    law = all(
        same(shift_trajectory(shift_trajectory(tr, i * h), j * h), shift_trajectory(tr, (i + j) * h))
        for i, j in [(0, 3), (3, 0), (2, 5), (7, 11), (10, 10)]
    )
    # S_t S_s = S_{t+s}: restarting from the sample at s reproduces the tail bit for bit
    m = 9
    restart = setup.integrator(t_end=4.0 - m * h, sample_stride=8).integrate(State(0.0, tr.v[m], tr.tau[m]))
    semigroup = same(restart, shift_trajectory(tr, m * h))
    ok = identity and law and semigroup
    record(7, "shift and semigroup laws", ok, f"T(0) = id: {identity}; T(a)T(b) = T(a+b): {law}; S_t S_s = S_(t+s) bitwise: {semigroup}")
    assert ok


# -- 8 ----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_attraction(default_cfg):
    d = default_cfg.diagnostics
    assert int(d["ensemble_size"]) == 8 and list(map(float, d["shifts"])) == [0, 5, 10, 20, 40]
    assert float(d["delta"]) == 0.5 and float(d["horizon"]) == 5.0
    setup = build_setup(default_cfg)
    ens = attraction_ensemble(setup)
    rep = attraction_diagnostic(ens, d["shifts"], 0.5, 5.0, setup.ops)
    A = rep.A
    mono = bool(np.all(A[1:] <= 1.05 * A[:-1]))
    ratio = A[-1] / A[0]
    ok = mono and ratio <= 0.1
    record(
        8,
        "attraction functional",
        ok,
        f"A(h) for h = 0,5,10,20,40: {', '.join(f'{x:.3e}' for x in A)}; nonincreasing within 5%: {mono}; "
        f"A(40)/A(0) = {ratio:.3e} <= 0.1 (proxy = h=40 tails)",
    )
    assert ok


# -- 9 ----------------------------------------------------------------------------


def test_criterion_09_rest_state(default_cfg):
    setup = build_setup(default_cfg)
    ops, g, p = setup.ops, setup.grid, setup.params
    scfg = replace(setup.solver, t_end=5.0, sample_stride=1)

    hom = homogeneous_lift(g, p)
    tr = IMEXIntegrator(ops, hom, hom.params, scfg).integrate(zero_state(ops))
    homogeneous = float(max(np.max(np.abs(tr.v)), np.max(np.abs(tr.tau))))

    # inhomogeneous (default Gaussian) data: the zero record has chi = 0 and lifts to the boundary data
    lift = setup.lift
    zero_rec = shift_trajectory(tr, 0.0)
    chis = [dense_chi(v, tau, ops, p) for v, tau in zip(zero_rec.v, zero_rec.tau)]
    u, s = recover_u_sigma(zero_rec, lift, p)
    lifted = np.array_equal(u, np.broadcast_to(lift.phi, u.shape)) and np.array_equal(s, np.broadcast_to(lift.stress, s.shape))

    # constant nonzero boundary data are an exact steady state, so the zero state persists under stepping
    const = build_lift(g, ConstantBoundary(0.4), p)
    tr2 = IMEXIntegrator(ops, const, const.params, scfg).integrate(zero_state(ops))
    u2, s2 = recover_u_sigma(tr2, const, const.params)
    flat = float(max(np.max(np.abs(u2 - const.phi)), np.max(np.abs(s2 - const.stress))))
    chi2 = max(dense_chi(v, tau, ops, p) for v, tau in zip(tr2.v, tr2.tau))

    ok = homogeneous == 0.0 and max(chis) == 0.0 and lifted and flat == 0.0 and chi2 == 0.0
    record(
        9,
        "rest-state exactness",
        ok,
        f"homogeneous max|state| {homogeneous:.1e}; zero record chi max {max(chis):.1e}, (u, sigma) == (phi, stress datum): {lifted}; "
        f"constant boundary over t <= 5: max deviation {flat:.1e}, chi max {chi2:.1e}",
    )
    assert ok


# -- 10 ---------------------------------------------------------------------------


SMALL_DISSIPATION = """
solver:
  t_end: 12.0
diagnostics:
  calibration_size: 2
  validation_size: 3
  t_late: 10.0
  chi_max_factor: 100.0
"""


def test_criterion_10_reproducibility(tmp_path, capsys):
    small = tmp_path / "small.yaml"
    small.write_text(SMALL_DISSIPATION)
    runs = [
        ("simulate", DEFAULT_CONFIG, []),
        ("mms", DEFAULT_CONFIG, []),
        ("dissipation", small, ["--threads", "3"]),
        ("verify", DEFAULT_CONFIG, []),
    ]
    same, details = True, []
    for cmd, cfgpath, extra in runs:
        dirs = []
        for k in range(2):
            out = tmp_path / f"{cmd}{k}"
            code = cli.main([cmd, "--config", str(cfgpath), "--out", str(out), "--seed", "99"] + extra)
            assert code == 0
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        assert names == sorted(p.name for p in dirs[1].iterdir())
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        same &= not mismatch and not errors
        details.append(f"{cmd}: {len(match)}/{len(names)} files identical")
    capsys.readouterr()
    record(10, "byte-identical outputs", same, "; ".join(details))
    assert same
