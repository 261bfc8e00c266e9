from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from polydiff.diagnostics import chi_from_norms
from polydiff.grid import GridSpec, build_operators, norm_l2
from polydiff.model import ConstantBoundary, ModelParams, beta0_grad, build_lift, homogeneous_lift
from polydiff.solver import (
    IMEXIntegrator,
    SolverConfig,
    SolverDivergence,
    State,
    aligned_dt,
    default_dt,
    gronwall_bound,
    integrate,
    recover_u_sigma,
    sample_norms,
    step,
    stress_flux_lipschitz,
    zero_state,
)


def frozen(v, tau):
    return np.zeros_like(tau)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(0.1, 0.05)
    with pytest.raises(ValueError, match="unknown scheme"):
        SolverConfig(0.1, 1.0, "rk4")
    with pytest.raises(ValueError):
        SolverConfig(0.1, 1.0, sample_stride=0)
    assert SolverConfig(0.1, 1.0, "imex-cn").theta == 0.5


def test_default_and_aligned_dt(ops1d, params):
    dt = default_dt(ops1d, params)
    assert dt == min(0.25 / params.beta_R, 1.0 / 129)
    for stride in (1, 4, 16):
        a = aligned_dt(dt, stride)
        assert a <= dt
        m = 1.0 / (a * stride)
        assert abs(m - round(m)) < 1e-9
        assert aligned_dt(a, stride) == pytest.approx(a, rel=1e-14)


def test_rest_state_homogeneous(ops1d, hom1d):
    cfg = SolverConfig(0.01, 2.0, "imex-cn")
    tr = integrate(zero_state(ops1d), cfg, ops1d, hom1d, hom1d.params)
    assert not np.any(tr.v) and not np.any(tr.tau)
    for series in tr.norms.values():
        assert not np.any(series)


def test_rest_state_constant_boundary(ops1d, params):
    lift = build_lift(ops1d.grid, ConstantBoundary(0.7), params)
    tr = integrate(zero_state(ops1d), SolverConfig(0.01, 1.0), ops1d, lift, lift.params)
    u, s = recover_u_sigma(tr, lift, lift.params)
    assert np.all(u == lift.phi) and np.all(s == lift.stress)


@pytest.mark.parametrize("scheme,order", [("imex-euler", 1), ("imex-cn", 2)])
def test_linear_mode_against_expm(scheme, order, params):
    g = GridSpec.interval(1.0, 31)
    ops = build_operators(g)
    hom = homogeneous_lift(g, params)
    e1 = ops.eigenfield(1)
    T = 0.2
    A = params.d * ops.laplacian.toarray()
    exact = scipy.linalg.expm(T * A) @ e1
    errs = []
    for dt in (0.02, 0.01, 0.005):
        integ = IMEXIntegrator(ops, hom, hom.params, SolverConfig(dt, T, scheme), reaction=frozen)
        s = State(0.0, e1, np.zeros(g.size))
        for k in range(int(round(T / dt))):
            s = integ.step(s, k)
        assert not np.any(s.tau)
        # single mode: the scheme's amplification factor, applied n times
        z = dt * params.d * ops.lambda1
        th = integ.cfg.theta
        factor = ((1 - (1 - th) * z) / (1 + th * z)) ** round(T / dt)
        np.testing.assert_allclose(s.v, factor * e1, rtol=1e-10, atol=1e-13)
        errs.append(norm_l2(s.v - exact, g))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > order - 0.1)


@pytest.mark.parametrize("scheme", ["imex-euler", "imex-cn"])
def test_implicit_diffusion_unconditionally_stable(scheme, ops1d, hom1d, rng):
    v0 = rng.standard_normal(ops1d.grid.size)
    for dt in (0.001, 0.1, 10.0):
        integ = IMEXIntegrator(ops1d, hom1d, hom1d.params, SolverConfig(dt, 20 * dt, scheme), reaction=frozen)
        tr = integ.integrate(State(0.0, v0, np.zeros_like(v0)))
        assert np.all(np.diff(tr.norms["v_l2"]) <= 1e-12)


def test_sampling_and_norms(ops1d, lift1d, rng):
    cfg = SolverConfig(0.01, 1.0, sample_stride=10)
    s0 = State(0.0, rng.standard_normal(128), rng.standard_normal(128))
    tr = IMEXIntegrator(ops1d, lift1d, lift1d.params, cfg).integrate(s0)
    assert len(tr) == 11
    np.testing.assert_allclose(tr.times, np.arange(11) * 0.1, atol=1e-12)
    assert tr.span == pytest.approx(1.0)
    n5 = sample_norms(tr.v[5], tr.tau[5], ops1d, lift1d.params)
    for key, val in n5.items():
        assert tr.norms[key][5] == val
    assert tr.state(5).t == pytest.approx(0.5)


def test_determinism_and_wrappers(ops1d, lift1d, rng):
    cfg = SolverConfig(0.01, 0.5, "imex-cn", 5)
    s0 = State(0.0, rng.standard_normal(128), rng.standard_normal(128))
    a = integrate(s0, cfg, ops1d, lift1d, lift1d.params)
    b = integrate(s0, cfg, ops1d, lift1d, lift1d.params)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.tau, b.tau)
    one = step(s0, cfg, ops1d, lift1d, lift1d.params)
    two = IMEXIntegrator(ops1d, lift1d, lift1d.params, cfg).step(s0)
    assert np.array_equal(one.v, two.v) and one.t == pytest.approx(0.01)


def test_divergence_guard(ops1d, lift1d, rng):
    cfg = SolverConfig(0.01, 1.0, sample_stride=2, max_value_guard=1.0)
    s0 = State(0.0, 0.5 * np.ones(128), np.zeros(128))
    big = lambda v, tau: 100.0 * np.ones_like(v)
    with pytest.raises(SolverDivergence) as info:
        IMEXIntegrator(ops1d, lift1d, lift1d.params, cfg, reaction=big).integrate(s0)
    assert info.value.step_index >= 1
    assert info.value.partial is not None and len(info.value.partial) >= 1
    assert "step" in str(info.value)


def test_invalid_initial_state(ops1d, lift1d):
    integ = IMEXIntegrator(ops1d, lift1d, lift1d.params, SolverConfig(0.01, 0.1))
    bad = np.zeros(128)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        integ.integrate(State(0.0, bad, np.zeros(128)))
    with pytest.raises(ValueError):
        integ.integrate(State(0.0, np.zeros(7), np.zeros(7)))


def test_lift_grid_mismatch(ops1d, params):
    other = homogeneous_lift(GridSpec.interval(1.0, 64), params)
    with pytest.raises(ValueError, match="different grids"):
        IMEXIntegrator(ops1d, other, other.params, SolverConfig(0.01, 0.1))


def test_sorption_uptake_against_fine_reference(params):
    g = GridSpec.interval(1.0, 63)
    ops = build_operators(g)
    lift = build_lift(g, ConstantBoundary(0.6), params)
    p = lift.params
    v0 = -lift.phi
    s0 = State(0.0, v0, -lift.stress - p.nu * v0)  # u = sigma = 0 inside
    dt = 0.01
    coarse = IMEXIntegrator(ops, lift, p, SolverConfig(dt, 3.0, sample_stride=10)).integrate(s0)
    fine = IMEXIntegrator(ops, lift, p, SolverConfig(dt / 16, 3.0, sample_stride=160)).integrate(s0)
    u_c, _ = recover_u_sigma(coarse, lift, p)
    u_f, _ = recover_u_sigma(fine, lift, p)
    # interior concentration rises monotonically toward the boundary level
    mass = u_f.mean(axis=1)
    assert np.all(np.diff(mass) > 0)
    assert u_f[-1].min() > 0 and u_f[-1].max() <= 0.6 + 1e-9
    assert np.max(np.abs(u_c - u_f)) < 0.05 * 0.6


def test_lipschitz_bound_dominates_samples(lift1d):
    p = lift1d.params
    L_u, L_s = stress_flux_lipschitz(p)
    r = np.random.default_rng(3)
    u = r.uniform(-2.5 * p.R_cut, 2.5 * p.R_cut, 200_000)
    s = r.uniform(-2.5 * p.R_cut, 2.5 * p.R_cut, 200_000)
    b, bu, bs = beta0_grad(u, s, p)
    assert np.max(np.abs(s * bu)) <= L_u
    assert np.max(np.abs(b + s * bs)) <= L_s
    gb = gronwall_bound(build_operators(lift1d.grid), p)
    assert gb.rate > 0 and gb.prefactor >= 1.0
    with pytest.raises(ValueError):
        stress_flux_lipschitz(replace(p, R_cut=np.inf))


def test_energy_of_trajectory(ops1d, lift1d, rng):
    tr = IMEXIntegrator(ops1d, lift1d, lift1d.params, SolverConfig(0.01, 0.2)).integrate(
        State(0.0, rng.standard_normal(128), rng.standard_normal(128))
    )
    c = chi_from_norms(tr.norms, lift1d.params)
    assert np.all(c >= 0) and np.all(np.isfinite(tr.norms["tau_h1"]))
