import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from oracles import R_EXPR, RS, X
from radelastic.cli import _restrict
from radelastic.energies import smallness_norm
from radelastic.nullform import CoefficientSet, NullFormTensor, build_tensor
from radelastic.radialfield import RadialGrid, RadialProfile, StateVector
from radelastic.solver import (
    ConfigError,
    ScenarioConfig,
    data_shape,
    grad_sup,
    make_initial_data,
    radiality_defect,
    run,
    scalar_rhs,
    step,
)
from radelastic.verify import exact_linear_state

LINEAR = dict(d1=0.0, d3=0.0, d4=0.0, d5=0.0)


def _state(grid, fn0, fn1=lambda r: 0 * r, t=0.0):
    return StateVector(RadialProfile(grid, fn0(grid.r)), RadialProfile(grid, fn1(grid.r)), t)


# ---- right-hand side --------------------------------------------------------

def test_zero_tensor_gives_zero_chi():
    g = RadialGrid(8.0, 200)
    s = _state(g, lambda r: np.exp(-r * r))
    assert not np.any(scalar_rhs(s, NullFormTensor.zero()).values)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 2.0))
def test_radiality_off_axis(d1, a, b, width):
    g = RadialGrid(10.0, 400)
    t = build_tensor(CoefficientSet(1.0, 0.5, d1, 0.0, a, 0.0, b))
    s = _state(g, lambda r: np.exp(-(r / width) ** 2) * (1 + 0.3 * r * r))
    assert radiality_defect(s, t) <= 1e-10


def test_single_null_form_hand_case():
    # Q_ij(d_k u^k, u^j) on u = x psi(r) equals 2 omega_i phi' psi, phi = 3 psi + r psi';
    # psi is a quartic with random coefficients, so its 3-jet at each point is random
    c = sp.symbols("c0:5")
    psi = sum(ck * RS**k for k, ck in enumerate(c))
    u = [x * psi.subs(RS, R_EXPR) for x in X]
    div = sum(sp.diff(u[k], X[k]) for k in range(3))
    phi = 3 * psi + RS * sp.diff(psi, RS)
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(100, 3)) * rng.uniform(0.1, 3, size=(100, 1))
    cs = rng.normal(size=(5, 100))
    for i in range(3):
        q = sum(sp.diff(div, X[i]) * sp.diff(u[j], X[j]) - sp.diff(div, X[j]) * sp.diff(u[j], X[i])
                for j in range(3))
        hand = (2 * X[i] / RS * sp.diff(phi, RS) * psi).subs(RS, R_EXPR)
        f = sp.lambdify((*X, *c), q - hand, "numpy")
        ref = sp.lambdify((*X, *c), hand, "numpy")
        err = f(*pts.T, *cs)
        assert np.abs(err).max() < 1e-10 * (1 + np.abs(ref(*pts.T, *cs)).max())


def test_chi_matches_symbolic_nonlinearity():
    # full Q(u, grad u) plus the d1 term on u = x exp(-r^2), first component over x1
    d1, d3, d4, d5 = 0.4, 0.3, 0.2, -0.5
    a = 2 * d3 + d4
    u = [x * sp.exp(-R_EXPR**2) for x in X]
    d = lambda f, i: sp.diff(f, X[i])  # noqa: E731
    Qn = lambda i, j, f, g: d(f, i) * d(g, j) - d(f, j) * d(g, i)  # noqa: E731
    div = sum(d(u[k], k) for k in range(3))
    i = 0
    F = 3 * d1 * d(div**2, i)
    for j in range(3):
        F += a * Qn(i, j, div, u[j])
        for k in range(3):
            F += -a * Qn(j, k, d(u[k], i), u[j])
            F += d5 * (Qn(i, j, d(u[k], j), u[k]) + 2 * Qn(j, k, d(u[i], j), u[k])
                       - Qn(j, k, d(u[k], j), u[i]))
    f = sp.lambdify(X, F / X[0], "numpy")
    g = RadialGrid(8.0, 1600)
    chi = scalar_rhs(_state(g, lambda r: np.exp(-r * r)),
                     build_tensor(CoefficientSet(1.0, 0.5, d1, 0.0, d3, d4, d5))).values
    want = f(g.r, 0 * g.r, 0 * g.r)
    assert np.max(np.abs(chi - want)) < 1e-7 * np.abs(want).max()


# ---- stepping ---------------------------------------------------------------

def test_zero_state_stays_zero():
    g = RadialGrid(8.0, 64)
    z = _state(g, lambda r: 0 * r)
    t = build_tensor(CoefficientSet(1.0, 0.5, 1.0, 0.0, 1.0, 1.0, 1.0))
    out = step(z, 0.05, t)
    assert not np.any(out.psi.values) and not np.any(out.psidot.values)
    assert out.t == pytest.approx(0.05)


def test_linear_step_converges_to_exact_solution():
    errs = []
    for n in (200, 400, 800):
        g = RadialGrid(20.0, n)
        dt = 0.4 * g.h
        s = exact_linear_state(g, 0.0)
        steps = round(4.0 / dt)
        for _ in range(steps):
            s = step(s, dt, NullFormTensor.zero())
        exact = exact_linear_state(g, s.t)
        errs.append(np.abs(s.psi.values - exact.psi.values).max())
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 3.8
    assert errs[-1] < 1e-6


def _reversal_error(n):
    g = RadialGrid(20.0, n)
    dt = 0.4 * g.h
    ex = exact_linear_state(g, 0.0)
    t = build_tensor(CoefficientSet(1.0, 0.5, 0.0, 0.0, 0.5, 0.0, 1.0))
    s0 = StateVector(RadialProfile(g, 1e-2 * ex.psi.values), RadialProfile(g, 1e-2 * ex.psidot.values))
    s = s0
    steps = round(2.0 / dt)
    for _ in range(steps):
        s = step(s, dt, t)
    s = StateVector(s.psi, RadialProfile(g, -s.psidot.values), 0.0)
    for _ in range(steps):
        s = step(s, dt, t)
    scale = np.abs(s0.psi.values).max()
    return max(np.abs(s.psi.values - s0.psi.values).max(),
               np.abs(s.psidot.values + s0.psidot.values).max()) / scale


def test_time_reversal_returns_initial_data():
    # RK4 is not exactly reversible; the defect is discretization error
    e1, e2 = _reversal_error(200), _reversal_error(400)
    assert e2 < 1e-5
    assert math.log2(e1 / e2) >= 3.5


def test_self_convergence_nonlinear():
    base = ScenarioConfig(R=12.0, T_final=2.0, epsilon=0.5, family="gaussian", cadence=2.0,
                          report_level="none")
    finals = []
    for n in (160, 320, 640):
        cfg = base.replace(n=n, keep_states=True)
        finals.append((cfg.grid, run(cfg).states[-1].psi.values))
    diffs = []
    for (gc, vc), (gf, vf) in zip(finals, finals[1:]):
        diffs.append(np.abs(vc - _restrict(vf, gf, gc)).max())
    assert math.log2(diffs[0] / diffs[1]) >= 3.8


# ---- runs -------------------------------------------------------------------

def test_zero_amplitude_run_is_identically_zero():
    cfg = ScenarioConfig(R=16.0, n=64, T_final=4.0, epsilon=0.0)
    traj = run(cfg)
    assert traj.outcome == "completed"
    assert traj.times[-1] >= cfg.T_final
    for rep in traj.reports:
        assert rep.E3 == rep.X3 == rep.N3 == rep.M3_running == rep.Etilde3 == 0.0


def test_runs_are_deterministic():
    cfg = ScenarioConfig(R=14.0, n=96, T_final=3.0, epsilon=2.0, keep_states=True)
    a, b = run(cfg), run(cfg)
    assert a.e3 == b.e3
    for sa, sb in zip(a.states, b.states):
        assert np.array_equal(sa.psi.values, sb.psi.values)
        assert np.array_equal(sa.psidot.values, sb.psidot.values)


def test_finite_propagation_speed():
    cfg = ScenarioConfig(R=16.0, n=640, T_final=6.0, epsilon=1.0, family="bump", width=1.0,
                         keep_states=True, report_level="none", **LINEAR)
    traj = run(cfg)
    g = cfg.grid
    for s in traj.states:
        front = 2.0 + s.t + 1.0
        outside = np.abs(s.psi.values[g.r > front])
        assert outside.max(initial=0.0) <= 1e-8 * np.abs(s.psi.values).max()


def test_small_null_run_stays_bounded_with_radiality():
    cfg = ScenarioConfig(R=20.0, n=160, T_final=8.0, epsilon=1.0, family="bump", width=2.0,
                         radiality=True, report_level="energy")
    traj = run(cfg)
    assert traj.outcome == "completed"
    assert traj.energy_ratio <= 2.0
    assert max(traj.radiality) <= 1e-10


def test_non_null_large_data_blows_up():
    cfg = ScenarioConfig(R=40.0, n=400, T_final=20.0, epsilon=400.0, family="bump", width=2.0,
                         d1=1.0, report_level="none")
    traj = run(cfg)
    assert traj.outcome == "blowup"
    assert math.isfinite(traj.t_star) and traj.t_star < cfg.T_final
    hist = traj.growth_history
    assert len(hist) == 5
    assert all(b > a for a, b in zip(hist, hist[1:])) or not math.isfinite(hist[-1])


def test_stop_when_ends_run():
    cfg = ScenarioConfig(R=14.0, n=64, T_final=4.0, epsilon=1.0, report_level="energy")
    traj = run(cfg, stop_when=lambda tr: len(tr.times) >= 3)
    assert traj.outcome == "stopped"
    assert traj.times == [0.0, 1.0, 2.0]


def test_boundary_violation_detected():
    cfg = ScenarioConfig(R=12.0, n=96, T_final=4.0, epsilon=1.0, edge_tolerance=1e-30)
    assert run(cfg).outcome == "boundary_violation"


# ---- config -----------------------------------------------------------------

@pytest.mark.parametrize("changes,key", [
    (dict(cfl=0.9), "time.cfl"),
    (dict(R=5.0), "grid.R"),
    (dict(family="square"), "data.family"),
    (dict(c2=1.5), "material.c2"),
    (dict(n=8), "grid.n"),
    (dict(epsilon=-1.0), "data.epsilon"),
])
def test_config_violations(changes, key):
    cfg = ScenarioConfig().replace(**changes)
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert any(v.startswith(key) for v in err.value.violations)
    with pytest.raises(ConfigError):
        run(cfg)


def test_default_config_is_valid():
    assert ScenarioConfig().violations() == []


def test_substeps_respect_cfl():
    cfg = ScenarioConfig(R=40.0, n=800, cfl=0.4, cadence=1.0)
    assert cfg.dt / cfg.grid.h <= 0.4 + 1e-12
    assert cfg.dt * cfg.substeps == pytest.approx(1.0)


# ---- initial data ------------------------------------------------------------

@pytest.mark.parametrize("family", ["gaussian", "bump", "ring"])
def test_initial_data_hits_smallness(family):
    g = RadialGrid(20.0, 800)
    for eps in (1e-3, 0.7):
        psi0, psi1 = make_initial_data(family, eps, g)
        assert smallness_norm(psi0, psi1) == pytest.approx(eps, abs=1e-9 * max(1, eps))
        assert not np.any(psi1.values)


def test_zero_amplitude_data():
    g = RadialGrid(10.0, 50)
    psi0, psi1 = make_initial_data("bump", 0.0, g)
    assert not np.any(psi0.values) and not np.any(psi1.values)


def test_bump_support_is_exact():
    r = np.linspace(0, 5, 1001)
    shape = data_shape("bump", r, width=1.0)
    assert np.all(shape[r >= 2.0] == 0.0)
    assert np.all(shape[r <= 1.0] == 1.0)
    assert np.all(shape[(r > 1.0) & (r < 1.9)] > 0)
    assert np.all(np.diff(shape) <= 0)


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        make_initial_data("square", 1.0, RadialGrid(10.0, 50))


def test_grad_sup_of_linear_profile():
    # u = x c has grad u = c I, Frobenius norm sqrt(3) |c|
    g = RadialGrid(4.0, 40)
    s = _state(g, lambda r: 0 * r + 2.0)
    assert grad_sup(s) == pytest.approx(2 * math.sqrt(3))
