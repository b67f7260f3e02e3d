"""Method-of-lines solver for the radially reduced elastic wave equation.

With u = x psi(t, r) the system d_t^2 u - Lap u = N(u, u) reduces to

    psi_tt = psi'' + 4 psi' / r + chi,    chi = N(u, u)^1 / x_1 on the axis,

integrated with classical RK4 on the pair (psi, psi_t).
"""
from __future__ import annotations

import collections
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .energies import EnergyReport, analyze, kss_accumulate, nonlinearity_for, smallness_norm
from .nullform import CoefficientSet, NullFormTensor, VectorJet2, build_tensor, evaluate_N
from .radialfield import (
    RadialGrid,
    RadialProfile,
    StateVector,
    acceleration,
    radial_tower,
    vector_derivative,
)

__all__ = [
    "FAMILIES",
    "ConfigError",
    "ScenarioConfig",
    "Trajectory",
    "scalar_rhs",
    "step",
    "run",
    "make_initial_data",
    "data_shape",
    "grad_sup",
    "radiality_defect",
]

FAMILIES = ("gaussian", "bump", "ring")
REPORT_LEVELS = ("full", "energy", "none")


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ScenarioConfig:
    # grid
    R: float = 40.0
    n: int = 800
    # time
    cfl: float = 0.4
    T_final: float = 10.0
    # material (c1 normalised to 1)
    c1: float = 1.0
    c2: float = 0.5
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.5
    d4: float = 0.0
    d5: float = 1.0
    # data
    family: str = "gaussian"
    epsilon: float = 1e-3
    width: float = 1.0
    ring_radius: float = 3.0
    # output
    cadence: float = 1.0
    report_level: str = "full"  # full | energy | none
    radiality: bool = False
    keep_states: bool = False
    # thresholds
    blowup_factor: float = 1e3
    smallness_threshold: float = 0.1
    edge_tolerance: float = 1e-14
    seed: int = 0

    @property
    def coefficients(self) -> CoefficientSet:
        return CoefficientSet(self.c1, self.c2, self.d1, self.d2, self.d3, self.d4, self.d5)

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.R, self.n)

    @property
    def support_radius(self) -> float:
        return data_support(self.family, self.width, self.ring_radius)

    @property
    def substeps(self) -> int:
        """RK4 steps per output interval."""
        return max(1, math.ceil(self.cadence / (self.cfl * self.R / self.n) - 1e-9))

    @property
    def dt(self) -> float:
        return self.cadence / self.substeps

    def violations(self) -> list[str]:
        out = []
        if self.R <= 0:
            out.append("grid.R: must be positive")
        if self.n < 16:
            out.append("grid.n: need at least 16 cells")
        if not 0 < self.cfl <= 0.5:
            out.append(f"time.cfl: CFL = dt/h must satisfy 0 < CFL <= 0.5, got {self.cfl}")
        if self.T_final <= 0:
            out.append("time.T_final: must be positive")
        if not 0 < self.c2 < self.c1:
            out.append("material.c2: need 0 < c2 < c1")
        if self.c1 != 1.0:
            out.append("material.c1: the reduced dynamics assume c1 = 1")
        if self.family not in FAMILIES:
            out.append(f"data.family: unknown family {self.family!r}; choose from {FAMILIES}")
        if self.epsilon < 0:
            out.append("data.epsilon: must be nonnegative")
        if self.width <= 0:
            out.append("data.width: must be positive")
        if self.report_level not in REPORT_LEVELS:
            out.append(f"output.report_level: choose from {REPORT_LEVELS}")
        if self.cadence <= 0:
            out.append("output.cadence: must be positive")
        if self.blowup_factor <= 1:
            out.append("thresholds.blowup_factor: must exceed 1")
        if self.family in FAMILIES and self.R < self.T_final + self.support_radius + 1:
            out.append(f"grid.R: need R >= T_final + support radius + 1 = "
                       f"{self.T_final + self.support_radius + 1:g}, got {self.R:g}")
        return out

    def validate(self) -> "ScenarioConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def data_support(family: str, width: float, ring_radius: float) -> float:
    """Radius beyond which the data is below 1e-16 (exactly zero for the bump)."""
    if family == "bump":
        return 2.0 * width
    if family == "ring":
        return ring_radius + 6.0 * width
    return 6.0 * width


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def f(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a, b = f(x), f(1.0 - x)
    return a / (a + b)


def data_shape(family: str, r: np.ndarray, width: float = 1.0, ring_radius: float = 3.0) -> np.ndarray:
    """Unit-amplitude profile of one data family, even in r."""
    r = np.asarray(r, dtype=float)
    if family == "gaussian":
        return np.exp(-(r / width) ** 2)
    if family == "bump":
        return 1.0 - _smooth_step(np.abs(r) / width - 1.0)
    if family == "ring":
        return np.exp(-((r - ring_radius) / width) ** 2) + np.exp(-((r + ring_radius) / width) ** 2)
    raise ValueError(f"unknown data family {family!r}; choose from {FAMILIES}")


def make_initial_data(family: str, epsilon: float, grid: RadialGrid, width: float = 1.0,
                      ring_radius: float = 3.0) -> tuple[RadialProfile, RadialProfile]:
    """(psi0, psi1) with psi1 = 0 and smallness_norm(psi0, psi1) = epsilon."""
    shape = RadialProfile(grid, data_shape(family, grid.r, width, ring_radius))
    zero = RadialProfile(grid, np.zeros(grid.n))
    if epsilon == 0:
        return RadialProfile(grid, np.zeros(grid.n)), zero
    unit = smallness_norm(shape, zero)
    # the norm is homogeneous of degree one, so the root of norm(A shape) = eps is explicit
    amp = epsilon / unit
    return RadialProfile(grid, amp * shape.values), zero


def scalar_rhs(s: StateVector, tensor: NullFormTensor) -> RadialProfile:
    """chi with psi_tt = psi'' + 4 psi'/r + chi."""
    _, chi = acceleration(s, nonlinearity_for(tensor))
    return RadialProfile(s.grid, chi)


def _accel(psi: np.ndarray, grid: RadialGrid, nl) -> np.ndarray:
    s = StateVector(RadialProfile(grid, psi), RadialProfile(grid, np.zeros_like(psi)))
    return acceleration(s, nl)[0]


def step(s: StateVector, dt: float, tensor: NullFormTensor) -> StateVector:
    """One classical RK4 step of (psi, psi_t)."""
    return _rk4(s, dt, nonlinearity_for(tensor))


def _rk4(s: StateVector, dt: float, nl) -> StateVector:
    grid = s.grid
    p0 = s.psi.values
    v0 = s.psidot.values
    k1p, k1v = v0, _accel(p0, grid, nl)
    k2p, k2v = v0 + 0.5 * dt * k1v, _accel(p0 + 0.5 * dt * k1p, grid, nl)
    k3p, k3v = v0 + 0.5 * dt * k2v, _accel(p0 + 0.5 * dt * k2p, grid, nl)
    k4p, k4v = v0 + dt * k3v, _accel(p0 + dt * k3p, grid, nl)
    p1 = p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    v1 = v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return StateVector(RadialProfile(grid, p1), RadialProfile(grid, v1), s.t + dt)


def grad_sup(s: StateVector) -> float:
    """sup over the grid of the Frobenius norm of grad u; on the axis it is
    sqrt((psi + r psi')^2 + 2 psi^2)."""
    tower = radial_tower(s.psi.values, s.grid, 1)
    psi = tower[0]
    radial = psi + s.grid.r ** 2 * tower[1]
    return float(np.sqrt(radial * radial + 2 * psi * psi).max())


def radiality_defect(s: StateVector, tensor: NullFormTensor) -> float:
    """max_k |N^k / x_k at r(1,1,1)/sqrt3 - chi(r)| relative to max |chi|."""
    grid = s.grid
    chi = scalar_rhs(s, tensor).values
    scale = np.abs(chi).max()
    if scale == 0:
        return 0.0
    x = np.repeat(grid.r[:, None] / math.sqrt(3.0), 3, axis=1)
    tower = radial_tower(s.psi.values, grid, 2)
    npts = grid.n
    du = np.zeros((npts, 4, 3))
    du[:, 1:, :] = np.moveaxis(vector_derivative(tower, x, 1), 1, -1)
    ddu = np.zeros((npts, 4, 4, 3))
    ddu[:, 1:, 1:, :] = np.moveaxis(vector_derivative(tower, x, 2), 1, -1)
    jet = VectorJet2(np.moveaxis(vector_derivative(tower, x, 0), 1, -1), du, ddu)
    N = evaluate_N(tensor, jet, jet)
    return float(np.abs(N / x - chi[:, None]).max() / scale)


@dataclass
class Trajectory:
    config: ScenarioConfig
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    states: list = field(default_factory=list)
    grad_sups: list = field(default_factory=list)
    e3: list = field(default_factory=list)
    radiality: list = field(default_factory=list)
    edge: list = field(default_factory=list)
    outcome: str = "completed"
    t_star: float | None = None
    epsilon_small: float | None = None
    growth_history: list = field(default_factory=list)

    @property
    def energy_ratio(self) -> float:
        """sup_t E3^{1/2} / E3^{1/2}(0)."""
        e = self.e3
        if not e or e[0] == 0:
            return 1.0 if not e or max(e) == 0 else math.inf
        return math.sqrt(max(e) / e[0])


def _report(s, tensor, eps, prev, dt_out):
    f = analyze(s, tensor)
    n3 = f.N3()
    l3 = f.L3_density()
    if prev is None:
        m3, lr = 0.0, 0.0
    else:
        rep, n3_prev, l3_prev = prev
        m3 = kss_accumulate(rep.M3_running, (n3_prev, n3), dt_out)
        lr = kss_accumulate(rep.L3_running, (l3_prev, l3), dt_out)
    rep = EnergyReport(t=s.t, E3=f.E3(), ghost_E3=f.ghost_E3(), X3=f.X3(), N3=n3,
                       M3_running=m3, L3_running=lr, Etilde3=f.Etilde3(), smallness_eps=eps)
    return rep, n3, l3


def run(cfg: ScenarioConfig, on_report=None, stop_when=None) -> Trajectory:
    """Integrate to T_final or stop at blowup or boundary violation.

    ``stop_when(traj)`` is consulted after every record; returning True ends
    the run with outcome "stopped" (used by sweeps that only need a verdict).
    """
    cfg.validate()
    grid = cfg.grid
    tensor = build_tensor(cfg.coefficients)
    nl = nonlinearity_for(tensor)
    psi0, psi1 = make_initial_data(cfg.family, cfg.epsilon, grid, cfg.width, cfg.ring_radius)
    s = StateVector(psi0, psi1, 0.0)
    traj = Trajectory(cfg)
    g0 = grad_sup(s)
    threshold = cfg.blowup_factor * g0
    history = collections.deque([g0], maxlen=5)
    n_out = math.ceil(cfg.T_final / cfg.cadence - 1e-9)
    dt = cfg.dt
    prev = None

    def record(state, k):
        nonlocal prev
        t_rec = k * cfg.cadence
        state = StateVector(state.psi, state.psidot, t_rec)
        traj.times.append(t_rec)
        traj.grad_sups.append(grad_sup(state))
        traj.edge.append(state.edge_amplitude())
        if cfg.radiality:
            traj.radiality.append(radiality_defect(state, tensor))
        if cfg.keep_states:
            traj.states.append(state)
        if cfg.report_level == "full":
            rep, n3, l3 = _report(state, tensor, cfg.epsilon, prev, cfg.cadence)
            prev = (rep, n3, l3)
            traj.reports.append(rep)
            traj.e3.append(rep.E3)
            if on_report is not None:
                on_report(rep)
        elif cfg.report_level == "energy":
            traj.e3.append(analyze(state, tensor).E3())
        return state

    s = record(s, 0)
    for k in range(1, n_out + 1):
        for sub in range(cfg.substeps):
            s = _rk4(s, dt, nl)
            gs = grad_sup(s) if s.psi.is_finite() else math.inf
            if not math.isfinite(gs) or not s.psidot.is_finite():
                traj.outcome, traj.t_star = "blowup", s.t
                traj.growth_history = list(history)
                return traj
            history.append(gs)
            grows = len(history) == 5 and all(b > a for a, b in zip(history, list(history)[1:]))
            if gs > threshold and grows:
                traj.outcome, traj.t_star = "blowup", s.t
                traj.growth_history = list(history)
                return traj
        s = record(s, k)
        if traj.edge[-1] > cfg.edge_tolerance:
            traj.outcome, traj.t_star = "boundary_violation", s.t
            return traj
        if stop_when is not None and stop_when(traj):
            traj.outcome, traj.t_star = "stopped", s.t
            return traj
    return traj
