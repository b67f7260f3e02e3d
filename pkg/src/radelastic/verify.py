"""Numerical checks of the weighted Sobolev inequalities, the perturbed
local-energy estimate and the multiplier differential identities.

Every check returns a plain number (a ratio of the two sides of an
inequality, or a normalised residual of an identity); verdicts are decided
by the caller from boundedness and refinement stability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy.integrate import simpson

from .energies import nonlinearity_for
from .nullform import NullFormTensor
from .radialfield import (
    RadialGrid,
    RadialProfile,
    StateVector,
    acceleration,
    integrate,
    on_axis,
    radial_tower,
    sphere_rule,
    vector_derivative,
)

__all__ = [
    "INEQUALITIES",
    "SOBOLEV_MEMBERS",
    "PerturbationTensor",
    "MultiplierSpec",
    "sobolev_ratio",
    "exact_linear_state",
    "kss_inequality_check",
    "multiplier_identity_residual",
    "perturbed_multiplier_residual",
    "rho_constant",
    "VerificationRow",
    "format_report",
]

INEQUALITIES = ("weight1", "weight2", "charu", "weight3", "weight4", "weight5", "hardy")


# ---------------------------------------------------------------- fields

SOBOLEV_MEMBERS = {
    "gaussian": lambda r: np.exp(-r * r),
    "narrow_gaussian": lambda r: np.exp(-4 * r * r),
    "wide_gaussian": lambda r: np.exp(-r * r / 9),
    "bump": lambda r: _bump(r),
    "ring": lambda r: np.exp(-(r - 3) ** 2) + np.exp(-(r + 3) ** 2),
    # a far ring alone leaves r <= 1 empty, so it carries a small core
    "core_far_ring": lambda r: (0.1 * np.exp(-4 * r * r) + np.exp(-4 * (r - 8) ** 2)
                                + np.exp(-4 * (r + 8) ** 2)),
}


def _bump(r):
    from .solver import data_shape

    return data_shape("bump", r)


def _jets(psi: np.ndarray, grid: RadialGrid, depth: int):
    """Norms of u, grad u, grad^2 u for u = x psi on the axis."""
    x = on_axis(grid)
    tower = radial_tower(psi, grid, depth)
    out = []
    for p in range(depth + 1):
        d = vector_derivative(tower, x, p).reshape(grid.n, -1)
        out.append(np.sqrt((d * d).sum(axis=1)))
    return out


def _l2(values, grid, weight=None, alpha=2.0, r_max=None):
    w = 1.0 if weight is None else weight
    dens = 4 * np.pi * grid.r**2 * (w * values) ** 2
    return math.sqrt(max(integrate(dens, grid, alpha=alpha, r_max=r_max), 0.0))


def sobolev_ratio(member, inequality: str, t: float = 0.0, grid: RadialGrid | None = None) -> float:
    """LHS / RHS of one weighted Sobolev inequality for u = x psi(r).

    Radial fields are annihilated by the rotation fields, so each sum on the
    right collapses to its |a| = 0 term.  ``member`` is a family name or a
    callable psi(r).
    """
    if inequality not in INEQUALITIES:
        raise ValueError(f"unknown inequality {inequality!r}; choose from {INEQUALITIES}")
    grid = grid or RadialGrid(40.0, 1600)
    fn = SOBOLEV_MEMBERS[member] if isinstance(member, str) else member
    psi = fn(grid.r)
    u, du, ddu = _jets(psi, grid, 2)
    r = grid.r
    br = np.sqrt(1 + r * r)
    btr = np.sqrt(1 + (t - r) ** 2)
    if inequality == "weight1":
        lhs = np.max(r * u)
        rhs = _l2(du, grid) + _l2(u, grid)
    elif inequality == "weight2":
        lhs = np.max(np.sqrt(r) * u)
        rhs = _l2(du, grid)
    elif inequality == "charu":
        inner = r <= 1.0
        lhs = np.max(r[inner] ** 0.25 * u[inner])
        w14 = br**-0.25 * r**-0.25
        w54 = br**-0.25 * r**-1.25
        rhs = _l2(du, grid, w14, alpha=1.5) + _l2(u, grid, w14, alpha=1.5) + _l2(u, grid, w54, alpha=-0.5)
    elif inequality == "weight3":
        lhs = np.max(r * btr * u)
        rhs = _l2(du, grid, btr) + _l2(u, grid, btr)
    elif inequality == "weight4":
        lhs = np.max(np.sqrt(r) * btr * u)
        rhs = _l2(u, grid) + _l2(du, grid, btr)
    elif inequality == "weight5":
        lhs = np.max(btr * u)
        rhs = _l2(du, grid) + _l2(ddu, grid, btr)
    else:  # hardy, || u / r || <= 2 || grad u ||
        lhs = _l2(u / r, grid)
        rhs = _l2(du, grid)
    if rhs == 0:
        if lhs != 0:
            raise ArithmeticError(f"{inequality}: right side vanishes with nonzero left side")
        return 0.0
    return float(lhs / rhs)


# ------------------------------------------------- exact linear solution

def _a_deriv(s: np.ndarray, k: int) -> np.ndarray:
    """k-th derivative of a(s) = s exp(-s^2)."""
    coef = np.zeros(k + 2)
    coef[k + 1] = 1.0
    return -0.5 * (-1) ** (k + 1) * _herm.hermval(s, coef) * np.exp(-s * s)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _exact_psi(r: np.ndarray, t: float, order_t: int = 0) -> np.ndarray:
    """d_t^order psi for u = grad phi, r phi = a(t+r) - a(t-r).

    psi = phi_r / r.  Far from the axis the closed form is used; near it the
    double-integral representation psi = int int s^2 A'''(s r tau) avoids the
    cancellation in A'/r^2 - A/r^3.
    """
    r = np.asarray(r, dtype=float)
    k = order_t
    out = np.empty_like(r)
    far = r >= 1.0
    rf = r[far]
    A = _a_deriv(t + rf, k) - _a_deriv(t - rf, k)
    A1 = _a_deriv(t + rf, k + 1) + _a_deriv(t - rf, k + 1)
    out[far] = A1 / rf**2 - A / rf**3
    rn = r[~far]
    if rn.size:
        s = _GL_X[:, None, None]
        tau = _GL_X[None, :, None]
        arg = s * tau * rn[None, None, :]
        third = _a_deriv(t + arg, k + 3) + _a_deriv(t - arg, k + 3)
        w = (_GL_W[:, None, None] * _GL_W[None, :, None]) * s * s
        out[~far] = (w * third).sum(axis=(0, 1))
    return out


def exact_linear_state(grid: RadialGrid, t: float) -> StateVector:
    """State of the exact curl-free solution u = grad phi of the linear equation."""
    return StateVector(RadialProfile(grid, _exact_psi(grid.r, t)),
                       RadialProfile(grid, _exact_psi(grid.r, t, 1)), t)


# ------------------------------------------------------ perturbations

@dataclass(frozen=True)
class PerturbationTensor:
    """h^{ij}_{lm}(t, x) = H^{ij}_{lm} eta(t, r) with a constant symmetric H.

    eta(t, r) = exp(-(r / width)^2) (1 + 0.5 sin t); |h| = sum |h^{ij}_{lm}|.
    ``H[i, j, l, m]`` must satisfy H[i, j, l, m] = H[j, i, m, l].
    """

    H: np.ndarray
    width: float = 2.0
    bound: float = 0.1

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.shape != (3, 3, 3, 3):
            raise ValueError("H must have shape (3, 3, 3, 3)")
        if np.max(np.abs(H - H.transpose(1, 0, 3, 2))) > 0:
            raise ValueError("h must satisfy h^{ij}_{lm} = h^{ji}_{ml}")
        if self.sup_abs() > self.bound:
            raise ValueError(f"|h| = {self.sup_abs():.3g} exceeds the smallness bound {self.bound}")
        object.__setattr__(self, "H", H)

    @classmethod
    def zero(cls) -> "PerturbationTensor":
        return cls(np.zeros((3, 3, 3, 3)))

    @classmethod
    def random(cls, rng: np.random.Generator, size: float = 0.05, width: float = 2.0,
               bound: float = 0.1) -> "PerturbationTensor":
        H = rng.standard_normal((3, 3, 3, 3))
        H = 0.5 * (H + H.transpose(1, 0, 3, 2))
        H *= size / (1.5 * np.abs(H).sum())
        return cls(H, width, bound)

    def sup_abs(self) -> float:
        return 1.5 * float(np.abs(self.H).sum())

    def eta(self, t, r):
        return np.exp(-(r / self.width) ** 2) * (1 + 0.5 * math.sin(t))

    def eta_r(self, t, r):
        return -2 * r / self.width**2 * self.eta(t, r)

    def eta_t(self, t, r):
        return np.exp(-(r / self.width) ** 2) * 0.5 * math.cos(t)


@dataclass(frozen=True)
class MultiplierSpec:
    """f(r) = (r/(1+r))^{1/2} ("sqrt") or f(r) = r/(r+rho) with rho >= 1 ("rho")."""

    kind: str = "sqrt"
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sqrt", "rho"):
            raise ValueError("multiplier kind must be 'sqrt' or 'rho'")
        if self.kind == "rho" and self.rho < 1:
            raise ValueError("rho must be at least 1")

    @property
    def alpha(self) -> float:
        """Power of r that the integrands carry at the origin."""
        return 1.5 if self.kind == "sqrt" else 2.0

    def f(self, r):
        if self.kind == "sqrt":
            return np.sqrt(r / (1 + r))
        return r / (r + self.rho)

    def fp(self, r):
        if self.kind == "sqrt":
            return 0.5 / (np.sqrt(r) * (1 + r) ** 1.5)
        return self.rho / (r + self.rho) ** 2

    def lap_f_over_r(self, r):
        """Laplacian in R^3 of f(r)/r."""
        if self.kind == "sqrt":
            s = r + r * r
            g1 = -0.5 * s**-1.5 * (1 + 2 * r)
            g2 = 0.75 * s**-2.5 * (1 + 2 * r) ** 2 - s**-1.5
            return g2 + 2 * g1 / r
        return -2 * self.rho / (r * (r + self.rho) ** 3)


# --------------------------------------------------- point evaluation

def _lagrange_at(values: np.ndarray, grid: RadialGrid, r0: float) -> np.ndarray:
    """Sixth-order interpolation of node samples (last axis) at r0."""
    j = int(np.clip(np.searchsorted(grid.r, r0) - 3, 0, grid.n - 6))
    xs = grid.r[j:j + 6]
    w = np.ones(6)
    for a in range(6):
        for b in range(6):
            if a != b:
                w[a] *= (r0 - xs[b]) / (xs[a] - xs[b])
    return values[..., j:j + 6] @ w


def _sphere_points(radii: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return (radii[:, None, None] * omega[None, :, :]).reshape(-1, 3)


def _field_at(tower: np.ndarray, radii: np.ndarray, omega: np.ndarray, p: int) -> np.ndarray:
    """d^p (x F) at r omega, shape (n_r, n_omega, i_1..i_p, component)."""
    nq = omega.shape[0]
    x = _sphere_points(radii, omega)
    tw = np.repeat(tower, nq, axis=1)
    out = np.moveaxis(vector_derivative(tw, x, p), 1, -1)
    return out.reshape((len(radii), nq) + out.shape[1:])


# ------------------------------------------- multiplier identity (A.1)

def _axis_multiplier_terms(s: StateVector, m: MultiplierSpec, box_chi: np.ndarray):
    """On-axis densities (e, flux density p.omega, q, <Mu, box u>) per node."""
    grid = s.grid
    r = grid.r
    tp = radial_tower(s.psi.values, grid, 1)
    psi, f1 = tp[0], tp[1]
    v = s.psidot.values
    dr_u = psi + r * r * f1           # d_r u^1 on the axis
    mu_vec = dr_u + psi               # d_r u + u / r
    grad_sq = 3 * psi**2 + 2 * r * r * psi * f1 + r**4 * f1**2
    ang_sq = grad_sq - dr_u**2
    ut_sq = (r * v) ** 2
    u_sq = (r * psi) ** 2
    f, fp = m.f(r), m.fp(r)
    e = f * (r * v) * mu_vec
    p = 0.5 * f * (grad_sq - ut_sq) - f * mu_vec * dr_u + (r * fp - f) / (2 * r * r) * u_sq
    q = 0.5 * fp * ut_sq + 0.5 * fp * dr_u**2 + (f / r - 0.5 * fp) * ang_sq - 0.5 * m.lap_f_over_r(r) * u_sq
    lhs = f * mu_vec * (r * box_chi)
    return e, p, q, lhs


def multiplier_identity_residual(states, m: MultiplierSpec, tensor: NullFormTensor | None = None,
                                 r_cut: float | None = None) -> float:
    """Normalised residual of int <Mu, box u> = d/dt int e + flux(p) + int q over |x| <= R'.

    ``states`` are uniformly spaced in time; box u = x chi from the equation
    (zero for ``tensor=None``).  R' defaults to 0.9 R.  Returns the maximum
    over interior samples of |LHS - RHS| / (|LHS| + |de/dt| + |flux| + |int q|).
    """
    states = list(states)
    if len(states) < 5:
        raise ValueError("multiplier identity needs at least 5 samples")
    grid = states[0].grid
    rc = r_cut if r_cut is not None else 0.9 * grid.R
    times = np.array([s.t for s in states])
    dt = float(np.mean(np.diff(times)))
    alpha = m.alpha
    rows = []
    for s in states:
        chi = np.zeros(grid.n) if tensor is None else acceleration(s, nonlinearity_for(tensor))[1]
        e, p, q, lhs = _axis_multiplier_terms(s, m, chi)
        sph = 4 * np.pi * grid.r**2
        rows.append((
            integrate(sph * e, grid, alpha, r_max=rc),
            4 * np.pi * rc**2 * _lagrange_at(p, grid, rc),
            integrate(sph * q, grid, alpha, r_max=rc),
            integrate(sph * lhs, grid, alpha, r_max=rc),
        ))
    rows = np.array(rows)
    E = rows[:, 0]
    dE = (E[:-4] - 8 * E[1:-3] + 8 * E[3:-1] - E[4:]) / (12 * dt)
    flux, qi, lhs = rows[2:-2, 1], rows[2:-2, 2], rows[2:-2, 3]
    scale = np.abs(lhs) + np.abs(dE) + np.abs(flux) + np.abs(qi)
    res = np.abs(lhs - (dE + flux + qi))
    if np.all(scale == 0):
        return 0.0
    return float(np.max(res / np.where(scale > 0, scale, 1.0)))


# ------------------------------------------ perturbed identity (A.5)

def _perturbed_terms(s: StateVector, h: PerturbationTensor, m: MultiplierSpec, radii: np.ndarray,
                     tower: np.ndarray):
    """Sphere averages of <Mu, Hu>, q~ and p~.omega at the given radii."""
    omega, wq = sphere_rule()
    u = _field_at(tower, radii, omega, 0)
    du = _field_at(tower, radii, omega, 1)        # [..., m, j] = d_m u^j
    ddu = _field_at(tower, radii, omega, 2)       # [..., l, m, j]
    r = radii[:, None]
    t = s.t
    eta = h.eta(t, r)
    eta_r = h.eta_r(t, r)
    H = h.H
    om = omega[None, :, :]
    f, fp = m.f(r), m.fp(r)
    # (Hu)^i = omega_l eta' H_ijlm d_m u^j + eta H_ijlm d_l d_m u^j
    Hu = (eta_r[..., None] * np.einsum("ijlm,rql,rqmj->rqi", H, np.broadcast_to(om, du.shape[:2] + (3,)), du)
          + eta[..., None] * np.einsum("ijlm,rqlmj->rqi", H, ddu))
    dr_u = np.einsum("qk,rqki->rqi", omega, du)
    Mu = f[..., None] * (dr_u + u / r[..., None])
    lhs = (Mu * Hu).sum(axis=-1)
    hdd = np.einsum("ijlm,rqli,rqmj->rq", H, du, du)          # H d_l u^i d_m u^j
    hww = np.einsum("ijlm,qk,ql,rqki,rqmj->rq", H, omega, omega, du, du)
    hwu = np.einsum("ijlm,ql,rqi,rqmj->rq", H, omega, u, du)
    g = (r * fp - f)
    q = (-g / r * eta * hww + 0.5 * fp * eta * hdd + 0.5 * f * eta_r * hdd - f / r * eta * hdd
         - g / r**2 * eta * hwu)
    # p~ . omega
    hk = np.einsum("ijlm,qk,ql,rqki,rqmj->rq", H, omega, omega, du, du)
    pw = f * eta * hk - 0.5 * f * eta * hdd + f / r * eta * hwu
    avg = lambda a: a @ wq  # noqa: E731
    return avg(lhs), avg(q), avg(pw)


def perturbed_multiplier_residual(s: StateVector, h: PerturbationTensor, m: MultiplierSpec,
                                  r_cut: float | None = None) -> float:
    """Normalised residual of int <Mu, Hu> = flux(p~) + int q~ over |x| <= R'."""
    grid = s.grid
    rc = r_cut if r_cut is not None else 0.9 * grid.R
    tower = radial_tower(s.psi.values, grid, 2)
    lhs, q, _ = _perturbed_terms(s, h, m, grid.r, tower)
    tower_c = _lagrange_at(tower, grid, rc)[:, None]
    _, _, pw = _perturbed_terms(s, h, m, np.array([rc]), tower_c)
    sph = 4 * np.pi * grid.r**2
    L = integrate(sph * lhs, grid, m.alpha, r_max=rc)
    Q = integrate(sph * q, grid, m.alpha, r_max=rc)
    F = 4 * np.pi * rc**2 * float(pw[0])
    scale = abs(L) + abs(Q) + abs(F)
    return 0.0 if scale == 0 else abs(L - Q - F) / scale


# ------------------------------------------------ perturbed KSS estimate

def _manufactured(kind: str):
    """psi(t, r) = exp(-r^2) m(t) and its box-profile; box u = x b(t, r)."""
    mods = {
        "cos": (np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)),
        "decay": (lambda t: 1 / (1 + t * t), lambda t: -2 * t / (1 + t * t) ** 2,
                  lambda t: (6 * t * t - 2) / (1 + t * t) ** 3),
        "grow": (lambda t: np.tanh(t) + 1.0, lambda t: 1 / np.cosh(t) ** 2,
                 lambda t: -2 * np.tanh(t) / np.cosh(t) ** 2),
    }
    if kind not in mods:
        raise ValueError(f"unknown manufactured member {kind!r}")
    m0, m1, m2 = mods[kind]

    def psi(t, r):
        return np.exp(-r * r) * m0(t)

    def psit(t, r):
        return np.exp(-r * r) * m1(t)

    def box(t, r):
        lap = (4 * r * r - 10) * np.exp(-r * r)   # psi'' + 4 psi'/r for exp(-r^2)
        return np.exp(-r * r) * m2(t) - lap * m0(t)

    return psi, psit, box


def kss_inequality_check(member: str, h: PerturbationTensor, t_final: float,
                         grid: RadialGrid | None = None, n_time: int = 81) -> tuple[float, float]:
    """(LHS, RHS) of the perturbed local-energy estimate with C = 1.

    u = x exp(-r^2) m(t) with box u in closed form; box_h u = box u + Hu.
    Space integrals use the sphere rule where the integrand is not radial,
    time integrals use Simpson on ``n_time`` samples.
    """
    grid = grid or RadialGrid(8.0, 320)
    psi_fn, psit_fn, box_fn = _manufactured(member)
    omega, wq = sphere_rule()
    r = grid.r
    sph = 4 * np.pi * r * r
    br = np.sqrt(1 + r * r)
    times = np.linspace(0.0, t_final, n_time)
    kss, local, src, pert = [], [], [], []
    energy0 = 0.0
    hsum = float(np.abs(h.H).sum())
    for t in times:
        tp = radial_tower(psi_fn(t, r), grid, 2)
        tv = radial_tower(psit_fn(t, r), grid, 1)
        u = _field_at(tp, r, omega, 0)
        du = _field_at(tp, r, omega, 1)
        ddu = _field_at(tp, r, omega, 2)
        ut = _field_at(tv, r, omega, 0)
        d_sq = ((ut * ut).sum(axis=-1) + (du * du).sum(axis=(-1, -2))) @ wq
        u_sq = (u * u).sum(axis=-1) @ wq
        eta, eta_r = h.eta(t, r)[:, None], h.eta_r(t, r)[:, None]
        om = np.broadcast_to(omega[None], du.shape[:2] + (3,))
        Hu = (eta_r[..., None] * np.einsum("ijlm,rql,rqmj->rqi", h.H, om, du)
              + eta[..., None] * np.einsum("ijlm,rqlmj->rqi", h.H, ddu))
        box = box_fn(t, r)[:, None, None] * _sphere_points(r, omega).reshape(grid.n, -1, 3)
        boxh = np.sqrt(((box + Hu) ** 2).sum(axis=-1))
        grad_pt = np.sqrt((du * du).sum(axis=(-1, -2)))
        u_pt = np.sqrt((u * u).sum(axis=-1))
        weight = br**-0.5 * r**-0.5
        s_src = ((grad_pt + weight[:, None] * u_pt) * boxh) @ wq
        dh = hsum * np.sqrt(h.eta_t(t, r) ** 2 + h.eta_r(t, r) ** 2)
        habs = 1.5 * hsum * np.abs(h.eta(t, r))
        s_pert = ((dh + weight * habs)[:, None] * grad_pt * (grad_pt + u_pt / r[:, None])) @ wq
        kss.append(integrate(sph * (br**-0.5 * r**-0.5 * d_sq), grid, 1.5)
                   + integrate(sph * (br**-0.5 * r**-2.5 * u_sq), grid, -0.5))
        local.append(integrate(sph * r**-0.5 * d_sq, grid, 1.5, r_max=1.0)
                     + integrate(sph * r**-2.5 * u_sq, grid, -0.5, r_max=1.0))
        src.append(integrate(sph * s_src, grid, 2.0))
        pert.append(integrate(sph * s_pert, grid, 2.0))
        if t == 0.0:
            energy0 = integrate(sph * d_sq, grid, 2.0)
    lhs = simpson(kss, x=times) / math.log(2 + t_final) + simpson(local, x=times)
    rhs = energy0 + simpson(src, x=times) + simpson(pert, x=times)
    return float(lhs), float(rhs)


# ---------------------------------------------------------- rho constants

def rho_constant(rho: float, t_final: float = 256.0, h: float = 0.1, dt: float = 0.25) -> float:
    """Left side of the rho-multiplier space-time estimate divided by ||du(0)||^2.

    Evaluated on the exact solution u = grad phi of the linear equation with
    h = 0, where the right side reduces to C ||du(0)||^2.
    """
    R = t_final + 12.0
    grid = RadialGrid(R, int(round(R / h)))
    r = grid.r
    sph = 4 * np.pi * r * r
    times = np.arange(0.0, t_final + 0.5 * dt, dt)
    vals = []
    energy0 = None
    for t in times:
        s = exact_linear_state(grid, float(t))
        tp = radial_tower(s.psi.values, grid, 1)
        psi, f1 = tp
        dr_u = psi + r * r * f1
        grad_sq = 3 * psi**2 + 2 * r * r * psi * f1 + r**4 * f1**2
        ang_sq = grad_sq - dr_u**2
        ut_sq = (r * s.psidot.values) ** 2
        u_sq = (r * psi) ** 2
        dens = (rho / (r + rho) ** 2 * (ut_sq + dr_u**2) + (2 * r + rho) / (r + rho) ** 2 * ang_sq
                + rho / (r * (r + rho) ** 3) * u_sq)
        vals.append(integrate(sph * dens, grid, 2.0))
        if energy0 is None:
            energy0 = integrate(sph * (ut_sq + grad_sq), grid, 2.0)
    return float(simpson(vals, x=times) / energy0)


# --------------------------------------------------------------- report

@dataclass
class VerificationRow:
    check: str
    member: str
    value: float
    grid: str
    passed: bool
    note: str = ""

    def __post_init__(self):
        self.value = float(self.value)
        self.passed = bool(self.passed)


def format_report(rows) -> str:
    header = f"{'check':<28} {'member':<22} {'value':>14} {'grid':<16} verdict"
    lines = [header, "-" * len(header)]
    for row in rows:
        verdict = "PASS" if row.passed else "FAIL"
        lines.append(f"{row.check:<28} {row.member:<22} {row.value:>14.6g} {row.grid:<16} {verdict}"
                     + (f"  {row.note}" if row.note else ""))
    return "\n".join(lines)
