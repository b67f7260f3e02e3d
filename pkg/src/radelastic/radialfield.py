"""Radial profiles on a cell-centred grid and their lift to 3-D vector fields.

A radially symmetric displacement is u(t, x) = x psi(t, r).  Profiles are
even in r; the grid never places a node at the origin, and derivative
stencils reach across it through the even reflection psi(-r) = psi(r).

Cartesian derivatives of x psi(r) are assembled from the tower
F_m = (r^-1 d/dr)^m psi, each member of which is again even and smooth, so no
cancellation-prone divisions by powers of r are needed.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .nullform import NullFormTensor, VectorJet2

__all__ = [
    "RadialGrid",
    "RadialProfile",
    "StateVector",
    "WeightSpec",
    "differentiate",
    "radial_tower",
    "vector_derivative",
    "lift_to_jet",
    "on_axis",
    "OnAxisNonlinearity",
    "acceleration",
    "apply_scaling",
    "integrate",
    "weighted_norm_sq",
    "sphere_rule",
    "save_profile",
    "load_profile",
]


@dataclass(frozen=True)
class RadialGrid:
    R: float
    n: int

    def __post_init__(self):
        if self.R <= 0 or self.n < 1:
            raise ValueError("grid needs R > 0 and n >= 1")

    @property
    def h(self) -> float:
        return self.R / self.n

    @functools.cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h


@dataclass(frozen=True)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"profile needs {self.grid.n} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "RadialProfile":
        return cls(grid, fn(grid.r))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class StateVector:
    psi: RadialProfile
    psidot: RadialProfile
    t: float = 0.0

    def __post_init__(self):
        if self.psi.grid != self.psidot.grid:
            raise ValueError("psi and psidot must share a grid")

    @property
    def grid(self) -> RadialGrid:
        return self.psi.grid

    def edge_amplitude(self, fraction: float = 0.05) -> float:
        """Largest |psi|, |psidot| on the outermost cells."""
        k = max(1, int(math.ceil(fraction * self.grid.n)))
        return float(max(np.abs(self.psi.values[-k:]).max(), np.abs(self.psidot.values[-k:]).max()))


# --------------------------------------------------------------------------
# finite differences

def _fd_weights(offsets, order: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float)
    vander = np.vander(offsets, len(offsets), increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


_CENTRED = {1: _fd_weights(range(-2, 3), 1), 2: _fd_weights(range(-2, 3), 2)}
# one-sided closures for the last two nodes, fourth order
_EDGE = {
    1: [(list(range(-3, 2)), _fd_weights(range(-3, 2), 1)),
        (list(range(-4, 1)), _fd_weights(range(-4, 1), 1))],
    2: [(list(range(-4, 2)), _fd_weights(range(-4, 2), 2)),
        (list(range(-5, 1)), _fd_weights(range(-5, 1), 2))],
}


def _diff_values(v: np.ndarray, h: float, order: int) -> np.ndarray:
    n = v.shape[-1]
    padded = np.concatenate([v[..., 1::-1], v], axis=-1)  # ghosts psi_{-2}, psi_{-1}
    w = _CENTRED[order]
    out = np.empty_like(v)
    m = n - 2
    out[..., :m] = sum(w[k] * padded[..., k:k + m] for k in range(5))
    for node, (offs, wts) in zip((n - 2, n - 1), _EDGE[order]):
        out[..., node] = sum(wt * v[..., node + o] for o, wt in zip(offs, wts))
    return out / h**order


def differentiate(p: RadialProfile, order: int = 1) -> RadialProfile:
    """Fourth-order derivative of an even profile."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if p.grid.n < 8:
        raise ValueError("differentiation needs at least 8 cells")
    return RadialProfile(p.grid, _diff_values(p.values, p.grid.h, order))


def radial_tower(values: np.ndarray, grid: RadialGrid, depth: int) -> np.ndarray:
    """Stack of F_m = (r^-1 d/dr)^m f for m = 0..depth, shape (depth + 1, n)."""
    if grid.n < 8:
        raise ValueError("differentiation needs at least 8 cells")
    out = [np.asarray(values, dtype=float)]
    for _ in range(depth):
        out.append(_diff_values(out[-1], grid.h, 1) / grid.r)
    return np.stack(out)


# --------------------------------------------------------------------------
# Cartesian derivatives of x F(|x|)

@functools.lru_cache(maxsize=None)
def _matchings(p: int):
    """All sets of disjoint pairs drawn from range(p)."""
    out = [()]
    items = list(range(p))
    for k in range(1, p // 2 + 1):
        for combo in itertools.combinations(itertools.combinations(items, 2), k):
            flat = [i for pair in combo for i in pair]
            if len(set(flat)) == len(flat):
                out.append(combo)
    return out


def _scalar_derivative(tower: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """d^p F(|x|) at points x (npts, 3), shape (npts, 3, ..., 3).

    Sum over matchings of the p slots: F_{p - pairs} times delta's on paired
    slots and x's on unpaired ones.
    """
    npts = x.shape[0]
    if p == 0:
        return np.array(tower[0], dtype=float)
    letters = "abcdefgh"[:p]
    eye = np.eye(3)
    out = np.zeros((npts,) + (3,) * p)
    for match in _matchings(p):
        paired = {i for pair in match for i in pair}
        subs = [letters[a] + letters[b] for a, b in match]
        operands = [eye] * len(match)
        for s in range(p):
            if s not in paired:
                subs.append("z" + letters[s])
                operands.append(x)
        coef = tower[p - len(match)].reshape((-1,) + (1,) * p)
        if len(paired) == p:
            term = np.einsum(",".join(subs) + "->" + letters, *operands)[None]
        else:
            term = np.einsum(",".join(subs) + "->z" + letters, *operands)
        out += coef * term
    return out


def vector_derivative(tower: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """d^p (x_k F) with layout (npts, k, i_1, ..., i_p)."""
    x = np.asarray(x, dtype=float)
    npts = x.shape[0]
    out = x.reshape((npts, 3) + (1,) * p) * _scalar_derivative(tower, x, p)[:, None]
    if p == 0:
        return out
    lower = _scalar_derivative(tower, x, p - 1)
    eye = np.eye(3)
    for q in range(p):
        # delta_{k i_q} times d^{p-1} F over the remaining slots
        spread = np.expand_dims(lower.reshape((npts,) + (3,) * (p - 1)), axis=1 + q)
        delta = eye.reshape([1, 3] + [3 if s == q else 1 for s in range(p)])
        out = out + delta * spread[:, None]
    return out


def on_axis(grid: RadialGrid) -> np.ndarray:
    x = np.zeros((grid.n, 3))
    x[:, 0] = grid.r
    return x


def lift_to_jet(s: StateVector, j: int, psiddot: RadialProfile) -> VectorJet2:
    """Space-time jet of u = x psi at the on-axis point r_j e_1."""
    grid = s.grid
    if not 0 <= j < grid.n:
        raise IndexError(f"node {j} outside grid of {grid.n} cells")
    x = on_axis(grid)[j:j + 1]
    t0 = radial_tower(s.psi.values, grid, 2)[:, j:j + 1]
    t1 = radial_tower(s.psidot.values, grid, 1)[:, j:j + 1]
    t2 = psiddot.values[j:j + 1][None]
    u = vector_derivative(t0, x, 0)[0]
    du = np.zeros((4, 3))
    du[0] = vector_derivative(t1, x, 0)[0]
    du[1:] = vector_derivative(t0, x, 1)[0].T
    ddu = np.zeros((4, 4, 3))
    ddu[0, 0] = vector_derivative(t2, x, 0)[0]
    grad_t = vector_derivative(t1, x, 1)[0].T
    ddu[0, 1:] = grad_t
    ddu[1:, 0] = grad_t
    ddu[1:, 1:] = np.moveaxis(vector_derivative(t0, x, 2)[0], 0, -1)
    return VectorJet2(u, du, ddu)


def apply_scaling(s: StateVector, psiddot: RadialProfile) -> tuple[RadialProfile, RadialProfile]:
    """Profiles (chi, chidot) with S u = x chi and d_t S u = x chidot."""
    r = s.grid.r
    dpsi = differentiate(s.psi).values
    dpsidot = differentiate(s.psidot).values
    chi = s.t * s.psidot.values + s.psi.values + r * dpsi
    chidot = 2 * s.psidot.values + s.t * psiddot.values + r * dpsidot
    return RadialProfile(s.grid, chi), RadialProfile(s.grid, chidot)


class OnAxisNonlinearity:
    """N(u, v)^1 / x_1 at x = r e_1 for radial fields u = x f, v = x g.

    On the axis the jets of x f(|x|) span two gradient patterns and two
    Hessian patterns, so the contraction with g reduces to two 2x2 matrices
    computed once per tensor.  Inputs are towers (F_0, F_1, F_2).
    """

    def __init__(self, tensor: NullFormTensor):
        g = tensor.g
        e1 = np.eye(3)[0]
        grads = [np.eye(3), np.outer(e1, e1)]
        eye = np.eye(3)
        hesses = [np.einsum("l,m,j->lmj", e1, e1, e1),
                  np.einsum("lm,j->lmj", eye, e1) + np.einsum("jl,m->lmj", eye, e1)
                  + np.einsum("jm,l->lmj", eye, e1)]
        self.k_hess_grad = np.array([[np.einsum("ijklmn,lmj,nk->i", g, H, G)[0] for G in grads]
                                     for H in hesses])
        self.k_grad_hess = np.array([[np.einsum("ijklmn,mj,lnk->i", g, G, H)[0] for H in hesses]
                                     for G in grads])
        self.is_zero = bool(tensor.is_zero)

    @staticmethod
    def _patterns(tower: np.ndarray, r: np.ndarray):
        c = (tower[0], r * r * tower[1])
        e = (r * r * tower[2], tower[1])  # Hessian coefficients divided by r
        return c, e

    def __call__(self, tower_u: np.ndarray, tower_v: np.ndarray, r: np.ndarray) -> np.ndarray:
        if self.is_zero:
            return np.zeros_like(r)
        cu, eu = self._patterns(tower_u, r)
        cv, ev = self._patterns(tower_v, r)
        out = np.zeros_like(r)
        for b in range(2):
            for a in range(2):
                out += self.k_hess_grad[b, a] * eu[b] * cv[a]
                out += self.k_grad_hess[a, b] * cu[a] * ev[b]
        return out


def acceleration(s: StateVector, nonlinearity: OnAxisNonlinearity) -> tuple[np.ndarray, np.ndarray]:
    """(psi_tt, chi) where psi_tt = psi'' + 4 psi'/r + chi."""
    grid = s.grid
    psi = s.psi.values
    tower = radial_tower(psi, grid, 2)
    chi = nonlinearity(tower, tower, grid.r)
    return _diff_values(psi, grid.h, 2) + 4.0 * tower[1] + chi, chi


# --------------------------------------------------------------------------
# weights and quadrature

@dataclass(frozen=True)
class WeightSpec:
    """w(r, t) = <r>^bracket_r  r^r_power  <t-r>^bracket_tr  exp(-ghost q(t-r)).

    ``r_max`` restricts the support to r <= r_max.
    """

    bracket_r: float = 0.0
    r_power: float = 0.0
    bracket_tr: float = 0.0
    ghost: float = 0.0
    r_max: float | None = None

    def __mul__(self, other: "WeightSpec") -> "WeightSpec":
        caps = [c for c in (self.r_max, other.r_max) if c is not None]
        return WeightSpec(self.bracket_r + other.bracket_r, self.r_power + other.r_power,
                          self.bracket_tr + other.bracket_tr, self.ghost + other.ghost,
                          min(caps) if caps else None)

    def smooth_part(self, r, t: float = 0.0) -> np.ndarray:
        """Everything except the pure power r^r_power."""
        r = np.asarray(r, dtype=float)
        sigma = t - r
        out = (1 + r * r) ** (self.bracket_r / 2) * (1 + sigma * sigma) ** (self.bracket_tr / 2)
        if self.ghost:
            out = out * np.exp(-self.ghost * np.arctan(sigma))
        return out

    def __call__(self, r, t: float = 0.0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.smooth_part(r, t) * r**self.r_power


@functools.lru_cache(maxsize=256)
def _zeta_half(s: float) -> float:
    return float(mpmath.zeta(s, 0.5))


_FIT = 6


def _left_correction(phi_head: np.ndarray, r_head: np.ndarray, h: float, alpha: float) -> float:
    """Generalised Euler-Maclaurin correction at r = 0 for r^alpha phi(r)."""
    coef = np.polynomial.polynomial.polyfit(r_head, phi_head, len(r_head) - 1)
    total = 0.0
    for k, c in enumerate(coef):
        e = alpha + k + 1
        if e > 6.5:
            break
        s = -alpha - k
        if abs(s - round(s)) < 1e-12:
            s = float(round(s))
        if s == 0 or (s < 0 and s.is_integer() and int(s) % 2 == 0):
            continue  # zeta(-2m, 1/2) = 0 and s = 0 is absorbed in the sum
        total += _zeta_half(s) * h**e * c
    return total


def _right_correction(g_tail: np.ndarray, h: float) -> float:
    """Euler-Maclaurin midpoint correction at the right end from the last nodes."""
    m = len(g_tail)
    offs = np.arange(m) - (m - 0.5)  # node positions relative to the face, in cells
    d1 = _fd_weights(offs, 1) @ g_tail / h
    d3 = _fd_weights(offs, 3) @ g_tail / h**3
    return (h * h / 24.0) * d1 - (7.0 * h**4 / 5760.0) * d3


def _partial_cell(g: np.ndarray, r: np.ndarray, face: int, r_max: float) -> float:
    """Integral from the face at index ``face`` to r_max of a local interpolant."""
    lo = min(max(face - 3, 0), len(g) - 6)
    xs = r[lo:lo + 6]
    coef = np.polynomial.polynomial.polyfit(xs - xs[0], g[lo:lo + 6], 5)
    anti = np.polynomial.polynomial.polyint(coef)
    a = face * (r[1] - r[0]) - xs[0]
    b = r_max - xs[0]
    return float(np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti))


def integrate(g: np.ndarray, grid: RadialGrid, alpha: float = 2.0,
              r_max: float | None = None) -> float:
    """Integral over [0, R] (or [0, r_max]) of samples g(r_j).

    The integrand is assumed to behave as r^alpha times a smooth function at
    the origin.  Midpoint sum plus generalised Euler-Maclaurin corrections at
    both ends; a cut inside a cell adds the integral of a local quintic.
    """
    g = np.asarray(g, dtype=float)
    h = grid.h
    n = grid.n
    extra = 0.0
    cut = r_max is not None and r_max < grid.R
    if cut:
        if r_max <= 0:
            return 0.0
        cells = r_max / h
        n = int(math.floor(cells + 1e-9))
        if cells - n > 1e-9 * max(1.0, cells):
            extra = _partial_cell(g, grid.r, n, r_max)
        g = g[..., :n]
    if n < _FIT + 2:
        # too few cells for the end corrections; plain midpoint
        return float(h * g.sum()) + extra
    r = grid.r[:n]
    total = h * g.sum(axis=-1)
    phi = g[:_FIT] / r[:_FIT] ** alpha
    total = total - _left_correction(phi, r[:_FIT], h, alpha)
    if cut:
        total = total + _right_correction(g[n - 6:n], h)
    return float(total) + extra


def weighted_norm_sq(values, weight: WeightSpec, t: float = 0.0, grid: RadialGrid | None = None,
                     squared: bool = False) -> float:
    """Integral over R^3 of w(r, t)^2 f(r)^2 for a radial pointwise quantity f.

    ``values`` is a RadialProfile or raw node samples (then ``grid`` is
    required).  With ``squared=True`` the samples already hold f^2.
    """
    if isinstance(values, RadialProfile):
        grid = values.grid
        values = values.values
    if grid is None:
        raise ValueError("grid required for raw samples")
    f2 = np.asarray(values, dtype=float)
    if not squared:
        f2 = f2 * f2
    r = grid.r
    integrand = 4 * np.pi * r**2 * weight(r, t) ** 2 * f2
    return integrate(integrand, grid, alpha=2 + 2 * weight.r_power, r_max=weight.r_max)


@functools.lru_cache(maxsize=8)
def sphere_rule(n_theta: int = 8, n_phi: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss rule on S^2; weights average to one.

    Exact for polynomials in omega of degree < min(2 n_theta, n_phi).
    """
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - zz**2)
    pts = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    w = (np.repeat(wz, n_phi) / 2.0 / n_phi)
    return pts, w


# --------------------------------------------------------------------------
# text IO

def save_profile(path, p: RadialProfile) -> None:
    np.savetxt(Path(path), np.column_stack([p.grid.r, p.values]), fmt="%.17g",
               header=f"R={p.grid.R!r} n={p.grid.n}")


def load_profile(path) -> RadialProfile:
    text = Path(path).read_text()
    header = text.splitlines()[0].lstrip("# ").split()
    meta = dict(item.split("=") for item in header)
    grid = RadialGrid(float(meta["R"]), int(meta["n"]))
    data = np.loadtxt(Path(path))
    return RadialProfile(grid, data[:, 1])
