"""Quadratic null-form structure of the radially reduced elastic wave equation.

The nonlinearity is written in divergence form

    N(u, v)^i = d_l ( g^{ijk}_{lmn} d_m u^j d_n v^k )

with a constant rank-6 coefficient tensor ``g`` indexed ``[i, j, k, l, m, n]``
over spatial directions only.  Jets carry derivatives with the derivative
slot first and the vector component last, so ``du[m, j] = d_m u^j``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CoefficientSet",
    "NullFormTensor",
    "VectorJet2",
    "build_tensor",
    "null_contraction",
    "evaluate_N",
    "evaluate_trilinear",
    "radial_angular_terms",
    "null_estimate_ratio",
    "stored_energy",
    "fibonacci_sphere",
    "max_sphere_contraction",
]

_PAIR_PERMS = list(itertools.permutations(range(3)))
LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in _PAIR_PERMS:
    LEVI_CIVITA[_a, _b, _c] = np.linalg.det(np.eye(3)[[_a, _b, _c]])


@dataclass(frozen=True)
class CoefficientSet:
    """Material constants of the quadratic and cubic stored energy."""

    c1: float = 1.0
    c2: float = 0.5
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0
    d4: float = 0.0
    d5: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.c2 < self.c1:
            raise ValueError(f"wave speeds must satisfy 0 < c2 < c1, got c1={self.c1}, c2={self.c2}")

    @property
    def satisfies_null_condition(self) -> bool:
        return self.d1 == 0.0


@dataclass(frozen=True)
class NullFormTensor:
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (3,) * 6:
            raise ValueError(f"tensor must have shape (3,)*6, got {g.shape}")
        object.__setattr__(self, "g", g)

    @classmethod
    def zero(cls) -> "NullFormTensor":
        return cls(np.zeros((3,) * 6))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.g)

    def symmetry_defect(self) -> float:
        """Largest violation of g^{ijk}_{lmn} = g^{jik}_{mln} = g^{kji}_{nml}."""
        g = self.g
        swap12 = g.transpose(1, 0, 2, 4, 3, 5)
        swap13 = g.transpose(2, 1, 0, 5, 4, 3)
        return float(max(np.abs(g - swap12).max(), np.abs(g - swap13).max()))

    def to_text(self) -> str:
        """Row-major flat block of 729 entries, one per line."""
        return "\n".join(repr(float(v)) for v in self.g.ravel()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NullFormTensor":
        values = [float(tok) for tok in text.split()]
        if len(values) != 729:
            raise ValueError(f"expected 729 entries, got {len(values)}")
        return cls(np.array(values).reshape((3,) * 6))


@dataclass(frozen=True)
class VectorJet2:
    """Second-order space-time jet of a 3-vector field at one point.

    ``du`` has shape (..., 4, 3) with slot 0 the time derivative; ``ddu`` has
    shape (..., 4, 4, 3).  Leading batch axes are allowed.
    """

    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        """Spatial gradient, ``grad[..., m, j] = d_m u^j``."""
        return self.du[..., 1:, :]

    @property
    def hess(self) -> np.ndarray:
        return self.ddu[..., 1:, 1:, :]

    def symmetry_defect(self) -> float:
        return float(np.abs(self.ddu - np.swapaxes(self.ddu, -2, -3)).max(initial=0.0))


def _symmetrize_pairs(g: np.ndarray) -> np.ndarray:
    # sorting the orbit before summing makes every member add the same
    # sequence of numbers, so the result is symmetric bit for bit
    copies = np.stack([g.transpose(p[0], p[1], p[2], p[0] + 3, p[1] + 3, p[2] + 3)
                       for p in _PAIR_PERMS])
    return np.sort(copies, axis=0).sum(axis=0) / len(_PAIR_PERMS)


def _divergence_form_Q(a: float, b: float) -> np.ndarray:
    """Divergence-form coefficients of Q(u, grad u) before symmetrization.

    ``a`` multiplies the (2 d3 + d4) group, ``b`` the d5 group.  Each null form
    is rewritten with Q_ij(f, h) = d_i(f d_j h) - d_j(f d_i h).
    """
    d = np.eye(3)
    e = np.einsum
    g = np.zeros((3,) * 6)
    if a:
        # Q_ij(d_k u^k, u^j)
        g += a * e("li,jm,kn->ijklmn", d, d, d)
        g -= a * e("lk,jm,ni->ijklmn", d, d, d)
        # -Q_jk(d_i u^k, u^j)
        g -= a * e("lk,mi,nj->ijklmn", d, d, d)
        g += a * e("lj,mi,kn->ijklmn", d, d, d)
    if b:
        # Q_ij(d_j u^k, u^k)
        g += b * e("li,jk,mn->ijklmn", d, d, d)
        g -= b * e("jk,lm,ni->ijklmn", d, d, d)
        # 2 Q_jk(d_j u^i, u^k)
        g += 2 * b * e("ji,lm,kn->ijklmn", d, d, d)
        g -= 2 * b * e("ji,lk,mn->ijklmn", d, d, d)
        # -Q_jk(d_j u^k, u^i)
        g -= b * e("lm,ki,nj->ijklmn", d, d, d)
        g += b * e("lj,ki,mn->ijklmn", d, d, d)
    return g


def build_tensor(coeffs: CoefficientSet) -> NullFormTensor:
    """Pair-symmetric coefficient tensor of the radial nonlinearity.

    The d2 group vanishes identically on curl-free fields and is dropped.  The
    d1 group 3 d1 grad (div u)^2 is kept, since it is the only part violating
    the null condition.
    """
    g = _divergence_form_Q(2 * coeffs.d3 + coeffs.d4, coeffs.d5)
    if coeffs.d1:
        d = np.eye(3)
        g = g + 3 * coeffs.d1 * np.einsum("il,jm,kn->ijklmn", d, d, d)
    return NullFormTensor(_symmetrize_pairs(g))


def null_contraction(t: NullFormTensor, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    norms = np.linalg.norm(omega, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("omega must be a unit vector")
    return np.einsum("ijklmn,...l,...m,...n->...ijk", t.g, omega, omega, omega)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform deterministic points on the unit sphere."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    return pts / np.linalg.norm(pts, axis=-1, keepdims=True)


def max_sphere_contraction(t: NullFormTensor, n_points: int = 10_000) -> float:
    pts = fibonacci_sphere(n_points)
    worst = 0.0
    for chunk in np.array_split(pts, max(1, n_points // 2000)):
        worst = max(worst, float(np.abs(null_contraction(t, chunk)).max()))
    return worst


def evaluate_N(t: NullFormTensor, u: VectorJet2, v: VectorJet2) -> np.ndarray:
    """Pointwise N(u, v) with the outer derivative expanded by the product rule."""
    g = t.g
    return (np.einsum("ijklmn,...lmj,...nk->...i", g, u.hess, v.grad, optimize=True)
            + np.einsum("ijklmn,...mj,...lnk->...i", g, u.grad, v.hess, optimize=True))


def evaluate_trilinear(t: NullFormTensor, a, b, c) -> np.ndarray:
    """g^{ijk}_{lmn} d_l a^i d_m b^j d_n c^k for spatial gradients ``x[..., l, i]``."""
    return np.einsum("ijklmn,...li,...mj,...nk->...", t.g, a, b, c, optimize=True)


def _angular_split(grad: np.ndarray, x: np.ndarray):
    r = np.linalg.norm(x, axis=-1)
    omega = x / r[..., None]
    d_r = np.einsum("...l,...li->...i", omega, grad)
    # Omega_p u^i = (x ^ grad)_p u^i
    rot = np.einsum("pqs,...q,...si->...pi", LEVI_CIVITA, x, grad)
    # -((omega / r) ^ Omega)_l u^i
    angular = -np.einsum("lpq,...p,...qi->...li", LEVI_CIVITA, omega / r[..., None], rot)
    return omega, d_r, angular, rot


def radial_angular_terms(t: NullFormTensor, a, b, c, x) -> np.ndarray:
    """Split the trilinear form into three angular terms and the radial term.

    Returns an array whose last axis holds the four contributions; they sum to
    ``evaluate_trilinear(t, a, b, c)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) == 0.0):
        raise ValueError("decomposition is undefined at the origin")
    omega, ar, aa, _ = _angular_split(np.asarray(a, float), x)
    _, br, ba, _ = _angular_split(np.asarray(b, float), x)
    _, cr, ca, _ = _angular_split(np.asarray(c, float), x)
    a_rad = np.einsum("...l,...i->...li", omega, ar)
    b_rad = np.einsum("...l,...i->...li", omega, br)
    c_rad = np.einsum("...l,...i->...li", omega, cr)
    first = evaluate_trilinear(t, aa, b, c)
    second = evaluate_trilinear(t, a_rad, ba, c)
    third = evaluate_trilinear(t, a_rad, b_rad, ca)
    fourth = evaluate_trilinear(t, a_rad, b_rad, c_rad)
    return np.stack([first, second, third, fourth], axis=-1)


def null_estimate_ratio(t: NullFormTensor, a, b, c, x) -> np.ndarray:
    """|N~(a, b, c)| r / (|Oa||b||c| + |a||Ob||c| + |a||b||Oc|), O the rotation fields."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    norms, rots = [], []
    for grad in (a, b, c):
        grad = np.asarray(grad, float)
        rot = _angular_split(grad, x)[3]
        norms.append(np.linalg.norm(grad, axis=(-2, -1)))
        rots.append(np.linalg.norm(rot, axis=(-2, -1)))
    rhs = (rots[0] * norms[1] * norms[2] + norms[0] * rots[1] * norms[2]
           + norms[0] * norms[1] * rots[2])
    return np.abs(evaluate_trilinear(t, a, b, c)) * r / rhs


def _null_form_sum(gradu, f_idx, g_idx, i, j):
    """Q_ij(u^f, u^g) for component indices."""
    return gradu[i, f_idx] * gradu[j, g_idx] - gradu[j, f_idx] * gradu[i, g_idx]


def stored_energy(coeffs: CoefficientSet, gradu) -> float:
    """Quadratic plus cubic stored energy for ``gradu[k, j] = d_k u^j``."""
    G = np.asarray(gradu, dtype=float)
    div = np.trace(G)
    curl = np.einsum("pqs,qs->p", LEVI_CIVITA, G)
    l2 = 0.5 * coeffs.c2**2 * np.sum(G * G) + 0.5 * (coeffs.c1**2 - coeffs.c2**2) * div**2
    q3 = q4 = q5 = 0.0
    for i, j in itertools.product(range(3), repeat=2):
        q3 += _null_form_sum(G, i, j, i, j)
        for k in range(3):
            q4 += G[k, j] * _null_form_sum(G, i, k, i, j)
            q5 += G[k, j] * _null_form_sum(G, i, j, i, k)
    l3 = (coeffs.d1 * div**3 + coeffs.d2 * div * np.dot(curl, curl) + coeffs.d3 * div * q3
          + coeffs.d4 * q4 + coeffs.d5 * q5)
    return float(l2 + l3)
