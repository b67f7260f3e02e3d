"""Independent oracles: symbolic 3-D fields and brute-force quadrature.

Nothing here goes through the radial towers; u = x psi(|x|) is expanded in
Cartesian coordinates by sympy and integrated over balls with a
Gauss-Legendre sphere rule and adaptive radial quadrature.
"""
import functools
import itertools

import numpy as np
import sympy as sp
from scipy.integrate import quad

X = sp.symbols("x1:4", real=True)
RS = sp.Symbol("r", positive=True)
R_EXPR = sp.sqrt(sum(x * x for x in X))


def _sphere(n_theta=10, n_phi=20):
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - z * z)
    pts = np.stack([np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(),
                    np.repeat(z, n_phi)], axis=1)
    w = np.repeat(wz, n_phi) / (2 * n_phi)
    return pts, w


OMEGA, WQ = _sphere()


def grad(vec):
    return [[sp.diff(c, x) for c in vec] for x in X]  # [l][i] = d_l vec^i


def lap(vec):
    return [sum(sp.diff(c, x, 2) for x in X) for c in vec]


def multi_indices(order):
    return list(itertools.combinations_with_replacement(range(3), order))


class Field:
    """u = x psi0(|x|), u_t = x psi1(|x|) at time t, linear equation u_tt = Lap u."""

    def __init__(self, psi0, psi1=0, t=0.0):
        p0 = sp.sympify(psi0).subs(RS, R_EXPR)
        p1 = sp.sympify(psi1).subs(RS, R_EXPR)
        self.t = t
        self.u = [x * p0 for x in X]
        self.ut = [x * p1 for x in X]
        self.utt = lap(self.u)

    def d(self, vec, idx):
        out = vec
        for i in idx:
            out = [sp.diff(c, X[i]) for c in out]
        return out

    @functools.cached_property
    def plan(self):
        """[(Z^a u, d_t Z^a u)] for |a| <= 2, a_4 <= 1, a listed once per multi-index."""
        t = self.t
        su = [t * a + sum(x * sp.diff(c, x) for x in X) for a, c in zip(self.ut, self.u)]
        sut = [a + t * b + sum(x * sp.diff(c, x) for x in X)
               for a, b, c in zip(self.ut, self.utt, self.ut)]
        out = []
        for order in range(3):
            for idx in multi_indices(order):
                out.append((self.d(self.u, idx), self.d(self.ut, idx)))
        for order in range(2):
            for idx in multi_indices(order):
                out.append((self.d(su, idx), self.d(sut, idx)))
        return out


def lam(exprs):
    f = sp.lambdify(X, exprs, "numpy")

    def call(pts):
        vals = f(pts[:, 0], pts[:, 1], pts[:, 2])
        return np.array(np.broadcast_arrays(*[np.broadcast_to(v, pts.shape[:1]) for v in _flat(vals)]))

    return call


def _flat(v):
    if isinstance(v, (list, tuple)):
        for a in v:
            yield from _flat(a)
    else:
        yield v


def ball_integral(density, r_max, r_min=0.0, points=None):
    """int_{r_min<|x|<r_max} density(x) dx with density vectorised over points (N, 3)."""

    def shell(r):
        pts = r * OMEGA
        return 4 * np.pi * r * r * float(density(pts, r) @ WQ)

    val, _ = quad(shell, r_min, r_max, limit=400, epsabs=1e-15, epsrel=1e-13, points=points)
    return val


def bracket(x):
    return np.sqrt(1 + x * x)
