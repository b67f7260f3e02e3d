"""Energy functionals of radial solutions evaluated from the scalar profile.

Every functional is a sum over the commuting fields Z^a u with |a| <= 2 and
at most one scaling factor.  All fields are built on the axis x = r e_1 from
the towers (r^-1 d/dr)^m of psi and its companions; the angular integrals
are then exact because each summand is an invariant bilinear quantity of a
rotation-equivariant field.  The only non-invariant sum, over d_i d_j u with
i <= j, is averaged over the sphere in closed form:

    sum_{i<=j} B(Y_ij, Y_ij)  ->  0.7 sum_ab B(Y_ab, Y_ab) + 0.1 B(tr Y, tr Y).
"""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .nullform import NullFormTensor
from .radialfield import (
    OnAxisNonlinearity,
    RadialGrid,
    StateVector,
    WeightSpec,
    _diff_values,
    _fd_weights,
    acceleration,
    integrate,
    on_axis,
    radial_tower,
    vector_derivative,
    weighted_norm_sq,
)

__all__ = [
    "GHOST_BOUND",
    "MultiIndexPlan",
    "EnergyReport",
    "StateFields",
    "analyze",
    "energy_E1",
    "energy_E3",
    "ghost_energy",
    "kss_density_N3",
    "kss_accumulate",
    "local_L3",
    "ks_energy_X3",
    "ks_bound_ratio",
    "perturbed_energy",
    "equivalence_holds",
    "smallness_norm",
    "identity_terms",
    "energy_identity_residual",
    "dyadic_increments",
    "nonlinearity_for",
]

GHOST_BOUND = math.exp(math.pi / 2)

UNIT = WeightSpec()
GHOST = WeightSpec(ghost=0.5)  # squared inside the norms: e^{-q}
KSS_D = WeightSpec(bracket_r=-0.25, r_power=-0.25)
KSS_U = WeightSpec(bracket_r=-0.25, r_power=-1.25)
LOCAL_D = WeightSpec(r_power=-0.25, r_max=1.0)
LOCAL_U = WeightSpec(r_power=-1.25, r_max=1.0)
BRACKET_X = WeightSpec(bracket_r=1.0)
BRACKET_TR = WeightSpec(bracket_tr=1.0)


@dataclass(frozen=True)
class MultiIndexPlan:
    """The index set {a : |a| <= 2, a_4 <= 1} and how each entry is built.

    ``a = (a1, a2, a3, a4)`` stands for d_1^a1 d_2^a2 d_3^a3 S^a4.  Entries
    sharing a family are assembled from one Cartesian tower of that family.
    """

    max_order: int = 2

    @functools.cached_property
    def entries(self) -> tuple[tuple[tuple[int, int, int, int], str], ...]:
        out = []
        for a4 in (0, 1):
            for total in range(self.max_order + 1 - a4):
                for a1 in range(total, -1, -1):
                    for a2 in range(total - a1, -1, -1):
                        a3 = total - a1 - a2
                        out.append(((a1, a2, a3, a4), _FAMILY_OF[(total, a4)]))
        return tuple(out)

    def families(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, fam in self.entries:
            counts[fam] = counts.get(fam, 0) + 1
        return counts

    def top_order(self):
        return [e for e in self.entries if sum(e[0]) == self.max_order]


_FAMILY_OF = {(0, 0): "u", (1, 0): "du", (2, 0): "ddu", (0, 1): "Su", (1, 1): "dSu"}
PLAN = MultiIndexPlan()
TOP = ("ddu", "dSu")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E3: float
    ghost_E3: float
    X3: float
    N3: float
    M3_running: float
    L3_running: float
    Etilde3: float
    smallness_eps: float

    def to_dict(self) -> dict:
        return asdict(self)


@functools.lru_cache(maxsize=16)
def _nonlinearity_cached(key: bytes) -> OnAxisNonlinearity:
    g = np.frombuffer(key, dtype=float).reshape((3,) * 6)
    return OnAxisNonlinearity(NullFormTensor(g.copy()))


def nonlinearity_for(tensor: NullFormTensor) -> OnAxisNonlinearity:
    return _nonlinearity_cached(np.ascontiguousarray(tensor.g, dtype=float).tobytes())


def _vec(tower: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """d^p (x F) on the axis, laid out (node, i_1..i_p, component)."""
    return np.moveaxis(vector_derivative(tower, x, p), 1, -1)


def _shift_tower(base: np.ndarray, r: np.ndarray, depth: int, plus: int = 0) -> list[np.ndarray]:
    """Tower of r f' + plus f from the tower of f, using D^m(r f') = r^2 F_{m+1} + 2m F_m."""
    return [r * r * base[m + 1] + (2 * m + plus) * base[m] for m in range(depth + 1)]


class _LazyJets(dict):
    """Jets of one family, built on first access and shared by identical recipes."""

    def __init__(self, recipe, x, memo):
        super().__init__()
        self._recipe = recipe
        self._x = x
        self._memo = memo

    def __missing__(self, key):
        tower, p = self._recipe[key]
        memo_key = (id(tower), p)
        if memo_key not in self._memo:
            self._memo[memo_key] = _vec(tower, self._x, p)
        value = self._memo[memo_key]
        self[key] = value
        return value

    def keys(self):
        return self._recipe.keys()

    def items(self):
        return [(k, self[k]) for k in self._recipe]


class StateFields:
    """All Z^a u jets of one state on the axis, plus the functionals built on them."""

    def __init__(self, s: StateVector, tensor: NullFormTensor):
        self.state = s
        self.tensor = tensor
        self.g = tensor.g
        grid = s.grid
        self.grid = grid
        self.t = s.t
        r = grid.r
        self.r = r
        x = on_axis(grid)
        nl = nonlinearity_for(tensor)
        psiddot, chi = acceleration(s, nl)
        self.psiddot = psiddot
        tp = radial_tower(s.psi.values, grid, 4)
        tv = radial_tower(s.psidot.values, grid, 3)
        ta = radial_tower(psiddot, grid, 1)
        tc = radial_tower(chi, grid, 2)
        chi_t = 2.0 * nl(tp, tv, r)
        tct = radial_tower(chi_t, grid, 1)
        t = s.t
        # S u = x chi_S, chi_S = t psidot + psi + r psi'
        rp = _shift_tower(tp, r, 3, plus=1)
        ts = np.stack([t * tv[m] + rp[m] for m in range(4)])
        rv = _shift_tower(tv, r, 1, plus=2)
        tst = np.stack([t * ta[m] + rv[m] for m in range(2)])
        rc = _shift_tower(tc, r, 1, plus=3)
        tbs = np.stack([t * tct[m] + rc[m] for m in range(2)])
        self.towers = {"psi": tp, "psidot": tv, "chi": tc, "S": ts}

        recipes = {
            "u": dict(val=(tp, 0), dt=(tv, 0), grad=(tp, 1), box=(tc, 0), hess=(tp, 2), dt_grad=(tv, 1)),
            "du": dict(val=(tp, 1), dt=(tv, 1), grad=(tp, 2), box=(tc, 1), dt_grad=(tv, 2)),
            "ddu": dict(val=(tp, 2), dt=(tv, 2), grad=(tp, 3), box=(tc, 2), hess=(tp, 4)),
            "Su": dict(val=(ts, 0), dt=(tst, 0), grad=(ts, 1), box=(tbs, 0)),
            "dSu": dict(val=(ts, 1), dt=(tst, 1), grad=(ts, 2), box=(tbs, 1), hess=(ts, 3)),
        }
        memo: dict = {}
        self.fam = {name: _LazyJets(recipe, x, memo) for name, recipe in recipes.items()}
        self._ndim = {"u": 0, "du": 1, "ddu": 2, "Su": 0, "dSu": 1}

    # ---------------------------------------------------------------- sums
    def _family_sum(self, name: str, fn) -> np.ndarray:
        """Per-node density summed over the members of one family."""
        fam = self.fam[name]
        k = self._ndim[name]
        if k == 0:
            return fn(fam)
        if k == 1:
            return fn(fam).sum(axis=1)
        full = fn(fam).sum(axis=(1, 2))
        tr = _TraceView(fam)
        return 0.7 * full + 0.1 * fn(tr)

    def _plan_sum(self, fn, families=("u", "du", "ddu", "Su", "dSu")) -> np.ndarray:
        return sum(self._family_sum(name, fn) for name in families)

    def _integral(self, density: np.ndarray, weight: WeightSpec) -> float:
        return weighted_norm_sq(density, weight, self.t, self.grid, squared=True)

    # --------------------------------------------------------- functionals
    @staticmethod
    def _sq(a: np.ndarray, nslots: int) -> np.ndarray:
        return (a * a).reshape(a.shape[: a.ndim - nslots] + (-1,)).sum(axis=-1)

    def _grad_sq(self, f):
        return self._sq(f["dt"], 1) + self._sq(f["grad"], 2)

    def E3(self) -> float:
        return 0.5 * self._integral(self._plan_sum(self._grad_sq), UNIT)

    def _good(self, f) -> np.ndarray:
        """T_l X^k = omega_l d_t X^k + d_l X^k with omega = e_1."""
        out = f["grad"].copy()
        out[..., 0, :] += f["dt"]
        return out

    def ghost_E3(self) -> float:
        sigma = self.t - self.r
        w = np.exp(-np.arctan(sigma)) / (1 + sigma * sigma)
        dens = self._plan_sum(lambda f: self._sq(self._good(f), 2))
        return 0.5 * self._integral(w * dens, UNIT)

    def N3(self) -> float:
        d = self._integral(self._plan_sum(self._grad_sq), KSS_D)
        v = self._integral(self._plan_sum(lambda f: self._sq(f["val"], 1)), KSS_U)
        return d + v

    def L3_density(self) -> float:
        d = self._integral(self._plan_sum(self._grad_sq), LOCAL_D)
        v = self._integral(self._plan_sum(lambda f: self._sq(f["val"], 1)), LOCAL_U)
        return d + v

    def _box_du(self) -> tuple[float, float]:
        """(||box u||, sum_i ||box d_i u||)."""
        a0 = self._integral(self._sq(self.fam["u"]["box"], 1), UNIT)
        a1 = self._integral(self._family_sum("du", lambda f: self._sq(f["box"], 1)), UNIT)
        return math.sqrt(a0), math.sqrt(3.0 * a1)

    def X3(self) -> float:
        u, du = self.fam["u"], self.fam["du"]
        d0 = self._sq(u["dt_grad"], 2) + self._sq(u["hess"], 3)
        d1 = self._sq(du["dt_grad"], 3) + self._sq(self.fam["ddu"]["grad"], 4)
        return math.sqrt(self._integral(d0, BRACKET_TR)) + math.sqrt(3.0 * self._integral(d1, BRACKET_TR))

    def ks_ratio(self) -> float:
        """X3 / (E3^{1/2} + t sum_{|a|<=1} ||box d^a u||)."""
        b0, b1 = self._box_du()
        den = math.sqrt(self.E3()) + self.t * (b0 + b1)
        return self.X3() / den if den > 0 else 0.0

    def _trilinear(self, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
        """g a_li b_mj c_nk with node-first operands, b shared across the family."""
        extra = a.ndim - 3
        letters = "pq"[:extra]
        spec = f"ijklmn,z{letters}li,zmj,z{letters}nk->z{letters}"
        return np.einsum(spec, self.g, a, b, c, optimize=True)

    def _N_u(self, f) -> np.ndarray:
        """N(u, X)^i for the family jets f (spatial derivatives only)."""
        u = self.fam["u"]
        extra = f["grad"].ndim - 3
        letters = "pq"[:extra]
        first = np.einsum(f"ijklmn,zlmj,z{letters}nk->z{letters}i", self.g, u["hess"], f["grad"],
                          optimize=True)
        second = np.einsum(f"ijklmn,zmj,z{letters}lnk->z{letters}i", self.g, u["grad"], f["hess"],
                           optimize=True)
        return first + second

    def cubic_density(self, b_field: np.ndarray, weight_fn=None, good: bool = False) -> np.ndarray:
        """sum over |a| = 2 of g X_l X_m-weighted trilinear with middle slot b_field."""

        def fn(f):
            left = self._good(f) if good else f["grad"]
            return self._trilinear(left, b_field, f["grad"])

        return sum(self._family_sum(name, fn) for name in TOP)

    def Etilde3(self) -> float:
        eq = np.exp(-np.arctan(self.t - self.r))
        quad = 0.5 * self._plan_sum(self._grad_sq)
        cubic = self.cubic_density(self.fam["u"]["grad"])
        return self._integral(eq * (quad + cubic), UNIT)

    def weighted_E3(self) -> float:
        """Quadratic part of Etilde3 alone."""
        eq = np.exp(-np.arctan(self.t - self.r))
        return 0.5 * self._integral(eq * self._plan_sum(self._grad_sq), UNIT)

    def identity_terms(self) -> dict[str, float]:
        """Right-hand side of the ghost-weighted energy identity, term by term."""
        sigma = self.t - self.r
        eq = np.exp(-np.arctan(sigma))
        qp = 1.0 / (1.0 + sigma * sigma)
        grad_u = self.fam["u"]["grad"]
        t1 = self._integral(eq * self.cubic_density(self.fam["u"]["dt_grad"]), UNIT)
        t2 = self._integral(eq * qp * self.cubic_density(grad_u), UNIT)
        t3 = -2.0 * self._integral(eq * qp * self.cubic_density(grad_u, good=True), UNIT)
        lin = self._plan_sum(lambda f: (f["dt"] * f["box"]).sum(axis=-1))
        top = sum(self._family_sum(name, lambda f: (f["dt"] * self._N_u(f)).sum(axis=-1))
                  for name in TOP)
        t4 = self._integral(eq * (lin - 2.0 * top), UNIT)
        return {"trilinear_dt": t1, "trilinear_q": t2, "good_derivative": t3, "lower_order": t4}


class _TraceView(dict):
    """Trace over the two family slots, taken lazily per key."""

    def __init__(self, fam):
        super().__init__()
        self._fam = fam

    def __missing__(self, key):
        value = np.trace(self._fam[key], axis1=1, axis2=2)
        self[key] = value
        return value


def analyze(s: StateVector, tensor: NullFormTensor) -> StateFields:
    return StateFields(s, tensor)


_D1_EIGHTH = _fd_weights(range(-4, 5), 1)


def _eighth_order_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """psi' with an eighth-order centred stencil; the last four nodes fall back to fourth order."""
    n = len(v)
    padded = np.concatenate([v[3::-1], v])
    out = np.empty(n)
    m = n - 4
    out[:m] = sum(w * padded[k:k + m] for k, w in enumerate(_D1_EIGHTH)) / h
    out[m:] = _diff_values(v, h, 1)[m:]
    return out


def energy_E1(s: StateVector) -> float:
    """(1/2) int |d_t u|^2 + |grad u|^2 dx, conserved by the linear flow.

    Measured with an eighth-order derivative so that the measurement error
    stays well below the solver error being assessed.
    """
    r = s.grid.r
    psi = s.psi.values
    dpsi = _eighth_order_derivative(psi, s.grid.h)
    grad_sq = 3 * psi**2 + 2 * r * psi * dpsi + r * r * dpsi**2
    dens = 0.5 * (grad_sq + (r * s.psidot.values) ** 2)
    return integrate(4 * np.pi * r * r * dens, s.grid, alpha=2.0)


def energy_E3(s: StateVector, tensor: NullFormTensor) -> float:
    """sum over the plan of (1/2) int |d_t Z^a u|^2 + |grad Z^a u|^2 dx."""
    return analyze(s, tensor).E3()


def ghost_energy(s: StateVector, tensor: NullFormTensor) -> float:
    """Ghost-weight energy with density e^{-q} <t-r>^{-2} |T Z^a u|^2 / 2."""
    return analyze(s, tensor).ghost_E3()


def kss_density_N3(s: StateVector, tensor: NullFormTensor) -> float:
    return analyze(s, tensor).N3()


def local_L3(s: StateVector, tensor: NullFormTensor) -> float:
    """Instantaneous integrand of the local energy over |x| <= 1.

    The running value is its time integral; accumulate with kss_accumulate.
    """
    return analyze(s, tensor).L3_density()


def kss_accumulate(running: float, densities, dt: float) -> float:
    """Trapezoidal update of a time integral given densities at both ends of the step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    before, after = densities
    return running + 0.5 * dt * (before + after)


def ks_energy_X3(s: StateVector, tensor: NullFormTensor) -> float:
    """sum over |a| <= 1 of ||<t-r> d grad grad^a u||."""
    return analyze(s, tensor).X3()


def ks_bound_ratio(s: StateVector, tensor: NullFormTensor) -> float:
    return analyze(s, tensor).ks_ratio()


def perturbed_energy(s: StateVector, tensor: NullFormTensor) -> float:
    return analyze(s, tensor).Etilde3()


def equivalence_holds(E3: float, Etilde3: float, sup_grad: float = 0.0,
                      theta: float = math.inf) -> bool:
    """(2c)^-1 E3 <= Etilde3 <= 2c E3; vacuously true when sup|du| exceeds theta."""
    if sup_grad > theta:
        return True
    c = GHOST_BOUND
    return E3 / (2 * c) <= Etilde3 <= 2 * c * E3


def smallness_norm(psi0, psi1) -> float:
    """sum_{|a|<=2} ||<x> d^a grad u0|| + ||<x> d^a u1|| for u0 = x psi0, u1 = x psi1.

    Each multi-index contributes its own norm; permutation symmetry of
    radial fields equates the norms within an order, and the diagonal and
    off-diagonal second-order entries are sphere averages of the jets.
    """
    grid = psi0.grid
    x = on_axis(grid)
    t0 = radial_tower(psi0.values, grid, 3)
    t1 = radial_tower(psi1.values, grid, 2)

    def norm(dens):
        return math.sqrt(max(weighted_norm_sq(dens, BRACKET_X, 0.0, grid, squared=True), 0.0))

    def block(levels):
        """Norms of one field given its jets of orders 0, 1, 2 (node, derivs..., slots...)."""
        j0, j1, j2 = levels
        out = norm((j0 * j0).reshape(grid.n, -1).sum(axis=1))
        out += math.sqrt(3.0) * norm((j1 * j1).reshape(grid.n, -1).sum(axis=1))
        full = (j2 * j2).reshape(grid.n, -1).sum(axis=1)
        tr = np.trace(j2, axis1=1, axis2=2)
        trsq = (tr * tr).reshape(grid.n, -1).sum(axis=1)
        out += 3.0 * norm((trsq + 2.0 * full) / 15.0)
        out += 3.0 * norm((3.0 * full - trsq) / 30.0)
        return out

    u0 = [_vec(t0, x, p) for p in (1, 2, 3)]
    u1 = [_vec(t1, x, p) for p in (0, 1, 2)]
    return block(u0) + block(u1)


def identity_terms(s: StateVector, tensor: NullFormTensor) -> dict[str, float]:
    return analyze(s, tensor).identity_terms()


def energy_identity_residual(states, tensor: NullFormTensor):
    """Residual of d/dt Etilde3 + ghost E3 = RHS along uniformly spaced states.

    Returns (times, residual, scale) with the derivative taken by the
    five-point centred difference, so the first and last two samples carry
    no residual.  ``scale`` is max E3 over the segment.
    """
    states = list(states)
    if len(states) < 5:
        raise ValueError("energy identity needs at least 5 samples")
    times = np.array([s.t for s in states])
    steps = np.diff(times)
    dt = steps.mean()
    if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise ValueError("samples must be uniformly spaced in time")
    fields = [analyze(s, tensor) for s in states]
    et = np.array([f.Etilde3() for f in fields])
    e3 = np.array([f.E3() for f in fields])
    deriv = (et[:-4] - 8 * et[1:-3] + 8 * et[3:-1] - et[4:]) / (12 * dt)
    res = []
    for k, f in enumerate(fields[2:-2]):
        rhs = sum(f.identity_terms().values())
        res.append(deriv[k] + f.ghost_E3() - rhs)
    return times[2:-2], np.array(res), float(e3.max())


def dyadic_increments(times, values, start: float = 1.0):
    """Increments of a running quantity over the windows [2^k, 2^{k+1}] from ``start``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = []
    lo = start
    while lo * 2 <= times[-1] + 1e-12:
        hi = 2 * lo
        a = np.interp(lo, times, values)
        b = np.interp(hi, times, values)
        out.append((lo, hi, b - a))
        lo = hi
    return out
