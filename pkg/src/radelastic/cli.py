"""Configuration, experiment orchestration and output emission.

Config files are sectioned key/value text (INI syntax) with sections
grid, time, material, data, output and thresholds.  Time series are written
as NDJSON (one EnergyReport per line), profiles as two-column text, and each
run gets a JSON manifest listing every file it produced.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .energies import (
    GHOST_BOUND,
    energy_E1,
    energy_identity_residual,
    equivalence_holds,
    ks_bound_ratio,
)
from .nullform import (
    CoefficientSet,
    build_tensor,
    evaluate_trilinear,
    max_sphere_contraction,
    null_estimate_ratio,
    radial_angular_terms,
)
from .radialfield import RadialGrid, StateVector, save_profile
from .solver import ConfigError, ScenarioConfig, make_initial_data, run, step
from .verify import (
    INEQUALITIES,
    SOBOLEV_MEMBERS,
    MultiplierSpec,
    PerturbationTensor,
    VerificationRow,
    exact_linear_state,
    format_report,
    kss_inequality_check,
    multiplier_identity_residual,
    perturbed_multiplier_residual,
    rho_constant,
    sobolev_ratio,
)

__all__ = [
    "SCHEMA",
    "RunManifest",
    "parse_config",
    "emit_config",
    "run_scenario",
    "find_epsilon_small",
    "run_dichotomy",
    "run_convergence",
    "run_verification",
    "SUITES",
    "main",
]

# section -> keys; every key maps to the ScenarioConfig field of the same name
SCHEMA = {
    "grid": ("R", "n"),
    "time": ("cfl", "T_final"),
    "material": ("c1", "c2", "d1", "d2", "d3", "d4", "d5"),
    "data": ("family", "epsilon", "width", "ring_radius"),
    "output": ("cadence", "report_level", "radiality", "keep_states"),
    "thresholds": ("blowup_factor", "smallness_threshold", "edge_tolerance", "seed"),
}
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
_DEFAULTS = ScenarioConfig()


# ------------------------------------------------------------------ config

def _convert(raw: str, kind: str):
    kind = kind.replace(" ", "")
    if kind == "int":
        return int(raw)
    if kind == "float":
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("expected true or false")
    return raw.strip()


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a config document; raises ConfigError listing every violation."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       default_section="\0none")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    values, errors = {}, []
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"{section}: unknown section; expected one of {tuple(SCHEMA)}")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                errors.append(f"{section}.{key}: unknown key")
                continue
            try:
                values[key] = _convert(raw, _FIELD_TYPES[key])
            except ValueError as exc:
                errors.append(f"{section}.{key}: cannot parse {raw!r} ({exc})")
    if errors:
        raise ConfigError(errors)
    cfg = ScenarioConfig(**values)
    bad = cfg.violations()
    if bad:
        raise ConfigError(bad)
    return cfg


def emit_config(cfg: ScenarioConfig) -> str:
    """Config document that parses back to ``cfg``."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, key)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


def _config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()[:16]


# ---------------------------------------------------------------- outputs

@dataclass
class RunManifest:
    scenario_id: str
    config: str
    config_hash: str
    code_version: str
    start_time: float
    end_time: float
    outcome: str
    t_star: float | None = None
    artifacts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")


def _ndjson(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def run_scenario(cfg: ScenarioConfig, out: Path | None = None, scenario_id: str = "run",
                 stop_when=None, extra: dict | None = None):
    """Run one scenario; with ``out`` write NDJSON, final profiles and a manifest."""
    start = time.time()
    traj = run(cfg, stop_when=stop_when)
    end = time.time()
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        artifacts = []
        series = out / f"{scenario_id}.ndjson"
        if traj.reports:
            series.write_text(_ndjson(r.to_dict() for r in traj.reports))
        else:
            series.write_text(_ndjson({"t": t, "sup_grad": g, "E3": e}
                                      for t, g, e in zip(traj.times, traj.grad_sups,
                                                         traj.e3 or [None] * len(traj.times))))
        artifacts.append(series.name)
        if traj.states:
            last = traj.states[-1]
            for name, prof in (("psi", last.psi), ("psidot", last.psidot)):
                path = out / f"{scenario_id}.{name}.txt"
                save_profile(path, prof)
                artifacts.append(path.name)
        manifest = out / f"{scenario_id}.manifest.json"
        artifacts.append(manifest.name)
        RunManifest(scenario_id, emit_config(cfg), _config_hash(cfg), __version__, start, end,
                    traj.outcome, traj.t_star, artifacts, dict(extra or {})).write(manifest)
    return traj


# ---------------------------------------------------------------- dichotomy

def _null_config(base: ScenarioConfig, eps: float) -> ScenarioConfig:
    return base.replace(d1=0.0, epsilon=eps)


def _nonnull_config(base: ScenarioConfig, eps: float, d1: float) -> ScenarioConfig:
    return base.replace(d1=d1, epsilon=eps)


def _exceeds_two(traj) -> bool:
    return len(traj.e3) > 0 and traj.energy_ratio > 2.0


def _null_bounded(base: ScenarioConfig, eps: float) -> bool:
    cfg = _null_config(base, eps).replace(report_level="energy")
    traj = run(cfg, stop_when=_exceeds_two)
    return traj.outcome == "completed" and traj.energy_ratio <= 2.0


def find_epsilon_small(base: ScenarioConfig, lo: float, hi: float, iterations: int = 6) -> float:
    """Bisection for the largest amplitude whose null run completes with energy ratio <= 2.

    ``lo`` must pass and ``hi`` must fail; the returned value passes.
    """
    if not _null_bounded(base, lo):
        raise ValueError(f"lower bracket {lo} does not satisfy the bounded-energy criterion")
    if _null_bounded(base, hi):
        raise ValueError(f"upper bracket {hi} already satisfies the bounded-energy criterion")
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if _null_bounded(base, mid):
            lo = mid
        else:
            hi = mid
    return lo


def _dichotomy_row(args):
    base, eps, d1 = args
    null = run(_null_config(base, eps).replace(report_level="energy"))
    nonnull = run(_nonnull_config(base, eps, d1).replace(report_level="energy"))
    return {
        "epsilon": eps,
        "outcome_null": null.outcome,
        "outcome_nonnull": nonnull.outcome,
        "t_star": nonnull.t_star,
        "energy_ratio_null": null.energy_ratio,
    }


def _pool_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_dichotomy(base: ScenarioConfig, amplitudes, d1: float = 1.0, workers: int = 1):
    """Rows (epsilon, null outcome, non-null outcome, t*, null energy ratio) per amplitude."""
    amps = [float(a) for a in amplitudes]
    if any(a < 0 for a in amps) or amps != sorted(amps):
        raise ValueError("amplitudes must be nonnegative and ascending")
    return _pool_map(_dichotomy_row, [(base, a, d1) for a in amps], workers)


def format_dichotomy(rows) -> str:
    head = f"{'epsilon':>12} {'null':<20} {'non-null':<20} {'t*':>8} {'ratio':>8}"
    out = [head, "-" * len(head)]
    for r in rows:
        ts = "-" if r["t_star"] is None else f"{r['t_star']:.3f}"
        out.append(f"{r['epsilon']:>12.6g} {r['outcome_null']:<20} {r['outcome_nonnull']:<20} "
                   f"{ts:>8} {r['energy_ratio_null']:>8.4f}")
    return "\n".join(out)


# -------------------------------------------------------------- convergence

def _restrict(fine: np.ndarray, fine_grid: RadialGrid, coarse_grid: RadialGrid) -> np.ndarray:
    """Sixth-order interpolation of fine-grid samples onto coarse nodes (even extension)."""
    n = fine_grid.n
    ext = np.concatenate([fine[2::-1], fine, fine[-1:-4:-1]])
    rext = np.concatenate([-fine_grid.r[2::-1], fine_grid.r,
                           fine_grid.r[-1] + fine_grid.h * np.arange(1, 4)])
    out = np.empty(coarse_grid.n)
    idx = np.searchsorted(rext, coarse_grid.r) - 3
    idx = np.clip(idx, 0, n + 6 - 6)
    for c, (x, j) in enumerate(zip(coarse_grid.r, idx)):
        xs = rext[j:j + 6]
        w = np.ones(6)
        for a in range(6):
            for b in range(6):
                if a != b:
                    w[a] *= (x - xs[b]) / (xs[a] - xs[b])
        out[c] = ext[j:j + 6] @ w
    return out


def _orders(errors):
    return [math.log2(a / b) if a > 0 and b > 0 else math.inf for a, b in zip(errors, errors[1:])]


def _final_state(cfg: ScenarioConfig) -> tuple[StateVector, StateVector]:
    grid = cfg.grid
    tensor = build_tensor(cfg.coefficients)
    psi0, psi1 = make_initial_data(cfg.family, cfg.epsilon, grid, cfg.width, cfg.ring_radius)
    s0 = StateVector(psi0, psi1, 0.0)
    s = s0
    nsteps = round(cfg.T_final / cfg.dt)
    for _ in range(nsteps):
        s = step(s, cfg.dt, tensor)
    return s0, s


def _identity_segment_residual(cfg: ScenarioConfig, t0: float, spacing: float) -> tuple[float, float]:
    tensor = build_tensor(cfg.coefficients)
    seg = cfg.replace(T_final=t0 + 4 * spacing, cadence=spacing, report_level="none",
                      keep_states=True)
    traj = run(seg)
    states = traj.states[-5:]
    _, res, emax = energy_identity_residual(states, tensor)
    return float(np.max(np.abs(res))), float(emax)


def run_convergence(base: ScenarioConfig, levels, identity: bool = True, workers: int = 1):
    """Observed orders for the solution sup-norm, the E1 drift and the identity residual.

    ``levels`` are cell counts, each twice the previous; dt follows the CFL number.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("convergence study needs at least 3 levels")
    if any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must double")
    cfgs = [base.replace(n=n, cadence=base.T_final) for n in levels]
    finals = _pool_map(_final_state, cfgs, workers)
    diffs = []
    for k in range(len(levels) - 1):
        coarse, fine = cfgs[k].grid, cfgs[k + 1].grid
        diffs.append(float(np.max(np.abs(finals[k][1].psi.values
                                          - _restrict(finals[k + 1][1].psi.values, fine, coarse)))))
    drifts = []
    for s0, s in finals:
        e0 = energy_E1(s0)
        drifts.append(abs(energy_E1(s) - e0) / e0 if e0 > 0 else 0.0)
    table = {
        "levels": levels,
        "sup_differences": diffs,
        "sup_orders": _orders(diffs),
        "E1_drift": drifts,
        "E1_orders": _orders(drifts),
    }
    if identity:
        res = [_identity_segment_residual(c, 1.0, c.grid.h) for c in cfgs]
        table["identity_residual"] = [r / m if m > 0 else 0.0 for r, m in res]
        table["identity_orders"] = _orders(table["identity_residual"])
    return table


# ------------------------------------------------------------- verification

def _random_null_sets(rng, count: int):
    sets = []
    for _ in range(count):
        d2, d3, d4, d5 = rng.uniform(-1, 1, 4)
        sets.append(CoefficientSet(1.0, float(rng.uniform(0.2, 0.9)), 0.0, float(d2), float(d3),
                                   float(d4), float(d5)))
    return sets


def _suite_nullform(rng):
    rows = []
    for k, coeffs in enumerate(_random_null_sets(rng, 4)):
        t = build_tensor(coeffs)
        member = f"null_set_{k}"
        scale = np.abs(t.g).max()
        contr = max_sphere_contraction(t, 10_000) / scale
        rows.append(VerificationRow("null_sphere_contraction", member, contr, "fib10000",
                                    contr <= 1e-12))
        sym = t.symmetry_defect()
        rows.append(VerificationRow("tensor_symmetry", member, sym, "-", sym == 0.0))
        a, b, c = (rng.standard_normal((1000, 3, 3)) for _ in range(3))
        x = rng.standard_normal((1000, 3))
        parts = radial_angular_terms(t, a, b, c, x)
        full = evaluate_trilinear(t, a, b, c)
        closure = float(np.max(np.abs(parts.sum(axis=-1) - full)) / np.max(np.abs(full)))
        rows.append(VerificationRow("decomposition_closure", member, closure, "1000 jets",
                                    closure <= 1e-10))
        radial = float(np.max(np.abs(parts[..., 3])) / np.max(np.abs(full)))
        rows.append(VerificationRow("radial_term_vanishes", member, radial, "1000 jets",
                                    radial <= 1e-12))
        ratio = float(np.max(null_estimate_ratio(t, a, b, c, x)))
        rows.append(VerificationRow("null_estimate_ratio", member, ratio, "1000 jets",
                                    math.isfinite(ratio)))
    return rows


def _sobolev_item(args):
    member, n = args
    out = []
    for ineq in INEQUALITIES:
        for t in (0.0, 5.0):
            coarse = sobolev_ratio(member, ineq, t, RadialGrid(40.0, n))
            fine = sobolev_ratio(member, ineq, t, RadialGrid(40.0, 2 * n))
            stable = abs(fine / coarse - 1) <= 0.1 if coarse > 0 else fine == 0
            out.append(VerificationRow(f"sobolev_{ineq}_t{t:g}", member, fine, f"n={n},{2 * n}",
                                       math.isfinite(fine) and stable))
    return out


def _suite_sobolev(rng, workers=1):
    rows = []
    for part in _pool_map(_sobolev_item, [(m, 800) for m in SOBOLEV_MEMBERS], workers):
        rows.extend(part)
    return rows


def _suite_kss(rng):
    rows = []
    h = PerturbationTensor.random(rng)
    for member in ("cos", "decay", "grow"):
        for label, pert in (("h0", PerturbationTensor.zero()), ("h_random", h)):
            ratios = []
            for n in (160, 320):
                lhs, rhs = kss_inequality_check(member, pert, 5.0, RadialGrid(8.0, n))
                ratios.append(lhs / rhs)
            stable = abs(ratios[1] / ratios[0] - 1) <= 0.1
            rows.append(VerificationRow("kss_perturbed_estimate", f"{member}/{label}", ratios[1],
                                        "n=160,320", math.isfinite(ratios[1]) and stable))
    return rows


def _suite_multiplier(rng):
    rows = []
    h = PerturbationTensor.random(rng)
    specs = (MultiplierSpec("sqrt"), MultiplierSpec("rho", 4.0))
    res = {}
    for n in (800, 1600):
        grid = RadialGrid(20.0, n)
        seg = [exact_linear_state(grid, 2.0 + 0.02 * k) for k in range(5)]
        for m in specs:
            res[("A1", m.kind, n)] = multiplier_identity_residual(seg, m)
            res[("A5", m.kind, n)] = perturbed_multiplier_residual(seg[2], h, m)
    for ident in ("A1", "A5"):
        for m in specs:
            fine, coarse = res[(ident, m.kind, 1600)], res[(ident, m.kind, 800)]
            order = math.log2(coarse / fine) if fine > 0 else math.inf
            name = "multiplier_identity" if ident == "A1" else "perturbed_multiplier_identity"
            rows.append(VerificationRow(name, m.kind, fine, "R=20,n=1600", fine <= 1e-6))
            rows.append(VerificationRow(name + "_order", m.kind, order, "n=800,1600", order >= 2))
    consts = [rho_constant(rho) for rho in (1.0, 4.0, 16.0, 64.0)]
    for rho, c in zip((1, 4, 16, 64), consts):
        rows.append(VerificationRow("rho_constant", f"rho={rho}", c, "T=256,h=0.1", math.isfinite(c)))
    spread = max(consts) / min(consts)
    rows.append(VerificationRow("rho_uniformity", "rho in 1..64", spread, "T=256,h=0.1", spread < 2))
    return rows


def _suite_energies(rng):
    rows = []
    cfg = ScenarioConfig(R=24.0, n=960, T_final=10.0, family="gaussian", epsilon=1e-2, cadence=1.0,
                         d1=0.0, d3=0.5, d4=0.0, d5=1.0, radiality=True, keep_states=True)
    tensor = build_tensor(cfg.coefficients)
    traj = run(cfg)
    theta = cfg.smallness_threshold
    small = max(traj.grad_sups) <= theta
    eq = small and all(equivalence_holds(r.E3, r.Etilde3, g, theta)
                       for r, g in zip(traj.reports, traj.grad_sups))
    worst = max(max(r.Etilde3 / r.E3, r.E3 / r.Etilde3) for r in traj.reports if r.E3 > 0)
    rows.append(VerificationRow("energy_equivalence", "gaussian eps=1e-2", worst, "R=24,n=960",
                                eq, f"bound {2 * GHOST_BOUND:.3f}"))
    # empirical Klainerman-Sideris constant on two grids
    coarse = run(cfg.replace(n=480, radiality=False, report_level="none"))
    consts = [max(ks_bound_ratio(s, tensor) for s in t.states) for t in (coarse, traj)]
    spread = max(consts) / min(consts)
    rows.append(VerificationRow("ks_constant", "gaussian eps=1e-2", consts[1], "R=24,n=960",
                                math.isfinite(consts[1])))
    rows.append(VerificationRow("ks_constant_stability", "gaussian eps=1e-2", spread, "n=480,960",
                                spread < 2))
    rad = max(traj.radiality)
    rows.append(VerificationRow("radiality", "gaussian eps=1e-2", rad, "R=24,n=960", rad <= 1e-10))
    ref = cfg.replace(n=1920)
    resid, emax = _identity_segment_residual(ref, 1.0, ref.grid.h)
    rows.append(VerificationRow("energy_identity", "gaussian eps=1e-2", resid / emax, "R=24,n=1920",
                                resid <= 1e-6 * emax))
    return rows


SUITES = {
    "nullform": _suite_nullform,
    "sobolev": _suite_sobolev,
    "kss": _suite_kss,
    "multiplier": _suite_multiplier,
    "energies": _suite_energies,
}


def run_verification(suites=(), seed: int = 0, workers: int = 1):
    """Run the selected suites (all when empty); returns (rows, all_passed)."""
    names = list(suites) or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {tuple(SUITES)}")
    rows = []
    for name in names:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        if name == "sobolev":
            rows.extend(SUITES[name](rng, workers))
        else:
            rows.extend(SUITES[name](rng))
    return rows, all(r.passed for r in rows)


# --------------------------------------------------------------------- main

def _load_config(path: str | None, seed: int | None) -> ScenarioConfig:
    cfg = parse_config(Path(path).read_text()) if path else ScenarioConfig()
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radelastic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="sectioned key/value config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="concurrent sweep members")
        sp.add_argument("--seed", type=int, default=None, help="seed for all randomness")

    sp = sub.add_parser("run", help="integrate one scenario")
    common(sp)
    sp.add_argument("--id", default="run", help="scenario id used in file names")
    sp = sub.add_parser("dichotomy", help="null versus non-null amplitude sweep")
    common(sp)
    sp.add_argument("--amplitudes", type=float, nargs="*", default=None,
                    help="explicit amplitudes; default: bisection for eps_small, then 10, 15, 20 times it")
    sp.add_argument("--bracket", type=float, nargs=2, default=(1.0, 100.0),
                    help="bisection bracket for eps_small")
    sp.add_argument("--d1", type=float, default=1.0, help="d1 for the non-null column")
    sp = sub.add_parser("convergence", help="self-convergence study")
    common(sp)
    sp.add_argument("--levels", type=int, nargs="+", default=[256, 512, 1024])
    sp = sub.add_parser("verify", help="lemma and identity verification suites")
    common(sp)
    sp.add_argument("suites", nargs="*", help=f"any of {', '.join(SUITES)}; empty runs all")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _load_config(args.config, args.seed)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    if args.verb == "run":
        traj = run_scenario(cfg, out, args.id)
        print(f"{args.id}: {traj.outcome}" + (f" at t*={traj.t_star:.4f}" if traj.t_star else ""))
        return 0
    if args.verb == "dichotomy":
        start = time.time()
        extra = {}
        if args.amplitudes is None:
            eps_small = find_epsilon_small(cfg, *args.bracket)
            amps = [eps_small, 10 * eps_small, 15 * eps_small, 20 * eps_small]
            extra["epsilon_small"] = eps_small
        else:
            amps = args.amplitudes
        rows = run_dichotomy(cfg, amps, args.d1, args.workers)
        table = out / "dichotomy.ndjson"
        table.write_text(_ndjson(rows))
        manifest = out / "dichotomy.manifest.json"
        RunManifest("dichotomy", emit_config(cfg), _config_hash(cfg), __version__, start, time.time(),
                    "completed", None, [table.name, manifest.name], extra).write(manifest)
        print(format_dichotomy(rows))
        return 0
    if args.verb == "convergence":
        start = time.time()
        result = run_convergence(cfg, args.levels, workers=args.workers)
        table = out / "convergence.json"
        table.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        manifest = out / "convergence.manifest.json"
        RunManifest("convergence", emit_config(cfg), _config_hash(cfg), __version__, start, time.time(),
                    "completed", None, [table.name, manifest.name]).write(manifest)
        print(json.dumps(result, indent=2))
        return 0
    try:
        rows, ok = run_verification(args.suites, cfg.seed, args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = format_report(rows)
    (out / "verification.txt").write_text(report + "\n")
    (out / "verification.ndjson").write_text(_ndjson(dataclasses.asdict(r) for r in rows))
    print(report)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
