import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radelastic.cli import (
    SCHEMA,
    emit_config,
    main,
    parse_config,
    run_convergence,
    run_dichotomy,
    run_scenario,
    run_verification,
)
from radelastic.radialfield import load_profile
from radelastic.solver import ConfigError, ScenarioConfig

SMALL = """
[grid]
R = 16
n = 64
[time]
T_final = 3
[data]
family = bump
epsilon = 1.0
"""


def test_minimal_document_uses_defaults():
    cfg = parse_config("[grid]\nn = 800\n")
    assert cfg == ScenarioConfig()
    assert parse_config("") == ScenarioConfig()


def test_values_are_typed():
    cfg = parse_config(SMALL + "[output]\nradiality = yes\nkeep_states = false\n")
    assert cfg.n == 64 and isinstance(cfg.n, int)
    assert cfg.R == 16.0 and isinstance(cfg.R, float)
    assert cfg.radiality is True and cfg.keep_states is False
    assert cfg.family == "bump"


def test_cfl_violation_names_the_bound():
    with pytest.raises(ConfigError) as err:
        parse_config("[time]\ncfl = 0.9\n")
    assert any("time.cfl" in v and "0.5" in v for v in err.value.violations)


def test_all_violations_reported_together():
    doc = "[grid]\nbogus = 1\nn = x\n[colour]\nred = 1\n[time]\ncfl = nan\n"
    with pytest.raises(ConfigError) as err:
        parse_config(doc)
    v = err.value.violations
    assert any(s.startswith("grid.bogus") for s in v)
    assert any(s.startswith("grid.n") for s in v)
    assert any(s.startswith("colour") for s in v)
    assert any(s.startswith("time.cfl") for s in v)


def test_invariant_violations_all_listed():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nR = -1\n[material]\nc2 = 2\n[data]\nfamily = square\n")
    keys = {v.split(":")[0] for v in err.value.violations}
    assert {"grid.R", "material.c2", "data.family"} <= keys


def test_syntax_error_is_config_error():
    with pytest.raises(ConfigError):
        parse_config("no section header\n")


configs = st.builds(
    ScenarioConfig,
    R=st.floats(60, 500),
    n=st.integers(16, 5000),
    cfl=st.floats(0.01, 0.5),
    T_final=st.floats(0.1, 40),
    c2=st.floats(0.01, 0.99),
    d1=st.floats(-3, 3), d2=st.floats(-3, 3), d3=st.floats(-3, 3), d4=st.floats(-3, 3),
    d5=st.floats(-3, 3),
    family=st.sampled_from(["gaussian", "bump", "ring"]),
    epsilon=st.floats(0, 100),
    width=st.floats(0.1, 2),
    ring_radius=st.floats(0, 5),
    cadence=st.floats(0.01, 5),
    report_level=st.sampled_from(["full", "energy", "none"]),
    radiality=st.booleans(),
    keep_states=st.booleans(),
    blowup_factor=st.floats(1.5, 1e6),
    smallness_threshold=st.floats(0, 1),
    edge_tolerance=st.floats(0, 1),
    seed=st.integers(0, 2**31),
)


@settings(max_examples=100, deadline=None)
@given(configs)
def test_emit_parse_round_trip(cfg):
    back = parse_config(emit_config(cfg))
    assert back == cfg
    assert emit_config(back) == emit_config(cfg)


def test_schema_covers_every_field():
    keys = [k for ks in SCHEMA.values() for k in ks]
    assert sorted(keys) == sorted(f for f in ScenarioConfig.__dataclass_fields__)


def test_run_scenario_writes_listed_artifacts(tmp_path):
    cfg = parse_config(SMALL).replace(keep_states=True)
    traj = run_scenario(cfg, tmp_path, "demo")
    manifest = json.loads((tmp_path / "demo.manifest.json").read_text())
    assert manifest["outcome"] == traj.outcome == "completed"
    assert sorted(manifest["artifacts"]) == sorted(p.name for p in tmp_path.iterdir())
    assert parse_config(manifest["config"]) == cfg
    lines = (tmp_path / "demo.ndjson").read_text().splitlines()
    assert len(lines) == len(traj.times)
    assert json.loads(lines[0])["t"] == 0.0
    prof = load_profile(tmp_path / "demo.psi.txt")
    assert np.array_equal(prof.values, traj.states[-1].psi.values)


def test_dichotomy_zero_amplitude_is_trivial():
    base = parse_config(SMALL)
    (row,) = run_dichotomy(base, [0.0])
    assert row["outcome_null"] == row["outcome_nonnull"] == "completed"
    assert row["t_star"] is None
    assert row["energy_ratio_null"] == 1.0


def test_dichotomy_rejects_unsorted_amplitudes():
    with pytest.raises(ValueError):
        run_dichotomy(ScenarioConfig(), [2.0, 1.0])


def test_convergence_needs_three_doubling_levels():
    with pytest.raises(ValueError):
        run_convergence(ScenarioConfig(), [128, 256])
    with pytest.raises(ValueError):
        run_convergence(ScenarioConfig(), [128, 256, 400])


def test_convergence_orders_on_small_problem():
    base = ScenarioConfig(R=12.0, T_final=1.0, epsilon=0.5, report_level="none")
    result = run_convergence(base, [128, 256, 512], identity=False)
    assert min(result["sup_orders"]) >= 3.5
    assert len(result["sup_differences"]) == 2


def test_unknown_suite_rejected():
    with pytest.raises(ValueError):
        run_verification(["nope"])


def test_nullform_suite_passes_and_is_seeded():
    rows_a, ok = run_verification(["nullform"], seed=3)
    rows_b, _ = run_verification(["nullform"], seed=3)
    assert ok
    assert [r.__dict__ for r in rows_a] == [r.__dict__ for r in rows_b]


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[time]\ncfl = 0.9\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "time.cfl" in capsys.readouterr().err
    assert main(["verify", "nope", "--out", str(tmp_path / "v")]) == 2
    good = tmp_path / "good.ini"
    good.write_text(SMALL)
    assert main(["run", "--config", str(good), "--out", str(tmp_path / "r"), "--id", "x"]) == 0
    assert (tmp_path / "r" / "x.manifest.json").exists()
    assert main(["verify", "nullform", "--out", str(tmp_path / "v2"), "--seed", "1"]) == 0
    assert (tmp_path / "v2" / "verification.ndjson").exists()


def test_main_dichotomy_with_explicit_amplitudes(tmp_path):
    good = tmp_path / "good.ini"
    good.write_text(SMALL)
    assert main(["dichotomy", "--config", str(good), "--out", str(tmp_path), "--amplitudes", "0"]) == 0
    rows = [json.loads(x) for x in (tmp_path / "dichotomy.ndjson").read_text().splitlines()]
    assert rows[0]["outcome_null"] == "completed"


def test_inline_comments_are_ignored():
    cfg = parse_config("[grid]\nR = 50   # outer radius\nn = 900 # cells\n")
    assert cfg.R == 50.0 and cfg.n == 900
