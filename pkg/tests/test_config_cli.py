"""Scenario configs (parse / serialize round trips, error paths) and the
command-line runner (exit codes, output files, determinism)."""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from regenverify.cli import (EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK,
                             EXIT_STATISTICAL, main)
from regenverify.config import (canonical_json, load_scenario, loads_scenario,
                                parse_scenario, scenario_to_json)
from regenverify.errors import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

EXP = {"kind": "exponential", "rate": 1.0}


def roundtrip(obj: dict) -> str:
    cfg = parse_scenario(obj)
    first = canonical_json(scenario_to_json(cfg))
    second = canonical_json(scenario_to_json(loads_scenario(first)))
    assert first == second
    return first


def write_config(tmp_path: Path, obj: dict, name: str = "cfg.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def small_sweep_scenario(rates=(1.0, 0.5), out="out", *,
                         allow_fail=False) -> dict:
    return {
        "model": {
            "kind": "clearing",
            "coordinates": [
                {"cycle_length": {"kind": "exponential", "rate": r}}
                for r in rates],
            "dependence": {"kind": "comonotone"},
        },
        "schedule": {"coordinates": [{"family": "affine", "a": 1.0},
                                     {"family": "affine", "a": 1.0}]},
        "run": {"seed": 7, "replications": 2000, "t_grid": [5.0, 25.0, 100.0],
                "quantile_prepass": 2000, "bootstrap_resamples": 100,
                "burn_in": 200.0, "allow_hypothesis_fail": allow_fail},
        "output": {"directory": out, "formats": ["csv", "json"]},
    }


# ---------------------------------------------------------------------------
# parse / serialize round trips


def test_roundtrip_levy_gaussian_copula_power_schedule():
    roundtrip({
        "model": {
            "kind": "levy_queue",
            "coordinates": [
                {"restart_level": EXP, "jump_rate": 0.4,
                 "jump_size": {"kind": "gamma", "shape": 2.0, "rate": 4.0}},
                {"restart_level": {"kind": "shifted_uniform",
                                   "lo": 0.5, "hi": 1.5}},
            ],
            "dependence": {"kind": "gaussian_copula",
                           "correlation": [[1.0, 0.5], [0.5, 1.0]]},
        },
        "schedule": {"coordinates": [
            {"family": "power", "a": 1.0, "p": 2.0},
            {"family": "power", "a": 2.0, "p": 1.0}]},
        "run": {"seed": 1, "replications": 5000, "t_grid": [2.0, 4.0, 8.0],
                "horizon": 5000.0, "g": {"kind": "identity"}},
    })


def test_roundtrip_clearing_lattice_common_shock():
    roundtrip({
        "model": {
            "kind": "clearing",
            "coordinates": [
                {"cycle_length": {"kind": "lattice", "span": 0.5,
                                  "weights": {"1": 0.25, "3": 0.75}},
                 "drift": 0.0, "jump_rate": 1.0, "jump_size": EXP},
                {"cycle_length": EXP},
            ],
            "dependence": {"kind": "common_shock",
                           "shock": {"kind": "gamma", "shape": 1.5,
                                     "rate": 3.0}},
        },
        "run": {"seed": 2, "g": {"kind": "indicator", "threshold": 0.5}},
    })


def test_roundtrip_status_and_age_residual():
    roundtrip({
        "model": {
            "kind": "status",
            "sources": [
                {"inter_update": EXP,
                 "update_size": {"kind": "deterministic", "value": 0.5},
                 "capacity": 2.0},
            ],
        },
        "run": {"seed": 3, "burn_in": 50.0,
                "g": {"kind": "exponential", "component": 1}},
    })
    roundtrip({
        "model": {"kind": "age_residual", "cycle_length": EXP, "copies": 3},
        "schedule": {"coordinates": [{"a": 3.0}, {"a": 2.0}, {"a": 1.0}]},
        "run": {"seed": 4, "test_functions": "exp_decay"},
    })


def test_roundtrip_jackson():
    roundtrip({
        "model": {"kind": "jackson", "arrival_rates": [0.5, 0.0],
                  "service_rates": [1.0, 1.0],
                  "routing": [[0.0, 1.0], [0.0, 0.0]]},
        "schedule": {"coordinates": [{"a": 3.0, "b": 1.0}, {"a": 2.0}]},
        "run": {"seed": 5},
        "output": {"directory": "elsewhere", "formats": ["json"]},
    })


def test_null_values_match_omitted_fields():
    explicit = parse_scenario({
        "model": {"kind": "age_residual", "cycle_length": EXP,
                  "copies": None},
        "run": {"seed": 6, "horizon": None, "g": None},
    })
    implicit = parse_scenario({
        "model": {"kind": "age_residual", "cycle_length": EXP},
        "run": {"seed": 6},
    })
    assert (canonical_json(scenario_to_json(explicit))
            == canonical_json(scenario_to_json(implicit)))


# ---------------------------------------------------------------------------
# error paths carry JSON paths


@pytest.mark.parametrize("mutate, fragment", [
    (lambda o: o["run"].pop("seed"), "run.seed"),
    (lambda o: o.update(extra=1), "$"),
    (lambda o: o["model"].update(kind="mystery"), "model.kind"),
    (lambda o: o["model"]["coordinates"][0].update(color="red"),
     "model.coordinates[0]"),
    (lambda o: o["run"].update(t_grid=[5.0, 5.0, 9.0]), "run.t_grid"),
    (lambda o: o["run"].update(bootstrap_resamples=10),
     "run.bootstrap_resamples"),
    (lambda o: o["schedule"]["coordinates"].pop(), "schedule.coordinates"),
    (lambda o: o["model"].update(dependence={
        "kind": "gaussian_copula", "correlation": [[1.0]]}), "dependence"),
])
def test_errors_name_the_offending_path(mutate, fragment):
    obj = small_sweep_scenario()
    mutate(obj)
    with pytest.raises(ConfigurationError) as err:
        parse_scenario(obj)
    assert fragment in str(err.value)


def test_unknown_g_kind_lists_choices():
    obj = small_sweep_scenario()
    obj["run"]["g"] = {"kind": "cubic"}
    with pytest.raises(ConfigurationError) as err:
        parse_scenario(obj)
    assert "expected one of" in str(err.value)
    assert "identity" in str(err.value)


def test_lattice_weight_keys_must_be_integers():
    with pytest.raises(ConfigurationError) as err:
        parse_scenario({
            "model": {"kind": "age_residual",
                      "cycle_length": {"kind": "lattice", "span": 1.0,
                                       "weights": {"a": 1.0}}},
            "run": {"seed": 1},
        })
    assert "weights" in str(err.value)


def test_invalid_json_text_rejected():
    with pytest.raises(ConfigurationError) as err:
        loads_scenario("{not json")
    assert "not valid JSON" in str(err.value)


# ---------------------------------------------------------------------------
# CLI: validate


@pytest.mark.parametrize("name", sorted(p.name
                                        for p in CONFIG_DIR.glob("*.json")))
def test_bundled_configs_validate(name, capsys):
    rc = main(["validate", "--config", str(CONFIG_DIR / name)])
    assert rc == EXIT_OK
    echoed = "\n".join(line for line in capsys.readouterr().out.splitlines()
                       if not line.startswith("WARN:"))
    reparsed = loads_scenario(echoed)
    assert canonical_json(scenario_to_json(reparsed)) == echoed.strip()


def test_validate_rejects_unstable_levy(tmp_path, capsys):
    path = write_config(tmp_path, {
        "model": {"kind": "levy_queue",
                  "coordinates": [{"restart_level": EXP, "jump_rate": 1.2,
                                   "jump_size": EXP}]},
        "schedule": {"coordinates": [{"a": 1.0}]},
        "run": {"seed": 1},
    })
    rc = main(["validate", "--config", str(path)])
    assert rc == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "unstable" in err and "1.2" in err


def test_validate_warns_on_arithmetic_cycles(tmp_path, capsys):
    path = write_config(tmp_path, {
        "model": {"kind": "age_residual",
                  "cycle_length": {"kind": "deterministic", "value": 1.0},
                  "copies": 1},
        "run": {"seed": 1},
    })
    rc = main(["validate", "--config", str(path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "WARN:" in out and "arithmetic" in out


def test_missing_config_file(tmp_path, capsys):
    rc = main(["validate", "--config", str(tmp_path / "nope.json")])
    assert rc == EXIT_CONFIG
    assert "ERROR config" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# CLI: status-pi and stationary


def test_status_pi_outputs(tmp_path, capsys):
    rc = main(["status-pi", "--config", str(CONFIG_DIR / "status_pi.json"),
               "--reps", "20000", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("PASS all-updated probability")
    payload = json.loads((tmp_path / "pi.json").read_text())
    for key in ("pi_closed_form", "pi_simulated", "se", "z_score",
                "replications", "burn_in", "passed", "seed", "version"):
        assert key in payload
    assert payload["passed"] is True
    assert abs(payload["pi_simulated"] - payload["pi_closed_form"]) \
        <= 3.0 * payload["se"]
    csv_lines = (tmp_path / "pi.csv").read_text().splitlines()
    assert csv_lines[0] == "pi_closed_form,pi_simulated,se,z_score,n"
    assert csv_lines[-1].startswith("# seed=20260814, version=")


def test_status_pi_rejects_other_models(tmp_path, capsys):
    path = write_config(tmp_path, small_sweep_scenario(out=str(tmp_path)))
    rc = main(["status-pi", "--config", str(path)])
    assert rc == EXIT_CONFIG
    assert "status" in capsys.readouterr().err


def test_stationary_two_routes_agree(tmp_path, capsys):
    path = write_config(tmp_path, {
        "model": {"kind": "clearing",
                  "coordinates": [{"cycle_length": EXP}],
                  "dependence": {"kind": "independent"}},
        "run": {"seed": 9, "n_cycles": 2000, "horizon": 2000.0,
                "g": {"kind": "identity"}},
        "output": {"directory": str(tmp_path / "res")},
    })
    rc = main(["stationary", "--config", str(path)])
    assert rc == EXIT_OK
    payload = json.loads((tmp_path / "res" / "stationary.json").read_text())
    assert payload["passed"] is True
    assert payload["z"] <= 3.0
    header = (tmp_path / "res" / "stationary.csv").read_text().splitlines()[0]
    assert header == ("coordinate,g,renewal_reward,rr_se,time_average,"
                      "ta_se,z")


def test_stationary_requires_g(tmp_path, capsys):
    obj = small_sweep_scenario(out=str(tmp_path))
    path = write_config(tmp_path, obj)
    rc = main(["stationary", "--config", str(path)])
    assert rc == EXIT_CONFIG
    assert "run.g" in capsys.readouterr().err


def test_stationary_coordinate_out_of_range(tmp_path, capsys):
    path = write_config(tmp_path, {
        "model": {"kind": "clearing", "coordinates": [{"cycle_length": EXP}],
                  "dependence": {"kind": "independent"}},
        "run": {"seed": 9, "coordinate": 5, "g": {"kind": "identity"}},
        "output": {"directory": str(tmp_path)},
    })
    rc = main(["stationary", "--config", str(path)])
    assert rc == EXIT_CONFIG
    assert "coordinate" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# CLI: verify-independence


def test_verify_independence_positive(tmp_path, capsys):
    path = write_config(tmp_path,
                        small_sweep_scenario(out=str(tmp_path / "pos")))
    rc = main(["verify-independence", "--config", str(path)])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS product-form gap")

    gap_lines = (tmp_path / "pos" / "gap.csv").read_text().splitlines()
    assert gap_lines[0] == "t,f_tuple_id,gap,se,n"
    assert len(gap_lines) == 1 + 9 + 1  # header, 3 t x 3 tuples, metadata
    assert gap_lines[-1].startswith("# seed=7, version=")

    verdict = json.loads((tmp_path / "pos" / "verdict.json").read_text())
    assert verdict["passed"] is True
    assert verdict["hypothesis"]["passed"] is True
    assert verdict["final_t"] == 100.0
    assert len(verdict["per_tuple"]) == 3
    assert all(row["ok"] for row in verdict["per_tuple"])
    assert "trend" in verdict and "trend_ok" in verdict


def test_verify_independence_gate_blocks_equal_means(tmp_path, capsys):
    path = write_config(
        tmp_path, small_sweep_scenario(rates=(1.0, 1.0),
                                       out=str(tmp_path / "neg")))
    rc = main(["verify-independence", "--config", str(path)])
    assert rc == EXIT_HYPOTHESIS
    assert "FAIL hypothesis" in capsys.readouterr().out
    verdict = json.loads((tmp_path / "neg" / "verdict.json").read_text())
    assert verdict["passed"] is False
    assert verdict["reason"] == "hypothesis_failed"
    assert verdict["hypothesis"]["witness"] == [0, 1]


def test_verify_independence_override_reports_failure(tmp_path, capsys):
    path = write_config(
        tmp_path, small_sweep_scenario(rates=(1.0, 1.0),
                                       out=str(tmp_path / "ctl"),
                                       allow_fail=True))
    rc = main(["verify-independence", "--config", str(path)])
    assert rc == EXIT_STATISTICAL
    assert capsys.readouterr().out.startswith("FAIL product-form gap")
    verdict = json.loads((tmp_path / "ctl" / "verdict.json").read_text())
    assert verdict["passed"] is False
    # identical coordinates: every indicator-pair gap sits near 1/4
    assert any(row["gap"] > 0.1 for row in verdict["per_tuple"])


def test_verify_independence_requires_schedule(tmp_path, capsys):
    obj = small_sweep_scenario(out=str(tmp_path))
    del obj["schedule"]
    path = write_config(tmp_path, obj)
    rc = main(["verify-independence", "--config", str(path)])
    assert rc == EXIT_CONFIG
    assert "schedule" in capsys.readouterr().err


def test_seed_override_changes_results(tmp_path, capsys):
    path = write_config(tmp_path,
                        small_sweep_scenario(out=str(tmp_path / "a")))
    assert main(["verify-independence", "--config", str(path)]) == EXIT_OK
    assert main(["verify-independence", "--config", str(path), "--seed",
                 "8", "--out", str(tmp_path / "b")]) == EXIT_OK
    capsys.readouterr()
    a = (tmp_path / "a" / "gap.csv").read_text()
    b = (tmp_path / "b" / "gap.csv").read_text()
    assert a != b
    assert b.splitlines()[-1].startswith("# seed=8,")


def test_cli_override_values_are_validated(tmp_path, capsys):
    path = write_config(tmp_path, small_sweep_scenario(out=str(tmp_path)))
    rc = main(["verify-independence", "--config", str(path), "--reps", "0"])
    assert rc == EXIT_CONFIG
    assert "--reps" in capsys.readouterr().err
    rc = main(["verify-independence", "--config", str(path), "--seed", "-3"])
    assert rc == EXIT_CONFIG
    assert "--seed" in capsys.readouterr().err
    # above the flag floor but below the sweep's operational minimum
    rc = main(["verify-independence", "--config", str(path), "--reps",
               "500"])
    assert rc == EXIT_CONFIG
    assert "1000" in capsys.readouterr().err


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


# ---------------------------------------------------------------------------
# determinism


def test_repeat_runs_are_byte_identical(tmp_path, capsys):
    path = write_config(tmp_path,
                        small_sweep_scenario(out=str(tmp_path / "r1")))
    assert main(["verify-independence", "--config", str(path)]) == EXIT_OK
    assert main(["verify-independence", "--config", str(path), "--out",
                 str(tmp_path / "r2")]) == EXIT_OK
    capsys.readouterr()
    for name in ("gap.csv", "verdict.json"):
        assert ((tmp_path / "r1" / name).read_bytes()
                == (tmp_path / "r2" / name).read_bytes())


def test_thread_count_does_not_change_outputs(tmp_path):
    path = write_config(tmp_path,
                        small_sweep_scenario(out="unused"))
    outs = {}
    for threads in ("1", "4"):
        env = dict(os.environ, REGEN_VERIFY_THREADS=threads)
        dest = tmp_path / f"t{threads}"
        proc = subprocess.run(
            [sys.executable, "-m", "regenverify", "verify-independence",
             "--config", str(path), "--out", str(dest)],
            capture_output=True, text=True, env=env, cwd=tmp_path)
        assert proc.returncode == EXIT_OK, proc.stderr
        outs[threads] = ((dest / "gap.csv").read_bytes(),
                         (dest / "verdict.json").read_bytes())
    assert outs["1"] == outs["4"]
