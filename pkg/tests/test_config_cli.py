import csv
import json
import math
from pathlib import Path

import pytest

from renewrisk.cli import RATIO_COLUMNS, run
from renewrisk.config import ConfigError, load_config, parse_config, resolved_yaml
from renewrisk.geometry import RuinSet

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """\
claims:
  dependence: independent
  marginals:
    - {kind: pareto, alpha: 2.0}
arrivals:
  kind: exponential
  rate: 1.0
target:
  kind: orthant_union
  thresholds: [1.0]
run:
  r: 0.05
  horizons: [1, 10, inf]
  x: [10]
  n: 20000
  seed: 3
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def run_cli(tmp_path, *args):
    out = tmp_path / "out"
    code = run([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_missing_arrivals_kind_exits_2(tmp_path, caplog):
    text = BASE.replace("  kind: exponential\n", "")
    code, _ = run_cli(tmp_path, "simulate", "--config", write(tmp_path, text))
    assert code == 2
    assert "line 5" in caplog.text and "'kind'" in caplog.text


@pytest.mark.parametrize("edit,line", [
    (("  rate: 1.0\n", "  rate: 1.0\n  colour: red\n"), 8),
    (("  n: 20000\n", "  n: 10\n"), 15),
    (("  x: [10]\n", "  x: [ten]\n"), 14),
    (("run:\n", "extra: 1\nrun:\n"), 11),
])
def test_line_numbers_in_errors(edit, line):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace(*edit))
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_missing_section_and_bad_yaml(tmp_path):
    with pytest.raises(ConfigError, match="missing section 'run'"):
        parse_config(BASE.split("run:")[0])
    with pytest.raises(ConfigError, match="YAML syntax"):
        parse_config("claims: [unclosed\n")
    assert run(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_same_seed_gives_byte_identical_csvs(tmp_path):
    path = write(tmp_path, BASE)
    a = run(["simulate", path, "--out", str(tmp_path / "a")])
    b = run(["simulate", path, "--out", str(tmp_path / "b")])
    assert a == b == 0
    (da,), (db,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
    assert da.name == db.name
    assert (da / "entrance.csv").read_bytes() == (db / "entrance.csv").read_bytes()
    summary = json.loads((da / "summary.json").read_text())
    assert summary["schema_version"] == "1.0" and summary["seed"] == 3


def test_seed_flag_overrides(tmp_path):
    path = write(tmp_path, BASE)
    run(["simulate", path, "--out", str(tmp_path / "a"), "--run-id", "s3"])
    run(["simulate", path, "--out", str(tmp_path / "a"), "--run-id", "s4", "--seed", "4"])
    a = read_csv(tmp_path / "a" / "s3" / "entrance.csv")
    b = read_csv(tmp_path / "a" / "s4" / "entrance.csv")
    assert [r["seed"] for r in b] == ["4"] * 3
    assert [r["estimate"] for r in a] != [r["estimate"] for r in b]


def test_workers_do_not_change_results(tmp_path):
    text = BASE.replace("n: 20000", "n: 40000\n  chunk_size: 8192")
    path = write(tmp_path, text)
    run(["simulate", path, "--out", str(tmp_path / "o"), "--run-id", "w1"])
    run(["simulate", path, "--out", str(tmp_path / "o"), "--run-id", "w2", "--workers", "2"])
    assert (tmp_path / "o/w1/entrance.csv").read_bytes() == (tmp_path / "o/w2/entrance.csv").read_bytes()


def test_resolved_config_round_trips(tmp_path):
    for name in ("poisson_pareto_d1", "ruin_sum_negative", "classcheck_weibull", "halfspace_pareto_d2"):
        cfg = load_config(CONFIGS / f"{name}.yaml")
        again = parse_config(resolved_yaml(cfg))
        assert again.scenario == cfg.scenario
        assert again.settings == cfg.settings
        assert again.resolved == cfg.resolved


def test_resolved_written_by_cli_reloads(tmp_path):
    path = write(tmp_path, BASE)
    run(["asymptotic", path, "--out", str(tmp_path / "o"), "--run-id", "r"])
    cfg = load_config(tmp_path / "o/r/config.resolved")
    assert cfg.scenario == load_config(path).scenario
    assert math.isinf(cfg.scenario.horizons[-1])


def test_ruin_target_kinds():
    cfg = load_config(CONFIGS / "ruin_sum_negative.yaml")
    assert cfg.scenario.target is RuinSet.SUM_NEGATIVE
    assert cfg.scenario.premiums == (0.1, 0.1)
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(BASE.replace("  thresholds: [1.0]\n", "").replace("orthant_union", "sum_negative\n  foo: 1"))


def test_ratio_infinite_horizon_rhs(tmp_path):
    code, out = run_cli(tmp_path, "ratio", write(tmp_path, BASE), "--run-id", "r")
    assert code == 0
    rows = read_csv(out / "r" / "ratio.csv")
    assert list(rows[0]) == RATIO_COLUMNS
    inf_row = next(r for r in rows if r["t"] == "inf")
    # Poisson rate 1, Pareto(2) tail on A = (1, inf): rhs = x^-2 / (2r) = 0.1
    assert abs(float(inf_row["rhs"]) - 0.1) <= 1e-4 * 0.1
    assert float(inf_row["trunc_T"]) > 0
    sup = [r for r in rows if r["t"] == "sup"]
    assert len(sup) == 1 and float(sup[0]["sup_dev"]) >= 0


def test_numerical_failure_exits_3(tmp_path, caplog):
    text = BASE + "classcheck:\n  tail: {kind: point_mass, value: 5}\n  x: [10]\n"
    code, _ = run_cli(tmp_path, "classcheck", write(tmp_path, text))
    assert code == 3
    assert "numerical failure" in caplog.text


def test_unsupported_combination_is_config_error(tmp_path):
    text = BASE.replace("  seed: 3\n", "  seed: 3\n  method: importance\n").replace(
        "kind: orthant_union\n  thresholds: [1.0]", "kind: sum_negative")
    code, _ = run_cli(tmp_path, "simulate", write(tmp_path, text))
    assert code == 2


@pytest.mark.parametrize("cmd,files", [
    ("ruin", ["ruin.csv"]),
    ("renewal", ["renewal.csv"]),
    ("classcheck", ["convolution.csv", "long_tail.csv", "pd.csv", "matuszewska.csv"]),
    ("asymptotic", ["asymptotic.csv"]),
])
def test_subcommands_write_outputs(tmp_path, cmd, files):
    cfg = CONFIGS / ("classcheck_weibull.yaml" if cmd in ("renewal", "classcheck") else "ruin_sum_negative.yaml")
    text = cfg.read_text().replace("n: 200000", "n: 20000")
    code, out = run_cli(tmp_path, cmd, write(tmp_path, text), "--run-id", "x")
    assert code == 0
    for f in files + ["summary.json", "config.resolved"]:
        assert (out / "x" / f).exists()
    assert read_csv(out / "x" / files[0])


def test_no_config(capsys):
    assert run(["simulate"]) == 2
