import csv

import pytest
import yaml
from click.testing import CliRunner

from vanetsim import config as config_mod
from vanetsim import sweep
from vanetsim.cli import main
from vanetsim.config import ConfigError, ScenarioConfig
from vanetsim.sweep import AGG_HEADER, RAW_HEADER, compare

TINY = ["--nodes", "12", "--fractions", "0.5", "--seeds", "3", "--protocols", "aomdv"]


@pytest.fixture
def tiny_yaml(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump({
        "area_width_m": 500.0, "area_height_m": 500.0, "sim_duration_s": 20.0, "flows": 3,
    }))
    return p


def test_defaults_cover_full_grid():
    cfg = ScenarioConfig()
    assert cfg.n_runs() == 3 * 3 * 7 * 5 == 315
    assert len(sweep.run_keys(cfg)) == 315


def test_unknown_key_rejected_with_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("flows: 4\nbogus_knob: 1\n")
    with pytest.raises(ConfigError, match=r"line 2: bogus_knob"):
        config_mod.load(p)


def test_type_and_range_errors(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("range_m: 250\nflows: many\n")
    with pytest.raises(ConfigError, match=r"line 2: flows"):
        config_mod.load(p)
    with pytest.raises(ConfigError, match="stopped_fractions"):
        ScenarioConfig(stopped_fractions=[1.5])
    with pytest.raises(ConfigError, match="protocols"):
        ScenarioConfig(protocols=["dsr"])


def test_yaml_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("flows: 4\nseeds: [1, 2\n")
    with pytest.raises(ConfigError, match="line"):
        config_mod.load(p)


def test_cli_run_filters_to_single_run(tmp_path, tiny_yaml):
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", "--config", str(tiny_yaml), "--out-dir", str(out), *TINY])
    assert res.exit_code == 0, res.output
    rows = list(csv.reader((out / "raw_results.csv").read_text().splitlines()))
    assert rows[0] == RAW_HEADER and len(rows) == 2
    assert rows[1][:4] == ["aomdv", "12", "50", "3"]
    for name in ("aggregate.csv", "fig_delay.csv", "fig_pdf.csv", "fig_nrl.csv", "effective_config.yaml"):
        assert (out / name).exists()
    # the effective config loads back to the same scenario
    eff = config_mod.load(out / "effective_config.yaml")
    assert eff.node_counts == [12] and eff.sim_duration_s == 20.0 and eff.n_runs() == 1


def test_cli_bad_config_exits_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("nope: 1\n")
    res = CliRunner().invoke(main, ["run", "--config", str(p), "--out-dir", str(tmp_path / "o")])
    assert res.exit_code == 2
    assert "nope" in res.output


def test_failed_run_is_marked_and_sweep_continues(tmp_path, tiny_yaml, monkeypatch):
    real = sweep.run_once

    def flaky(cfg, protocol, n, f, seed):
        if seed == 4:
            raise RuntimeError("boom")
        return real(cfg, protocol, n, f, seed)

    monkeypatch.setattr(sweep, "run_once", flaky)
    out = tmp_path / "out"
    args = ["run", "--config", str(tiny_yaml), "--out-dir", str(out), *TINY[:4], "--seeds", "3,4",
            "--protocols", "aomdv"]
    res = CliRunner().invoke(main, args)
    assert res.exit_code == 1
    rows = list(csv.DictReader((out / "raw_results.csv").read_text().splitlines()))
    assert [r["seed"] for r in rows] == ["3", "4"]
    assert rows[1]["pdf"] == sweep.FAILED and rows[0]["pdf"] != sweep.FAILED
    agg = list(csv.DictReader((out / "aggregate.csv").read_text().splitlines()))
    assert agg[0]["runs"] == "2" and agg[0]["failed"] == "1"
    assert agg[0]["pdf"] == rows[0]["pdf"]  # the failed run does not enter the mean


def _write_agg(path, values):
    rows = [AGG_HEADER]
    for proto, (delay, pdf, nrl) in values.items():
        rows.append([proto, "30", str(delay), str(pdf), str(nrl), "5", "0"])
    path.write_text("\n".join(",".join(r) for r in rows) + "\n")


def test_compare_arithmetic(tmp_path):
    p = tmp_path / "aggregate.csv"
    _write_agg(p, {"aomdv": (100.0, 0.5, 2.0), "ssd-aomdv": (33.1, 0.6, 3.0)})
    table = compare(sweep.read_aggregate(p), "aomdv", "ssd-aomdv")
    assert table["delay"]["change_pct"] == pytest.approx(66.9)
    assert table["pdf"]["change_pct"] == pytest.approx(20.0)
    assert table["nrl"]["change_pct"] == pytest.approx(50.0)
    res = CliRunner().invoke(main, ["compare", str(p)])
    assert res.exit_code == 0 and "66.9%" in res.output


def test_compare_identical_is_zero(tmp_path):
    p = tmp_path / "aggregate.csv"
    _write_agg(p, {"aomdv": (0.2, 0.5, 2.0), "sd-aomdv": (0.2, 0.5, 2.0)})
    table = compare(sweep.read_aggregate(p), "aomdv", "sd-aomdv")
    assert all(row["change_pct"] == 0 for row in table.values())


def test_compare_missing_protocol(tmp_path):
    p = tmp_path / "aggregate.csv"
    _write_agg(p, {"aomdv": (0.2, 0.5, 2.0)})
    res = CliRunner().invoke(main, ["compare", str(p)])
    assert res.exit_code == 2 and "ssd-aomdv" in res.output


def test_trace_subcommand(tmp_path, tiny_yaml):
    out = tmp_path / "events.log"
    mob = tmp_path / "mob.txt"
    res = CliRunner().invoke(main, ["trace", "--config", str(tiny_yaml), "--nodes", "12", "--seed", "2",
                                    "--out", str(out), "--mobility-trace", str(mob)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert any(" SEND " in line for line in lines) and any(" CTRL " in line for line in lines)
    assert mob.read_text().count("\n") >= 12 * 40
