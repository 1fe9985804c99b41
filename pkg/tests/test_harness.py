import json
import math

import pytest

from adhoccloud.cli import main, parse_int_list, parse_schemes
from adhoccloud.harness.config import ConfigError, ScenarioConfig
from adhoccloud.harness.metrics import MetricsRecord, atct, read_csv, to_csv
from adhoccloud.harness.report import UnknownMetric, emit_plot_data, render_series
from adhoccloud.harness.scenarios import PRESETS, preset
from adhoccloud.harness.sweep import (
    improvement_table,
    mean_improvement,
    paired_improvements,
    relative_improvement,
    summarize,
    sweep,
    sweep_configs,
)


def small(name="S1", **kw):
    cfg = preset(name, sim_time_s=240.0, **kw)
    cfg.workload.tasks = kw.pop("tasks", 4) if "tasks" in kw else 4
    return cfg.validate()


# ------------------------------------------------------------ config

def test_presets_valid_and_roundtrip():
    for name in PRESETS:
        cfg = preset(name)
        back = ScenarioConfig.from_dict(json.loads(cfg.to_json()))
        assert back.to_json() == cfg.to_json()


def test_load_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(preset("S3").to_json())
    assert ScenarioConfig.load(p).name == "S3"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(p)
    with pytest.raises(ConfigError):
        ScenarioConfig.load(tmp_path / "missing.json")


@pytest.mark.parametrize(
    "change",
    [
        {"smn": 99},
        {"scns": []},
        {"scns": [0]},
        {"scheme": "magic"},
        {"power_mode": "half"},
        {"seed": -1},
        {"n_nodes": 1},
    ],
)
def test_invalid_configs_rejected(change):
    with pytest.raises(ConfigError):
        preset("S1").replace(**change)


def test_unknown_field_rejected():
    d = preset("S1").to_dict()
    d["bogus"] = 1
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(d)
    d = preset("S1").to_dict()
    d["workload"]["nope"] = 3
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(d)


def test_providers_default():
    cfg = preset("S1")
    assert cfg.smn not in cfg.providers and not set(cfg.scns) & set(cfg.providers)
    assert len(cfg.providers) == cfg.n_nodes - 1 - len(cfg.scns)


# ------------------------------------------------------------ metrics

def test_atct_examples():
    assert atct([]) == 0
    assert atct([12.5]) == 12.5
    assert atct([2, 3, 5]) == 10


def test_csv_roundtrip():
    r = MetricsRecord("S1", "hta", "multi", 3, 10, tasks_completed=2).with_completions([1.5, 2.25])
    back = read_csv(to_csv([r]))[0]
    assert back == r and back.atct_s == 3.75


# ------------------------------------------------------------ sweep / report

def test_sweep_product_count():
    cfgs = sweep_configs(preset("S1"), [10, 20, 30], list(range(1, 11)), ["proposed", "hta", "minhop"])
    assert len(cfgs) == 90
    with pytest.raises(ValueError):
        sweep_configs(preset("S1"), [], [1], ["hta"])


def _rows():
    rows = []
    for seed, (p, h) in enumerate([(8.0, 10.0), (9.0, 12.0), (5.0, 5.0)], start=1):
        rows.append(MetricsRecord("S1", "proposed", "multi", seed, 10, atct_s=p))
        rows.append(MetricsRecord("S1", "hta", "multi", seed, 10, atct_s=h))
    rows.append(MetricsRecord("S1", "hta", "multi", 4, 10, error="boom"))
    return rows


def test_summary_and_improvement():
    rows = _rows()
    s = {(x.scheme, x.tasks): x for x in summarize(rows)}
    vals = [10.0, 12.0, 5.0]
    mean = sum(vals) / 3
    std = math.sqrt(sum((v - mean) ** 2 for v in vals) / 2)
    assert s[("hta", 10)].mean == pytest.approx(mean) and s[("hta", 10)].std == pytest.approx(std)
    assert s[("hta", 10)].n == 3
    pairs = dict(paired_improvements(rows, "hta")[10])
    assert pairs == {1: pytest.approx(0.2), 2: pytest.approx(0.25), 3: 0.0}
    assert mean_improvement(rows, "hta")[10] == pytest.approx((27 - 22) / 27)
    assert relative_improvement(0, 0) == 0.0
    assert "hta\t10\t1\t" in improvement_table(rows)


def test_series_format_and_errors(tmp_path):
    text = render_series(_rows(), "atct")
    lines = text.strip().split("\n")
    assert lines[0] == "series\tx\tmean\tstd\tn"
    assert {l.split("\t")[0] for l in lines[1:]} == {"hta", "proposed"}
    with pytest.raises(UnknownMetric, match="valid metrics"):
        render_series(_rows(), "speed")
    (tmp_path / "metrics.csv").write_text(to_csv([]))
    with pytest.warns(UserWarning):
        out = emit_plot_data(tmp_path, "tx_energy")
    assert out.read_text() == "series\tx\tmean\tstd\tn\n"


def test_sweep_runs_and_sorts():
    base = small()
    rows = sweep(base, [2], [2, 1], ["hta", "proposed"])
    keys = [(r.scheme, r.seed) for r in rows]
    assert keys == [("hta", 1), ("hta", 2), ("proposed", 1), ("proposed", 2)]
    assert all(not r.error for r in rows)


def test_sweep_records_failures(monkeypatch):
    import adhoccloud.harness.sweep as sw

    def boom(cfg):
        raise RuntimeError("kaput")

    monkeypatch.setattr(sw, "simulate", boom)
    rows = sw.sweep(small(), [1], [1], ["hta"])
    assert rows[0].error.startswith("RuntimeError")


# ------------------------------------------------------------ cli

def test_parsers():
    assert parse_int_list("1..3,7") == [1, 2, 3, 7]
    assert parse_schemes("all") == ["proposed", "hta", "minhop"]
    with pytest.raises(ConfigError):
        parse_schemes("hta,nope")
    with pytest.raises(ConfigError):
        parse_int_list("5..1")


def test_cli_run_sweep_report(tmp_path, capsys):
    cfg = small()
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    out = tmp_path / "run"
    assert main(["run", "--config", str(path), "--scheme", "hta", "--seed", "2", "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists() and (out / "trace.log").exists()
    sw = tmp_path / "sw"
    assert main(["sweep", "--config", str(path), "--tasks", "1,2", "--seeds", "1..2",
                 "--schemes", "hta,minhop", "--out", str(sw)]) == 0
    assert len(read_csv((sw / "metrics.csv").read_text())) == 8
    assert main(["report", "--in", str(sw), "--metric", "control_packets"]) == 0
    assert (sw / "series_control_packets.tsv").exists()
    assert main(["report", "--in", str(sw), "--metric", "bogus"]) == 1
    capsys.readouterr()


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"smn": 50}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["run", "--config", "S1", "--scheme", "nope", "--out", str(tmp_path)]) == 1

    import adhoccloud.cli as cli

    def crash(cfg, out):
        raise ZeroDivisionError("inside the run")

    monkeypatch.setattr(cli, "run_scenario", crash)
    assert main(["run", "--config", "S1", "--out", str(tmp_path)]) == 2


def test_cli_power_mode_flag(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(small("S4").to_json())
    assert main(["run", "--config", str(path), "--power-mode", "max-only", "--out", str(tmp_path / "o")]) == 0
    row = read_csv((tmp_path / "o" / "metrics.csv").read_text())[0]
    assert row.power_mode == "max-only"
    capsys.readouterr()
