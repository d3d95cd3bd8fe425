import json
from pathlib import Path

import pytest
import yaml

from ragate.cli import main
from ragate.config import (
    ConfigError,
    config_hash,
    dump_config,
    from_dict,
    load_and_validate,
    resolve_scenario,
    shipped_scenarios,
    to_dict,
)
from ragate.runner import run
from ragate.traces import TRACE_COLUMNS, emit_trace, read_trace

GOLDEN = Path(__file__).parent / "golden"


def raw_table3() -> dict:
    return yaml.safe_load(resolve_scenario("table3").read_text())


def write(tmp_path, tree, name="s.yaml") -> Path:
    p = tmp_path / name
    p.write_text(yaml.safe_dump(tree, sort_keys=False))
    return p


def errors_for(tmp_path, tree) -> list[str]:
    with pytest.raises(ConfigError) as e:
        load_and_validate(write(tmp_path, tree))
    return e.value.errors


@pytest.mark.parametrize("name", ["table3", "table3-strict"])
def test_shipped_scenarios_load(name):
    assert name in shipped_scenarios()
    cfg = load_and_validate(name)
    assert len(cfg.arms) == 4 and cfg.gate.safe_seed == ("72b-cloud",)


def test_strict_extends_relaxed():
    a, b = load_and_validate("table3"), load_and_validate("table3-strict")
    assert (a.qos.max_delay_s, b.qos.max_delay_s) == (5.0, 1.0)
    assert a.arms == b.arms and a.workload == b.workload and a.gate == b.gate


def test_unknown_safe_seed_arm_names_the_field(tmp_path):
    tree = raw_table3()
    tree["gate"]["safe_seed"] = ["72b-cloud", "70b-moon"]
    errs = errors_for(tmp_path, tree)
    assert any(e.startswith("gate.safe_seed[1]") and "70b-moon" in e for e in errs)


def test_negative_length_scale_rejected(tmp_path):
    tree = raw_table3()
    tree["gate"]["kernel"]["length_scale"]["multi_hop"] = -0.5
    errs = errors_for(tmp_path, tree)
    assert any("length_scale" in e and "multi_hop" in e for e in errs)


def test_all_errors_reported_together(tmp_path):
    tree = raw_table3()
    tree["qos"]["min_accuracy"] = 1.5
    tree["knowledge"]["capacity"] = 0
    tree["gate"]["safe_seed"] = []
    tree["arms"][0]["response"]["base_accuracy"] = -1
    errs = errors_for(tmp_path, tree)
    assert len(errs) >= 4
    for field in ("qos.min_accuracy", "knowledge.capacity", "gate.safe_seed", "arms[0]"):
        assert any(e.startswith(field) for e in errs), field


def test_missing_file_and_parse_error(tmp_path):
    with pytest.raises(ConfigError):
        load_and_validate(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("arms: [\n")
    with pytest.raises(ConfigError) as e:
        load_and_validate(bad)
    assert "parse" in str(e.value)


@pytest.mark.parametrize("name", ["table3", "table3-strict"])
def test_round_trip(name, tmp_path):
    cfg = load_and_validate(name)
    assert from_dict(to_dict(cfg)) == cfg
    p = tmp_path / "dump.yaml"
    p.write_text(dump_config(cfg))
    assert load_and_validate(p) == cfg


def test_emit_trace_row_count_and_cross_format(tmp_path):
    cfg = load_and_validate("table3")
    records, summary = run(cfg, "safeobo", 3, steps=5)
    pc = emit_trace(records, summary, tmp_path / "c", "csv", {"seed": 3})
    pj = emit_trace(records, summary, tmp_path / "j", "json", {"seed": 3})
    lines = pc["trace"].read_text().splitlines()
    assert len(lines) == 6 and lines[0] == ",".join(TRACE_COLUMNS)
    assert read_trace(pc["trace"]) == read_trace(pj["trace"])
    assert json.loads(pj["trace"].read_text())["columns"] == list(TRACE_COLUMNS)
    assert pc["summary"].read_text() == pj["summary"].read_text()


def test_emit_trace_io_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = load_and_validate("table3")
    records, summary = run(cfg, "uniform", 0, steps=2)
    with pytest.raises(OSError) as e:
        emit_trace(records, summary, blocker / "sub", "csv")
    assert str(blocker / "sub") in str(e.value)


def test_config_hash_tracks_bytes():
    text = resolve_scenario("table3").read_bytes()
    assert config_hash(text) == config_hash(bytes(text))
    assert config_hash(text) != config_hash(text + b"\n")
    assert config_hash(text) != config_hash(text.replace(b"0.88", b"0.87"))


def test_manifest_hash_follows_file_bytes(tmp_path):
    src = resolve_scenario("table3").read_text()
    p = tmp_path / "s.yaml"
    hashes = []
    for text in (src, src, src + "# comment\n"):
        p.write_text(text)
        out = tmp_path / f"out{len(hashes)}"
        assert main(["run", "--scenario", str(p), "--steps", "3", "--seed", "0", "--out", str(out)]) == 0
        hashes.append(json.loads((out / "manifest.json").read_text())["config_sha256"])
    assert hashes[0] == hashes[1] != hashes[2]
    m = json.loads((tmp_path / "out0" / "manifest.json").read_text())
    assert m["seed"] == 0 and m["version"] and m["policy"] == "safeobo"


def test_golden_columns():
    expected = (GOLDEN / "columns.txt").read_text().split()
    assert list(TRACE_COLUMNS) == expected


def test_golden_trace(tmp_path):
    cfg = load_and_validate("table3")
    records, summary = run(cfg, "safeobo", 42, steps=50)
    p = emit_trace(records, summary, tmp_path, "csv")
    assert p["trace"].read_bytes() == (GOLDEN / "table3_seed42_T50.csv").read_bytes()


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    assert main(["validate", "--scenario", "table3"]) == 0
    tree = raw_table3()
    tree["gate"]["safe_seed"] = ["nope"]
    assert main(["validate", "--scenario", str(write(tmp_path, tree))]) == 2
    assert "gate.safe_seed[0]" in capsys.readouterr().err
    assert main(["run", "--scenario", "table3", "--steps", "2", "--policy", "always:nope"]) == 2
    assert main(["run", "--scenario", "table3", "--steps", "2", "--qos-acc", "1.5"]) == 2
    assert main(["run", "--scenario", "no-such-scenario"]) == 2

    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "--scenario", "table3", "--steps", "2", "--out", str(blocker / "x")]) == 3

    import ragate.runner as runner

    def boom(*a, **k):
        raise FloatingPointError("boom")

    monkeypatch.setattr(runner, "realize_outcome", boom)
    assert main(["run", "--scenario", "table3", "--steps", "2"]) == 3
    assert "step 1" in capsys.readouterr().err


def test_cli_run_prints_valid_json(capsys):
    # exploit phase is empty here, so several summary fields are undefined
    assert main(["run", "--scenario", "table3", "--steps", "3", "--policy", "safeobo"]) == 0
    out = capsys.readouterr().out
    summary = json.loads(out)
    assert summary["exploit_mean_cost"] is None
