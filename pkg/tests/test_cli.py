import json
from pathlib import Path

import pytest

from ctxsched.cli import main

CONFIG = """
inputs = ["imu", "cam", "mic_audio"]

[scheduler]
mode = "cfs"
processors = 1
period_us = 100000
quantum_us = 1000

[[modules]]
id = "slam"
priority = 3.0
score_expr = "1 + (imu.mag > 0.5)"
job_streams = ["cam"]
work_us = 50000

[[modules]]
id = "speech"
priority = 1.0
job_streams = ["mic_audio"]
work_us = 80000

[[rules]]
module = "speech"
condition_expr = "imu.mag > 0.5"
forced_weight = 0.0
"""

TIMELINE = {
    "name": "mini", "duration_ms": 6000,
    "entries": [
        {"t_ms": 0, "stream": "imu", "payload": {"mag": 0.0}},
        {"t_ms": 10, "stream": "cam", "payload": {"f": 1}},
        {"t_ms": 20, "stream": "mic_audio", "payload": {"clip": 1}},
        {"t_ms": 1000, "stream": "imu", "payload": {"mag": 2.0}},
        {"t_ms": 1100, "stream": "mic_audio", "payload": {"clip": 2}},
        {"t_ms": 3000, "stream": "imu", "payload": {"mag": 0.0}},
    ],
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "c.toml").write_text(CONFIG, encoding="utf-8")
    (tmp_path / "t.json").write_text(json.dumps(TIMELINE), encoding="utf-8")
    return tmp_path


def test_validate_good_config(workdir, capsys):
    code = main(["validate", "--config", str(workdir / "c.toml")])
    assert code == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_with_timeline(workdir, capsys):
    code = main(["validate", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json")])
    assert code == 0
    assert "timeline ok" in capsys.readouterr().out


def test_validate_bad_config_exits_1(workdir, capsys):
    bad = workdir / "bad.toml"
    bad.write_text("not toml [", encoding="utf-8")
    assert main(["validate", "--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_validate_timeline_with_undeclared_stream(workdir, capsys):
    t = workdir / "bad_t.json"
    t.write_text(json.dumps({"entries": [
        {"t_ms": 0, "stream": "ghost", "payload": 1}]}), encoding="utf-8")
    assert main(["validate", "--config", str(workdir / "c.toml"),
                 "--timeline", str(t)]) == 1


def test_missing_required_flag_exits_1(workdir, capsys):
    assert main(["replay", "--timeline", str(workdir / "t.json")]) == 1


def test_unknown_variant_exits_1(workdir):
    assert main(["replay", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"),
                 "--variant", "warp"]) == 1


def test_replay_writes_traces(workdir, capsys):
    out = workdir / "out"
    code = main(["replay", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"),
                 "--variant", "cfs_ca", "--out", str(out), "--no-figures"])
    assert code == 0
    for name in ("weights.csv", "shares.csv", "jobs.csv", "summary.csv", "trace.csv"):
        assert (out / name).exists(), name
    assert "cfs_ca" in capsys.readouterr().out


def test_replay_renders_figures_by_default(workdir):
    out = workdir / "outfig"
    code = main(["replay", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"), "--out", str(out)])
    assert code == 0
    assert (out / "weights.png").exists()
    assert (out / "shares.png").exists()


def test_compare_prints_three_variants(workdir, capsys):
    code = main(["compare", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json")])
    assert code == 0
    out = capsys.readouterr().out
    for variant in ("baseline", "cfs_ca", "rt_ca"):
        assert variant in out


def test_compare_writes_summary_and_figure(workdir):
    out = workdir / "cmp"
    code = main(["compare", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"), "--out", str(out)])
    assert code == 0
    assert (out / "summary.csv").exists()
    assert (out / "speedup.png").exists()
    assert (out / "baseline" / "jobs.csv").exists()


def test_export_is_idempotent(workdir):
    out = workdir / "exp"
    args = ["export", "--config", str(workdir / "c.toml"),
            "--timeline", str(workdir / "t.json"),
            "--variant", "cfs_ca", "--out", str(out), "--no-figures"]
    assert main(args) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir() if p.suffix == ".csv"}
    assert main(args) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir() if p.suffix == ".csv"}
    assert first == second and first


def test_processor_override(workdir, capsys):
    code = main(["validate", "--config", str(workdir / "c.toml"),
                 "--processors", "4"])
    assert code == 0
    assert "N=4" in capsys.readouterr().out


def test_live_refuses_without_permission_flag(workdir, capsys):
    code = main(["live", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"),
                 "--cgroup-root", str(workdir / "cg")])
    assert code == 1
    assert "refusing" in capsys.readouterr().err


def test_live_fake_tree_writes_cpu_max(workdir, capsys):
    root = workdir / "cg"
    code = main(["live", "--config", str(workdir / "c.toml"),
                 "--timeline", str(workdir / "t.json"),
                 "--cgroup-root", str(root),
                 "--i-have-cgroup-permissions", "--fake-tree"])
    assert code == 0
    content = (root / "speech" / "cpu.max").read_text()
    assert content.endswith(" 100000")
    assert "applied" in capsys.readouterr().out


def test_runtime_error_exits_2(workdir):
    # An RT replay where a gated module holds unfinished work forever stalls.
    cfg = workdir / "stall.toml"
    cfg.write_text(CONFIG.replace('mode = "cfs"', 'mode = "rt"'), encoding="utf-8")
    t = workdir / "stall.json"
    t.write_text(json.dumps({"name": "s", "duration_ms": 2000, "entries": [
        {"t_ms": 0, "stream": "mic_audio", "payload": {"clip": 1}},
        {"t_ms": 150, "stream": "imu", "payload": {"mag": 5.0}},
    ]}), encoding="utf-8")
    code = main(["replay", "--config", str(cfg), "--timeline", str(t),
                 "--variant", "rt_ca"])
    assert code == 2
