import pytest

from ctxsched.cgroup import (
    CgroupDisabledError,
    CgroupError,
    CgroupWriteError,
    CgroupWriter,
    format_cpu_max,
    format_rt_runtime,
    prepare_fake_tree,
    write_cgroup,
)
from ctxsched.config import CFS, RT
from ctxsched.controller import ScheduleAssignment


def test_cpu_max_formatting():
    assert format_cpu_max(1.5) == "150000 100000"
    assert format_cpu_max(0.0) == "0 100000"
    assert format_cpu_max(4.0) == "400000 100000"
    assert format_cpu_max(1.0, period_us=50_000) == "50000 50000"


def test_rt_runtime_formatting():
    assert format_rt_runtime(250_000) == "250000"
    assert format_rt_runtime(0) == "0"
    assert format_rt_runtime(1_000_000) == "1000000"


def test_formatting_bounds():
    with pytest.raises(CgroupError):
        format_cpu_max(-0.1)
    with pytest.raises(CgroupError):
        format_rt_runtime(1_000_001)
    with pytest.raises(CgroupError):
        format_rt_runtime(-1)


def test_write_cfs_files(tmp_path):
    targets = prepare_fake_tree(tmp_path, ["slam", "speech"], CFS)
    a = ScheduleAssignment(CFS, {"slam": 1.5, "speech": 0.0}, epoch=0)
    written = write_cgroup(a, targets)
    assert (tmp_path / "slam" / "cpu.max").read_text() == "150000 100000"
    assert (tmp_path / "speech" / "cpu.max").read_text() == "0 100000"
    assert len(written) == 2


def test_write_rt_files(tmp_path):
    targets = prepare_fake_tree(tmp_path, ["a"], RT)
    a = ScheduleAssignment(RT, {"a": 250_000}, epoch=0)
    write_cgroup(a, targets)
    assert (tmp_path / "a" / "cpu.rt_runtime_us").read_text() == "250000"


def test_missing_cgroup_dir_reports_path_and_code(tmp_path):
    a = ScheduleAssignment(CFS, {"gone": 1.0}, epoch=0)
    with pytest.raises(CgroupWriteError) as err:
        write_cgroup(a, {"gone": tmp_path / "gone"})
    assert err.value.code == "ENOENT"
    assert "gone" in str(err.value.path)


def test_missing_cpu_max_is_capability_error(tmp_path):
    d = tmp_path / "m"
    d.mkdir()
    a = ScheduleAssignment(CFS, {"m": 1.0}, epoch=0)
    with pytest.raises(CgroupWriteError) as err:
        write_cgroup(a, {"m": d})
    assert err.value.code == "ENOTSUP"
    assert "bandwidth" in str(err.value)


def test_writer_requires_explicit_enable(tmp_path):
    writer = CgroupWriter({"m": tmp_path / "m"})
    with pytest.raises(CgroupDisabledError):
        writer.apply_assignment(ScheduleAssignment(CFS, {"m": 1.0}, epoch=0))


def test_writer_enforces_epoch_order(tmp_path):
    targets = prepare_fake_tree(tmp_path, ["m"], CFS)
    writer = CgroupWriter(targets, enabled=True)
    writer.apply_assignment(ScheduleAssignment(CFS, {"m": 1.0}, epoch=0))
    writer.apply_assignment(ScheduleAssignment(CFS, {"m": 2.0}, epoch=1))
    with pytest.raises(CgroupError, match="stale"):
        writer.apply_assignment(ScheduleAssignment(CFS, {"m": 3.0}, epoch=1))
    assert (tmp_path / "m" / "cpu.max").read_text() == "200000 100000"


def test_missing_target_module(tmp_path):
    a = ScheduleAssignment(CFS, {"m": 1.0}, epoch=0)
    with pytest.raises(CgroupError, match="no cgroup target"):
        write_cgroup(a, {})
