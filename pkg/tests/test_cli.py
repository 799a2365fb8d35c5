"""CLI contract: listing, verification runs, exit codes, report files."""

import json

import numpy as np
import pytest

from oscflag import catalog
from oscflag.catalog import CatalogEntry, Expectation
from oscflag.cli import main
from oscflag.errors import UsageError
from oscflag.verify import RunConfig, run_verification


def test_list_shows_entries(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "section4-ruled(m=2, t_radius=0.25)" in out
    assert "curve-parallel(n=3, N=8, seed=11)" in out


def test_list_verbose_shows_expectations(capsys):
    assert main(["list", "--verbose"]) == 0
    out = capsys.readouterr().out
    assert "first_normal_rank" in out
    assert "splitting exercise" in out


def test_verify_sphere_exit_zero(capsys):
    assert main(["verify", "sphere", "--samples", "4", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out
    assert "findings: 0" in out


def test_verify_unknown_entry_exit_two(capsys):
    assert main(["verify", "does-not-exist"]) == 2


def test_bad_param_syntax_exit_two():
    assert main(["verify", "sphere", "--param", "n:3"]) == 2


def test_bad_config_exit_two():
    assert main(["verify", "sphere", "--samples", "0"]) == 2
    assert main(["verify", "sphere", "--rank-tol", "2.0"]) == 2


def test_report_file_schema(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code = main(["verify", "flat", "--samples", "3", "--seed", "2",
                 "--out", str(out_path)])
    assert code == 0
    data = json.loads(out_path.read_text())
    assert data["schema_version"] == "1"
    assert data["config"]["entry"] == "flat"
    assert len(data["points"]) == 3
    assert all("tolerance" in v for v in data["verdicts"])
    assert data["findings"] == []
    assert "timings" in data
    for point in data["points"]:
        assert {"x", "p", "s", "d", "nu", "case", "residuals"} <= point.keys()


def test_run_config_round_trip():
    cfg = RunConfig(entry="sphere", params={"n": 3}, samples=5, seed=9,
                    rank_tol=1e-7, fd_step=2e-3, max_normal_order=2,
                    out="r.json")
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(UsageError):
        RunConfig(entry="sphere", samples=0)


def test_findings_drive_exit_code_one(capsys):
    # a deliberately impossible expectation must fail the run, not crash it
    def bad_builder(params):
        entry = catalog.get_entry("sphere", params)
        return CatalogEntry(
            name="sphere-bad", params=entry.params,
            description="sphere with an impossible declared rank",
            chart=entry.chart, max_normal_order=entry.max_normal_order,
            substantial=entry.substantial,
            expected=[Expectation("first_normal_rank", {"expected": 99},
                                  "impossible on purpose")],
            sampler=entry.sampler)

    catalog.BUILDERS["sphere-bad"] = (bad_builder, "", "test-only")
    try:
        assert main(["verify", "sphere-bad", "--samples", "3"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] first_normal_rank" in out
        assert "findings: 1" in out
    finally:
        del catalog.BUILDERS["sphere-bad"]


def test_exit_zero_iff_findings_empty():
    report = run_verification(RunConfig(entry="product-torus", samples=3,
                                        seed=4))
    assert report.passed == (len(report.findings) == 0)
    assert report.passed


def test_degenerate_sampling_exit_three(capsys):
    # an entry whose sampler always lands on rank-unstable points must end
    # with the degeneracy exit code, not a crash or a fake report
    def bad_builder(params):
        entry = catalog.get_entry("section4-ruled", {"m": 2})
        entry.sampler = lambda rng: np.array([0.1, 0.2, 1e-7, 1e-7])
        return entry

    catalog.BUILDERS["degenerate-test"] = (bad_builder, "", "test-only")
    try:
        assert main(["verify", "degenerate-test", "--samples", "2"]) == 3
        err = capsys.readouterr().err
        assert "degeneracy" in err
    finally:
        del catalog.BUILDERS["degenerate-test"]
