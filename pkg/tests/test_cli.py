import json

import pytest

from sksos import __version__
from sksos.cli import (
    ConfigError, ExperimentConfig, build_parser, config_from_args, main, report_json, run,
    without_timestamp,
)


def cfg(*argv):
    return config_from_args(build_parser().parse_args(list(argv)))


@pytest.mark.parametrize("argv,message", [
    (["certify", "--n", "1"], "N must be at least 2"),
    (["certify", "--delta", "1.0"], "delta must lie strictly between 0 and 1"),
    (["certify", "--alpha", "0"], "alpha must lie strictly between 0 and 1"),
    (["certify", "--trials", "0"], "trials must be at least 1"),
    (["certify", "--method", "qr"], "method must be"),
    (["sweep", "--ns", "40,1"], "every N"),
    (["tensor", "--k", "4"], "k must be 1, 2 or 3"),
    (["tensor", "--n", "5", "--r", "6"], "1 <= --r <= --n"),
    (["compare-iid", "--n", "5", "--r", "5"], "1 <= --r < --n"),
    (["haar-test", "--samples", "10"], "samples must be at least"),
    (["etf"], "--simplex-r or --frame"),
])
def test_validation_messages(argv, message):
    with pytest.raises(ConfigError, match=message):
        cfg(*argv).validate()


def test_invalid_config_exits_1(capsys):
    assert main(["certify", "--delta", "2"]) == 1
    assert "delta" in capsys.readouterr().err


def test_certify_report_layout(tmp_path):
    out = tmp_path / "c"
    code = main(["certify", "--n", "16", "--trials", "2", "--seed", "4", "--output", str(out)])
    rep = json.loads(out.with_suffix(".json").read_text())
    assert set(rep) == {"config", "version", "timestamp", "trials", "summary"}
    assert rep["version"] == __version__
    assert rep["config"]["N"] == 16 and rep["config"]["master_seed"] == 4
    assert [t["trial"] for t in rep["trials"]] == [0, 1]
    for t in rep["trials"]:
        assert t["constraints"]["passed"]
        assert t["psd"]["status"] in ("PASS", "FAIL")
        assert t["objective_witness"] <= t["spectral_certificate"]
    all_pass = all(t["psd"]["status"] == "PASS" for t in rep["trials"])
    assert code == (0 if all_pass else 2)


def test_certify_is_deterministic_across_workers():
    base = dict(subcommand="certify", N=14, trials=3, master_seed=9)
    a = run(ExperimentConfig(**base, workers=1))[1]
    b = run(ExperimentConfig(**base, workers=2))[1]
    a["config"].pop("workers"), b["config"].pop("workers")
    assert report_json(without_timestamp(a)) == report_json(without_timestamp(b))


def test_failed_psd_exits_2():
    # a small witness with little nudging is not PSD (measured lambda_min -0.66)
    code, rep = run(ExperimentConfig("certify", N=30, alpha=0.05, trials=1, master_seed=1))
    assert rep["trials"][0]["psd"]["status"] == "FAIL"
    assert code == 2


def test_etf_records_expected_infeasibility():
    code, rep = run(cfg("etf", "--simplex-r", "2,3"))
    assert code == 0
    r2, r3 = rep["trials"]
    assert r2["expected_error"] == "InfeasibleDimension"
    assert r3["entrywise_constraints"]["passed"] and r3["lambda_min_entrywise"] >= -1e-9
    assert r3["max_route_difference"] <= 1e-8


def test_etf_frame_file(tmp_path):
    from sksos.etf import simplex_etf, write_frame
    path = tmp_path / "f.txt"
    write_frame(path, simplex_etf(4))
    code, rep = run(cfg("etf", "--frame", str(path)))
    assert code == 0 and rep["trials"][0]["projector_rank"] == 5


def test_haar_subcommand():
    code, rep = run(cfg("haar-test", "--n", "5", "--samples", "20000", "--seed", "2"))
    assert code == 0
    assert len(rep["trials"]) == 6
    assert rep["summary"]["max_abs_z"] <= 4


def test_tensor_subcommand():
    code, rep = run(cfg("tensor", "--n", "10", "--r", "6", "--k", "2"))
    assert code == 0
    t = rep["trials"][0]
    assert t["diag_mean"] == pytest.approx(1.0)
    assert t["lambda_min"] >= -1e-9


def test_tensor_k3_degenerate_exits_1():
    assert main(["tensor", "--n", "6", "--r", "4", "--k", "3"]) == 1


def test_compare_iid_subcommand():
    code, rep = run(cfg("compare-iid", "--n", "30", "--r", "10", "--trials", "5"))
    assert code == 0
    assert rep["trials"][0]["iid_expected"] == 30 - 3
    assert rep["summary"]["ratio"] > 1


def test_sweep_writes_json_and_csv(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--ns", "10,12", "--trials", "2", "--output", str(out)])
    assert code == 0
    rep = json.loads(out.with_suffix(".json").read_text())
    assert len(rep["trials"]) == 4
    assert rep["summary"]["monotone"][0]["delta"] == 0.5
    lines = out.with_suffix(".csv").read_text().splitlines()
    assert lines[0].startswith("N,delta,alpha,trial")
    assert len(lines) == 5


def test_stdout_report(capsys):
    assert main(["compare-iid", "--n", "12", "--r", "4", "--trials", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"]["subcommand"] == "compare-iid"


@pytest.mark.slow
def test_certify_desk_scale_run(tmp_path):
    out = tmp_path / "desk"
    code = main(["certify", "--n", "100", "--delta", "0.5", "--alpha", "0.2", "--trials", "5",
                 "--seed", "7", "--output", str(out)])
    rep = json.loads(out.with_suffix(".json").read_text())
    assert len(rep["trials"]) == 5
    statuses = [t["psd"]["status"] for t in rep["trials"]]
    assert statuses == ["PASS"] * 5, [t["psd"]["lambda_min"] for t in rep["trials"]]
    assert code == 0
