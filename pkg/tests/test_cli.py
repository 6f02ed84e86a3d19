import csv
import io
import json
import math

import numpy as np
import pytest

from cvqkd_finite import pipeline
from cvqkd_finite.cli import main
from cvqkd_finite.confidence import delta_cov_beta, delta_cov_gauss, delta_var_beta, delta_var_gauss
from cvqkd_finite.config import load_config
from cvqkd_finite.estimation import MomentEstimates, TrustedReceiver
from cvqkd_finite.security import aep_penalty

SMALL = ["--override", "run.n_total=1000000", "--override", "calibration.m=100000"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "data"
    assert main(["simulate", "--out", str(out), *SMALL]) == 0
    return out


def _json(path):
    return json.loads(path.read_text())


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_file_contract(run_dir):
    names = sorted(p.name for p in run_dir.iterdir())
    blocks = [n for n in names if n.startswith("block_")]
    assert len(blocks) == 25 and blocks[0] == "block_000.bin" and blocks[-1] == "block_024.bin"
    assert "manifest.json" in names
    assert {"calibration_vacuum.bin", "calibration_electronic.bin"} <= set(names)
    assert len(names) == 28
    manifest = _json(run_dir / "manifest.json")
    assert manifest["seed"] == 20210901 and manifest["n_total"] == 10**6
    assert manifest["config"]["channel.eta"] == 0.35


def test_simulate_rerun_is_byte_identical(run_dir, tmp_path):
    again = tmp_path / "again"
    assert main(["simulate", "--out", str(again), "--workers", "3", *SMALL]) == 0
    for p in run_dir.iterdir():
        assert (again / p.name).read_bytes() == p.read_bytes(), p.name


def test_simulate_rejects_bad_blocks_before_io(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["simulate", "--out", str(out), "--override", "run.blocks=7"]) == 2
    assert not out.exists()
    assert "divisible" in capsys.readouterr().err


def test_keylen_report(run_dir, tmp_path):
    out = tmp_path / "report.json"
    assert main(["keylen", "--data", str(run_dir), "--out", str(out), *SMALL]) == 0
    body = _json(out)
    rep = body["report"]
    for key in ("signed_bound", "key_length", "leak_bits", "aep_penalty_bits", "entropy_penalty_bits",
                "ir_projection_bits", "hash_penalty_bits", "holevo_bits", "h_hat_bits", "n_prime"):
        assert key in rep
    assert rep["key_length"] == max(0, math.floor(rep["signed_bound"]))
    assert rep["n_prime"] == math.floor(10**6 * (1 - 0.0036))
    # full resolved configuration is embedded
    assert body["config"] == load_config(overrides=SMALL[1::2]).to_dict()
    assert body["estimates"]["receiver"]["m"] == 10**9


def test_keylen_chi_override_zero(run_dir, tmp_path):
    out = tmp_path / "r0.json"
    args = ["keylen", "--data", str(run_dir), "--out", str(out), *SMALL, "--override", "pipeline.chi_override=0"]
    assert main(args) == 0
    rep = _json(out)["report"]
    n = rep["n_prime"]
    want = (n * rep["h_hat_bits"] - rep["leak_bits"]
            - math.log2(n) * math.sqrt(2 * n * math.log2(2e10))
            - math.sqrt(n) * aep_penalty(0.9964 / 3 * 1e-20, 6)
            + math.log2(0.9964 * (1 - 1e-20 / 3)) + 2 * math.log2(math.sqrt(2) * 1e-10))
    assert rep["holevo_bits"] == 0.0
    assert rep["signed_bound"] == pytest.approx(want, rel=1e-12)


def test_corrupted_header_exits_3(run_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    for p in run_dir.iterdir():
        (bad / p.name).write_bytes(p.read_bytes())
    raw = bytearray((bad / "block_004.bin").read_bytes())
    raw[0:8] = b"XXXXXXXX"
    (bad / "block_004.bin").write_bytes(bytes(raw))
    assert main(["keylen", "--data", str(bad), *SMALL]) == 3
    assert "block_004.bin" in capsys.readouterr().err


def test_missing_data_dir_exits_3(tmp_path):
    assert main(["estimate", "--data", str(tmp_path / "nowhere")]) == 3


def test_calibrate_and_estimate(run_dir, tmp_path):
    assert main(["calibrate", "--data", str(run_dir), "--out", str(tmp_path / "c.json"), *SMALL]) == 0
    rec = _json(tmp_path / "c.json")["receiver"]
    assert rec["t_hat"] == pytest.approx(25.71e-3, rel=0.05)
    assert rec["v_shot_minus"] < rec["v_shot_hat"] < rec["v_shot_plus"]
    assert main(["estimate", "--data", str(run_dir), "--out", str(tmp_path / "e.json"), *SMALL]) == 0
    est = _json(tmp_path / "e.json")
    assert est["moments"]["n"] == 10**6
    assert est["point"]["eta"] == pytest.approx(0.35, abs=0.01)
    assert est["worst_case"]["eta"] < est["point"]["eta"]


def test_single_block_sweep_matches_keylen(tmp_path):
    data = tmp_path / "one"
    over = ["--override", "run.n_total=400000", "--override", "run.blocks=1",
            "--override", "calibration.m=100000", "--override", "sweep.block_symbols=0",
            "--override", "pipeline.chi_override=0.2"]
    assert main(["simulate", "--out", str(data), *over]) == 0
    assert main(["keylen", "--data", str(data), "--out", str(tmp_path / "k.json"), *over]) == 0
    assert main(["sweep", "--data", str(data), "--out", str(tmp_path / "s.csv"), *over]) == 0
    rep = _json(tmp_path / "k.json")["report"]
    (row,) = _csv(tmp_path / "s.csv")
    assert int(row["N"]) == 400_000
    assert float(row["bound_worst"]) == rep["signed_bound"]
    assert float(row["skf_worst"]) == rep["skf"]
    assert float(row["u_worst"]) == rep["worst_case_params"]["u"]


def test_sweep_columns_and_monotone_n(run_dir, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--data", str(run_dir), "--out", str(out), *SMALL,
                 "--override", "sweep.k_values=5,10,25"]) == 0
    raw = out.read_bytes()
    assert b"\r\n" in raw
    rows = _csv(out)
    assert list(rows[0]) == list(pipeline.SWEEP_COLUMNS)
    assert [int(r["k"]) for r in rows] == [5, 10, 25]
    assert [int(r["N"]) for r in rows] == [2e8, 4e8, 1e9]
    assert float(rows[0]["time_s"]) == 2.0


def test_sweep_k_beyond_blocks(run_dir):
    assert main(["sweep", "--data", str(run_dir), *SMALL, "--override", "run.blocks=50",
                 "--override", "sweep.k_values=30"]) == 2


def test_intervals_table(tmp_path):
    out = tmp_path / "i.csv"
    assert main(["intervals", "--out", str(out)]) == 0
    rows = _csv(out)
    assert len(rows) == 50
    assert int(rows[0]["n"]) == 10**4 and int(rows[-1]["n"]) == 10**9
    for r in rows:
        assert float(r["delta_var_gauss"]) <= float(r["delta_var_beta"])
        assert float(r["delta_cov_gauss"]) <= float(r["delta_cov_beta"])


def test_intervals_values_match_library(capsys):
    assert main(["intervals", "--override", "intervals.n_min=1e6", "--override", "intervals.n_max=1e6",
                 "--override", "intervals.rows=1"]) == 0
    (row,) = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(row["delta_var_beta"]) == delta_var_beta(10**6, 1e-10)
    assert float(row["delta_cov_beta"]) == delta_cov_beta(10**6, 1e-10)
    assert float(row["delta_var_gauss"]) == delta_var_gauss(10**6, 1e-10)
    assert float(row["delta_cov_gauss"]) == delta_cov_gauss(10**6, 1e-10)


def test_outputs_are_deterministic(run_dir, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["keylen", "--data", str(run_dir), "--out", str(out), *SMALL]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bad_override_exit_code(capsys):
    assert main(["intervals", "--override", "intervals.eps=2"]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    data = tmp_path / "bad_channel"
    over = ["--override", "run.n_total=100000", "--override", "run.blocks=1",
            "--override", "calibration.enabled=false", "--override", "channel.eta=0.001",
            "--override", "channel.u=0"]
    assert main(["simulate", "--out", str(data), *over]) == 0
    # tiny transmittance and no excess noise: sampling noise drives the estimate of u negative
    assert main(["estimate", "--data", str(data), *over]) == 4


def test_method_flag(run_dir, tmp_path):
    out = tmp_path / "g.json"
    assert main(["keylen", "--data", str(run_dir), "--out", str(out), "--method", "gaussian", *SMALL]) == 0
    body = _json(out)
    assert body["config"]["run.interval_method"] == "gaussian"


def test_sweep_rows_nan_when_estimate_unphysical():
    cfg = load_config(overrides=["sweep.block_symbols=0"])
    counts = np.ones(cfg.dig.num_bins)
    # y below the trusted noise floor: channel estimate fails in both traces
    summary = pipeline.BlockSummary(0, MomentEstimates(1.45, 1.0, 0.1, 1000), counts)
    (row,) = pipeline.sweep_rows(cfg, [summary], TrustedReceiver(0.69, 25.71e-3))
    assert math.isnan(row["skf_worst"]) and math.isnan(row["threshold"])
