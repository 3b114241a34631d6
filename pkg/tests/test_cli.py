"""CLI surface tests: every subcommand, config file plumbing, exit codes."""

import json

import pytest

from hqcspa.cli import main


def test_mul_prints_product(capsys):
    assert main(["mul", "-a", "3", "-b", "3"]) == 0
    out = capsys.readouterr().out
    assert "lo=0x0000000000000005" in out
    assert "hi=0x0000000000000000" in out


def test_mul_kernels_agree(capsys):
    outputs = set()
    for kernel in ("win", "serial", "direct", "masked"):
        main(["mul", "-a", "deadbeef12345678", "-b", "abcdef", "--kernel", kernel])
        outputs.add(capsys.readouterr().out)
    assert len(outputs) == 1


def test_mul_rejects_oversized_limb():
    with pytest.raises(SystemExit):
        main(["mul", "-a", "1" * 17, "-b", "0"])


def test_simulate_then_attack(tmp_path, capsys):
    trace = tmp_path / "t.gft"
    assert main(["simulate", "-a", "00000000000000a4", "--seed", "5",
                 "--out", str(trace)]) == 0
    report = tmp_path / "rep.json"
    assert main(["attack", "--trace", str(trace), "--out", str(report)]) == 0
    out = capsys.readouterr().out
    assert "limb success: True" in out
    obj = json.loads(report.read_text())
    assert obj["recovered"] == "00000000000000a4"
    assert obj["limb_success"] is True


def test_attack_without_inputs_errors(capsys):
    assert main(["attack"]) == 2


def test_simulate_no_truth(tmp_path, capsys):
    trace = tmp_path / "t.gft"
    main(["simulate", "-a", "ff", "--no-truth", "--out", str(trace)])
    main(["attack", "--trace", str(trace)])
    out = capsys.readouterr().out
    assert "limb success" not in out
    assert "recovered limb: 0x00000000000000ff" in out


def test_attack_full_key_small_ring(capsys):
    assert main(["attack", "--full-key", "--n", "256", "--w", "10",
                 "--seed", "3", "--sigma", "0"]) == 0
    assert "exact=True" in capsys.readouterr().out


def test_evaluate_requires_seed(capsys):
    assert main(["evaluate", "--trials", "2"]) == 2


def test_evaluate_writes_outputs(tmp_path, capsys):
    outdir = tmp_path / "run"
    rc = main(["evaluate", "--trials", "3", "--sigma", "0", "--seed", "1",
               "--out", str(outdir), "--assert"])
    assert rc == 0
    assert (outdir / "report.json").exists()
    for stem in ("cm_first_window", "cm_rest"):
        assert (outdir / f"{stem}.csv").exists()
        assert (outdir / f"{stem}.png").exists()
    obj = json.loads((outdir / "report.json").read_text())
    assert obj["success_rate"] == 1.0


def test_evaluate_assert_failure_exits_2(capsys):
    # absurd noise cannot meet the thresholds
    rc = main(["evaluate", "--trials", "4", "--sigma", "3.0", "--seed", "1",
               "--assert"])
    assert rc == 2


def test_evaluate_seed_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 4, "trials": 2, "sigma": 0.0}))
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert "success rate: 100.0000%" in capsys.readouterr().out


def test_config_attack_section(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"attack": {"drop_fraction": 0.4}}))
    trace = tmp_path / "t.gft"
    main(["simulate", "-a", "12", "--out", str(trace)])
    report = tmp_path / "rep.json"
    main(["attack", "--trace", str(trace), "--config", str(cfg),
          "--out", str(report)])
    obj = json.loads(report.read_text())
    assert obj["config"]["drop_fraction"] == 0.4


def test_bench_table_and_ratio(capsys, tmp_path):
    out = tmp_path / "bench.json"
    assert main(["bench", "--calls", "2048", "--seed", "1",
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "win/direct per-call ratio" in text
    rows = json.loads(out.read_text())
    assert {r["kernel"] for r in rows} == {"win", "serial", "direct"}
    assert len({r["checksum"] for r in rows}) == 1


def test_export_trace_and_matrix(tmp_path, capsys):
    trace = tmp_path / "t.gft"
    main(["simulate", "-a", "a", "--out", str(trace)])
    csv_path = tmp_path / "t.csv"
    assert main(["export", "--trace", str(trace), "--out", str(csv_path)]) == 0
    assert csv_path.exists() and (tmp_path / "t.png").exists()

    outdir = tmp_path / "run"
    main(["evaluate", "--trials", "2", "--sigma", "0", "--seed", "1",
          "--out", str(outdir)])
    cm_csv = tmp_path / "cm.csv"
    assert main(["export", "--report", str(outdir / "report.json"),
                 "--matrix", "rest", "--out", str(cm_csv)]) == 0
    assert cm_csv.exists() and (tmp_path / "cm.png").exists()


def test_export_without_inputs_errors(tmp_path):
    assert main(["export", "--out", str(tmp_path / "x.csv")]) == 2
