import csv
import json
import subprocess
import sys

import pytest

from bmldroom.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_direct_only_rir_reports_infinite_drr(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out", str(tmp_path), "rir", "--room", "lab",
                        "--alpha", "0.1", "--src-az", "0", "--truncate", "15")
    assert code == 0
    assert "DRR +inf dB" in out
    side = json.loads((tmp_path / "rir.json").read_text())
    assert side["drr_db"] == "inf"
    assert {"tool_version", "config_hash", "seed"} <= set(side)


def test_rir_rt60_summary(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out", str(tmp_path), "rir", "--alpha", "0.5")
    assert code == 0
    rt_ms = float(out.split("RT60")[1].split("ms")[0])
    assert rt_ms == pytest.approx(302.0, rel=0.25)


def test_rerun_is_byte_identical(tmp_path, capsys):
    outs = []
    for d in ("a", "b"):
        root = tmp_path / d
        assert main(["--out", str(root), "rir", "--alpha", "0.1", "--seed", "4"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(root.iterdir())})
    assert outs[0] == outs[1] and len(outs[0]) == 2


def test_experiment_two_fast_rows(tmp_path, capsys):
    code, _, _ = _run(capsys, "--out", str(tmp_path), "experiment", "--exp", "2",
                      "--variant", "fast", "--jobs", "2", "--name", "e2")
    assert code == 0
    lines = [ln for ln in (tmp_path / "e2.csv").read_text().splitlines()
             if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    assert len(rows) == 14 and {r["variant"] for r in rows} == {"fast"}

    code, out, _ = _run(capsys, "--out", str(tmp_path), "evaluate", "--pred",
                        str(tmp_path / "e2.csv"), "--data", str(tmp_path / "e2.csv"))
    assert code == 0
    metrics = json.loads((tmp_path / "evaluation.json").read_text())
    assert metrics["fast"]["rmse"] == pytest.approx(0.0, abs=1e-9)
    assert metrics["fast"]["pearson"] == pytest.approx(1.0)


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def test_evaluate_anticorrelated_and_errors(tmp_path, capsys):
    pred = [{"condition_id": f"c{i}", "variant": "fast", "threshold_db": str(t)}
            for i, t in enumerate((1.0, 2.0, 3.0))]
    _write_csv(tmp_path / "p.csv", pred)
    _write_csv(tmp_path / "d.csv", [{"condition_id": f"c{i}", "threshold_db": str(-t)}
                                    for i, t in enumerate((1.0, 2.0, 3.0))])
    code, _, _ = _run(capsys, "--out", str(tmp_path), "evaluate", "--pred",
                      str(tmp_path / "p.csv"), "--data", str(tmp_path / "d.csv"))
    assert code == 0
    m = json.loads((tmp_path / "evaluation.json").read_text())
    assert m["fast"]["pearson"] == pytest.approx(-1.0)

    _write_csv(tmp_path / "u.csv", [{"condition_id": "zz", "threshold_db": "1"}])
    code, _, err = _run(capsys, "--out", str(tmp_path), "evaluate", "--pred",
                        str(tmp_path / "p.csv"), "--data", str(tmp_path / "u.csv"))
    assert code == 2 and "zz" in err

    _write_csv(tmp_path / "one.csv", [{"condition_id": "c0", "threshold_db": "1"}])
    code, _, _ = _run(capsys, "--out", str(tmp_path), "evaluate", "--pred",
                      str(tmp_path / "p.csv"), "--data", str(tmp_path / "one.csv"))
    assert code == 2


def test_config_errors_exit_two(tmp_path, capsys):
    assert _run(capsys, "--out", str(tmp_path), "rir", "--alpha", "1.5")[0] == 2
    assert _run(capsys, "--out", str(tmp_path), "rir", "--distance", "50")[0] == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.5, "bogus": 1}))
    assert _run(capsys, "--out", str(tmp_path), "--config", str(cfg), "rir")[0] == 2


def test_config_file_sets_defaults(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.5, "truncate": 15}))
    code, out, _ = _run(capsys, "--out", str(tmp_path), "--config", str(cfg), "rir")
    assert code == 0 and "+inf" in out


def test_stimuli_predict_staircase(tmp_path, capsys):
    o = str(tmp_path)
    assert main(["--out", o, "stimuli", "--kind", "band", "--f-lo", "400", "--f-hi", "600",
                 "--duration", "0.5", "--name", "n"]) == 0
    assert main(["--out", o, "render", "--alpha", "0.5", "--signal", str(tmp_path / "n.wav"),
                 "--name", "b"]) == 0
    assert main(["--out", o, "predict", "--target", str(tmp_path / "b_signal.wav"),
                 "--masker", str(tmp_path / "b_signal.wav"), "--variant", "fast"]) == 0
    assert main(["--out", o, "analyze", "--rir", str(tmp_path / "b.wav")]) == 0
    assert main(["--out", o, "staircase", "--n-tracks", "20"]) == 0
    capsys.readouterr()


def test_module_entry_point_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bmldroom.cli", "--out", str(tmp_path), "rir",
                        "--alpha", "2"], capture_output=True, text=True)
    assert r.returncode == 2 and "error" in r.stderr
