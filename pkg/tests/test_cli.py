import csv
import io
import json
from pathlib import Path

import pytest

from edgessm.cli import main
from edgessm.report import COLUMNS, verify_report

ROOT = Path(__file__).resolve().parents[1]
MODEL = str(ROOT / "configs" / "mamba1-880m")
HW = str(ROOT / "hw" / "edge-asic-default")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_mamba1(capsys):
    code, out, _ = run(capsys, "analyze", MODEL, HW, "--format", "csv")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["total_gops"]) == pytest.approx(1.52, rel=0.02)
    assert float(row["throughput_tok_s"]) == pytest.approx(336.7, rel=0.02)
    assert row["bound"] == "ComputeBound"


def test_analyze_missing_file_exits_2(capsys):
    code, _, err = run(capsys, "analyze", str(ROOT / "configs" / "nope"), HW)
    assert code == 2 and "nope" in err


def test_analyze_zero_layers_reports_empty_workload(capsys):
    code, out, _ = run(capsys, "analyze", MODEL, HW, "--layers", "0")
    assert code == 0 and "empty workload" in out
    code, out, _ = run(capsys, "analyze", MODEL, HW, "--layers", "0", "--format", "json")
    row = json.loads(out)["rows"][0]
    assert row["total_gops"] == 0 and row["throughput_tok_s"] is None


def test_analyze_rejects_incompatible_formulation(capsys):
    code, _, err = run(capsys, "analyze", MODEL, HW, "--formulation", "ssd")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "analyze", MODEL, HW, "--phase", "decode", "--formulation", "pscan")
    assert code == 2


def test_bad_config_file_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.write_text("variant = mamba2\nd_model = 256\nd_state = 64\nn_layers = two\n")
    code, _, err = run(capsys, "analyze", str(bad), HW)
    assert code == 2 and "n_layers" in err


def test_compare_markdown_has_six_rows(capsys):
    code, out, _ = run(capsys, "compare")
    assert code == 0
    assert sum(line.startswith("| Mamba-") for line in out.splitlines()) == 6
    assert "Mamba-3 vs Mamba-2" in out


def test_compare_csv_header_and_line_endings(capsys):
    code, out, _ = run(capsys, "compare", "--format", "csv")
    assert code == 0
    assert out.split("\r\n")[0] == ",".join(COLUMNS)
    assert len(list(csv.DictReader(io.StringIO(out)))) == 6


def test_compare_json_round_trip(tmp_path, capsys):
    path = tmp_path / "report.json"
    code, _, _ = run(capsys, "compare", "--format", "json", "--out", str(path),
                     "--config-dir", str(ROOT / "configs"), "--hw", HW)
    assert code == 0
    doc = json.loads(path.read_text())
    assert list(doc["rows"][0]) == COLUMNS
    assert set(doc["metadata"]) >= {"tool", "version", "configs", "hardware"}
    assert verify_report(path.read_text()) == []


def test_verify_report_detects_tampering(capsys):
    _, out, _ = run(capsys, "compare", "--format", "json")
    doc = json.loads(out)
    doc["rows"][2]["total_gops"] *= 1.5
    assert len(verify_report(json.dumps(doc))) == 1


def test_sweep_size_csv(capsys):
    code, out, _ = run(capsys, "sweep", "size", "--from", "15e6", "--to", "880e6", "--points", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("# mode=roofline")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 3 and all(float(r["mamba2"]) == 1.0 for r in rows)
    m3 = [float(r["mamba3"]) for r in rows]
    assert m3 == sorted(m3, reverse=True)


def test_sweep_empty_range_warns(capsys):
    code, out, err = run(capsys, "sweep", "size", "--from", "880e6", "--to", "15e6")
    assert code == 0 and "warning" in err
    assert out.strip().splitlines()[-1] == "params,mamba1,mamba2,mamba3"


def test_sweep_batch_monotone(capsys):
    code, out, _ = run(capsys, "sweep", "batch", "--batches", "1,8,64,1024", "--format", "json")
    assert code == 0
    tput = [r["throughput_tok_s"] for r in json.loads(out)["rows"]]
    assert tput == sorted(tput)


def test_sweep_bad_batches_exit_2(capsys):
    assert run(capsys, "sweep", "batch", "--batches", "1,x")[0] == 2
    assert run(capsys, "sweep", "batch", "--batches", "0,4")[0] == 2


def test_sweep_svg_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        assert run(capsys, "sweep", "size", "--points", "2", "--svg", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("<svg")


def test_oracle_check_passes(capsys):
    code, out, _ = run(capsys, "oracle-check", "--instances", "50")
    assert code == 0 and "all" in out and "passed" in out


def test_oracle_check_single_step(capsys):
    code, _, _ = run(capsys, "oracle-check", "--instances", "20", "--sizes", "L=1")
    assert code == 0


@pytest.mark.parametrize("fault", ["pscan", "ssd"])
def test_oracle_check_injected_fault(capsys, fault):
    code, out, _ = run(capsys, "oracle-check", "--instances", "5", "--inject-fault", fault)
    assert code == 1
    assert f"FAIL {fault}" in out


def test_oracle_check_bad_sizes(capsys):
    assert run(capsys, "oracle-check", "--sizes", "8")[0] == 2
    assert run(capsys, "oracle-check", "--sizes", "L=0")[0] == 2


def test_seed_changes_corpus(capsys):
    _, a, _ = run(capsys, "--seed", "1", "oracle-check", "--instances", "10")
    _, b, _ = run(capsys, "--seed", "2", "oracle-check", "--instances", "10")
    _, c, _ = run(capsys, "--seed", "1", "oracle-check", "--instances", "10")
    assert a == c and a != b
