import json
import os

import numpy as np
import pytest

from equipart.cli import emit_json, main
from equipart.datasets import complete_graph, disjoint_cliques, path_graph
from equipart.graph_io import save_graph


@pytest.fixture
def k4_file(tmp_path):
    p = tmp_path / "k4.txt"
    save_graph(p, complete_graph(4))
    return p


def test_emit_json_roundtrip():
    rng = np.random.default_rng(0)
    payload = {
        "schema": 1,
        "values": [float(x) for x in rng.standard_normal(20)],
        "tiny": 1e-300,
        "big": 1.2345678901234567e18,
        "nested": {"a": [1, 2.5, "s"], "b": True, "c": None},
    }
    text = emit_json(payload)
    parsed = json.loads(text)
    assert parsed["values"] == payload["values"]
    assert parsed["tiny"] == payload["tiny"]
    assert parsed["big"] == payload["big"]
    # emit(parse(emit(x))) is byte-identical
    assert emit_json(parsed) == text


def test_check_command(k4_file, capsys):
    assert main(["check", "--input", str(k4_file)]) == 0
    out = capsys.readouterr().out
    assert "n = 4" in out and "edges = 6" in out


def test_check_bad_file(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("3 1\n2 2\n")
    assert main(["check", "--input", str(p)]) == 1
    assert "self-loop" in capsys.readouterr().err


def test_bisect_json_output(k4_file, tmp_path, capsys):
    report_path = tmp_path / "rep.json"
    code = main(
        ["bisect", "--input", str(k4_file), "--seed", "1", "--output", "json", "--report", str(report_path)]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schema"] == 1
    assert payload["obj"] == pytest.approx(16.0, abs=1e-8)
    assert payload["f"] == pytest.approx(8.0, abs=1e-8)
    assert json.loads(report_path.read_text()) == payload


def test_json_deterministic_modulo_time(k4_file, capsys):
    def run():
        main(["bisect", "--input", str(k4_file), "--seed", "7", "--output", "json"])
        d = json.loads(capsys.readouterr().out)
        d.pop("wall_time")
        return d

    assert run() == run()


def test_equipart_requires_k3(k4_file):
    with pytest.raises(SystemExit):
        main(["equipart", "--input", str(k4_file), "--k", "2"])


def test_equipart_runs(tmp_path, capsys):
    p = tmp_path / "k6.txt"
    save_graph(p, complete_graph(6))
    code = main(["equipart", "--input", str(p), "--k", "3", "--output", "json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["obj"] == pytest.approx(36.0, abs=1e-8)


def test_bench_manifest(tmp_path, capsys):
    save_graph(tmp_path / "k4.txt", complete_graph(4))
    save_graph(tmp_path / "p4.txt", path_graph(4))
    save_graph(tmp_path / "cliq.txt", disjoint_cliques([4, 4]))
    manifest = tmp_path / "m.txt"
    manifest.write_text(
        "# file, kind, k, expected_obj, rel_tol\n"
        "k4.txt, bisect, 2, 8.0, 1e-6\n"
        "p4.txt, bisect, 2, 2.0, 1e-6\n"
        "cliq.txt, bisect, 2, 0.0, 1e-6\n"
        "missing.txt, bisect, 2, 1.0, 1e-6\n"
    )
    code = main(["bench", "--manifest", str(manifest), "--data-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("PASS") == 3
    assert "SKIP" in out


def test_bench_failure_exit_code(tmp_path, capsys):
    save_graph(tmp_path / "k4.txt", complete_graph(4))
    manifest = tmp_path / "m.txt"
    manifest.write_text("k4.txt, bisect, 2, 5.0, 1e-6\n")
    assert main(["bench", "--manifest", str(manifest), "--data-dir", str(tmp_path)]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_bench_bad_manifest(tmp_path, capsys):
    manifest = tmp_path / "m.txt"
    manifest.write_text("only, three, fields\n")
    assert main(["bench", "--manifest", str(manifest)]) == 1


def test_gen_data_and_bench_integration(tmp_path, capsys):
    assert main(["gen-data", "--out", str(tmp_path / "data")]) == 0
    capsys.readouterr()
    listing = os.listdir(tmp_path / "data")
    assert "hamming6-2.mtx" in listing
    assert "table1.manifest" in listing and "table2.manifest" in listing
    # spot check: the smallest instance round-trips through bench
    manifest = tmp_path / "small.manifest"
    manifest.write_text("hamming6-2.mtx, bisect, 2, 64.0, 1e-4\n")
    code = main(["bench", "--manifest", str(manifest), "--data-dir", str(tmp_path / "data")])
    assert code == 0
    assert "PASS" in capsys.readouterr().out


def test_data_dir_env_var(tmp_path, capsys, monkeypatch):
    save_graph(tmp_path / "k4.txt", complete_graph(4))
    manifest = tmp_path / "m.txt"
    manifest.write_text("k4.txt, bisect, 2, 8.0, 1e-6\n")
    monkeypatch.setenv("EQUIPART_DATA_DIR", str(tmp_path))
    assert main(["bench", "--manifest", str(manifest)]) == 0
