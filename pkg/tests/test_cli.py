import json
import subprocess
import sys

import pytest

from hypercouple.chains import is_proper
from hypercouple.cli import main
from hypercouple.hypergraph import parse_hypergraph

EDGE3 = "3 1\n0 1 2\n"


@pytest.fixture
def edge3_file(tmp_path):
    p = tmp_path / "edge3.txt"
    p.write_text(EDGE3)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_frozen(capsys):
    code, out, err = run(capsys, "gen", "frozen", "--q", "2", "--m", "3")
    H = parse_hypergraph(out)
    assert code == 0 and H.n == 4 and len(H.edges) == 4
    assert json.loads(err)["is_uniform"]


def test_gen_random_deterministic(tmp_path, capsys):
    args = ["gen", "random", "--n", "30", "--m", "7", "--delta", "3", "--edges", "12", "--seed", "1"]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    assert parse_hypergraph(a.read_text()).min_edge_size == 7


def test_gen_blowup(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("2 1\n0 1\n")
    code, out, _ = run(capsys, "gen", "blowup", "--graph", str(g), "--m", "4")
    H = parse_hypergraph(out)
    assert code == 0 and H.edges == ((0, 1, 2, 3),)


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYPERCOUPLE_OUTPUT_DIR", str(tmp_path))
    assert main(["gen", "frozen", "--q", "2", "--m", "3", "-o", "f.txt"]) == 0
    capsys.readouterr()
    assert parse_hypergraph((tmp_path / "f.txt").read_text()).n == 4


def test_bounds_edge_process(capsys):
    code, out, _ = run(capsys, "bounds", "edge-process", "--m", "3", "--lambda", "1")
    rows = json.loads(out)["rows"]
    assert code == 0 and [r["p_k"] for r in rows] == ["2/7", "1/7"]


def test_bounds_beta_star_csv(capsys):
    code, out, _ = run(capsys, "bounds", "beta-star", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# config:")
    beta, qf = map(float, lines[2].split(",")[:2])
    assert abs(beta - 0.392729) < 1e-5 and abs(qf - 1.64671) < 1e-4


def test_bounds_tau_stopping(capsys):
    code, out, _ = run(
        capsys, "bounds", "tau", "--bound", "stopping", "--p", "0.5", "--alpha", "0.5",
        "--d1", "10", "--d2", "2", "--eps", "0.01",
    )
    assert code == 0 and json.loads(out)["rows"][0]["tau"] == pytest.approx(168.5, abs=0.1)


def test_bounds_precondition_reported(capsys):
    code, out, _ = run(
        capsys, "bounds", "tau", "--bound", "colouring", "--n", "10", "--q", "3", "--delta", "3",
        "--m", "4", "--eps", "0.1",
    )
    assert code == 2 and "error" in json.loads(out)["rows"][0]


def test_bounds_sweep(capsys):
    code, out, _ = run(capsys, "bounds", "alpha", "--m", "3,5,7", "--delta", "1,2")
    assert code == 0 and len(json.loads(out)["rows"]) == 6


def test_count_indsets(edge3_file, capsys):
    code, out, _ = run(capsys, "count", "indsets", "-i", edge3_file)
    assert code == 0 and json.loads(out)["total"] == 7


def test_count_weak(capsys):
    code, out, _ = run(capsys, "count", "weak-colourings", "--m", "3", "--q", "3", "--mode", "brute")
    assert code == 0 and json.loads(out)["M_m"] == 6


def test_couple_outputs(edge3_file, capsys):
    code, out, _ = run(capsys, "couple", "-i", edge3_file, "--kind", "indset", "--replicates", "500", "--seed", "2")
    rec = json.loads(out)
    assert code == 0 and rec["config"]["seed"] == 2 and set(rec["distance_histogram"]) <= {"0", "2"}
    code, out, _ = run(
        capsys, "couple", "-i", edge3_file, "--kind", "indset", "--replicates", "50", "--seed", "2", "--format", "csv"
    )
    lines = out.splitlines()
    assert lines[0].startswith("# config:") and lines[1] == "replicate,T,distance,censored" and len(lines) == 52


def test_couple_reproducible(edge3_file, capsys):
    args = ["couple", "-i", edge3_file, "--kind", "colouring", "--q", "3", "--replicates", "300", "--seed", "4"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b


def test_replicates_zero_is_usage_error(edge3_file, capsys):
    code, _, _ = run(capsys, "couple", "-i", edge3_file, "--kind", "indset", "--replicates", "0")
    assert code == 1


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "edge-process", "--nope"])
    assert exc.value.code == 1


def test_bad_file_is_infeasible(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("3 2\n0 1 2\n")
    code, _, err = run(capsys, "count", "indsets", "-i", str(p))
    assert code == 2 and "line" in err


def test_frozen_couple_infeasible(tmp_path, capsys):
    p = tmp_path / "frozen.txt"
    main(["gen", "frozen", "--q", "2", "--m", "3", "-o", str(p)])
    code, _, _ = run(capsys, "couple", "-i", str(p), "--kind", "colouring", "--q", "2", "--replicates", "10")
    assert code == 2


def test_tv(edge3_file, capsys):
    code, out, _ = run(capsys, "tv", "-i", edge3_file, "--kind", "indset", "--samples", "1000000", "--seed", "1")
    assert code == 0 and json.loads(out)["tv"] < 0.02


def test_sample_proper(edge3_file, capsys):
    code, out, _ = run(capsys, "sample", "-i", edge3_file, "--kind", "colouring", "--q", "2", "--t", "1000", "--seed", "3")
    rec = json.loads(out)
    H = parse_hypergraph(EDGE3)
    assert code == 0 and rec["seed"] == 3 and is_proper(H, rec["final_state"], 2)


def test_gamble(capsys):
    code, out, _ = run(capsys, "gamble", "--p", "0.5", "--alpha", "0.5", "--replicates", "2000", "--seed", "1")
    rec = json.loads(out)
    assert code == 0 and rec["rows"][0]["mean_N"] == 1.0


def test_stdin_via_module():
    proc = subprocess.run(
        [sys.executable, "-m", "hypercouple", "count", "indsets", "-i", "-"],
        input=EDGE3, capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["total"] == 7
