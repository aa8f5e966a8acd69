import json
import subprocess
import sys

import pytest

from qite_udmis.cli import main
from qite_udmis.graph import benchmark_graph_6q, load_graph, save_graph


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def bench_file(tmp_path):
    path = tmp_path / "bench.txt"
    save_graph(benchmark_graph_6q(), path)
    return str(path)


def test_generate_roundtrip(tmp_path):
    out = tmp_path / "g.txt"
    assert run_cli("generate", "-n", "6", "--box", "1.8", "--seed", "1", "-o", str(out)) == 0
    g = load_graph(out)
    assert g.n_vertices == 6
    # rerunning with the same seed reproduces the same file
    out2 = tmp_path / "g2.txt"
    run_cli("generate", "-n", "6", "--box", "1.8", "--seed", "1", "-o", str(out2))
    assert out.read_text() == out2.read_text()


def test_generate_bench6(tmp_path):
    out = tmp_path / "bench.txt"
    assert run_cli("generate", "--bench6", "-o", str(out)) == 0
    assert load_graph(out) == benchmark_graph_6q()


def test_generate_invalid_n(tmp_path):
    assert run_cli("generate", "-n", "0", "-o", str(tmp_path / "x.txt")) == 2


def test_bruteforce_output(bench_file, capsys):
    assert run_cli("bruteforce", bench_file) == 0
    out = capsys.readouterr().out
    assert "MIS size 2; 3 witnesses" in out
    assert "001001" in out


def test_spectrum_output(bench_file, capsys):
    assert run_cli("spectrum", bench_file, "-u", "1.35", "--levels", "2") == 0
    assert capsys.readouterr().out.strip() == "(-2, 3), (-1.65, 2)"


def test_solve_json(bench_file, capsys):
    assert run_cli("solve", bench_file, "--n-max", "100", "-M", "12", "--seed", "1") == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {"seed", "best_energy", "best_bitstring", "success"}
    assert payload["best_energy"] <= -1.65
    assert payload["success"] is True


def test_solve_full_domain_small_graph(tmp_path, capsys):
    path = tmp_path / "small.txt"
    run_cli("generate", "-n", "4", "--seed", "3", "-o", str(path))
    capsys.readouterr()
    assert run_cli("solve", str(path), "--domain", "full", "--n-max", "400",
                   "--tau", "0.01", "-M", "8", "--seed", "2") == 0
    payload = json.loads(capsys.readouterr().out)
    from qite_udmis.hamiltonian import from_udmis, spectrum

    spec = spectrum(from_udmis(load_graph(path), 1.35))
    assert payload["best_energy"] == pytest.approx(spec.ground_energy)


def test_missing_file_exit_code(capsys):
    assert run_cli("bruteforce", "/nonexistent/graph.txt") == 2
    assert "not found" in capsys.readouterr().err


def test_bad_domain_kind_exit_code(tmp_path, capsys):
    assert run_cli("characterize", "--bench6", "--out", str(tmp_path),
                   "--n-max", "5", "--domains", "A,Q") == 2
    assert "error:" in capsys.readouterr().err


def test_help_and_unknown_flags():
    with pytest.raises(SystemExit) as exc:
        run_cli("--help")
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        run_cli("solve", "--no-such-flag")
    assert exc.value.code != 0


def test_characterize_flags(tmp_path, capsys):
    assert run_cli("characterize", "--bench6", "--out", str(tmp_path), "--name", "c",
                   "--n-max", "20", "--record-every", "10", "--domains", "A") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["thm1_violations"] == 0
    assert payload["thm2_violations"] == 0
    assert (tmp_path / "c" / "trajectory-A.csv").exists()
    assert (tmp_path / "c" / "bounds.txt").exists()


def test_campaign_config_with_flag_overrides(tmp_path, capsys):
    config = tmp_path / "camp.toml"
    config.write_text(
        f"""
[experiment]
name = "camp"
out_dir = "{tmp_path}"

[instance]
kind = "random"
count = 4
n = 4
master_seed = 2

[qite]
tau = 0.01
n_max = 30
record_every = 30

[failure]
shots = [4]
"""
    )
    assert run_cli("campaign", "--config", str(config), "--count", "2") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["instances"] == 2  # flag overrode the config value
    assert (tmp_path / "camp" / "results.jsonl").exists()
    lines = (tmp_path / "camp" / "results.jsonl").read_text().splitlines()
    assert len(lines) == 2

    # deterministic rerun produces identical outputs
    first = (tmp_path / "camp" / "results.jsonl").read_text()
    run_cli("campaign", "--config", str(config), "--count", "2")
    capsys.readouterr()
    assert (tmp_path / "camp" / "results.jsonl").read_text() == first


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qite_udmis", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "generate" in proc.stdout
