import io
import json
import subprocess
import sys

import pytest

from multable.cli import main
from multable.montecarlo import EstimateReport


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.mark.parametrize("algorithm", ["direct", "incremental", "subquadratic"])
def test_exact(algorithm):
    assert run("exact", "--n", "4", "--algorithm", algorithm) == (0, "9\n")
    assert run("exact", "--n", "1000", "--algorithm", algorithm)[1] == "248083\n"


def test_exact_segment_bits():
    assert run("exact", "--n", "1000", "--segment-bits", "4096") == (0, "248083\n")


def test_tabulate_stdout():
    code, text = run("tabulate", "--n", "10", "--out", "-")
    lines = text.splitlines()
    assert code == 0
    assert lines[0] == "k,delta,M" and len(lines) == 11
    assert lines[-1] == "10,4,42"


def test_tabulate_checkpoint_and_report(tmp_path, capsys):
    out = tmp_path / "t.csv"
    ck = tmp_path / "t.ckpt"
    assert run("tabulate", "--n", "3000", "--wheel", "2", "--out", str(out), "--checkpoint", str(ck),
               "--checkpoint-every", "500")[0] == 0
    assert "M(3000) = " in capsys.readouterr().err
    assert json.loads(ck.read_text())["last_k"] == 3000
    code, text = run("report", "--input", str(out), "--normalized", "--dyadic")
    lines = text.splitlines()
    assert code == 0
    assert lines[0] == "n,M,M/n^2,1e4*sigma,(n^2/M)/Phi"
    assert [line.split(",")[0] for line in lines[1:]] == [str(2 ** j - 1) for j in range(1, 12)]


def test_delta():
    code, text = run("delta", "--n", "377", "--wheel", "6")
    assert code == 0
    assert "constructed: 119" in text
    code, text = run("delta", "--n", "75")
    assert "delta: 41" in text


def test_shape(tmp_path):
    svg = tmp_path / "s.svg"
    code, text = run("shape", "--n", "42", "--out", str(svg))
    assert code == 0 and text.startswith("dark cells: 41,")
    assert svg.read_text().lstrip().startswith("<svg")


def test_estimate_2_30_product(tmp_path):
    """Product estimator at n = 2^30 - 1 with 10^6 trials."""
    path = tmp_path / "e.json"
    code, text = run("estimate", "--n-exponent", "30", "--method", "product", "--trials", "1000000",
                     "--seed", "42", "--out", str(path))
    assert code == 0
    rep = EstimateReport.from_text(text)
    print(f"estimate {rep.estimate:.6f} sigma {rep.sigma:.2e} in {rep.wall_time_seconds:.0f}s")
    assert rep.n is None and rep.n_exponent == 30 and rep.trials == 10 ** 6
    assert abs(rep.estimate - 0.17738) <= 4 * rep.sigma
    assert EstimateReport.from_text(path.read_text()) == rep
    code, text = run("report", "--input", str(path), "--normalized")
    assert code == 0 and text.splitlines()[1].startswith("2^30-1,,0.17")


def test_threads_env(monkeypatch):
    monkeypatch.setenv("MULTABLE_THREADS", "2")
    rep = EstimateReport.from_text(run("estimate", "--n", "1000", "--method", "bernoulli",
                                       "--trials", "200", "--seed", "1")[1])
    assert rep.workers == 2
    rep = EstimateReport.from_text(run("estimate", "--n", "1000", "--method", "bernoulli",
                                       "--trials", "200", "--seed", "1", "--threads", "1")[1])
    assert rep.workers == 1
    monkeypatch.setenv("MULTABLE_THREADS", "zero")
    assert run("exact", "--n", "10")[0] == 1


@pytest.mark.parametrize("argv", [
    ["exact", "--n", "100", "--algorithm", "incremental", "--segment-bits", "64"],
    ["exact", "--n", "100", "--segment-bits", "3"],
    ["exact", "--n", "100", "--wheel", "6"],
    ["tabulate", "--n", "100", "--checkpoint", "x.ckpt"],
    ["estimate", "--n", "100", "--method", "product", "--trials", "1"],
])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 2
    err = capsys.readouterr().err
    assert "usage:" in err and "error:" in err


@pytest.mark.parametrize("argv", [
    ["exact"],
    ["exact", "--n", "0"],
    ["tabulate", "--n", "10", "--wheel", "5"],
    ["estimate", "--n", "10", "--n-exponent", "3", "--method", "product", "--trials", "5"],
    ["bogus"],
])
def test_argparse_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv, out=io.StringIO())
    assert exc.value.code == 2


def test_contract_errors(tmp_path):
    assert run("shape", "--n", "20000", "--out", str(tmp_path / "x.svg"))[0] == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("hello\n")
    assert run("report", "--input", str(bad))[0] == 2
    assert run("report", "--input", str(tmp_path / "missing.csv"))[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "multable", "exact", "--n", "4"],
                         capture_output=True, text=True, check=True)
    assert res.stdout == "9\n"
