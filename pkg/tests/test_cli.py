import csv
import io
import json
import os
import subprocess
import sys

import jsonschema
import pytest

from fockdiff.cli import EXIT_INPUT, EXIT_IO, EXIT_OK, fmt, main, parse_times
from fockdiff.schema import EVOLVE_SCHEMA

NBS_ANALYTIC = "evolve --state nbs --s 1 --gamma 0.5 --kappa 0.5 --times 0,2 --method analytic".split()
NUMBER_KRAUS = "evolve --state number --l 2 --kappa 1 --times 1 --method kraus".split()


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_fmt_is_lossless():
    for x in (0.1, 1 / 3, 2.0, 1e-300, -7.25e12):
        text = fmt(x)
        assert float(text) == x
        assert len(text.split("e")[0].replace("-", "").replace(".", "")) == 17


def test_parse_times():
    assert parse_times("0,0.5,2") == [0.0, 0.5, 2.0]
    assert parse_times("0:2:1") == [0.0, 1.0, 2.0]
    assert parse_times("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("1,0", "-1", "a,b", "0:1:0", "1,1"):
        with pytest.raises(ValueError):
            parse_times(bad)


def test_evolve_nbs_analytic(capsys):
    code, out, _ = run(capsys, NBS_ANALYTIC)
    assert code == EXIT_OK
    doc = json.loads(out)
    jsonschema.validate(doc, EVOLVE_SCHEMA)
    assert [r["mean"] for r in doc["results"]] == [2.0, 3.0]
    assert doc["config"]["dim"] is None
    assert len(doc["results"][0]["distribution"]) == 16
    assert doc["results"][0]["distribution"][:3] == pytest.approx([0.25, 0.25, 0.1875], abs=1e-15)


def test_evolve_bad_gamma(capsys):
    code, out, err = run(capsys, "evolve --state nbs --s 1 --gamma 1.5 --kappa 1 --times 1".split())
    assert code == EXIT_INPUT
    assert out == ""
    assert "0 < gamma < 1" in err


def test_evolve_number_kraus(capsys):
    code, out, _ = run(capsys, NUMBER_KRAUS)
    assert code == EXIT_OK
    doc = json.loads(out)
    jsonschema.validate(doc, EVOLVE_SCHEMA)
    (res,) = doc["results"]
    assert abs(res["mean"] - 3.0) <= 1e-6
    assert abs(res["trace"] - 1.0) <= 1e-8
    assert isinstance(doc["config"]["dim"], int)


def test_evolve_all_methods_sorted(capsys):
    code, out, _ = run(
        capsys, "evolve --state chaotic --gamma 0.5 --kappa 1 --times 0,1 --method all".split()
    )
    assert code == EXIT_OK
    doc = json.loads(out)
    jsonschema.validate(doc, EVOLVE_SCHEMA)
    keys = [(r["t"], r["method"]) for r in doc["results"]]
    assert keys == [(t, m) for t in (0.0, 1.0) for m in ("kraus", "ode", "analytic")]
    means = [r["mean"] for r in doc["results"] if r["t"] == 1.0]
    assert max(means) - min(means) <= 1e-6


def test_method_state_mismatch(capsys):
    code, _, err = run(
        capsys, "evolve --state lwcs --l 1 --lambda 0.5 --kappa 1 --times 1 --method analytic".split()
    )
    assert code == EXIT_INPUT
    assert "method/state mismatch" in err


@pytest.mark.parametrize(
    "argv",
    [
        "evolve --state nbs --gamma 0.5 --kappa 1 --times 1",
        "evolve --state nbs --s 1 --gamma 0.5 --kappa -1 --times 1",
        "evolve --state nbs --s 1 --gamma 0.5 --kappa 1 --times 2,1",
        "evolve --state nbs --s 1 --gamma 0.5 --kappa 1 --times 1 --dim 1",
        "evolve --state nbs --s 1 --gamma 0.5 --kappa 1 --times 1 --dim lots",
        "evolve --state nbs --s 1 --gamma 0.5 --kappa 1 --times 1 --n-report 0",
        "evolve --state number --l 30 --kappa 1 --times 1 --dim 20",
    ],
)
def test_invalid_inputs_exit_2(capsys, argv):
    code, _, err = run(capsys, argv.split())
    assert code == EXIT_INPUT
    assert err.startswith("fockdiff: error:")


def test_too_small_dim_names_recommendation(capsys):
    code, _, err = run(capsys, "evolve --state number --l 2 --kappa 1 --times 1 --dim 12".split())
    assert code == EXIT_INPUT
    assert "recommended dim" in err


def test_unwritable_output_exit_3(capsys, tmp_path):
    target = tmp_path / "missing" / "out.json"
    code, _, err = run(capsys, NBS_ANALYTIC + ["--out", str(target)])
    assert code == EXIT_IO
    assert "cannot write" in err


def test_output_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = "evolve --state nbs --s 2 --gamma 0.4 --kappa 1 --times 0,0.5,1 --method all".split()
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    jsonschema.validate(json.loads(a.read_text()), EVOLVE_SCHEMA)


def test_evolve_csv(capsys):
    code, out, _ = run(capsys, NUMBER_KRAUS + ["--format", "csv", "--n-report", "4"])
    assert code == EXIT_OK
    assert out.endswith("\r\n")
    rows = list(csv.reader(io.StringIO(out, newline="")))
    assert rows[0] == ["t", "method", "mean", "trace", "trace_deficit", "p_0", "p_1", "p_2", "p_3"]
    assert rows[1][1] == "kraus"
    assert float(rows[1][2]) == pytest.approx(3.0, abs=1e-6)


def test_mean_curve_analytic(capsys):
    code, out, _ = run(
        capsys, "mean-curve --state nbs --s 0 --gamma 0.5 --kappa 1 --times 0:2:1".split()
    )
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out, newline="")))
    assert list(rows[0]) == ["t", "mean", "trace", "trace_deficit", "method"]
    assert [float(r["mean"]) for r in rows] == [1.0, 2.0, 3.0]
    assert {r["method"] for r in rows} == {"analytic"}


def test_mean_curve_all_spread(capsys):
    code, out, _ = run(
        capsys, "mean-curve --state nbs --s 0 --gamma 0.5 --kappa 1 --times 0:2:1 --method all".split()
    )
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out, newline="")))
    assert list(rows[0])[-1] == "spread"
    assert len(rows) == 9
    assert max(float(r["spread"]) for r in rows) <= 1e-6


def test_mean_curve_single_time_exit_2(capsys):
    code, _, err = run(capsys, "mean-curve --state nbs --s 0 --gamma 0.5 --kappa 1 --times 1".split())
    assert code == EXIT_INPUT
    assert "2 time points" in err


def test_verify_identities(capsys):
    code, out, _ = run(capsys, ["verify", "identities"])
    assert code == EXIT_OK
    assert out.count("PASS") == 6
    assert "FAIL" not in out


def test_verify_failure_exit_1(capsys, monkeypatch):
    from fockdiff import verify

    monkeypatch.setattr(verify, "run", lambda suite: [verify.Check("broken", "x=1", 1.0, 0.5)])
    code, out, _ = run(capsys, ["verify", "states"])
    assert code == 1
    assert "FAIL  broken" in out and "residual=1.000e+00" in out


def test_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("FOCKDIFF_THREADS", "1")
    assert run(capsys, NBS_ANALYTIC)[0] == EXIT_OK
    monkeypatch.setenv("FOCKDIFF_THREADS", "zero")
    assert run(capsys, NBS_ANALYTIC)[0] == EXIT_INPUT


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "fockdiff"] + NBS_ANALYTIC,
        capture_output=True,
        text=True,
        env={**os.environ, "FOCKDIFF_THREADS": "1"},
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"][1]["mean"] == 3.0
