import hashlib
import json

import numpy as np
import pytest

from evtwcct.cli import main, pct
from evtwcct.tailfit import GpdFit
from evtwcct.trace import TimingTrace, write_trace
from evtwcct.workloads import synthetic_tail_trace


@pytest.fixture(scope="module")
def gumbel_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "gumbel.csv"
    trace, _ = synthetic_tail_trace("gumbel_tail", n=200_000, seed=0)
    write_trace(trace, path)
    return path


@pytest.fixture(scope="module")
def fitted(gumbel_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", "--input", str(gumbel_csv), "--out", str(out), "--block-size", "1000"]) == 0
    return out


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_fit_report(fitted):
    report = json.loads((fitted / "report.json").read_text())
    assert report["tail_type"]["kind"] == "TypeI_Gumbel"
    assert report["verdict"] == {"valid": True, "reasons": []}
    assert report["threshold"]["trail"][-1]["valid"]
    assert report["gev"]["block_size"] == 1000
    assert [r["m"] for r in report["return_levels"]] == [500, 1000, 2000, 5000, 10000]
    for name in ("qq.csv", "density.csv", "returnlevel.csv", "mrl.csv"):
        assert (fitted / name).stat().st_size > 0


def test_fit_is_byte_reproducible(gumbel_csv, fitted, tmp_path):
    main(["fit", "--input", str(gumbel_csv), "--out", str(tmp_path), "--block-size", "1000"])
    for name in ("report.json", "qq.csv", "density.csv", "returnlevel.csv", "mrl.csv"):
        assert digest(tmp_path / name) == digest(fitted / name)


def test_report_floats_round_trip(fitted):
    report = json.loads((fitted / "report.json").read_text())
    fit = GpdFit.from_dict(report["fit"])
    assert GpdFit.from_dict(json.loads(json.dumps(fit.to_dict()))) == fit


def test_fit_exit_codes(tmp_path):
    (tmp_path / "three.csv").write_text("time\n1\n2\n3\n")
    assert main(["fit", "--input", str(tmp_path / "three.csv"), "--out", str(tmp_path / "a")]) == 2
    trail = json.loads((tmp_path / "a" / "report.json").read_text())["threshold"]["trail"]
    assert trail and not any(s["valid"] for s in trail)
    (tmp_path / "flat.csv").write_text("5\n5\n5\n")
    assert main(["fit", "--input", str(tmp_path / "flat.csv"), "--out", str(tmp_path / "b")]) == 2
    assert main(["fit", "--input", str(tmp_path / "none.csv"), "--out", str(tmp_path / "c")]) == 1
    (tmp_path / "bad.csv").write_text("time\n1\n-2\n")
    assert main(["fit", "--input", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "d")]) == 1


def test_bad_flags_exit_1():
    with pytest.raises(SystemExit) as info:
        main(["fit", "--input", "x.csv", "--out", "o", "--threshold", "median"])
    assert info.value.code == 1


def test_predict_curve_and_level(fitted, tmp_path, capsys):
    report = json.loads((fitted / "report.json").read_text())
    u, zeta = report["fit"]["u"], report["fit"]["zeta_u"]
    assert main(["predict", "--report", str(fitted / "report.json"), "--level", repr(u),
                 "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "predict.json").read_text())
    assert out["level"]["return_period"] == pytest.approx(1 / zeta)
    levels = [r["level"] for r in out["return_levels"]]
    widths = [r["ci_high"] - r["ci_low"] for r in out["return_levels"]]
    assert all(b > a for a, b in zip(levels, levels[1:]))
    assert all(b >= a for a, b in zip(widths, widths[1:]))
    text = capsys.readouterr().out
    assert "next 1, 10, 100, 1000 queries" in text


def test_predict_below_threshold(fitted):
    report = json.loads((fitted / "report.json").read_text())
    args = ["predict", "--report", str(fitted / "report.json"), "--level",
            repr(report["fit"]["u"] - 1.0)]
    assert main(args) == 2


def test_probability_format():
    p = 0.001
    probs = [1 - (1 - p) ** s for s in (1, 10, 100, 1000)]
    assert ", ".join(pct(q) for q in probs) == "0.1%, 1.0%, 9.5%, 63.2%"
    assert pct(0.107) == "10.7%" and pct(0.778) == "77.8%"


def test_compare(tmp_path, capsys):
    rng = np.random.default_rng(50)
    x = np.concatenate([[3.0, 5.0, 4.0], 1 + 3 * rng.random(95),
                        rng.uniform(0, 4, 12_000) + (rng.random(12_000) < 0.2) * rng.exponential(size=12_000)])
    write_trace(TimingTrace(x), tmp_path / "t.csv")
    assert main(["compare", "--input", str(tmp_path / "t.csv"), "--out", str(tmp_path / "c.csv")]) == 0
    rows = (tmp_path / "c.csv").read_text().splitlines()
    values = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert values["b"] == "92" and float(values["T_b"]) == 5.0
    write_trace(TimingTrace(np.arange(1.0, 300.0)), tmp_path / "up.csv")
    assert main(["compare", "--input", str(tmp_path / "up.csv")]) == 2


def test_simulate_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["simulate", "--system", "pendulum", "--runs", "100", "--seed", "7",
                     "--out", str(path)]) == 0
    assert digest(a) == digest(b)
    meta = json.loads(a.with_suffix(".meta.json").read_text())
    assert meta["seed"] == 7 and meta["failed_runs"] == 0 and meta["config"]["dt"] == 0.02


def test_simulate_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--system", "pendulum", "--runs", "3", "--out", str(tmp_path / "x")])
    assert info.value.code == 1


def test_simulate_tora_origin(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["simulate", "--system", "tora", "--runs", "1", "--seed", "1",
                 "--initial-state", "0,0,0,0", "--disturbance-range", "0", "--out", str(out)]) == 0
    assert out.read_text().splitlines() == ["settle_time", "0.0"]


def test_simulate_all_failed(tmp_path):
    assert main(["simulate", "--system", "pendulum", "--runs", "3", "--seed", "1",
                 "--horizon", "0.04", "--out", str(tmp_path / "f.csv")]) == 2


def test_pendulum_pipeline(tmp_path):
    trace = tmp_path / "pend.csv"
    assert main(["simulate", "--system", "pendulum", "--runs", "10000", "--seed", "3",
                 "--out", str(trace)]) == 0
    assert main(["fit", "--input", str(trace), "--out", str(tmp_path / "fit")]) == 0
    assert main(["predict", "--report", str(tmp_path / "fit" / "report.json"),
                 "--out", str(tmp_path / "pred")]) == 0
    assert main(["diagnose", "--input", str(trace), "--report", str(tmp_path / "fit" / "report.json"),
                 "--out", str(tmp_path / "diag")]) == 0
    assert sorted(p.name for p in (tmp_path / "diag").iterdir()) == [
        "density.csv", "mrl.csv", "qq.csv", "returnlevel.csv"]
