import json

import numpy as np
import pytest

from hasopt.cli import main
from hasopt.domain import ThroughputTrace, Video
from hasopt.evaluation import parse_starts


@pytest.fixture
def small(tmp_path):
    """Three-level video of 12 segments and a 40 s trace that carries level 2 comfortably."""
    video = Video(1.0, np.tile([100.0, 200.0, 400.0], (12, 1)) * np.linspace(0.5, 1.5, 12)[:, None].round(2))
    video.save(tmp_path / "v.json")
    ThroughputTrace(np.tile([150.0, 450.0, 300.0, 250.0], 10)).save(tmp_path / "t.csv")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_start_spec():
    assert len(parse_starts("0:700:7")) == 101
    assert parse_starts("0:700:7")[-1] == 700
    assert parse_starts("3,9") == [3, 9]


def test_gen_trace_and_rerun(tmp_path):
    args = ["gen-trace", "--mean-mbps", 0.67, "--cv", 0.38, "--ac1", 0.8, "--duration", 720, "--seed", 1]
    assert run(*args, "-o", tmp_path / "a.csv") == 0
    assert run(*args, "-o", tmp_path / "b.csv") == 0
    text = (tmp_path / "a.csv").read_text()
    assert len(text.splitlines()) == 721
    assert text == (tmp_path / "b.csv").read_text()
    prov = json.loads((tmp_path / "a.csv.provenance.json").read_text())
    assert prov["tool"] == "hasopt" and prov["flags"]["seed"] == 1


def test_gen_video(tmp_path):
    assert run("gen-video", "--segments", 300, "--rates-mbps", "0.1,0.23,0.36,0.68,1.33", "--seed", 2,
               "-o", tmp_path / "v.json") == 0
    video = Video.load(tmp_path / "v.json")
    assert video.sizes.shape == (300, 5)
    assert "provenance" in json.loads((tmp_path / "v.json").read_text())


@pytest.mark.parametrize("argv", [
    ["gen-video", "--rates-mbps", "0.1,abc"],
    ["gen-video", "--rates-mbps", "0.3,0.2"],
    ["gen-trace", "--cv", "-1"],
    ["gen-trace", "--cv", "0", "--ac1", "0.5"],
])
def test_invalid_generator_flags(tmp_path, argv, capsys):
    assert run(*argv, "-o", tmp_path / "x") == 2
    assert "error" in capsys.readouterr().err


def test_solve_generous_trace_uses_top_level(small):
    ThroughputTrace(np.full(20, 1e6)).save(small / "fast.csv")
    assert run("solve", "--video", small / "v.json", "--trace", small / "fast.csv", "-o", small / "o.json") == 0
    out = json.loads((small / "o.json").read_text())
    assert out["levels"] == [3] * 12 and out["switches"] == 0
    assert set(out) >= {"levels", "w_opt", "switches", "mean_quality", "provenance"}


def test_solve_epsilon_and_brute_force(small):
    counts = []
    for eps in (0, 1):
        out = small / f"e{eps}.json"
        assert run("solve", "--video", small / "v.json", "--trace", small / "t.csv", "--t0", 1,
                   "--epsilon", eps, "--brute-force", "-o", out) == 0
        res = json.loads(out.read_text())
        assert res["brute_force_agrees"] and res["feasible"]
        counts.append(res["switches"])
    assert counts[1] <= counts[0]


def test_solve_infeasible_exit_code(small, capsys):
    ThroughputTrace(np.full(20, 10.0)).save(small / "slow.csv")
    assert run("solve", "--video", small / "v.json", "--trace", small / "slow.csv", "--t0", 1,
               "-o", small / "o.json") == 3
    assert "segment 1" in capsys.readouterr().err


def test_extract_one_video_one_start(small):
    assert run("extract", "--videos", small / "v.json", "--trace", small / "t.csv", "--starts", "5",
               "-o", small / "c.csv") == 0
    lines = (small / "c.csv").read_text().splitlines()
    assert len(lines) == 1 + 12
    assert lines[0].split(",")[-1] == "label" and len(lines[0].split(",")) == 1 + 30 + 30 + 30 + 90 + 1 + 1
    first = (small / "c.csv").read_bytes()
    assert run("extract", "--videos", small / "v.json", "--trace", small / "t.csv", "--starts", "5",
               "-o", small / "c.csv") == 0
    assert (small / "c.csv").read_bytes() == first
    assert (small / "c.scaling.json").is_file()


def test_extract_bad_start_spec(small):
    assert run("extract", "--videos", small, "--trace", small / "t.csv", "--starts", "0:9",
               "-o", small / "c.csv") == 2


def test_train_then_simulate_model(small):
    assert run("extract", "--videos", small, "--trace", small / "t.csv", "--starts", "0:39:3",
               "-o", small / "c.csv") == 0
    assert run("train", "--corpus", small / "c.csv", "--levels", 3, "--hidden", 8, "--epochs", 3,
               "-o", small / "m.json") == 0
    report = json.loads((small / "m.report.json").read_text())
    assert len(report["val_accuracy"]) == 3
    assert run("simulate", "--algo", f"model:{small / 'm.json'}", "--video", small / "v.json",
               "--trace", small / "t.csv", "-o", small / "s.json") == 0
    assert len(json.loads((small / "s.json").read_text())["decisions"]) == 12


def test_simulate_optimal_script_has_no_stalls(small):
    assert run("solve", "--video", small / "v.json", "--trace", small / "t.csv", "--start", 7, "--t0", 2,
               "-o", small / "opt.json") == 0
    assert run("simulate", "--algo", f"script:{small / 'opt.json'}", "--video", small / "v.json",
               "--trace", small / "t.csv", "--start", 7, "--t0", 2, "-o", small / "s.json") == 0
    assert json.loads((small / "s.json").read_text())["stall_events"] == []


def test_simulate_rate_based_on_generous_trace_reaches_top(small):
    video = Video(1.0, np.tile([100.0, 200.0, 400.0], (40, 1)))
    video.save(small / "long.json")
    ThroughputTrace(np.full(20, 1e6)).save(small / "fast.csv")
    assert run("simulate", "--algo", "rate", "--video", small / "long.json", "--trace", small / "fast.csv",
               "-o", small / "s.json") == 0
    levels = [d["level"] for d in json.loads((small / "s.json").read_text())["decisions"]]
    assert levels[-1] == 3


def test_simulate_invalid_algo(small):
    assert run("simulate", "--algo", "bogus", "--video", small / "v.json", "--trace", small / "t.csv",
               "-o", small / "s.json") == 2
    assert run("simulate", "--algo", "model:", "--video", small / "v.json", "--trace", small / "t.csv",
               "-o", small / "s.json") == 2


def _manifest(d, starts, algorithms=("rate", "aggressive"), videos=("v.json",)):
    (d / "run.json").write_text(json.dumps({
        "videos": list(videos), "trace": "t.csv", "starts": starts,
        "algorithms": list(algorithms), "session": {"startup_delay_s": 2},
    }))
    return d / "run.json"


def test_evaluate_single_pair(small):
    assert run("evaluate", "--manifest", _manifest(small, [4]), "-o", small / "out", "--workers", 1) == 0
    rows = [l for l in (small / "out" / "runs.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 1 + 3  # header, optimal, rate, aggressive
    summary = json.loads((small / "out" / "summary.json").read_text())
    assert summary["runs"] == 1 and summary["failures"] == []
    assert summary["differential"]["optimal"]["switching_frequency"]["median"] == 0.0


def test_evaluate_workers_do_not_change_output(small):
    m = _manifest(small, "0:30:6")
    assert run("evaluate", "--manifest", m, "-o", small / "w1", "--workers", 1) == 0
    assert run("evaluate", "--manifest", m, "-o", small / "w2", "--workers", 2) == 0
    for name in ("runs.csv", "summary.json"):
        assert (small / "w1" / name).read_bytes() == (small / "w2" / name).read_bytes()


def test_evaluate_partial_failure(small, capsys):
    ThroughputTrace(np.array([300.0] * 10 + [0.0] * 10)).save(small / "t.csv")
    assert run("evaluate", "--manifest", _manifest(small, [0, 12]), "-o", small / "out") == 4
    summary = json.loads((small / "out" / "summary.json").read_text())
    assert summary["runs"] == 1
    assert [f["start"] for f in summary["failures"]] == [12]
    assert "start 12" in capsys.readouterr().err


def test_evaluate_bad_manifest(small):
    assert run("evaluate", "--manifest", _manifest(small, [0], videos=("missing.json",)),
               "-o", small / "out") == 2
    assert run("evaluate", "--manifest", _manifest(small, [999]), "-o", small / "out") == 2
    assert run("evaluate", "--manifest", small / "nope.json", "-o", small / "out") == 2
