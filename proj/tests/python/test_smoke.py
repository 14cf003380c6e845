import json
import os
import subprocess

import pytest

import clickprep


def test_hampel_limits():
    assert clickprep.hampel_limit(1.0, 3.22, 2.0) == pytest.approx(10.548, abs=1e-3)
    assert clickprep.hampel_limit(1.0, 1.62, 2.0) == pytest.approx(5.804, abs=1e-3)


def test_median_and_mad():
    assert clickprep.median([3, 1, 2]) == 2
    assert clickprep.mad([1, 1, 2, 2, 4, 6, 9]) == 1


def test_empty_population_raises():
    with pytest.raises(clickprep.ClickprepError) as err:
        clickprep.median([])
    assert clickprep.error_code(err.value) == "EmptyPopulation"


def test_bootlier_deterministic():
    values = [1, 2, 2, 3, 3, 3, 4, 4, 5] * 20 + [80]
    a = clickprep.bootlier(values, N=30, k=3, iters=2000, seed=9)
    b = clickprep.bootlier(values, N=30, k=3, iters=2000, seed=9)
    assert a == b
    assert sum(a["counts"]) == 2000


def test_compare_aa():
    series = [0.05, 0.06, 0.07, 0.065, 0.055]
    assert clickprep.compare_aa(series, series)["verdict"] == "CONSISTENT"
    assert clickprep.compare_aa(series, [x / 2 for x in series])["verdict"] == "INCONSISTENT"


def test_synth_and_pipeline():
    events, truth = clickprep.synth(customers=200, days=5, seed=4)
    assert truth["customers"]
    code, report, plots, log = clickprep.run_pipeline(events)
    assert code == 0
    assert [s["stage"] for s in report["stages"]] == [
        "ingest", "identity", "dedup", "clean", "journey", "outliers", "metrics", "aa"]
    assert report["events_out"] == len(log.splitlines())
    again = clickprep.run_pipeline(events)
    assert again[1] == report


def test_unknown_config_key():
    events, _ = clickprep.synth(zero_pathology=True, customers=50, days=1, seed=1)
    with pytest.raises(clickprep.ClickprepError):
        clickprep.run_pipeline(events, {"nope": 1})


@pytest.mark.skipif(not os.environ.get("CLICKPREP_CLI"), reason="command-line tool not built")
def test_cli_round_trip(tmp_path):
    cli = os.environ["CLICKPREP_CLI"]
    log = tmp_path / "log.jsonl"
    subprocess.run([cli, "synth", "--customers", "200", "--days", "5", "-o", str(log)], check=True)
    out = subprocess.run([cli, "run", "-i", str(log), "-o", str(tmp_path / "clean.jsonl")],
                         check=True, capture_output=True, text=True)
    report = json.loads(out.stdout)
    assert report["status"] == "ok"
    assert (tmp_path / "clean.jsonl").exists()
