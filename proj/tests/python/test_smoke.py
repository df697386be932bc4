import math

import pytest

import dkm


def test_geometry_examples():
    assert dkm.dist2([1, 1], [4, 5]) == 25
    assert dkm.cost([[1, 1]], [2.0], [[4, 5]]) == 50
    with pytest.raises(ValueError):
        dkm.dist2([1, 2], [1])


def test_gen_and_run_round_trip():
    text = dkm.gen_workload(mode="clustered", n=120, seed=4)
    assert text.startswith("H d=2 delta=1024 n=120 k=5")
    summary, rows = dkm.run_stream(text, mode="direct", baseline_every=20, config={"record_time": "0"})
    assert len(rows) == 120
    assert summary["updates"] == "120"
    ratios = [r["ratio"] for r in rows if r["cost_baseline"] >= 0]
    assert len(ratios) == 6
    assert all(math.isfinite(v) for v in ratios)
    again = dkm.run_stream(text, mode="direct", baseline_every=20, config={"record_time": "0"})[1]
    assert again == rows


def test_controller_object():
    km = dkm.DynamicKMeans(k=2, d=1, delta=64)
    for i, x in enumerate([1, 2, 3, 40, 41, 42]):
        km.insert(i, [x])
    assert len(km) == 6
    assert len(km.centers()) <= 2
    assert km.cost() <= 8
    km.erase(0)
    assert len(km) == 5


def test_verify_hashing_passes():
    results = dkm.verify("hashing", scale=0.02)
    assert [r["id"] for r in results] == [1, 2, 3]
    assert all(r["status"] != "FAIL" for r in results)


def test_bad_config_key():
    with pytest.raises(ValueError):
        dkm.run_stream(dkm.gen_workload(n=10), config={"nope": "1"})
