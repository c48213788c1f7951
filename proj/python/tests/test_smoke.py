import math

import pytest

import parcalm


def test_builtins_listed():
    names = parcalm.builtin_names()
    assert "example-js" in names and "double-well" in names


def test_classify_example():
    r = parcalm.classify("example-js", 0.0, [0.0, 0.0])
    assert r["type"] == "4"
    assert r["case"] == "I"
    assert r["fj_multipliers"]["vertices"] == [[0.0, 1.0]]
    assert r["kkt_multipliers"]["kind"] == "empty"


def test_stationarity_both_forms():
    r = parcalm.check_stationarity("example-js", 0.0, [0.0, 0.0])
    assert r["direct"]["verdict"] == "satisfied"
    assert r["implicit"]["verdict"] == "satisfied"
    assert r["agreement"]
    bad = parcalm.check_stationarity("quadratic", 0.0, [0.0])
    assert bad["direct"]["verdict"] == "violated"


def test_solve_quadratic():
    s = parcalm.solve("quadratic")
    assert abs(s["x"] - 0.5) < 1e-6 and abs(s["y"][0] - 0.5) < 1e-6 and abs(s["F"] - 0.5) < 1e-6


def test_solution_set_roundtrip_text():
    P = parcalm.problem("double-well")
    Q = parcalm.load_problem(P.serialize())
    assert Q.m == 1 and Q.p == 0
    s = parcalm.solve_lower(Q, 0.0)
    assert sorted(round(y[0], 6) for y in s["minimizers"]) == [-1.0, 1.0]


def test_modulus_contrast():
    f = parcalm.estimate_modulus("example-js", 0.0, [0.0, 0.0], radius=0.5, samples=100, condition="f", uwsm=True)
    fj = parcalm.estimate_modulus("example-js", 0.0, [0.0, 0.0], radius=0.5, samples=100, condition="FJ", uwsm=True)
    assert f["verdict"] == "unbounded-suspect"
    assert fj["verdict"] == "numerator-zero" and fj["L"] == 0.0


def test_calmness_witness():
    r = parcalm.verify_calmness("double-well", 0.0, [-1.0], mu=0.0, radius=0.5)
    assert not r["holds"] and r["min_value"] < 0
    assert math.isfinite(r["witness"]["x"])


def test_errors_map_to_python():
    with pytest.raises(parcalm.ProblemError):
        parcalm.problem("missing-file.blp")
    with pytest.raises(parcalm.PreconditionError):
        parcalm.classify("example-js", 0.0, [0.0])
    # Expression errors inside a problem file surface as ProblemError with the location.
    with pytest.raises(parcalm.ProblemError, match="offset 3"):
        parcalm.load_problem('[problem]\nn = 1\nm = 1\np = 0\n[upper]\nF = "x +"\n[lower]\nf = "y1^2"\n')
