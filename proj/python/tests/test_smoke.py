import math

import pytest

import wrlab


def test_weight_values():
    w = wrlab.Weight("power(alpha=0.5)", 2)
    assert w.n == 2
    assert w([0.25, 0.0]) == pytest.approx(0.5)
    assert "power" in w.spec()
    with pytest.raises(wrlab.DomainError):
        wrlab.Weight("nonsense(", 2)


def test_constant_weight_identities():
    one = wrlab.Weight("constant(c=1)", 2)
    assert wrlab.ap_characteristic(one, 1.5) == pytest.approx(1.0, abs=1e-12)
    assert wrlab.bmo_q(one) == pytest.approx(0.0, abs=1e-12)
    c = wrlab.cylinder(one, [0.0, 0.0], s=0.0, r=0.5, kind="Q")
    assert c["height"] == pytest.approx(0.25)
    assert c["t_end"] - c["t_begin"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        wrlab.ap_characteristic(one, 0.5)


def test_power_weight_average():
    # (|x|^alpha)_{B_1(0)} in R^2 = 2 / (2 + alpha)
    w = wrlab.Weight("power(alpha=0.4)", 2)
    assert wrlab.ball_average(w, [0.0, 0.0], 1.0) == pytest.approx(2.0 / 2.4, rel=1e-5)


def test_derived_constants():
    k = wrlab.derived_constants(2, 4.0, 0.3)
    assert abs(k["xi0"] * k["xi1"] - (1.0 + k["xi0"]) / 2.0) < 1e-12
    assert k["identity_residual"] < 1e-12


def test_experiment_and_criterion():
    assert "harnack" in wrlab.experiment_names()
    assert wrlab.experiment_defaults("logbmo")["weights"]
    rep = wrlab.run_experiment("logbmo")
    assert rep["schema"] == 1
    assert rep["passed"]
    with pytest.raises(ValueError):
        wrlab.run_experiment("logbmo", bogus=1)
    crit = wrlab.run_criterion(8, seed=3)
    assert crit["passed"]
    assert wrlab.criterion_title(8)
    assert not math.isnan(crit["violations"])
