"""Stress sweep: bisection, trace audit, and the eta ratio."""
import numpy as np
import pytest

from conftest import random_connected_network, triangle, two_bus
from cyclecert import stress_sweep
from cyclecert.sweep import TracePoint, _audited_margin


def test_two_bus_margin_is_saturation_point():
    # w = 5, |P| = 1: solvable exactly up to y = 5
    res = stress_sweep(two_bus(p=1.0, w=5.0), tol=1e-4)
    assert res.y_cert == pytest.approx(5.0, rel=2e-4)
    assert res.y_nr == pytest.approx(5.0, rel=1e-2)
    assert res.eta == pytest.approx(1.0, rel=1e-2)
    assert res.warnings == ()


def test_trace_is_consistent_and_sorted():
    res = stress_sweep(triangle(), tol=1e-3)
    ys = [t.y for t in res.trace]
    assert ys == sorted(ys)
    # verdict flips once: all certified up to y_cert, none after
    for t in res.trace:
        assert t.certified == (t.y <= res.y_cert)
    assert res.tolerance == 1e-3
    assert res.y_max == 20.0


def test_result_to_dict_round_trips_trace():
    res = stress_sweep(two_bus(), tol=1e-3)
    doc = res.to_dict()
    assert doc["y_cert"] == res.y_cert
    assert len(doc["trace"]) == len(res.trace)
    assert {"y", "verdict", "nr_ok"} == set(doc["trace"][0])


def test_margin_capped_at_y_max_with_warning():
    res = stress_sweep(two_bus(p=1.0, w=5.0), y_max=2.0)
    assert res.y_cert == 2.0
    assert res.y_nr == 2.0
    assert any("y_max" in w for w in res.warnings)


def test_zero_injections_rejected():
    with pytest.raises(ValueError, match="zero"):
        stress_sweep(two_bus(p=0.0))
    with pytest.raises(ValueError, match="y_max"):
        stress_sweep(two_bus(), y_max=-1.0)
    with pytest.raises(ValueError, match="tol"):
        stress_sweep(two_bus(), tol=1.5)


def test_audit_downgrades_non_monotone_trace():
    trace = tuple(
        TracePoint(y=y, verdict=("certified" if ok else "inconclusive"),
                   nr_ok=ok)
        for y, ok in [(1.0, True), (2.0, False), (3.0, True), (4.0, False)]
    )
    warnings = []
    margin = _audited_margin(trace, lambda t: t.certified, "certificate",
                             y_max=20.0, warnings=warnings)
    assert margin == 1.0  # the pass at y=3 sits above a failure and is ignored
    assert any("non-monotone" in w for w in warnings)


def test_audit_all_failing_gives_zero():
    trace = (TracePoint(y=1.0, verdict="inconclusive", nr_ok=False),)
    assert _audited_margin(trace, lambda t: t.certified, "certificate",
                           y_max=20.0, warnings=[]) == 0.0


def test_sweep_on_meshed_network_keeps_eta_near_one():
    rng = np.random.default_rng(77)
    net = random_connected_network(rng, n_max=8, p_scale=0.5)
    res = stress_sweep(net, tol=1e-3)
    assert 0 < res.y_cert <= res.y_nr * (1 + 1e-3)
    assert res.eta <= 1.0 + 1e-3
