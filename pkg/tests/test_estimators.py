import numpy as np
import pytest
from sklearn.base import clone

from conftest import triangle, two_bus, worked_example
from cyclecert import (
    CycleBasisBuilder,
    NewtonRaphsonSolver,
    SolvabilityCertifier,
    StressSweeper,
)
from cyclecert.topology import build_incidence, dfs_cycle_basis, find_bridges


def test_params_round_trip_and_clone():
    est = SolvabilityCertifier(recover_solution=True, max_face_evals=12)
    params = est.get_params()
    assert params["recover_solution"] is True
    assert params["max_face_evals"] == 12
    dup = clone(est)
    assert dup.get_params() == params
    est.set_params(basis_search="roots")
    assert est.get_params()["basis_search"] == "roots"


def test_basis_builder_matches_functional_pipeline():
    net = worked_example()
    est = CycleBasisBuilder().fit(net)
    inc = build_incidence(net)
    basis = dfs_cycle_basis(find_bridges(inc), inc)
    np.testing.assert_array_equal(est.basis_.c, basis.c)
    np.testing.assert_array_equal(est.transform(net), basis.c)
    assert est.n_cycles_ == 2
    assert est.bridges_ == ()


def test_certifier_fit_and_predict():
    est = SolvabilityCertifier(recover_solution=True)
    est.fit(triangle())
    assert est.certified_
    assert est.verdict_ == "certified"
    assert est.certificate_.theta is not None
    flags = est.predict([triangle(), triangle(scale=8.0)])
    np.testing.assert_array_equal(flags, [True, False])


def test_nr_solver_estimator():
    est = NewtonRaphsonSolver(tol=1e-10).fit(two_bus(p=1.0, w=5.0))
    assert est.converged_
    assert est.theta_[0] - est.theta_[1] == pytest.approx(np.arcsin(0.2))
    flags = est.predict([two_bus(p=1.0), two_bus(p=6.0)])
    np.testing.assert_array_equal(flags, [True, False])


def test_stress_sweeper_two_bus():
    est = StressSweeper(tol=1e-3).fit(two_bus(p=1.0, w=5.0))
    assert est.y_cert_ == pytest.approx(5.0, rel=1e-2)
    assert est.eta_ == pytest.approx(1.0, rel=1e-2)
    assert est.result_.trace


def test_estimators_reject_non_networks():
    with pytest.raises(TypeError, match="Network"):
        CycleBasisBuilder().fit([[1, 2], [2, 3]])
    with pytest.raises(TypeError, match="Network"):
        NewtonRaphsonSolver().fit("case9")
