"""Estimator-style front ends over the functional pipeline.

These follow the scikit-learn convention: constructor stores
hyperparameters verbatim, ``fit`` runs the computation on a network and
exposes results as trailing-underscore attributes, ``get_params`` /
``set_params`` come from :class:`sklearn.base.BaseEstimator` so the
objects clone and grid-search cleanly.  The "dataset" here is a single
:class:`~cyclecert.netparse.Network` (or an iterable of them for
``predict``), not a feature matrix, so array validation helpers do not
apply; inputs are validated structurally instead.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .certify import BoxPolicy, CertifyOptions, certify
from .netparse import Network, validate_network
from .refsolvers import nr_solve
from .sweep import stress_sweep
from .topology import build_incidence, dfs_cycle_basis, find_bridges

__all__ = [
    "CycleBasisBuilder",
    "SolvabilityCertifier",
    "NewtonRaphsonSolver",
    "StressSweeper",
]


def _as_network(x):
    if not isinstance(x, Network):
        raise TypeError(f"expected a Network, got {type(x).__name__}")
    validate_network(x)
    return x


class CycleBasisBuilder(BaseEstimator):
    """Bridge decomposition plus consistently oriented cycle basis.

    Parameters
    ----------
    root_choice : {"lowest", "search"}
        "lowest" pins each component's DFS root to its smallest node
        index (deterministic); "search" tries every root and keeps the
        basis with the least cycle overlap.
    """

    def __init__(self, root_choice="lowest"):
        self.root_choice = root_choice

    def fit(self, network, y=None):
        net = _as_network(network)
        self.incidence_ = build_incidence(net)
        self.decomposition_ = find_bridges(self.incidence_)
        self.basis_ = dfs_cycle_basis(
            self.decomposition_, self.incidence_, root_choice=self.root_choice
        )
        self.bridges_ = self.decomposition_.bridges
        self.n_cycles_ = self.basis_.q
        return self

    def transform(self, network):
        """Return the {0,1} cycle-edge incidence matrix C for a network."""
        net = _as_network(network)
        inc = build_incidence(net)
        basis = dfs_cycle_basis(find_bridges(inc), inc,
                                root_choice=self.root_choice)
        return basis.c


class SolvabilityCertifier(BaseEstimator):
    """Certify lossless power flow solvability via box face conditions."""

    def __init__(self, basis_search="none", recover_solution=False,
                 scale_grid=None, max_face_evals=40):
        self.basis_search = basis_search
        self.recover_solution = recover_solution
        self.scale_grid = scale_grid
        self.max_face_evals = max_face_evals

    def _options(self):
        box = BoxPolicy()
        if self.scale_grid is not None:
            box = BoxPolicy(scale_grid=tuple(float(t) for t in self.scale_grid),
                            max_face_evals=self.max_face_evals)
        elif self.max_face_evals != 40:
            box = BoxPolicy(max_face_evals=self.max_face_evals)
        return CertifyOptions(
            recover_solution=self.recover_solution,
            basis_search=self.basis_search,
            box=box,
        )

    def fit(self, network, y=None):
        net = _as_network(network)
        self.certificate_ = certify(net, self._options())
        self.verdict_ = self.certificate_.verdict
        self.certified_ = self.certificate_.certified
        return self

    def predict(self, networks):
        """Certified / not-certified flag for each network in an iterable."""
        opts = self._options()
        return np.array(
            [certify(_as_network(n), opts).certified for n in networks],
            dtype=bool,
        )


class NewtonRaphsonSolver(BaseEstimator):
    """Reference damped-Newton solver exposed as an estimator."""

    def __init__(self, tol=1e-8, max_iter=50):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, network, y=None):
        net = _as_network(network)
        self.result_ = nr_solve(net, tol=self.tol, max_iter=self.max_iter)
        self.theta_ = self.result_.theta
        self.converged_ = self.result_.converged
        return self

    def predict(self, networks):
        """Principal-branch solvability flag (NR success) per network."""
        return np.array(
            [
                nr_solve(_as_network(n), tol=self.tol,
                         max_iter=self.max_iter).success
                for n in networks
            ],
            dtype=bool,
        )


class StressSweeper(BaseEstimator):
    """Load-margin sweep producing y_cert, y_nr and their ratio eta."""

    def __init__(self, y_max=20.0, tol=1e-3, basis_search="none"):
        self.y_max = y_max
        self.tol = tol
        self.basis_search = basis_search

    def fit(self, network, y=None):
        net = _as_network(network)
        opts = CertifyOptions(recover_solution=True,
                              basis_search=self.basis_search)
        self.result_ = stress_sweep(net, y_max=self.y_max, tol=self.tol,
                                    certify_opts=opts)
        self.y_cert_ = self.result_.y_cert
        self.y_nr_ = self.result_.y_nr
        self.eta_ = self.result_.eta
        return self
