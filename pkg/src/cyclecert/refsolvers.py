"""Reference Newton-Raphson solver for the lossless real power flow.

This is the ground-truth side of the tightness comparison: the stress
sweep accepts a load level when damped Newton converges from a flat
start *and* every branch angle difference stays within pi/2 (the same
branch of solutions the certificate speaks about).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flowcore import laplacian_pinv_apply
from .netparse import validate_network
from .topology import build_incidence

__all__ = ["NRResult", "nr_solve", "diagnostics"]

_ANGLE_SLOP = 1e-12


@dataclass(frozen=True)
class NRResult:
    converged: bool
    theta: np.ndarray  # final iterate, meaningful when converged
    iterations: int
    final_residual: float
    max_angle_diff: float

    def __post_init__(self):
        self.theta.setflags(write=False)

    @property
    def success(self):
        """Converged and on the principal branch (all |angle| <= pi/2)."""
        return self.converged and self.max_angle_diff <= math.pi / 2 + _ANGLE_SLOP

    def to_dict(self):
        return {
            "converged": self.converged,
            "success": self.success,
            "theta": [float(t) for t in self.theta],
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "max_angle_diff": self.max_angle_diff,
        }


def nr_solve(net, theta0=None, *, tol=1e-8, max_iter=50):
    """Damped Newton on r(theta) = P - A D sin(A^T theta).

    The angle at bus index 0 is pinned to its start value (angles are
    only determined up to a constant).  Steps are Armijo-backtracked on
    the residual infinity norm; a singular Jacobian or a step that fails
    to reduce the residual ends the run as non-converged.
    """
    validate_network(net)
    inc = build_incidence(net)
    a = inc.a.astype(float)
    w = inc.weights
    n = net.n

    if theta0 is None:
        theta = np.zeros(n)
    else:
        theta = np.asarray(theta0, dtype=float).copy()
        if theta.shape != (n,):
            raise ValueError(f"theta0 must have shape ({n},)")

    def residual(th):
        return net.p - a @ (w * np.sin(a.T @ th))

    r = residual(theta)
    norm = float(np.abs(r).max(initial=0.0))
    iterations = 0
    converged = norm <= tol

    while not converged and iterations < max_iter:
        angles = a.T @ theta
        jac = (a * (w * np.cos(angles))) @ a.T
        try:
            step = np.linalg.solve(jac[1:, 1:], r[1:])
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        accepted = False
        for _ in range(20):
            trial = theta.copy()
            trial[1:] += alpha * step
            r_trial = residual(trial)
            trial_norm = float(np.abs(r_trial).max(initial=0.0))
            if trial_norm <= (1.0 - 1e-4 * alpha) * norm:
                theta, r, norm = trial, r_trial, trial_norm
                accepted = True
                break
            alpha *= 0.5
        iterations += 1
        if not accepted:
            break
        converged = norm <= tol

    branch_angles = a.T @ theta
    return NRResult(
        converged=converged,
        theta=theta,
        iterations=iterations,
        final_residual=norm,
        max_angle_diff=float(np.abs(branch_angles).max(initial=0.0)),
    )


def diagnostics(net):
    """Raw scalars used by the classical solvability screens.

    Returns ``z_inf_norm`` (the worst normalized branch loading of the
    particular flow) and ``lambda2`` (algebraic connectivity of the
    weighted Laplacian).  Thresholding them against published bounds is
    out of scope here; they are reported for context only.
    """
    validate_network(net)
    inc = build_incidence(net)
    u = laplacian_pinv_apply(inc, net.p)
    z = (inc.a.T @ u)  # = D^{-1} f_hat since f_hat = D A^T L+ P
    z_inf = float(np.abs(z).max(initial=0.0))
    lap = (inc.a * inc.weights) @ inc.a.T
    vals = np.linalg.eigvalsh(lap)
    lambda2 = float(vals[1]) if net.n > 1 else 0.0
    return {"z_inf_norm": z_inf, "lambda2": lambda2}
