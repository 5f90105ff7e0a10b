"""Particular line flows, the normalized affine flow family, and angle recovery.

All flow quantities here live in the re-oriented edge convention of the
cycle basis (so the basis matrix and H = D^-1 C stay nonnegative); the
``orientation`` vector maps back to the input branch directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

__all__ = [
    "FlowDomainError",
    "AngleConsistencyError",
    "FlowParam",
    "AngleSolution",
    "laplacian_pinv_apply",
    "particular_flow",
    "eval_g",
    "recover_theta",
]

# Dense solves below this size; sparse factorization above.
_DENSE_LIMIT = 400

# |z| may exceed 1 by at most this much before arcsin is a hard error;
# anything larger would fabricate certificates if silently clamped.
ARCSIN_GRACE = 1e-12


class FlowDomainError(ValueError):
    """A normalized flow left the arcsin domain [-1, 1]."""

    def __init__(self, edge, value):
        super().__init__(f"|z| = {abs(value):.12g} > 1 on edge {edge}")
        self.edge = edge
        self.value = value


class AngleConsistencyError(RuntimeError):
    """Recovered angles do not reproduce the flows; lambda* was not a root."""


@dataclass(frozen=True)
class FlowParam:
    """Particular flow f_hat, normalized flow z0, and basis image H.

    z(lambda) = z0 + H @ lambda parameterizes every normalized line-flow
    solution for the given injections; H >= 0 entrywise.
    """

    f_hat: np.ndarray  # (m,) particular line flow, oriented convention
    z0: np.ndarray  # (m,) D^-1 f_hat
    h: np.ndarray  # (m, q) D^-1 C, nonnegative
    weights: np.ndarray  # (m,) diagonal of D
    orientation: np.ndarray  # (m,) +1/-1 back to input branch directions
    bridge_edges: tuple[int, ...]
    bridge_flows: np.ndarray  # z0 restricted to bridge edges

    def __post_init__(self):
        for name in ("f_hat", "z0", "h", "weights", "orientation", "bridge_flows"):
            getattr(self, name).setflags(write=False)

    @property
    def q(self):
        return self.h.shape[1]

    def z(self, lam):
        """Normalized flows z0 + H @ lambda (no domain check)."""
        return self.z0 + self.h @ np.asarray(lam, dtype=float)


@dataclass(frozen=True)
class AngleSolution:
    theta: np.ndarray  # (n,) radians, theta[root] = 0
    max_angle_diff: float  # max |theta_i - theta_j| over branches
    residual: float  # inf-norm of P - A D sin(A^T theta)

    def __post_init__(self):
        self.theta.setflags(write=False)


def laplacian_pinv_apply(inc, p, *, balance_tol=1e-9, residual_rtol=1e-9):
    """Solve L u = P on the zero-sum subspace via a grounded system.

    Node 0 is grounded (row/column deleted), the reduced system solved,
    and the result shifted to mean zero, which equals pinv(L) @ P exactly
    on that subspace.  Dense solve for small n, sparse LU above.
    """
    p = np.asarray(p, dtype=float)
    scale = float(np.abs(p).max(initial=0.0))
    if abs(math.fsum(p.tolist())) > balance_tol * max(1.0, scale):
        raise ValueError("injections do not sum to zero")
    n = inc.n
    if n == 1 or scale == 0.0:
        return np.zeros(n)

    u = np.zeros(n)
    if n <= _DENSE_LIMIT:
        lap = (inc.a * inc.weights) @ inc.a.T
        try:
            u[1:] = np.linalg.solve(lap[1:, 1:], p[1:])
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"singular grounded Laplacian: {exc}") from exc
    else:
        a = scipy.sparse.csr_matrix(inc.a)
        lap = (a.multiply(inc.weights) @ a.T).tocsc()
        lu = scipy.sparse.linalg.splu(lap[1:, 1:])
        u[1:] = lu.solve(p[1:])
    u -= u.mean()

    lap_u = (inc.a * inc.weights) @ (inc.a.T @ u) if n <= _DENSE_LIMIT else None
    if lap_u is None:
        lap_u = a @ (inc.weights * (a.T @ u))
    resid = float(np.abs(lap_u - p).max())
    if resid > residual_rtol * max(1.0, scale):
        raise ValueError(f"Laplacian solve residual {resid:.3e} too large")
    return u


def particular_flow(inc, basis, p, *, balance_tol=1e-9, nodal_tol=1e-8):
    """Particular flow f_hat = D A'^T pinv(L) P and the family (z0, H).

    ``inc`` carries the input orientation; the basis re-orientation is
    applied here, so f_hat and z0 come out in the basis edge directions.
    """
    u = laplacian_pinv_apply(inc, p, balance_tol=balance_tol)
    oriented = basis.oriented_incidence(inc)
    z0 = oriented.a.T @ u
    f_hat = oriented.weights * z0
    h = basis.c / oriented.weights[:, None]
    bridges = tuple(
        int(e) for e in np.flatnonzero(basis.c.sum(axis=1) == 0)
    )
    nodal = float(np.abs(oriented.a @ f_hat - p).max(initial=0.0))
    if nodal > nodal_tol * max(1.0, float(np.abs(p).max(initial=0.0))):
        raise ValueError(f"nodal balance residual {nodal:.3e} too large")
    return FlowParam(
        f_hat=f_hat,
        z0=z0,
        h=h,
        weights=oriented.weights.copy(),
        orientation=basis.orientation.copy(),
        bridge_edges=bridges,
        bridge_flows=z0[list(bridges)].copy() if bridges else np.zeros(0),
    )


def safe_arcsin(z, edges=None):
    """Componentwise arcsin with a tiny clamp; beyond it, a hard error."""
    z = np.asarray(z, dtype=float)
    over = np.abs(z) > 1.0 + ARCSIN_GRACE
    if over.any():
        bad = int(np.argmax(over))
        edge = int(edges[bad]) if edges is not None else bad
        raise FlowDomainError(edge, float(z[bad]))
    return np.arcsin(np.clip(z, -1.0, 1.0))


def eval_g(fp, basis, lam):
    """Cycle consistency residual C^T arcsin(z0 + H lambda), radians.

    Component i is the sum of phase-angle differences around basis cycle
    i; a domain violation on any edge raises :class:`FlowDomainError`.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (fp.q,):
        raise ValueError(f"lambda must have shape ({fp.q},), got {lam.shape}")
    z = fp.z(lam)
    return basis.c.T @ safe_arcsin(z)


def recover_theta(
    fp,
    basis,
    inc,
    lambda_star,
    *,
    g_tol=1e-8,
    consistency_tol=1e-7,
    residual_tol=1e-7,
):
    """Assemble phase angles from a cycle-consistent flow (root angle 0).

    Propagates theta over a breadth-first spanning tree using
    delta = arcsin(z(lambda*)); every edge (tree or not) is then checked
    against the assembled angle difference, and the nodal power balance
    is re-verified.  Raises :class:`AngleConsistencyError` if lambda*
    was not actually a root of the cycle residual.
    """
    lambda_star = np.asarray(lambda_star, dtype=float)
    z = fp.z(lambda_star)
    delta = safe_arcsin(z)
    g = basis.c.T @ delta
    if fp.q and float(np.abs(g).max()) > g_tol:
        raise AngleConsistencyError(
            f"cycle residual {float(np.abs(g).max()):.3e} exceeds {g_tol:.1e}"
        )

    oriented = basis.oriented_incidence(inc)
    edges = oriented.edges()
    n = inc.n
    adj = [[] for _ in range(n)]
    for e in range(inc.m):
        u, v = int(edges[e, 0]), int(edges[e, 1])
        adj[u].append((v, e, +1))  # walking source -> sink
        adj[v].append((u, e, -1))

    theta = np.zeros(n)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v, e, sgn in adj[u]:
            if seen[v]:
                continue
            # delta_e = theta_src - theta_snk on edge e
            theta[v] = theta[u] - sgn * delta[e]
            seen[v] = True
            stack.append(v)
    if not seen.all():
        raise AngleConsistencyError("spanning structure does not reach every node")

    diffs = theta[edges[:, 0]] - theta[edges[:, 1]] if inc.m else np.zeros(0)
    mismatch = np.abs(delta - diffs) if inc.m else np.zeros(0)
    if inc.m and float(mismatch.max()) > consistency_tol:
        bad = int(np.argmax(mismatch))
        raise AngleConsistencyError(
            f"back edge {bad} disagrees by {float(mismatch[bad]):.3e}"
        )

    p = oriented.a @ fp.f_hat
    resid = nodal_residual(inc, theta, p)
    if resid > residual_tol * max(1.0, float(np.abs(p).max(initial=0.0))):
        raise AngleConsistencyError(f"power balance residual {resid:.3e}")
    max_diff = float(np.abs(diffs).max(initial=0.0))
    return AngleSolution(theta=theta.copy(), max_angle_diff=max_diff, residual=resid)


def nodal_residual(inc, theta, p):
    """inf-norm of P - A D sin(A^T theta); invariant to edge orientation."""
    flows = inc.weights * np.sin(inc.a.T @ theta)
    return float(np.abs(p - inc.a @ flows).max(initial=0.0))
