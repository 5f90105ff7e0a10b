"""Stress sweep: how far can injections be scaled before solvability is lost.

Scales the nominal injections P(y) = y * P0 and locates two load
margins by bisection: ``y_cert`` (largest y the box certificate still
certifies) and ``y_nr`` (largest y the Newton-Raphson reference still
finds a principal-branch solution).  Their ratio eta = y_cert / y_nr is
the tightness of the certificate; 1.0 means the sufficient condition is
sharp along this stress direction.

Both margins assume the verdicts flip monotonically in y.  That holds
structurally for trees and empirically elsewhere; the harness keeps
every sampled point in a trace, audits it, and downgrades the margin to
sit below the smallest observed failure (with a warning) if a
non-monotone window shows up.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .certify import CertifyOptions, certify
from .netparse import scale_injections, validate_network
from .refsolvers import nr_solve

__all__ = ["TracePoint", "SweepResult", "stress_sweep"]

log = logging.getLogger(__name__)

_Y_FLOOR = 1e-9


@dataclass(frozen=True)
class TracePoint:
    y: float
    verdict: str
    nr_ok: bool

    @property
    def certified(self):
        return self.verdict == "certified"


@dataclass(frozen=True)
class SweepResult:
    y_cert: float
    y_nr: float
    eta: float
    trace: tuple  # TracePoint, ascending in y
    tolerance: float
    y_max: float
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "y_cert": self.y_cert,
            "y_nr": self.y_nr,
            "eta": self.eta,
            "tolerance": self.tolerance,
            "y_max": self.y_max,
            "warnings": list(self.warnings),
            "trace": [
                {"y": t.y, "verdict": t.verdict, "nr_ok": t.nr_ok}
                for t in self.trace
            ],
        }


def stress_sweep(net, *, y_max=20.0, tol=1e-3, certify_opts=None, nr_tol=1e-8,
                 nr_max_iter=50):
    """Compute (y_cert, y_nr, eta) for injections scaled as y * P0.

    Every sampled load level is evaluated jointly (certificate and NR)
    and memoized, so the returned trace is one consistent record of the
    whole search.  Certificates are run with solution recovery on, which
    lets the harness cross-check that no certified sample lacks an
    actual solution.
    """
    validate_network(net)
    if float(np.abs(net.p).max(initial=0.0)) == 0.0:
        raise ValueError("nominal injections are zero; load margins undefined")
    if y_max <= 0:
        raise ValueError("y_max must be positive")
    if not 0 < tol < 1:
        raise ValueError("tol must be in (0, 1)")
    if certify_opts is None:
        certify_opts = CertifyOptions(recover_solution=True)
    elif not certify_opts.recover_solution:
        certify_opts = replace(certify_opts, recover_solution=True)

    warnings = []
    memo = {}

    def sample(y):
        if y not in memo:
            scaled = scale_injections(net, y)
            cert = certify(scaled, certify_opts)
            nr = nr_solve(scaled, tol=nr_tol, max_iter=nr_max_iter)
            if cert.certified and cert.theta is None and not nr.success:
                warnings.append(
                    f"certified at y={y:.6g} but neither recovered theta nor "
                    "NR validated a solution"
                )
            memo[y] = TracePoint(y=float(y), verdict=cert.verdict,
                                 nr_ok=nr.success)
            log.debug("sweep sample y=%.6g verdict=%s nr_ok=%s",
                      y, cert.verdict, nr.success)
        return memo[y]

    _search(lambda y: sample(y).certified, y_max, tol)
    _search(lambda y: sample(y).nr_ok, y_max, tol)

    trace = tuple(sorted(memo.values(), key=lambda t: t.y))
    y_cert = _audited_margin(trace, lambda t: t.certified, "certificate",
                             y_max, warnings)
    y_nr = _audited_margin(trace, lambda t: t.nr_ok, "NR", y_max, warnings)

    if y_nr > 0:
        eta = y_cert / y_nr
    else:
        eta = 0.0 if y_cert == 0 else float("inf")
    return SweepResult(
        y_cert=y_cert, y_nr=y_nr, eta=eta, trace=trace, tolerance=tol,
        y_max=y_max, warnings=tuple(warnings),
    )


def _search(ok, y_max, tol):
    """Drive sampling so the trace brackets the flip of ``ok`` to rel tol."""
    if ok(y_max):
        return  # boundary at or beyond y_max; audit reports y_max
    y = min(1.0, 0.5 * y_max)
    lo = None
    while y > _Y_FLOOR:
        if ok(y):
            lo = y
            break
        y *= 0.5
    if lo is None:
        return  # never true above the floor; margin is 0
    hi = None
    while hi is None:
        cand = 2.0 * lo
        if cand >= y_max:
            hi = y_max  # known false from the first probe
        elif ok(cand):
            lo = cand
        else:
            hi = cand
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid


def _audited_margin(trace, ok, label, y_max, warnings):
    """Largest passing y consistent with a monotone reading of the trace."""
    passing = [t.y for t in trace if ok(t)]
    failing = [t.y for t in trace if not ok(t)]
    if not passing:
        return 0.0
    if not failing:
        warnings.append(
            f"{label} margin is at or beyond y_max={y_max:g}; reporting y_max"
        )
        return max(passing)
    first_fail = min(failing)
    clean = [y for y in passing if y < first_fail]
    if len(clean) != len(passing):
        warnings.append(
            f"non-monotone {label} verdicts in trace (pass at "
            f"y={max(passing):.6g} above failure at y={first_fail:.6g}); "
            "using the margin below the smallest failure"
        )
    if not clean:
        return 0.0
    return max(clean)
