"""Box-based solvability certification for the lossless real power flow.

The pipeline follows the verification recipe end to end: build the
nonnegative cycle basis, form the affine normalized-flow family
z(lambda) = z0 + H lambda, place a box around an approximate root of the
cycle residual g, and certify by checking the sign of g on opposite box
faces.  Monotonicity of g in every coordinate is structural (C, H >= 0),
so face signs imply a root inside the box and hence a power flow
solution with all branch angle differences within pi/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .flowcore import (
    AngleConsistencyError,
    FlowDomainError,
    eval_g,
    particular_flow,
    recover_theta,
    safe_arcsin,
)
from .netparse import validate_network
from .topology import (
    build_incidence,
    dfs_cycle_basis,
    find_bridges,
    short_cycle_basis,
)

__all__ = [
    "Box",
    "BoxPolicy",
    "CertifyOptions",
    "Certificate",
    "CERTIFIED",
    "INCONCLUSIVE",
    "find_center",
    "build_box",
    "check_faces",
    "certify",
]

CERTIFIED = "certified"
INCONCLUSIVE = "inconclusive"

# Keep iterates strictly inside the arcsin domain during center search.
_DOMAIN_MARGIN = 1e-9
# Treat |z| beyond 1 by no more than this as exact saturation.
ARCSIN_SLOP = 1e-12


@dataclass(frozen=True)
class BoxPolicy:
    """How the box scale is searched.

    ``scale_grid`` is tried in the given (descending) order; if no grid
    point certifies, the scale interval around the best margin seen is
    refined by bisection until ``max_face_evals`` total face checks.
    """

    scale_grid: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
    max_face_evals: int = 40


@dataclass(frozen=True)
class CertifyOptions:
    recover_solution: bool = False
    basis_search: str = "none"  # "none" | "roots"
    box: BoxPolicy = field(default_factory=BoxPolicy)
    center_g_tol: float = 1e-10
    root_g_tol: float = 1e-10


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi] grown around ``center`` with scale t.

    ``feasible`` certifies that -1 <= z0 + H v <= 1 for every vertex v;
    with H >= 0 this is checked at v = hi (upper) and v = lo (lower).
    """

    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    widths: np.ndarray  # half-widths before scaling
    scale: float
    feasible: bool

    def __post_init__(self):
        for name in ("lo", "hi", "center", "widths"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class Certificate:
    verdict: str  # CERTIFIED | INCONCLUSIVE
    reason: str | None  # None | "bridge overload" | "edge infeasible" | "face condition"
    box: Box | None
    lower_face: np.ndarray | None  # g at the lower-face corners, per cycle
    upper_face: np.ndarray | None
    lambda_star: np.ndarray | None
    theta: object | None  # AngleSolution when recover_solution was on
    worst_margin: float | None  # min face margin (>= 0 iff faces pass)
    diagnostics: dict
    provenance: dict

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    def to_dict(self):
        def arr(x):
            return None if x is None else [float(v) for v in np.atleast_1d(x)]

        doc = {
            "verdict": self.verdict,
            "reason": self.reason,
            "box": None,
            "lower_face": arr(self.lower_face),
            "upper_face": arr(self.upper_face),
            "lambda_star": arr(self.lambda_star),
            "theta": None if self.theta is None else arr(self.theta.theta),
            "worst_margin": self.worst_margin,
            "diagnostics": dict(self.diagnostics),
            "provenance": dict(self.provenance),
        }
        if self.box is not None:
            doc["box"] = {
                "lo": arr(self.box.lo),
                "hi": arr(self.box.hi),
                "center": arr(self.box.center),
                "scale": self.box.scale,
                "feasible": self.box.feasible,
            }
        if self.theta is not None:
            doc["max_angle_diff"] = self.theta.max_angle_diff
            doc["theta_residual"] = self.theta.residual
        return doc


def _cycle_mask(basis):
    return basis.c.sum(axis=1) > 0


def _g_jacobian(fp, basis, z, mask):
    w = 1.0 / np.sqrt(np.maximum(1.0 - z[mask] ** 2, 1e-30))
    return basis.c[mask].T @ (fp.h[mask] * w[:, None])


def _dominance_direction(fp, basis, z_center):
    """Width direction that balances the faces against cycle coupling.

    To first order, growing the box by t*v moves face i of g by
    t * (J v)_i with J = C^T W H >= 0 (W from arcsin').  Solving
    (2 diag(J) - J) v = 1 yields widths whose own-face gain beats the
    worst-case drag from overlapping cycles by a uniform unit, exactly
    when a positive such v exists.  Returns None otherwise; the caller
    then keeps the plain slack-split widths.
    """
    q = fp.q
    if q == 0:
        return None
    mask = _cycle_mask(basis)
    jac = _g_jacobian(fp, basis, z_center, mask)
    m = 2.0 * np.diag(np.diag(jac)) - jac
    try:
        v = np.linalg.solve(m, np.ones(q))
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(v).all() or v.min() <= 0.0:
        return None
    return v / v.max()


def find_center(fp, basis, *, g_tol=1e-10, max_iter=60):
    """Approximate root of g inside the open edge-feasible region.

    Damped Newton from lambda = 0, projecting steps to keep every cycle
    edge strictly inside |z| < 1.  If lambda = 0 is itself infeasible, a
    max-slack LP (Chebyshev-style restoration) provides the start point.
    Always returns a point; its quality only affects how tight the
    certificate is.
    """
    q = fp.q
    if q == 0:
        return np.zeros(0)
    mask = _cycle_mask(basis)
    lam = np.zeros(q)
    if float(np.abs(fp.z0[mask]).max()) >= 1.0 - _DOMAIN_MARGIN:
        restored = _restore_feasibility(fp, mask)
        if restored is None:
            return lam
        lam = restored

    def g_norm(v):
        return float(np.abs(basis.c.T @ safe_arcsin(fp.z(v))).max())

    best = lam.copy()
    best_norm = g_norm(lam)
    for _ in range(max_iter):
        z = fp.z(lam)
        g = basis.c.T @ safe_arcsin(z)
        norm = float(np.abs(g).max())
        if norm < best_norm:
            best, best_norm = lam.copy(), norm
        if norm <= g_tol:
            return lam
        jac = _g_jacobian(fp, basis, z, mask)
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -g, rcond=None)
        alpha = 1.0
        moved = False
        for _ in range(40):
            cand = lam + alpha * step
            z_cand = fp.z(cand)
            if float(np.abs(z_cand[mask]).max()) <= 1.0 - _DOMAIN_MARGIN:
                cand_norm = float(np.abs(basis.c.T @ safe_arcsin(z_cand)).max())
                if cand_norm < norm:
                    lam = cand
                    moved = True
                    break
            alpha *= 0.5
        if not moved:
            break
    z = fp.z(best)
    if float(np.abs(z[mask]).max()) >= 1.0:
        return np.zeros(q)
    return best


def _restore_feasibility(fp, mask):
    """Max-slack lambda for -1 <= z0 + H lambda <= 1 on cycle edges, or None."""
    h = fp.h[mask]
    z0 = fp.z0[mask]
    k, q = h.shape
    # Variables (lambda, s): maximize s with z0 + H lam <= 1 - s and >= -1 + s.
    a_ub = np.block([[h, np.ones((k, 1))], [-h, np.ones((k, 1))]])
    b_ub = np.concatenate([1.0 - z0, 1.0 + z0])
    c = np.zeros(q + 1)
    c[-1] = -1.0
    res = scipy.optimize.linprog(
        c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * q + [(None, 1.0)],
        method="highs",
    )
    if not res.success or res.x[-1] <= _DOMAIN_MARGIN:
        return None
    return res.x[:q]


def build_box(fp, basis, center, scale=1.0, direction=None):
    """Provably edge-feasible box around ``center``.

    By default the per-edge slacks s+ = 1 - z(center), s- = 1 + z(center)
    are split across the c_e cycles covering each edge: half-width
    w_k = min over edges e in cycle k of min(s+_e, s-_e) / (H_ek c_e),
    then lo/hi = center -/+ scale * w.  When ``direction`` (a positive
    q-vector) is given, the widths are instead the largest multiple of
    it that keeps every vertex edge-feasible.  A center with a saturated
    cycle edge yields the degenerate zero-width box, flagged infeasible.
    """
    center = np.asarray(center, dtype=float)
    q = fp.q
    z_c = fp.z(center)
    slack = np.minimum(1.0 - z_c, 1.0 + z_c)
    widths = np.zeros(q)
    degenerate = False
    if direction is None:
        cover = basis.c.sum(axis=1)
        for k in range(q):
            support = np.flatnonzero(basis.c[:, k])
            ratios = slack[support] / (fp.h[support, k] * cover[support])
            w = float(ratios.min())
            if w <= 0.0:
                degenerate = True
                widths[:] = 0.0
                break
            widths[k] = w
    else:
        load = fp.h @ np.asarray(direction, dtype=float)  # worst z shift per edge
        covered = load > 0.0
        t = float((slack[covered] / load[covered]).min()) if covered.any() else 0.0
        if t <= 0.0:
            degenerate = True
        else:
            widths = t * np.asarray(direction, dtype=float)
    if degenerate:
        return Box(
            lo=center.copy(), hi=center.copy(), center=center.copy(),
            widths=widths, scale=scale, feasible=False,
        )
    lo = center - scale * widths
    hi = center + scale * widths
    feasible = _box_feasible(fp, lo, hi)
    return Box(lo=lo, hi=hi, center=center.copy(), widths=widths, scale=scale,
               feasible=feasible)


def _box_feasible(fp, lo, hi):
    # H >= 0, so the extreme z over the box sit at the lo/hi vertices.
    z_hi = fp.z(hi)
    z_lo = fp.z(lo)
    grace = 1e-12
    return bool((z_hi <= 1.0 + grace).all() and (z_lo >= -1.0 - grace).all())


def check_faces(fp, basis, box):
    """Evaluate g_i at the two opposite-face corners of the box.

    For coordinate i the lower corner takes lambda_i at lo with every
    other coordinate at hi (where monotone g_i is largest on that face),
    and symmetrically for the upper corner.  Certification needs
    lower <= 0 <= upper componentwise.
    """
    if not box.feasible:
        raise ValueError("box violates edge feasibility")
    q = fp.q
    lower = np.zeros(q)
    upper = np.zeros(q)
    for i in range(q):
        corner = box.hi.copy()
        corner[i] = box.lo[i]
        lower[i] = eval_g(fp, basis, corner)[i]
        corner = box.lo.copy()
        corner[i] = box.hi[i]
        upper[i] = eval_g(fp, basis, corner)[i]
    _spot_check_monotone(fp, basis, box)
    return lower, upper


def _spot_check_monotone(fp, basis, box, tol=1e-12):
    """Finite-difference sanity check of coordinatewise monotonicity."""
    q = fp.q
    if q == 0:
        return
    z_c = fp.z(box.center)
    room = 1.0 - float(np.abs(z_c[_cycle_mask(basis)]).max())
    if room <= 0.0:
        return
    h_max = float(fp.h.max(initial=0.0))
    step = min(1e-6, 0.25 * room / max(h_max, 1e-30))
    for k in range(min(q, 4)):
        lam = box.center.copy()
        lam[k] += step
        up = eval_g(fp, basis, lam)
        lam[k] -= 2 * step
        down = eval_g(fp, basis, lam)
        if ((up - down) < -tol * max(1.0, step)).any():
            raise AssertionError("monotonicity spot check failed")


def _face_margin(lower, upper):
    if len(lower) == 0:
        return math.inf
    return float(min((-lower).min(), upper.min()))


def _face_search(fp, basis, opts):
    """Pick a center, then scan widths (direction x scale) for passing faces.

    Returns a dict recording the stage reached ("center" means the
    center itself violated edge feasibility, "faces" means boxes were
    checked), the best box with its face values and margin, and the
    direction/scale bookkeeping needed for refinement and reporting.
    """
    center = find_center(fp, basis, g_tol=opts.center_g_tol)
    mask = _cycle_mask(basis)
    z_center = fp.z(center)
    slack = 1.0 - np.abs(z_center[mask])
    feasible = float(np.abs(z_center[mask]).max()) <= 1.0
    search = {
        "center": center,
        "slack": slack,
        "center_g_inf": float(np.abs(eval_g(fp, basis, center)).max())
        if feasible else None,
        "stage": "center",
        "margin": float(slack.min()),
        "box": None, "lower": None, "upper": None,
        "direction": None, "vec": None, "tried": [], "evals": 0,
    }
    if float(slack.min()) <= 0.0:
        return search

    search["stage"] = "faces"
    directions = [("slack-split", None)]
    vec = _dominance_direction(fp, basis, z_center)
    if vec is not None:
        directions.append(("dominance", vec))
    best_margin = -math.inf
    evals = 0
    for name, direction in directions:
        tried = []
        for t in opts.box.scale_grid:
            if evals >= opts.box.max_face_evals:
                break
            box = build_box(fp, basis, center, scale=t, direction=direction)
            if not box.feasible:
                continue
            lower, upper = check_faces(fp, basis, box)
            evals += 1
            margin = _face_margin(lower, upper)
            tried.append((t, margin))
            if margin > best_margin:
                best_margin = margin
                search.update(box=box, lower=lower, upper=upper,
                              direction=name, vec=direction, tried=tried)
            if margin >= 0.0:
                break
        if best_margin >= 0.0:
            break
    search["margin"] = best_margin
    search["evals"] = evals
    return search


def _search_passed(search):
    return search["stage"] == "faces" and search["margin"] >= 0.0


def certify(net, opts=None):
    """Run the full certification pipeline on a network.

    Returns a :class:`Certificate`; never raises on a valid network —
    anything short of a verified box comes back as an inconclusive
    verdict with a machine-readable reason.  The fundamental basis is
    tried first; when its faces fail, a short-cycle basis (less edge
    sharing between cycles, hence wider boxes) is tried before giving
    up, and the certificate reports whichever basis it used.
    """
    if opts is None:
        opts = CertifyOptions()
    validate_network(net)
    inc = build_incidence(net)
    decomp = find_bridges(inc)
    root_choice = "search" if opts.basis_search == "roots" else "lowest"
    basis = dfs_cycle_basis(decomp, inc, root_choice=root_choice)
    fp = particular_flow(inc, basis, net.p)

    diagnostics = {
        "z0_inf_norm": float(np.abs(fp.z0).max(initial=0.0)),
        "lambda2": _lambda2(inc),
        "n_bridges": len(decomp.bridges),
        "q": fp.q,
    }

    def provenance_for(kind, bas):
        return {
            "basis": kind,
            "basis_roots": [int(r) for r in bas.roots],
            "reoriented_edges": [int(e) for e in bas.reoriented_edges],
            "basis_search": opts.basis_search,
            "scale_grid": list(opts.box.scale_grid),
        }

    def inconclusive(reason, provenance, **extra):
        return Certificate(
            verdict=INCONCLUSIVE, reason=reason, box=extra.get("box"),
            lower_face=extra.get("lower"), upper_face=extra.get("upper"),
            lambda_star=None, theta=None,
            worst_margin=extra.get("margin"),
            diagnostics={**diagnostics, **extra.get("diag", {})},
            provenance=provenance,
        )

    # Bridges are outside the cycle parameterization: their normalized
    # flow is fixed, so |z0| <= 1 there is necessary outright.
    if fp.bridge_edges:
        overload = np.abs(fp.bridge_flows) - 1.0
        worst = int(np.argmax(overload))
        if overload[worst] > ARCSIN_SLOP:
            return inconclusive(
                "bridge overload", provenance_for("fundamental-dfs", basis),
                margin=-float(overload[worst]),
                diag={"worst_bridge_edge": int(fp.bridge_edges[worst])},
            )

    q = fp.q
    if q == 0:
        box = Box(lo=np.zeros(0), hi=np.zeros(0), center=np.zeros(0),
                  widths=np.zeros(0), scale=1.0, feasible=True)
        cert = Certificate(
            verdict=CERTIFIED, reason=None, box=box,
            lower_face=np.zeros(0), upper_face=np.zeros(0),
            lambda_star=np.zeros(0), theta=None, worst_margin=math.inf,
            diagnostics=diagnostics,
            provenance={**provenance_for("fundamental-dfs", basis),
                        "box_scale": 1.0},
        )
        if opts.recover_solution:
            cert = _attach_solution(cert, fp, basis, inc, np.zeros(0), opts)
        return cert

    attempts = [("fundamental-dfs", basis, fp, _face_search(fp, basis, opts))]
    if not _search_passed(attempts[0][3]):
        alt = short_cycle_basis(decomp, inc)
        if alt is not None and alt.q == q:
            fp_alt = particular_flow(inc, alt, net.p)
            attempts.append(
                ("short-cycles", alt, fp_alt, _face_search(fp_alt, alt, opts))
            )

    def progress(attempt):
        search = attempt[3]
        return (_search_passed(search), search["stage"] == "faces",
                search["margin"])

    kind, basis, fp, search = max(attempts, key=progress)
    provenance = provenance_for(kind, basis)
    diagnostics["center_g_inf"] = search["center_g_inf"]
    diagnostics["min_center_slack"] = float(search["slack"].min())

    if search["stage"] == "center":
        return inconclusive("edge infeasible", provenance,
                            margin=search["margin"])

    best_margin = search["margin"]
    best = None  # (box, lower, upper)
    if search["box"] is not None:
        best = (search["box"], search["lower"], search["upper"])
    if best is not None and best_margin < 0.0 and search["tried"]:
        best_margin, best = _refine_scale(
            fp, basis, search["center"], search["tried"], best_margin, best,
            opts.box.max_face_evals - search["evals"],
            direction=search["vec"],
        )

    if best is None or best_margin < 0.0:
        return inconclusive(
            "face condition", provenance,
            margin=best_margin if best is not None else None,
            box=best[0] if best else None,
            lower=best[1] if best else None,
            upper=best[2] if best else None,
        )

    box, lower, upper = best
    cert = Certificate(
        verdict=CERTIFIED, reason=None, box=box, lower_face=lower,
        upper_face=upper, lambda_star=None, theta=None,
        worst_margin=best_margin,
        diagnostics={**diagnostics,
                     "edge_slacks": [float(s) for s in search["slack"]]},
        provenance={**provenance, "box_scale": box.scale,
                    "box_direction": search["direction"]},
    )
    if opts.recover_solution:
        lam = _solve_in_box(fp, basis, box, search["center"],
                            tol=opts.root_g_tol)
        cert = _attach_solution(cert, fp, basis, inc, lam, opts)
    return cert


def _refine_scale(fp, basis, center, tried, best_margin, best, budget,
                  direction=None):
    """Bisect scale intervals around the best grid margin."""
    tried = sorted(tried)
    order = np.argsort([-m for _, m in tried])
    t_best = tried[int(order[0])][0]
    ts = [t for t, _ in tried]
    i = ts.index(t_best)
    lo = ts[i - 1] if i > 0 else max(t_best / 2.0, 1e-3)
    hi = ts[i + 1] if i + 1 < len(ts) else min(1.0, t_best * 1.5)
    for _ in range(max(budget, 0)):
        for t in ((lo + t_best) / 2.0, (t_best + hi) / 2.0):
            box = build_box(fp, basis, center, scale=t, direction=direction)
            if not box.feasible:
                continue
            lower, upper = check_faces(fp, basis, box)
            margin = _face_margin(lower, upper)
            if margin > best_margin:
                best_margin, best = margin, (box, lower, upper)
                if t < t_best:
                    hi, t_best = t_best, t
                else:
                    lo, t_best = t_best, t
                break
        else:
            lo = (lo + t_best) / 2.0
            hi = (t_best + hi) / 2.0
        if best_margin >= 0.0 or hi - lo < 1e-4:
            break
    return best_margin, best


def _solve_in_box(fp, basis, box, center, *, tol=1e-10, max_sweeps=300):
    """Locate the root of g guaranteed inside a certified box.

    Damped Newton from the box center; if it stalls, coordinatewise
    monotone bisection sweeps (g_i is increasing in lambda_i) polish the
    iterate.  The certified face signs guarantee a root exists.
    """
    q = fp.q
    if q == 0:
        return np.zeros(0)
    mask = _cycle_mask(basis)
    lam = center.copy()

    def g_of(v):
        return basis.c.T @ safe_arcsin(np.clip(fp.z(v), -1.0, 1.0))

    for _ in range(80):
        g = g_of(lam)
        if float(np.abs(g).max()) <= tol:
            return lam
        z = np.clip(fp.z(lam), -1.0, 1.0)
        jac = _g_jacobian(fp, basis, z, mask)
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        alpha, moved = 1.0, False
        norm = float(np.abs(g).max())
        for _ in range(40):
            cand = lam + alpha * step
            zc = fp.z(cand)
            if float(np.abs(zc[mask]).max()) <= 1.0:
                if float(np.abs(g_of(cand)).max()) < norm:
                    lam, moved = cand, True
                    break
            alpha *= 0.5
        if not moved:
            break

    # Gauss-Seidel style polishing: each residual component is monotone
    # in its own coordinate, so bisect one coordinate at a time.
    lo, hi = box.lo.copy(), box.hi.copy()
    for _ in range(max_sweeps):
        g = g_of(lam)
        if float(np.abs(g).max()) <= tol:
            return lam
        for i in range(q):
            a, b = lo[i], hi[i]

            def gi(x):
                lam[i] = x
                return float(g_of(lam)[i])

            ga, gb = gi(a), gi(b)
            if ga > 0.0:
                lam[i] = a
                continue
            if gb < 0.0:
                lam[i] = b
                continue
            x = scipy.optimize.brentq(gi, a, b, xtol=1e-15, maxiter=200)
            lam[i] = x
    return lam


def _attach_solution(cert, fp, basis, inc, lam, opts):
    try:
        theta = recover_theta(fp, basis, inc, lam)
    except (AngleConsistencyError, FlowDomainError) as exc:
        # The face certificate stands, but without a validated solution
        # attached; surface the failure rather than a half-checked theta.
        return replace(
            cert,
            lambda_star=np.asarray(lam, dtype=float),
            diagnostics={**cert.diagnostics, "recover_error": str(exc)},
        )
    return replace(cert, lambda_star=np.asarray(lam, dtype=float), theta=theta)


def _lambda2(inc):
    lap = (inc.a * inc.weights) @ inc.a.T
    vals = np.linalg.eigvalsh(lap)
    return float(vals[1]) if inc.n > 1 else 0.0
