"""Command-line front end: parse a case, certify, sweep, inspect topology.

Subcommands
-----------
certify   box-certificate for one case; exit 0 certified, 2 inconclusive
sweep     load-margin sweep (y_cert, y_nr, eta) for one or more cases
topo      bridges, 2-edge-connected components, cycle count, DOT dump
nr        reference Newton-Raphson solve; exit 0 on success, 2 otherwise

Any input error (unreadable, unparseable, invalid network) exits 1 with
the message on stderr.  Reports echo the full run configuration; with
``--no-meta`` the JSON output is byte-identical across runs.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import time

from . import __version__
from .certify import BoxPolicy, CertifyOptions, certify
from .netparse import CaseError, LosslessOptions, load_case
from .refsolvers import nr_solve
from .sweep import stress_sweep
from .topology import build_incidence, dfs_cycle_basis, find_bridges, to_dot

log = logging.getLogger(__name__)

_DEFAULT_FORMAT = {"certify": "json", "sweep": "csv", "topo": "text", "nr": "json"}
_DEFAULT_TOL = {"certify": 1e-10, "sweep": 1e-3, "nr": 1e-8, "topo": None}

CSV_HEADER = "case,yCert,yNR,eta,basisPolicy,boxPolicy,wallTime"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cyclecert",
        description="Certify lossless power flow solvability via cycle-basis "
        "box conditions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "certify": ("box solvability certificate for a case", 1),
        "sweep": ("stress sweep: certified vs NR load margins", "+"),
        "topo": ("bridge/cycle topology report with DOT dump", 1),
        "nr": ("reference Newton-Raphson solve", 1),
    }
    for name, (help_text, nargs) in specs.items():
        sp = sub.add_parser(name, help=help_text)
        if nargs == 1:
            sp.add_argument("case", help="case file path or bundled name (case9, case14)")
        else:
            sp.add_argument("case", nargs="+",
                            help="case file path(s) or bundled name(s)")
        _add_common(sp, name)
    return parser


def _add_common(sp, command):
    sp.add_argument("--voltage", choices=("flat", "case"), default="flat",
                    help="voltage profile: flat 1.0 p.u. or the case VM column")
    sp.add_argument("--slack-bus", type=int, default=None, metavar="ID",
                    help="absorb the injection mismatch at this bus "
                    "(default: uniform projection)")
    sp.add_argument("--basis-search", choices=("none", "roots"), default="none",
                    help="'roots' tries every DFS root and keeps the basis "
                    "with least cycle overlap")
    sp.add_argument("--box-scale-grid", default=None, metavar="T1,T2,...",
                    help="descending box scale factors to try (default "
                    "1.0,0.9,...,0.1)")
    sp.add_argument("--tol", type=float, default=None,
                    help=f"tolerance (default {_DEFAULT_TOL[command]})")
    sp.add_argument("--ymax", type=float, default=20.0,
                    help="sweep upper bound on the load scale (default 20)")
    sp.add_argument("--format", choices=("json", "csv", "text"),
                    default=_DEFAULT_FORMAT[command],
                    help=f"output format (default {_DEFAULT_FORMAT[command]})")
    sp.add_argument("--recover-solution", action="store_true",
                    help="also solve inside the certified box and attach theta")
    sp.add_argument("--no-meta", action="store_true",
                    help="omit timing/version metadata for byte-identical output")
    sp.add_argument("--seed", type=int, default=None,
                    help="seed echoed into the config (randomized workflows)")


def _parse_grid(text):
    if text is None:
        return None
    try:
        grid = tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError as exc:
        raise CaseError(f"bad --box-scale-grid: {exc}") from None
    if not grid or any(t <= 0 or t > 1 for t in grid):
        raise CaseError("--box-scale-grid values must lie in (0, 1]")
    return grid


def _box_policy(args):
    grid = _parse_grid(args.box_scale_grid)
    return BoxPolicy() if grid is None else BoxPolicy(scale_grid=grid)


def _tol(args):
    return args.tol if args.tol is not None else _DEFAULT_TOL[args.command]


def _config_echo(args):
    cases = args.case if isinstance(args.case, list) else [args.case]
    return {
        "command": args.command,
        "input": cases,
        "voltage": args.voltage,
        "slack_bus": args.slack_bus,
        "basis_search": args.basis_search,
        "box_scale_grid": list(_parse_grid(args.box_scale_grid) or
                               BoxPolicy().scale_grid),
        "tol": _tol(args),
        "ymax": args.ymax,
        "format": args.format,
        "recover_solution": args.recover_solution,
        "seed": args.seed,
    }


def _load(args, case):
    opts = LosslessOptions(voltage=args.voltage, slack_bus=args.slack_bus)
    net, report = load_case(case, opts)
    log.info("loaded %s: n=%d m=%d (merged %d parallel pairs, mismatch %.4g)",
             case, net.n, net.m, len(report.merged_pairs),
             report.injection_mismatch)
    return net


def _emit_json(doc, args, wall):
    if not args.no_meta:
        doc["meta"] = {"wall_time_s": round(wall, 3), "version": __version__}
    print(json.dumps(doc, indent=2, sort_keys=True))


def _fmt(v):
    return f"{v:.6g}"


def _run_certify(args):
    net = _load(args, args.case)
    opts = CertifyOptions(
        recover_solution=args.recover_solution,
        basis_search=args.basis_search,
        box=_box_policy(args),
        root_g_tol=_tol(args),
    )
    start = time.perf_counter()
    cert = certify(net, opts)
    wall = time.perf_counter() - start
    if args.format == "json":
        _emit_json({"config": _config_echo(args),
                    "certificate": cert.to_dict()}, args, wall)
    elif args.format == "text":
        d = cert.diagnostics
        print(f"case           {args.case}")
        print(f"verdict        {cert.verdict}"
              + (f" ({cert.reason})" if cert.reason else ""))
        print(f"cycles q       {d.get('q')}")
        print(f"bridges        {d.get('n_bridges')}")
        print(f"|z0|_inf       {_fmt(d['z0_inf_norm'])}")
        print(f"lambda2        {_fmt(d['lambda2'])}")
        if cert.worst_margin is not None:
            print(f"face margin    {_fmt(cert.worst_margin)}")
        if cert.box is not None and cert.box.scale:
            print(f"box scale      {_fmt(cert.box.scale)}")
        if cert.theta is not None:
            print(f"theta residual {_fmt(cert.theta.residual)}")
            print(f"max |d theta|  {_fmt(cert.theta.max_angle_diff)}")
    else:  # csv
        print("case,verdict,reason,q,nBridges,worstMargin")
        margin = "" if cert.worst_margin is None else _fmt(cert.worst_margin)
        print(f"{args.case},{cert.verdict},{cert.reason or ''},"
              f"{cert.diagnostics.get('q')},{cert.diagnostics.get('n_bridges')},"
              f"{margin}")
    return 0 if cert.certified else 2


def _run_sweep(args):
    tol = _tol(args)
    results = []
    for case in args.case:
        net = _load(args, case)
        opts = CertifyOptions(recover_solution=True,
                              basis_search=args.basis_search,
                              box=_box_policy(args))
        start = time.perf_counter()
        res = stress_sweep(net, y_max=args.ymax, tol=tol, certify_opts=opts)
        results.append((case, res, time.perf_counter() - start))
        for msg in res.warnings:
            log.warning("%s: %s", case, msg)

    grid = _parse_grid(args.box_scale_grid) or BoxPolicy().scale_grid
    basis_policy = args.basis_search
    box_policy = "grid:" + ";".join(_fmt(t) for t in grid)
    if args.format == "csv":
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        for case, res, wall in results:
            wall_s = "" if args.no_meta else f"{wall:.3f}"
            out.write(
                f"{case},{_fmt(res.y_cert)},{_fmt(res.y_nr)},{_fmt(res.eta)},"
                f"{basis_policy},{box_policy},{wall_s}\n"
            )
        sys.stdout.write(out.getvalue())
    elif args.format == "json":
        doc = {
            "config": _config_echo(args),
            "results": [
                {"case": case, **res.to_dict()} for case, res, _ in results
            ],
        }
        _emit_json(doc, args, sum(w for *_, w in results))
    else:  # text: aligned margin table
        print(f"{'case':<20} {'y_cert':>10} {'y_NR':>10} {'eta':>9}")
        for case, res, _ in results:
            print(f"{case:<20} {res.y_cert:>10.4f} {res.y_nr:>10.4f} "
                  f"{res.eta * 100:>8.2f}%")
    return 0


def _run_topo(args):
    net = _load(args, args.case)
    inc = build_incidence(net)
    decomp = find_bridges(inc)
    root_choice = "search" if args.basis_search == "roots" else "lowest"
    basis = dfs_cycle_basis(decomp, inc, root_choice=root_choice)
    ids = net.bus_ids
    bridge_pairs = sorted(
        tuple(sorted((int(ids[net.branches[e, 0]]), int(ids[net.branches[e, 1]]))))
        for e in decomp.bridges
    )
    comp_docs = [
        {"buses": [int(ids[v]) for v in nodes], "n_edges": len(edges)}
        for nodes, edges in decomp.components
    ]
    dot = to_dot(net, decomp, basis)
    if args.format == "json":
        doc = {
            "config": _config_echo(args),
            "bridges": [list(b) for b in bridge_pairs],
            "components": comp_docs,
            "q": basis.q,
            "roots": [int(ids[r]) for r in basis.roots],
            "reoriented_edges": list(basis.reoriented_edges),
            "dot": dot,
        }
        _emit_json(doc, args, 0.0)
    else:
        print(f"bridges ({len(bridge_pairs)}): "
              + (", ".join(f"({u},{v})" for u, v in bridge_pairs) or "none"))
        for i, c in enumerate(comp_docs):
            print(f"component {i}: buses {c['buses']} edges {c['n_edges']}")
        print(f"q = {basis.q}")
        print(dot)
    return 0


def _run_nr(args):
    net = _load(args, args.case)
    start = time.perf_counter()
    res = nr_solve(net, tol=_tol(args))
    wall = time.perf_counter() - start
    if args.format == "json":
        _emit_json({"config": _config_echo(args), "result": res.to_dict()},
                   args, wall)
    else:
        print(f"converged      {res.converged}")
        print(f"success        {res.success}")
        print(f"iterations     {res.iterations}")
        print(f"residual       {_fmt(res.final_residual)}")
        print(f"max |d theta|  {_fmt(res.max_angle_diff)}")
    return 0 if res.success else 2


_RUNNERS = {
    "certify": _run_certify,
    "sweep": _run_sweep,
    "topo": _run_topo,
    "nr": _run_nr,
}


def main(argv=None):
    level = os.environ.get("CYCLECERT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return _RUNNERS[args.command](args)
    except (CaseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
