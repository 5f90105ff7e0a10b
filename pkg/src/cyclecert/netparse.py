"""Case-file ingestion and the lossless network model.

Reads a MATPOWER-style ``.m`` case (only the ``baseMVA``, ``bus``, ``gen``
and ``branch`` matrices) or an equivalent JSON case, and turns it into a
validated lossless network: series resistance and shunts dropped, branch
susceptance ``B = 1/x``, per-branch weight ``V_i * V_j * B_ij``, and a
balanced nodal injection vector.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "CaseError",
    "BusRecord",
    "GenRecord",
    "BranchRecord",
    "RawCase",
    "LosslessOptions",
    "MergeReport",
    "Network",
    "parse_case",
    "load_case",
    "losslessify",
    "validate_network",
    "network_to_json",
    "network_from_json",
    "scale_injections",
]

# Column positions in the MATPOWER bus/gen/branch matrices (0-based).
_BUS_I, _BUS_TYPE, _BUS_PD, _BUS_VM = 0, 1, 2, 7
_GEN_BUS, _GEN_PG, _GEN_STATUS = 0, 1, 7
_BR_F, _BR_T, _BR_R, _BR_X, _BR_STATUS = 0, 1, 2, 3, 10


class CaseError(ValueError):
    """Raised for malformed case input or an invalid network."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class BusRecord:
    id: int
    bus_type: int
    pd: float  # MW demand, units as in file
    vm: float  # voltage magnitude, p.u.


@dataclass(frozen=True)
class GenRecord:
    bus: int
    pg: float  # MW output, units as in file


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    r: float
    x: float
    # Direct susceptance, set when the input carries "b" instead of "x"
    # (canonical network JSON).  Takes precedence over 1/x.
    b_direct: float | None = None


@dataclass(frozen=True)
class RawCase:
    """Validated case records with units preserved as in the input file.

    Out-of-service branches and generators have already been dropped.
    """

    base_mva: float
    buses: tuple[BusRecord, ...]
    gens: tuple[GenRecord, ...]
    branches: tuple[BranchRecord, ...]

    @property
    def n(self):
        return len(self.buses)

    @property
    def m(self):
        return len(self.branches)


@dataclass(frozen=True)
class LosslessOptions:
    """Policy knobs for :func:`losslessify`.

    voltage: "flat" fixes all magnitudes at 1.0 p.u.; "case" takes the VM
    column from the input.  slack_bus absorbs the whole injection mismatch
    at one bus instead of the default uniform projection.
    """

    voltage: str = "flat"
    slack_bus: int | None = None


@dataclass(frozen=True)
class MergeReport:
    """What losslessify changed: merged parallels and the balancing shift."""

    merged_pairs: tuple[tuple[int, int, int], ...]  # (bus_u, bus_v, count)
    injection_mismatch: float  # sum of raw injections, p.u.
    shift_per_bus: float  # uniform shift applied (0 when slack_bus used)
    slack_bus: int | None = None


@dataclass(frozen=True)
class Network:
    """Lossless network model.

    Branches are stored as index pairs (source, sink) into ``bus_ids``;
    the orientation is fixed at construction and stable across runs.
    ``weights`` holds the per-branch coupling V_i * V_j * B_ij.
    """

    bus_ids: np.ndarray  # (n,) original bus ids, ascending
    vm: np.ndarray  # (n,) voltage magnitudes, p.u.
    p: np.ndarray  # (n,) nodal injections, p.u., sums to ~0
    branches: np.ndarray  # (m, 2) int, (source idx, sink idx)
    susceptance: np.ndarray  # (m,) B_ij = 1/x, p.u.

    def __post_init__(self):
        for name in ("bus_ids", "vm", "p", "branches", "susceptance"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n(self):
        return len(self.bus_ids)

    @property
    def m(self):
        return len(self.susceptance)

    @property
    def weights(self):
        """Edge weights b~_ij = V_i * V_j * B_ij."""
        if self.m == 0:
            return np.zeros(0)
        src, snk = self.branches[:, 0], self.branches[:, 1]
        return self.vm[src] * self.vm[snk] * self.susceptance

    def index_of(self, bus_id):
        i = int(np.searchsorted(self.bus_ids, bus_id))
        if i >= self.n or self.bus_ids[i] != bus_id:
            raise CaseError(f"unknown bus {bus_id}")
        return i

    @classmethod
    def from_edges(cls, edges, weights=None, p=None, vm=None, bus_ids=None):
        """Build a network from explicit (bus_u, bus_v) pairs in given order.

        Intended for tests and worked examples where the edge ordering is
        part of the fixture; :func:`losslessify` is the canonical path.
        """
        edges = [(int(u), int(v)) for u, v in edges]
        if bus_ids is None:
            bus_ids = sorted({u for u, _ in edges} | {v for _, v in edges})
        bus_ids = np.asarray(bus_ids, dtype=int)
        idx = {b: i for i, b in enumerate(bus_ids.tolist())}
        n = len(bus_ids)
        branches = np.array([[idx[u], idx[v]] for u, v in edges], dtype=int)
        branches = branches.reshape(len(edges), 2)
        if weights is None:
            weights = np.ones(len(edges))
        if vm is None:
            vm = np.ones(n)
        if p is None:
            p = np.zeros(n)
        elif isinstance(p, dict):
            vec = np.zeros(n)
            for bus, val in p.items():
                vec[idx[int(bus)]] = val
            p = vec
        return cls(
            bus_ids=bus_ids,
            vm=np.asarray(vm, dtype=float).copy(),
            p=np.asarray(p, dtype=float).copy(),
            branches=branches,
            susceptance=np.asarray(weights, dtype=float).copy(),
        )


def parse_case(text):
    """Parse MATPOWER ``.m`` or JSON case content into a :class:`RawCase`."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json_case(text)
    return _parse_matpower(text)


def _tokenize_row(row, line_no):
    vals = []
    for tok in row.replace(",", " ").split():
        try:
            vals.append(float(tok))
        except ValueError:
            raise CaseError(f"cannot parse number {tok!r}", line=line_no) from None
    return vals


def _parse_matpower(text):
    base_mva = None
    blocks = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].split("%", 1)[0].strip()
        i += 1
        if not line:
            continue
        m = re.match(r"mpc\.baseMVA\s*=\s*([0-9eE.+-]+)\s*;?", line)
        if m:
            base_mva = float(m.group(1))
            continue
        m = re.match(r"mpc\.(bus|gen|branch)\s*=\s*\[(.*)", line)
        if m:
            name, rest = m.group(1), m.group(2)
            start = i
            rows = []
            buf = rest
            while True:
                if "]" in buf:
                    buf = buf.split("]", 1)[0]
                    rows.extend(_split_rows(buf, start))
                    break
                rows.extend(_split_rows(buf, start))
                if i >= len(lines):
                    raise CaseError(f"unterminated mpc.{name} block", line=start)
                buf = lines[i].split("%", 1)[0]
                i += 1
            blocks[name] = rows
    if base_mva is None:
        raise CaseError("missing mpc.baseMVA")
    if "bus" not in blocks:
        raise CaseError("missing mpc.bus block")

    buses = []
    for row, line_no in blocks["bus"]:
        vals = _tokenize_row(row, line_no)
        if len(vals) < 8:
            raise CaseError("bus row needs at least 8 columns", line=line_no)
        buses.append(
            BusRecord(
                id=int(vals[_BUS_I]),
                bus_type=int(vals[_BUS_TYPE]),
                pd=vals[_BUS_PD],
                vm=vals[_BUS_VM],
            )
        )

    gens = []
    for row, line_no in blocks.get("gen", []):
        vals = _tokenize_row(row, line_no)
        if len(vals) < 8:
            raise CaseError("gen row needs at least 8 columns", line=line_no)
        if vals[_GEN_STATUS] <= 0:
            continue
        gens.append(GenRecord(bus=int(vals[_GEN_BUS]), pg=vals[_GEN_PG]))

    branches = []
    for row, line_no in blocks.get("branch", []):
        vals = _tokenize_row(row, line_no)
        if len(vals) < 11:
            raise CaseError("branch row needs at least 11 columns", line=line_no)
        if vals[_BR_STATUS] <= 0:
            continue
        if vals[_BR_X] <= 0:
            raise CaseError(
                f"non-positive reactance x={vals[_BR_X]} on branch "
                f"({int(vals[_BR_F])},{int(vals[_BR_T])})",
                line=line_no,
            )
        branches.append(
            BranchRecord(
                from_bus=int(vals[_BR_F]),
                to_bus=int(vals[_BR_T]),
                r=vals[_BR_R],
                x=vals[_BR_X],
            )
        )
    return _validated_raw(RawCase(base_mva, tuple(buses), tuple(gens), tuple(branches)))


def _split_rows(buf, line_no):
    rows = []
    for part in buf.split(";"):
        part = part.strip()
        if part:
            rows.append((part, line_no))
    return rows


def _parse_json_case(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    base_mva = float(doc.get("baseMVA", 1.0))
    buses = tuple(
        BusRecord(id=int(b["id"]), bus_type=1, pd=0.0, vm=float(b.get("vm", 1.0)))
        for b in doc.get("buses", [])
    )
    # Net injections become negative demands so P_i = p_i / baseMVA.
    inj = {int(rec["id"]): float(rec["p"]) for rec in doc.get("injections", [])}
    buses = tuple(replace(b, pd=-inj.get(b.id, 0.0)) for b in buses)
    branches = []
    for rec in doc.get("branches", []):
        b_direct = rec.get("b")
        x = rec.get("x")
        if b_direct is None and x is None:
            raise CaseError(f"branch {rec} has neither 'x' nor 'b'")
        if b_direct is not None and float(b_direct) <= 0:
            raise CaseError(f"non-positive susceptance b={b_direct}")
        if b_direct is None and float(x) <= 0:
            raise CaseError(f"non-positive reactance x={x}")
        branches.append(
            BranchRecord(
                from_bus=int(rec["from"]),
                to_bus=int(rec["to"]),
                r=float(rec.get("r", 0.0)),
                x=float(x) if x is not None else 0.0,
                b_direct=float(b_direct) if b_direct is not None else None,
            )
        )
    return _validated_raw(RawCase(base_mva, buses, (), tuple(branches)))


def _validated_raw(raw):
    if raw.n == 0:
        raise CaseError("case has no buses")
    ids = [b.id for b in raw.buses]
    known = set(ids)
    if len(known) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise CaseError(f"duplicate bus id {dup}")
    for br in raw.branches:
        for bus in (br.from_bus, br.to_bus):
            if bus not in known:
                raise CaseError(f"unknown bus {bus} referenced by branch")
        if br.from_bus == br.to_bus:
            raise CaseError(f"self-loop branch at bus {br.from_bus}")
    for g in raw.gens:
        if g.bus not in known:
            raise CaseError(f"unknown bus {g.bus} referenced by generator")
    return raw


def load_case(source, opts=None):
    """Parse and losslessify a case from a path or a bundled name.

    ``source`` is a filesystem path, or a bare bundled-case name such as
    ``"case9"`` / ``"case14"`` (a trailing ``.m`` is optional).  Returns
    ``(Network, MergeReport)`` like :func:`losslessify`.
    """
    path = Path(str(source))
    if path.is_file():
        text = path.read_text()
    elif path.name == str(source):
        name = path.name if path.name.endswith(".m") else path.name + ".m"
        res = resources.files("cyclecert").joinpath("cases").joinpath(name)
        if not res.is_file():
            raise CaseError(f"no such case file or bundled case: {source}")
        text = res.read_text()
    else:
        raise CaseError(f"no such case file: {source}")
    return losslessify(parse_case(text), opts)


def losslessify(raw, opts=None):
    """Reduce a :class:`RawCase` to the lossless model.

    Resistance, charging and taps are dropped; B = 1/x per branch;
    parallel branches between the same bus pair are merged by summing B;
    injections are (sum Pg - Pd)/baseMVA balanced onto the zero-sum
    subspace.  Returns ``(Network, MergeReport)``.
    """
    if opts is None:
        opts = LosslessOptions()
    bus_ids = np.array(sorted(b.id for b in raw.buses), dtype=int)
    idx = {b: i for i, b in enumerate(bus_ids.tolist())}
    n = len(bus_ids)

    bus_by_id = {b.id: b for b in raw.buses}
    if opts.voltage == "case":
        vm = np.array([bus_by_id[b].vm for b in bus_ids.tolist()])
    elif opts.voltage == "flat":
        vm = np.ones(n)
    else:
        raise CaseError(f"unknown voltage policy {opts.voltage!r}")

    # Merge parallel branches on the canonical (low id -> high id) key.
    merged = {}
    counts = {}
    for br in raw.branches:
        if br.b_direct is not None:
            susc = br.b_direct
        else:
            if br.x <= 0:
                raise CaseError(
                    f"zero reactance on branch ({br.from_bus},{br.to_bus})"
                )
            susc = 1.0 / br.x
        key = (min(br.from_bus, br.to_bus), max(br.from_bus, br.to_bus))
        merged[key] = merged.get(key, 0.0) + susc
        counts[key] = counts.get(key, 0) + 1
    keys = sorted(merged)
    branches = np.array([[idx[u], idx[v]] for u, v in keys], dtype=int)
    branches = branches.reshape(len(keys), 2)
    susceptance = np.array([merged[k] for k in keys])
    merged_pairs = tuple((u, v, counts[(u, v)]) for u, v in keys if counts[(u, v)] > 1)

    pg = np.zeros(n)
    for g in raw.gens:
        pg[idx[g.bus]] += g.pg
    pd = np.array([bus_by_id[b].pd for b in bus_ids.tolist()])
    p = (pg - pd) / raw.base_mva

    mismatch = math.fsum(p.tolist())
    if opts.slack_bus is not None:
        if opts.slack_bus not in idx:
            raise CaseError(f"unknown slack bus {opts.slack_bus}")
        p = p.copy()
        p[idx[opts.slack_bus]] -= mismatch
        shift = 0.0
    else:
        p = _project_balanced(p)
        shift = mismatch / n

    net = Network(
        bus_ids=bus_ids,
        vm=vm,
        p=p,
        branches=branches,
        susceptance=susceptance,
    )
    _check_connected(net)
    report = MergeReport(
        merged_pairs=merged_pairs,
        injection_mismatch=mismatch,
        shift_per_bus=shift,
        slack_bus=opts.slack_bus,
    )
    return net, report


def _project_balanced(p):
    """Subtract the mean until the residual mean is exactly zero.

    A single pass leaves an O(eps) mean; iterating makes the projection
    exactly idempotent in floating point (at most a few passes).
    """
    p = np.asarray(p, dtype=float).copy()
    for _ in range(4):
        mean = math.fsum(p.tolist()) / len(p)
        if mean == 0.0:
            break
        p -= mean
    return p


def _check_connected(net):
    if net.n <= 1:
        return
    adj = [[] for _ in range(net.n)]
    for u, v in net.branches:
        adj[u].append(v)
        adj[v].append(u)
    seen = np.zeros(net.n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not seen.all():
        missing = net.bus_ids[~seen].tolist()
        raise CaseError(f"disconnected graph: buses {missing} unreachable from bus {net.bus_ids[0]}")


def validate_network(net, tol=1e-9):
    """Check the Network invariants; raises :class:`CaseError` on violation."""
    if not isinstance(net, Network):
        raise TypeError(f"expected Network, got {type(net).__name__}")
    if net.n < 1:
        raise CaseError("network has no buses")
    if net.m and not (net.weights > 0).all():
        bad = int(np.argmin(net.weights))
        raise CaseError(f"non-positive edge weight on branch {bad}")
    total = abs(math.fsum(net.p.tolist()))
    if total > tol * max(1.0, float(np.abs(net.p).max(initial=0.0))):
        raise CaseError(f"injections sum to {total:.3e}, expected 0")
    _check_connected(net)
    return net


def scale_injections(net, y):
    """Network with injections y * P; everything else shared."""
    return Network(
        bus_ids=net.bus_ids,
        vm=net.vm,
        p=y * net.p,
        branches=net.branches,
        susceptance=net.susceptance,
    )


def network_to_json(net, indent=2):
    """Canonical JSON form: branches sorted by (min endpoint, max endpoint).

    Susceptance is written under ``"b"`` (authoritative, exact round trip)
    next to the reactance ``"x" = 1/b`` for readability.
    """
    ids = net.bus_ids.tolist()
    order = sorted(
        range(net.m),
        key=lambda e: (
            min(ids[net.branches[e, 0]], ids[net.branches[e, 1]]),
            max(ids[net.branches[e, 0]], ids[net.branches[e, 1]]),
        ),
    )
    doc = {
        "n": net.n,
        "buses": [{"id": ids[i], "vm": float(net.vm[i])} for i in range(net.n)],
        "branches": [
            {
                "from": ids[int(net.branches[e, 0])],
                "to": ids[int(net.branches[e, 1])],
                "b": float(net.susceptance[e]),
                "x": 1.0 / float(net.susceptance[e]),
            }
            for e in order
        ],
        "injections": [{"id": ids[i], "p": float(net.p[i])} for i in range(net.n)],
    }
    return json.dumps(doc, indent=indent, sort_keys=True)


def network_from_json(text):
    """Inverse of :func:`network_to_json`; exact for `"b"`-carrying input."""
    doc = json.loads(text)
    bus_ids = np.array(sorted(int(b["id"]) for b in doc["buses"]), dtype=int)
    idx = {int(b): i for i, b in enumerate(bus_ids.tolist())}
    n = len(bus_ids)
    vm = np.ones(n)
    for b in doc["buses"]:
        vm[idx[int(b["id"])]] = float(b.get("vm", 1.0))
    p = np.zeros(n)
    for rec in doc.get("injections", []):
        p[idx[int(rec["id"])]] = float(rec["p"])
    branches = []
    susc = []
    for rec in doc["branches"]:
        branches.append([idx[int(rec["from"])], idx[int(rec["to"])]])
        susc.append(float(rec["b"]) if "b" in rec else 1.0 / float(rec["x"]))
    return Network(
        bus_ids=bus_ids,
        vm=vm,
        p=p,
        branches=np.array(branches, dtype=int).reshape(len(branches), 2),
        susceptance=np.array(susc),
    )
