"""Oriented incidence structure, bridges, and consistently oriented cycle bases.

The cycle basis is fundamental: bridges are removed first, then each
bridgeless component gets a DFS tree whose tree edges point child to
parent and whose back edges point ancestor to descendant.  Every back
edge closes a directed cycle with the tree path back to its ancestor, so
all basis entries are 0/1 after re-orienting edges to the DFS directions.
Integer arithmetic throughout; weights only enter via the diagonal D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Incidence",
    "BridgeDecomposition",
    "CycleBasis",
    "build_incidence",
    "find_bridges",
    "dfs_cycle_basis",
    "short_cycle_basis",
    "cycle_overlap",
    "to_dot",
]


@dataclass(frozen=True)
class Incidence:
    """Signed node-edge incidence A (+1 source, -1 sink) and edge weights."""

    a: np.ndarray  # (n, m) int, entries in {-1, 0, +1}
    weights: np.ndarray  # (m,) diagonal of D, strictly positive

    def __post_init__(self):
        self.a.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.a.shape[1]

    def edges(self):
        """(m, 2) array of (source, sink) node indices."""
        src = np.argmax(self.a == 1, axis=0)
        snk = np.argmax(self.a == -1, axis=0)
        return np.column_stack([src, snk]) if self.m else np.zeros((0, 2), dtype=int)


def build_incidence(net):
    """Incidence matrix of a Network, columns in canonical branch order."""
    a = np.zeros((net.n, net.m), dtype=int)
    for e, (u, v) in enumerate(net.branches):
        a[u, e] = 1
        a[v, e] = -1
    return Incidence(a=a, weights=net.weights.astype(float))


@dataclass(frozen=True)
class BridgeDecomposition:
    """Bridges plus the 2-edge-connected pieces left after removing them.

    Components cover every node; nodes isolated by bridge removal appear
    as singleton components with empty edge sets.
    """

    bridges: tuple[int, ...]
    components: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]  # (nodes, edges)

    def cyclic_components(self):
        return tuple(c for c in self.components if c[1])


def find_bridges(inc):
    """Linear-time low-link bridge detection (iterative, edge-indexed).

    Tracking the entering edge index rather than the parent node keeps
    parallel edges out of the bridge set.
    """
    n, m = inc.n, inc.m
    edges = inc.edges()
    adj = [[] for _ in range(n)]
    for e in range(m):
        u, v = int(edges[e, 0]), int(edges[e, 1])
        adj[u].append((v, e))
        adj[v].append((u, e))

    disc = np.full(n, -1, dtype=int)
    low = np.zeros(n, dtype=int)
    bridges = []
    counter = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = counter
        counter += 1
        while stack:
            node, in_edge, it = stack[-1]
            advanced = False
            for nbr, e in it:
                if e == in_edge:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = counter
                    counter += 1
                    stack.append((nbr, e, iter(adj[nbr])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nbr])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] == disc[node]:
                    bridges.append(in_edge)

    bridge_set = set(bridges)
    # Connected components of the graph minus bridges.
    comp_of = np.full(n, -1, dtype=int)
    comp_nodes = []
    for start in range(n):
        if comp_of[start] != -1:
            continue
        cid = len(comp_nodes)
        nodes = [start]
        comp_of[start] = cid
        queue = [start]
        while queue:
            u = queue.pop()
            for nbr, e in adj[u]:
                if e in bridge_set or comp_of[nbr] != -1:
                    continue
                comp_of[nbr] = cid
                nodes.append(nbr)
                queue.append(nbr)
        comp_nodes.append(sorted(nodes))
    comp_edges = [[] for _ in comp_nodes]
    for e in range(m):
        if e not in bridge_set:
            comp_edges[comp_of[int(edges[e, 0])]].append(e)
    components = tuple(
        (tuple(nodes), tuple(ces)) for nodes, ces in zip(comp_nodes, comp_edges)
    )
    return BridgeDecomposition(bridges=tuple(sorted(bridges)), components=components)


@dataclass(frozen=True)
class CycleBasis:
    """Nonnegative cycle basis; ``c`` is m x q over {0, 1}.

    Entries are expressed in the re-oriented edge directions;
    ``orientation`` maps back to the input branch directions (+1 kept,
    -1 flipped).  For the fundamental basis of :func:`dfs_cycle_basis`,
    column k is the cycle of ``back_edges[k]`` and ``cycles[k]`` lists
    its edges starting with the back edge, then the tree path from the
    descendant up to the ancestor.  :func:`short_cycle_basis` leaves the
    tree bookkeeping empty and lists each cycle in traversal order.
    """

    c: np.ndarray  # (m, q) int
    cycles: tuple[tuple[int, ...], ...]
    tree_edges: tuple[int, ...]
    back_edges: tuple[int, ...]
    roots: tuple[int, ...]
    orientation: np.ndarray  # (m,) +1 / -1 vs input orientation
    reoriented_edges: tuple[int, ...]

    def __post_init__(self):
        self.c.setflags(write=False)
        self.orientation.setflags(write=False)

    @property
    def q(self):
        return self.c.shape[1]

    def oriented_incidence(self, inc):
        """Incidence with columns flipped to the DFS orientation (A')."""
        return Incidence(a=inc.a * self.orientation, weights=inc.weights)


def _component_basis(inc_edges, comp_nodes, comp_edges, root):
    """DFS one bridgeless component; neighbors visited in ascending index.

    Returns (tree entries, back-edge columns) where each column is the
    back edge followed by its tree path, plus the required orientation
    (source, sink) per touched edge.
    """
    adj = {u: [] for u in comp_nodes}
    for e in comp_edges:
        u, v = int(inc_edges[e, 0]), int(inc_edges[e, 1])
        adj[u].append((v, e))
        adj[v].append((u, e))
    for u in adj:
        adj[u].sort()

    parent_edge = {root: None}  # node -> (parent node, edge index)
    orient = {}  # edge -> (source node, sink node)
    used = set()
    tree_edges = []
    columns = []  # (back edge, [tree path edges])

    stack = [(root, iter(adj[root]))]
    visited = {root}
    while stack:
        node, it = stack[-1]
        advanced = False
        for nbr, e in it:
            if e in used:
                continue
            used.add(e)
            if nbr not in visited:
                visited.add(nbr)
                parent_edge[nbr] = (node, e)
                orient[e] = (nbr, node)  # tree edge: child -> parent
                tree_edges.append(e)
                stack.append((nbr, iter(adj[nbr])))
                advanced = True
                break
            # Non-tree edge from the descendant side; nbr is an open ancestor.
            orient[e] = (nbr, node)  # back edge: ancestor -> descendant
            path = []
            walk = node
            while walk != nbr:
                parent, pe = parent_edge[walk]
                path.append(pe)
                walk = parent
            columns.append((e, path))
        if not advanced:
            stack.pop()
    return tree_edges, columns, orient


def dfs_cycle_basis(decomp, inc, root_choice="lowest"):
    """Consistently oriented cycle basis over all bridgeless components.

    root_choice "lowest" takes the smallest node index per component;
    "search" tries every node in the component as root and keeps the
    basis with the least pairwise cycle overlap (ties to the lowest
    root).  Columns are concatenated in component order (by smallest
    node), back edges in DFS discovery order.
    """
    edges = inc.edges()
    m = inc.m
    orientation = np.ones(m, dtype=int)
    c_columns = []
    cycles = []
    tree_edges = []
    back_edges = []
    roots = []

    for nodes, comp_edges in decomp.components:
        if not comp_edges:
            continue
        if root_choice == "lowest":
            candidates = [nodes[0]]
        elif root_choice == "search":
            candidates = list(nodes)
        else:
            raise ValueError(f"unknown root_choice {root_choice!r}")

        best = None
        for root in candidates:
            trees, cols, orient = _component_basis(edges, nodes, comp_edges, root)
            cost = _overlap_cost(cols, m)
            if best is None or cost < best[0]:
                best = (cost, root, trees, cols, orient)
        _, root, trees, cols, orient = best

        roots.append(root)
        tree_edges.extend(trees)
        for back, path in cols:
            col = np.zeros(m, dtype=int)
            col[back] = 1
            col[path] = 1
            c_columns.append(col)
            cycles.append((back, *path))
            back_edges.append(back)
        for e, (src, snk) in orient.items():
            if (int(edges[e, 0]), int(edges[e, 1])) != (src, snk):
                orientation[e] = -1

    q = len(c_columns)
    c = np.column_stack(c_columns) if q else np.zeros((m, 0), dtype=int)
    reoriented = tuple(int(e) for e in np.flatnonzero(orientation == -1))
    return CycleBasis(
        c=c,
        cycles=tuple(cycles),
        tree_edges=tuple(tree_edges),
        back_edges=tuple(back_edges),
        roots=tuple(roots),
        orientation=orientation,
        reoriented_edges=reoriented,
    )


def _trace_cycle(edge_set, edges):
    """Walk an edge set as one simple cycle; None if it is not one.

    Returns the edges in walk order plus each edge's traversal sign
    (+1 when walked source -> sink in the input orientation).  The walk
    starts at the lowest node and moves to its lowest neighbour first,
    so the result is deterministic.
    """
    adj = {}
    for e in edge_set:
        u, v = int(edges[e, 0]), int(edges[e, 1])
        adj.setdefault(u, []).append((v, e))
        adj.setdefault(v, []).append((u, e))
    if any(len(nbrs) != 2 for nbrs in adj.values()):
        return None
    start = min(adj)
    node, via = start, None
    walk = []
    while True:
        nxt = min((v, e) for v, e in adj[node] if e != via)
        v, e = nxt
        walk.append((e, +1 if (int(edges[e, 0]), int(edges[e, 1])) == (node, v) else -1))
        node, via = v, e
        if node == start:
            break
        if len(walk) > len(edge_set):
            return None
    if len(walk) != len(edge_set):
        return None  # edge set splits into several loops
    return walk


def _short_cycle_candidates(edges, comp_nodes, comp_edges):
    """Unique simple cycles built from shortest-path pairs per node.

    From every node x and every component edge (u, v), the cycle is the
    xor of the two breadth-first tree paths x->u and x->v plus the edge
    itself.  The pool provably contains some minimum-length basis; here
    it just feeds a greedy pass.  Sorted by (length, edge tuple).
    """
    adj = {u: [] for u in comp_nodes}
    for e in comp_edges:
        u, v = int(edges[e, 0]), int(edges[e, 1])
        adj[u].append((v, e))
        adj[v].append((u, e))
    for u in adj:
        adj[u].sort()

    path_edges = {}  # bfs root -> node -> frozen set of tree-path edges
    for x in comp_nodes:
        parent = {x: None}
        order = [x]
        for node in order:
            for v, e in adj[node]:
                if v not in parent:
                    parent[v] = (node, e)
                    order.append(v)
        paths = {x: frozenset()}
        for node in order[1:]:
            up, e = parent[node]
            paths[node] = paths[up] | {e}
        path_edges[x] = paths

    seen = {}
    for x in comp_nodes:
        paths = path_edges[x]
        for e in comp_edges:
            u, v = int(edges[e, 0]), int(edges[e, 1])
            if u not in paths or v not in paths:
                continue
            ring = paths[u] ^ paths[v]
            if e in ring:
                continue
            ring = ring | {e}
            if ring not in seen:
                walk = _trace_cycle(ring, edges)
                seen[ring] = walk
    good = [w for w in seen.values() if w is not None]
    return sorted(good, key=lambda w: (len(w), tuple(sorted(e for e, _ in w))))


def short_cycle_basis(decomp, inc):
    """Greedy short-cycle basis, oriented so every column is 0/1.

    Candidates (shortest cycles, see :func:`_short_cycle_candidates`)
    are accepted when they are independent over GF(2) and when all
    accepted cycles still admit a single edge re-orientation making
    each of them a directed cycle; ties in length go to the candidate
    sharing the fewest edges with cycles already kept.  Heavily
    overlapping fundamental bases make the face conditions needlessly
    conservative; short, lightly overlapping cycles certify much wider
    boxes.  Returns None when the greedy pass stalls below full rank,
    so callers can fall back to :func:`dfs_cycle_basis`.
    """
    edges = inc.edges()
    m = inc.m
    orientation = np.ones(m, dtype=int)
    accepted = []  # list of dict edge -> traversal sign
    kept_walks = []
    cover = [0] * m  # how many kept cycles touch each edge
    pivots = {}  # top GF(2) bit -> reduced bitmask
    parent = {}  # cycle id -> (parent id, parity bit vs parent)
    target = 0

    def find(i):
        trail = []
        par = 0
        while parent[i][0] != i:
            trail.append((i, par))
            par ^= parent[i][1]
            i = parent[i][0]
        for j, before in trail:
            parent[j] = (i, par ^ before)
        return i, par

    for nodes, comp_edges in decomp.components:
        if not comp_edges:
            continue
        target += len(comp_edges) - len(nodes) + 1
        pool = _short_cycle_candidates(edges, nodes, comp_edges)
        while pool and len(accepted) < target:
            pick = None
            survivors = []
            for walk in pool:
                mask = 0
                for e, _ in walk:
                    mask |= 1 << e
                while mask:
                    top = mask.bit_length() - 1
                    if top not in pivots:
                        break
                    mask ^= pivots[top]
                if not mask:
                    continue  # dependent on kept cycles; stays dependent

                signs = dict(walk)
                required = {}  # root id -> parity of this cycle vs root
                clash = False
                for j, other in enumerate(accepted):
                    bit = None
                    for e, s in signs.items():
                        if e in other:
                            b = 0 if s == other[e] else 1
                            if bit is None:
                                bit = b
                            elif bit != b:
                                clash = True
                                break
                    if clash:
                        break
                    if bit is None:
                        continue
                    root, par = find(j)
                    if required.setdefault(root, bit ^ par) != bit ^ par:
                        clash = True
                        break
                if clash:
                    continue  # constraints only accumulate; drop it

                survivors.append(walk)
                key = (len(walk), sum(cover[e] for e, _ in walk),
                       tuple(sorted(e for e, _ in walk)))
                if pick is None or key < pick[0]:
                    pick = (key, walk, mask, required)
            if pick is None:
                break
            _, walk, mask, required = pick
            survivors.remove(walk)
            pool = survivors

            cid = len(accepted)
            accepted.append(dict(walk))
            kept_walks.append(walk)
            pivots[mask.bit_length() - 1] = mask
            for e, _ in walk:
                cover[e] += 1
            roots = list(required.items())
            if not roots:
                parent[cid] = (cid, 0)
            else:
                anchor, bit0 = roots[0]
                parent[cid] = (anchor, bit0)
                for other_root, bit in roots[1:]:
                    parent[other_root] = (anchor, bit0 ^ bit)

    if len(accepted) != target or target == 0:
        return None

    c = np.zeros((m, target), dtype=int)
    cycles = []
    for i, (signs, walk) in enumerate(zip(accepted, kept_walks)):
        _, par = find(i)
        flip = -1 if par else 1
        for e, s in signs.items():
            c[e, i] = 1
            orientation[e] = flip * s
        cycles.append(tuple(e for e, _ in walk))

    reoriented = tuple(int(e) for e in np.flatnonzero(orientation == -1))
    return CycleBasis(
        c=c,
        cycles=tuple(cycles),
        tree_edges=(),
        back_edges=(),
        roots=(),
        orientation=orientation,
        reoriented_edges=reoriented,
    )


def _overlap_cost(columns, m):
    row_sum = np.zeros(m, dtype=int)
    for back, path in columns:
        row_sum[back] += 1
        row_sum[path] += 1
    return int((row_sum * (row_sum - 1) // 2).sum())


def cycle_overlap(basis):
    """Total pairwise overlap sum_e C(row_sum_e, 2); lower is better."""
    row_sum = basis.c.sum(axis=1)
    return int((row_sum * (row_sum - 1) // 2).sum())


def to_dot(net, decomp, basis):
    """DOT dump of the oriented graph: tree, back and bridge edges attributed."""
    edges = np.column_stack(
        [
            np.where(basis.orientation == 1, net.branches[:, 0], net.branches[:, 1]),
            np.where(basis.orientation == 1, net.branches[:, 1], net.branches[:, 0]),
        ]
    ) if net.m else np.zeros((0, 2), dtype=int)
    tree = set(basis.tree_edges)
    back = set(basis.back_edges)
    bridges = set(decomp.bridges)
    ids = net.bus_ids.tolist()
    lines = ["digraph network {"]
    for i in range(net.n):
        lines.append(f'  {ids[i]} [label="{ids[i]}"];')
    for e in range(net.m):
        u, v = ids[int(edges[e, 0])], ids[int(edges[e, 1])]
        if e in bridges:
            attrs = 'color=black style=bold role="bridge"'
        elif e in back:
            attrs = 'color=red role="back"'
        elif e in tree:
            attrs = 'color=green role="tree"'
        else:
            attrs = 'color=gray role="unclassified"'
        lines.append(f'  {u} -> {v} [label="e{e}" {attrs}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
