"""Discrete Bayesian networks as ground truth for the selector.

Holds forward sampling, d-separation, Markov blankets, the graphical fair
feature set, exact interventional distributions by truncated factorization,
and the K-fairness gap of a predictor.
"""

import json
import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .citest import CITestResult
from .dataset import ColumnMeta, DataTable

# exact enumeration limit, in binary-equivalent nodes (sum of log2 cardinalities)
MAX_ENUM_BITS = 20
CPT_TOL = 1e-12


class IntractableError(ValueError):
    """Exact enumeration would exceed the node-count cap."""


@dataclass(frozen=True, eq=False)
class BayesNet:
    """Discrete DAG with one CPT per node.

    ``cpts[v]`` has shape ``(prod(parent cards), cards[v])``. Parent
    assignments are indexed in mixed radix over ``parents[v]`` with the first
    parent most significant.
    """

    names: tuple
    parents: tuple
    cards: tuple
    cpts: tuple
    sensitive: str | None = None
    target: str | None = None

    def __post_init__(self):
        n = len(self.names)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "parents", tuple(tuple(int(p) for p in ps) for ps in self.parents))
        object.__setattr__(self, "cards", tuple(int(c) for c in self.cards))
        cpts = []
        for v, cpt in enumerate(self.cpts):
            cpt = np.array(cpt, dtype=np.float64)
            cpt.setflags(write=False)
            cpts.append(cpt)
        object.__setattr__(self, "cpts", tuple(cpts))
        if not (len(self.parents) == len(self.cards) == len(self.cpts) == n):
            raise ValueError("names, parents, cards and cpts must have equal length")
        if len(set(self.names)) != n:
            raise ValueError("node names must be unique")
        for v in range(n):
            ps = self.parents[v]
            if len(set(ps)) != len(ps) or v in ps or any(not 0 <= p < n for p in ps):
                raise ValueError(f"bad parent list for {self.names[v]!r}")
            if self.cards[v] < 1:
                raise ValueError(f"node {self.names[v]!r} needs at least one state")
            rows = int(np.prod([self.cards[p] for p in ps], dtype=np.int64))
            cpt = self.cpts[v]
            if cpt.shape != (rows, self.cards[v]):
                raise ValueError(
                    f"CPT of {self.names[v]!r} has shape {cpt.shape}, expected {(rows, self.cards[v])}"
                )
            if (cpt < 0).any() or np.abs(cpt.sum(axis=1) - 1.0).max() > CPT_TOL:
                raise ValueError(f"CPT rows of {self.names[v]!r} must be distributions")
        self.topological_order()  # raises on cycles
        for role in (self.sensitive, self.target):
            if role is not None and role not in self.names:
                raise ValueError(f"unknown role node {role!r}")

    @property
    def n_nodes(self):
        return len(self.names)

    def index(self, node):
        if isinstance(node, (int, np.integer)):
            if not 0 <= node < self.n_nodes:
                raise IndexError(f"node index {node} out of range")
            return int(node)
        try:
            return self.names.index(node)
        except ValueError:
            raise KeyError(f"unknown node {node!r}") from None

    def children(self):
        ch = [[] for _ in self.names]
        for v, ps in enumerate(self.parents):
            for p in ps:
                ch[p].append(v)
        return ch

    def topological_order(self):
        indeg = [len(ps) for ps in self.parents]
        ch = self.children()
        queue = deque(v for v in range(self.n_nodes) if indeg[v] == 0)
        order = []
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in ch[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != self.n_nodes:
            raise ValueError("graph has a cycle")
        return order

    def descendants(self, v):
        ch = self.children()
        seen, stack = set(), [v]
        while stack:
            for c in ch[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def cut_incoming(self, nodes):
        """Structure with all edges into ``nodes`` removed (CPTs become uniform)."""
        nodes = {self.index(v) for v in nodes}
        parents, cpts = [], []
        for v in range(self.n_nodes):
            if v in nodes:
                parents.append(())
                cpts.append(np.full((1, self.cards[v]), 1.0 / self.cards[v]))
            else:
                parents.append(self.parents[v])
                cpts.append(self.cpts[v])
        return BayesNet(self.names, parents, self.cards, cpts, self.sensitive, self.target)

    def mutilate(self, assignments):
        """Network after ``do(v = state)`` for every item of ``assignments``."""
        fixed = {}
        for node, state in assignments.items():
            v = self.index(node)
            if not 0 <= state < self.cards[v]:
                raise ValueError(f"state {state} out of range for {self.names[v]!r}")
            fixed[v] = int(state)
        parents, cpts = [], []
        for v in range(self.n_nodes):
            if v in fixed:
                row = np.zeros((1, self.cards[v]))
                row[0, fixed[v]] = 1.0
                parents.append(())
                cpts.append(row)
            else:
                parents.append(self.parents[v])
                cpts.append(self.cpts[v])
        return BayesNet(self.names, parents, self.cards, cpts, self.sensitive, self.target)

    def parent_index(self, v, states):
        """Row index into ``cpts[v]`` for per-row parent states (2-D array, columns = nodes)."""
        idx = np.zeros(states.shape[0], dtype=np.int64)
        for p in self.parents[v]:
            idx = idx * self.cards[p] + states[:, p]
        return idx

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        return {
            "sensitive": self.sensitive,
            "target": self.target,
            "nodes": [
                {
                    "name": self.names[v],
                    "states": self.cards[v],
                    "parents": [self.names[p] for p in self.parents[v]],
                    "cpt": [[float(x) for x in row] for row in self.cpts[v]],
                }
                for v in range(self.n_nodes)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        nodes = d["nodes"]
        names = [nd["name"] for nd in nodes]
        parents = [[names.index(p) for p in nd["parents"]] for nd in nodes]
        return cls(
            names,
            parents,
            [nd["states"] for nd in nodes],
            [nd["cpt"] for nd in nodes],
            d.get("sensitive"),
            d.get("target"),
        )


def save_network(bn, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bn.to_dict(), fh, indent=1)
        fh.write("\n")


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return BayesNet.from_dict(json.load(fh))


def random_network(n_nodes, edge_prob=0.25, seed=0, cards=(2, 3), clamp=0.05,
                   sensitive="S", target="T"):
    """Erdos-Renyi DAG over a random topological order with Dirichlet CPTs.

    Every CPT entry is at least ``clamp``. When roles are requested the
    first node of the hidden order is the (binary, root) sensitive node and
    the target is a binary node drawn from the later half of the order with
    at least one parent. Remaining nodes are named ``X<i>`` by column.
    """
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    rng = np.random.default_rng(seed)
    topo = [int(v) for v in rng.permutation(n_nodes)]
    pos = {v: i for i, v in enumerate(topo)}
    parents = [[] for _ in range(n_nodes)]
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < edge_prob:
                parents[topo[j]].append(topo[i])
    node_cards = [int(rng.choice(cards)) for _ in range(n_nodes)]

    s_node = t_node = None
    if sensitive is not None:
        s_node = topo[0]
        node_cards[s_node] = 2
    if target is not None:
        late = [v for v in topo[n_nodes // 2:] if parents[v] and v != s_node]
        if not late:
            late = [v for v in topo[1:]]
        t_node = late[int(rng.integers(len(late)))]
        node_cards[t_node] = 2

    names = []
    for v in range(n_nodes):
        if v == s_node:
            names.append(sensitive)
        elif v == t_node:
            names.append(target)
        else:
            names.append(f"X{v}")
    cpts = []
    for v in range(n_nodes):
        parents[v].sort(key=lambda p: pos[p])
        rows = int(np.prod([node_cards[p] for p in parents[v]], dtype=np.int64))
        c = node_cards[v]
        raw = rng.dirichlet(np.ones(c), size=rows)
        cpts.append(clamp + (1.0 - clamp * c) * raw)
    return BayesNet(names, parents, node_cards, cpts,
                    sensitive if s_node is not None else None,
                    target if t_node is not None else None)


def sample(bn, n, seed=0):
    """``n`` i.i.d. rows by ancestral sampling, as a :class:`DataTable`.

    Column ``i`` is node ``i``; state labels are ``"0"``, ``"1"``, ...
    Roles are copied from the network when it names them.
    """
    rng = np.random.default_rng(seed)
    states = np.zeros((n, bn.n_nodes), dtype=np.int64)
    for v in bn.topological_order():
        probs = bn.cpts[v][bn.parent_index(v, states)]
        cum = np.cumsum(probs, axis=1)
        u = rng.random(n)[:, None]
        states[:, v] = np.minimum((u >= cum).sum(axis=1), bn.cards[v] - 1)
    metas = [ColumnMeta(name, tuple(str(k) for k in range(c))) for name, c in zip(bn.names, bn.cards)]
    s = bn.index(bn.sensitive) if bn.sensitive is not None else None
    t = bn.index(bn.target) if bn.target is not None else None
    return DataTable(states.T.copy(), metas, s, t)


def d_separated(bn, x, y, z=()):
    """Bayes-ball reachability: is every path between ``x`` and ``y`` blocked by ``z``?"""
    x, y = bn.index(x), bn.index(y)
    z = {bn.index(v) for v in z}
    if x == y:
        raise ValueError("x and y must differ")
    if x in z or y in z:
        raise ValueError("x and y must not be in the conditioning set")
    ch = bn.children()

    # nodes that are in z or have a descendant in z
    anc_z = set()
    stack = list(z)
    while stack:
        v = stack.pop()
        if v not in anc_z:
            anc_z.add(v)
            stack.extend(bn.parents[v])

    # (node, direction): "up" = arrived from a child, "down" = from a parent
    visited = set()
    queue = deque([(x, "up")])
    while queue:
        v, d = queue.popleft()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v == y:
            return False
        if d == "up" and v not in z:
            for p in bn.parents[v]:
                queue.append((p, "up"))
            for c in ch[v]:
                queue.append((c, "down"))
        elif d == "down":
            if v not in z:
                for c in ch[v]:
                    queue.append((c, "down"))
            if v in anc_z:
                for p in bn.parents[v]:
                    queue.append((p, "up"))
    return True


def markov_blanket(bn, t):
    t = bn.index(t)
    ch = bn.children()
    mb = set(bn.parents[t]) | set(ch[t])
    for c in ch[t]:
        mb |= set(bn.parents[c])
    mb.discard(t)
    return mb


def fair_feature_certificates(bn, t, s, max_k=3):
    """Blocking sets for the members of MB(t) that can be cut off from ``s``.

    A member ``X`` qualifies when some ``Z`` drawn from MB(s) (minus ``X``
    and the target) with ``|Z| <= max_k`` d-separates ``X`` from ``s`` once
    the edges into ``s`` are removed. Returns ``{X: Z}`` with the first
    ``Z`` found by size, then lexicographic order.
    """
    t, s = bn.index(t), bn.index(s)
    if s == t:
        raise ValueError("sensitive and target must differ")
    cut = bn.cut_incoming([s])
    pool = sorted(markov_blanket(bn, s) - {t})
    certs = {}
    for x in sorted(markov_blanket(bn, t) - {s}):
        cands = [v for v in pool if v != x]
        for k in range(0, min(max_k, len(cands)) + 1):
            hit = next((zs for zs in combinations(cands, k) if d_separated(cut, x, s, zs)), None)
            if hit is not None:
                certs[x] = hit
                break
    return certs


def fair_feature_set(bn, t, s, max_k=3):
    return set(fair_feature_certificates(bn, t, s, max_k))


def _check_enumerable(bn, free):
    bits = sum(math.log2(bn.cards[v]) for v in free)
    if bits > MAX_ENUM_BITS + 1e-9:
        raise IntractableError(
            f"exact enumeration over {bits:.1f} binary-equivalent nodes exceeds the cap of {MAX_ENUM_BITS}"
        )


def enumerate_joint(bn, do=None):
    """All joint states with nonzero weight under ``do`` and their probabilities.

    Intervened nodes are clamped; every other node keeps its CPT
    (truncated factorization). Returns ``(states, probs)`` with ``states``
    of shape ``(m, n_nodes)``.
    """
    do = {bn.index(k): int(v) for k, v in (do or {}).items()}
    for v, st in do.items():
        if not 0 <= st < bn.cards[v]:
            raise ValueError(f"state {st} out of range for {bn.names[v]!r}")
    free = [v for v in range(bn.n_nodes) if v not in do]
    _check_enumerable(bn, free)
    grids = np.meshgrid(*[np.arange(bn.cards[v]) for v in free], indexing="ij") if free else []
    m = int(np.prod([bn.cards[v] for v in free], dtype=np.int64))
    states = np.zeros((m, bn.n_nodes), dtype=np.int64)
    for v, g in zip(free, grids):
        states[:, v] = g.reshape(-1)
    for v, st in do.items():
        states[:, v] = st
    probs = np.ones(m)
    for v in free:
        probs *= bn.cpts[v][bn.parent_index(v, states), states[:, v]]
    return states, probs


def interventional_dist(bn, do_assignments, query):
    """Exact ``P(query | do(...))`` by truncated factorization."""
    q = bn.index(query)
    if q in {bn.index(k) for k in do_assignments}:
        raise ValueError("query node cannot be intervened on")
    states, probs = enumerate_joint(bn, do_assignments)
    return np.bincount(states[:, q], weights=probs, minlength=bn.cards[q])


def kfair_gap(bn, predictor, s, k_nodes=()):
    """Largest change in the predictor's output distribution under ``do(S)``.

    ``predictor`` maps an ``(m, n_nodes)`` array of node states to ``m``
    binary outputs. For every context ``k`` of ``k_nodes`` with nonzero
    observational probability, compares ``P(O | do(S=0), do(K=k))`` with
    ``P(O | do(S=1), do(K=k))``.
    """
    s = bn.index(s)
    if bn.cards[s] != 2:
        raise ValueError("sensitive node must be binary")
    ks = [bn.index(v) for v in k_nodes]
    if s in ks:
        raise ValueError("sensitive node cannot be part of the context")
    context_mass = None
    if ks:
        states, probs = enumerate_joint(bn)
        context_mass = {}
        for row, p in zip(map(tuple, states[:, ks]), probs):
            context_mass[row] = context_mass.get(row, 0.0) + p
    gap = 0.0
    for k in product(*[range(bn.cards[v]) for v in ks]):
        if context_mass is not None and context_mass.get(tuple(k), 0.0) <= 0.0:
            continue
        rates = []
        for s_val in (0, 1):
            do = {s: s_val, **dict(zip(ks, k))}
            states, probs = enumerate_joint(bn, do)
            out = np.asarray(predictor(states)).astype(np.int64)
            rates.append(float(probs[out == 1].sum()))
        gap = max(gap, abs(rates[0] - rates[1]))
    return gap


class DSeparationTester:
    """Perfect independence oracle with the :class:`G2Tester` interface.

    Column indices are node indices (as produced by :func:`sample`).
    """

    def __init__(self, bn):
        self.bn = bn

    def test(self, x, y, cond=()):
        sep = d_separated(self.bn, x, y, cond)
        return CITestResult(0.0 if sep else math.inf, 1, 1.0 if sep else 0.0, True, sep)
