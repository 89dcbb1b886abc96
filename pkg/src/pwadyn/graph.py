"""The admissible-word Markov graph, its loop-length truncations, spectral
entropy, exact loop counts, strongly connected components and the Parry
(maximal entropy) chain."""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

POWER_TOL = 1e-12
POWER_MAX_ITER = 10**6
NEG_INF = float("-inf")


class GraphSpecError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass
class MarkovGraph:
    """Directed multigraph on labelled vertices.

    ``succ[i]`` lists (j, multiplicity) pairs.  For word graphs the labels
    are (word, index) pairs and ``rect_of`` maps a base vertex to the
    rectangle its word starts in.
    """

    labels: list
    succ: list
    base: frozenset
    rect_of: dict = field(default_factory=dict)
    excluded_unknown: int = 0
    excluded_no: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        return sum(m for row in self.succ for _, m in row)

    def index(self, label) -> int:
        if not hasattr(self, "_index"):
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        return self._index[label]

    def adjacency(self, keep=None) -> csr_matrix:
        """Integer adjacency matrix, optionally restricted to the vertex
        list ``keep`` (rows/columns in that order)."""
        if keep is None:
            keep = range(self.n_vertices)
        keep = list(keep)
        pos = {v: k for k, v in enumerate(keep)}
        rows, cols, vals = [], [], []
        for v in keep:
            for j, m in self.succ[v]:
                if j in pos:
                    rows.append(pos[v])
                    cols.append(pos[j])
                    vals.append(m)
        n = len(keep)
        return csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(n, n))

    def transpose(self) -> "MarkovGraph":
        pred = [[] for _ in self.labels]
        for i, row in enumerate(self.succ):
            for j, m in row:
                pred[j].append((i, m))
        return MarkovGraph(list(self.labels), pred, self.base, dict(self.rect_of))


def graph_from_edges(edges, base=None) -> MarkovGraph:
    """Graph from (u, v) or (u, v, multiplicity) label triples.  Every
    vertex is a base vertex unless ``base`` is given."""
    labels, index = [], {}

    def vid(lab):
        if lab not in index:
            index[lab] = len(labels)
            labels.append(lab)
        return index[lab]

    acc = {}
    for e in edges:
        u, v = vid(e[0]), vid(e[1])
        acc[(u, v)] = acc.get((u, v), 0) + (e[2] if len(e) > 2 else 1)
    succ = [[] for _ in labels]
    for (u, v), m in sorted(acc.items()):
        succ[u].append((v, m))
    base_ids = frozenset(range(len(labels))) if base is None else frozenset(index[b] for b in base)
    return MarkovGraph(labels, succ, base_ids)


def build_word_graph(strips) -> MarkovGraph:
    """Word graph of the admissible strips.

    ``strips`` is an iterable of objects with ``word`` (extended word
    A_0..A_n) and ``admissible``, or of (word, status) pairs.  The
    admissible word is the extended word minus its last letter; w' follows
    w when w extended by w'[0] is an admissible strip word.
    """
    ends = {}
    n_unknown = n_no = 0
    for s in strips:
        word, status = (s.word, s.admissible) if hasattr(s, "word") else s
        word = tuple(word)
        if status == "unknown":
            n_unknown += 1
            continue
        if status != "yes":
            n_no += 1
            continue
        ends.setdefault(word[:-1], set()).add(word[-1])
    words = sorted(ends)
    by_first = {}
    for w in words:
        by_first.setdefault(w[0], []).append(w)
    labels, first_id = [], {}
    for w in words:
        first_id[w] = len(labels)
        labels.extend((w, i) for i in range(len(w)))
    succ = [[] for _ in labels]
    for w in words:
        v0 = first_id[w]
        for i in range(len(w) - 1):
            succ[v0 + i].append((v0 + i + 1, 1))
        last = v0 + len(w) - 1
        targets = sorted({first_id[w2] for e in ends[w] for w2 in by_first.get(e, ())})
        succ[last].extend((t, 1) for t in targets)
    base = frozenset(first_id.values())
    rect_of = {first_id[w]: w[0] for w in words}
    return MarkovGraph(labels, succ, base, rect_of, n_unknown, n_no)


# --------------------------------------------------------------------------
# spectral radius


def _power_radius(a: csr_matrix):
    """Perron root and right vector of an irreducible nonnegative matrix.

    Iterates on A + I (primitive whenever A is irreducible) and stops when
    the Collatz-Wielandt bracket min/max of (Mv)_i / v_i closes to
    POWER_TOL relative.
    """
    n = a.shape[0]
    if n == 0:
        return 0.0, np.zeros(0)
    if a.nnz == 0:
        return 0.0, np.ones(n) / n
    m = a.astype(np.float64)
    v = np.ones(n) / n
    lo = hi = 0.0
    for _ in range(POWER_MAX_ITER):
        w = m @ v + v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        v = w / w.sum()
        if hi - lo <= POWER_TOL * hi:
            break
    return 0.5 * (lo + hi) - 1.0, v


def _components(a: csr_matrix):
    n = a.shape[0]
    if n == 0:
        return []
    k, lab = connected_components(a, directed=True, connection="strong")
    comps = [[] for _ in range(k)]
    for i, c in enumerate(lab):
        comps[c].append(i)
    return comps


def spectral_radius(a: csr_matrix) -> float:
    """Largest Perron root over the strongly connected components."""
    best = 0.0
    for comp in _components(a):
        sub = a[comp][:, comp]
        if sub.nnz == 0:
            continue
        best = max(best, _power_radius(sub)[0])
    return best


def log_radius(rho: float) -> float:
    return math.log(rho) if rho > 0 else NEG_INF


# --------------------------------------------------------------------------
# truncations


@dataclass
class Component:
    vertices: list  # vertex ids of the parent graph
    rho: float
    has_base: bool


@dataclass
class FiniteTruncation:
    graph: MarkovGraph
    n: int
    vertices: list  # parent vertex ids, sorted
    adjacency: csr_matrix
    rho: float
    components: list
    irreducible: bool

    @property
    def entropy(self) -> float:
        return log_radius(self.rho)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())


def _bfs(succ, src, limit):
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if dist[u] >= limit:
            continue
        for v, _ in succ[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def finite_truncation(g: MarkovGraph, n: int) -> FiniteTruncation:
    """Vertices and edges lying on a closed path of length <= n through a
    base vertex.  An edge u -> v qualifies when some base vertex b has
    d(b, u) + 1 + d(v, b) <= n."""
    if n < 1:
        raise ValueError("truncation length must be >= 1")
    pred = g.transpose().succ
    keep_edges = set()
    for b in sorted(g.base):
        out_d = _bfs(g.succ, b, n)
        in_d = _bfs(pred, b, n)
        for u, du in out_d.items():
            for v, _ in g.succ[u]:
                dv = in_d.get(v)
                if dv is not None and du + 1 + dv <= n:
                    keep_edges.add((u, v))
    verts = sorted({u for e in keep_edges for u in e})
    pos = {v: k for k, v in enumerate(verts)}
    rows, cols, vals = [], [], []
    for u in verts:
        for v, m in g.succ[u]:
            if (u, v) in keep_edges:
                rows.append(pos[u])
                cols.append(pos[v])
                vals.append(m)
    a = csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(len(verts), len(verts)))
    comps = []
    for comp in _components(a):
        sub = a[comp][:, comp]
        rho = _power_radius(sub)[0] if sub.nnz else 0.0
        comps.append(Component([verts[i] for i in comp], rho, any(verts[i] in g.base for i in comp)))
    comps.sort(key=lambda c: c.vertices[0])
    rho = max((c.rho for c in comps), default=0.0)
    irreducible = len(comps) == 1 and a.nnz > 0
    return FiniteTruncation(g, n, verts, a, rho, comps, irreducible)


def irreducible_components(trunc: FiniteTruncation, rel_tol: float = 1e-9):
    """(components, mme_bound): the bound counts components that meet a
    base vertex and attain the truncation's spectral radius."""
    comps = [c for c in trunc.components if c.rho > 0 or _has_loop(trunc.graph, c)]
    top = trunc.rho
    bound = sum(1 for c in comps if c.has_base and abs(c.rho - top) <= rel_tol * max(top, 1.0))
    return comps, bound


def _has_loop(g, comp):
    vs = set(comp.vertices)
    return any(j in vs for v in comp.vertices for j, _ in g.succ[v])


# --------------------------------------------------------------------------
# loops


def loop_counts(g: MarkovGraph, vertex, n_max: int) -> list:
    """Exact number of closed paths of length 1..n_max at ``vertex``
    (a label or a vertex id)."""
    try:
        v = g.index(vertex)
    except (KeyError, TypeError):
        if not isinstance(vertex, int) or not 0 <= vertex < g.n_vertices:
            raise KeyError(f"no vertex {vertex!r}") from None
        v = vertex
    cur = {v: 1}
    out = []
    for _ in range(n_max):
        nxt = {}
        for u, c in cur.items():
            for j, m in g.succ[u]:
                nxt[j] = nxt.get(j, 0) + c * m
        cur = nxt
        out.append(cur.get(v, 0))
    return out


def normalized_loops(counts, rho: float):
    return [c / rho ** (k + 1) for k, c in enumerate(counts)]


# --------------------------------------------------------------------------
# Parry chain


def _period(g_succ, verts):
    """gcd of cycle lengths of a strongly connected vertex set."""
    vs = set(verts)
    root = verts[0]
    level = {root: 0}
    q = deque([root])
    p = 0
    while q:
        u = q.popleft()
        for v, _ in g_succ[u]:
            if v not in vs:
                continue
            if v not in level:
                level[v] = level[u] + 1
                q.append(v)
            else:
                p = math.gcd(p, level[u] + 1 - level[v])
    return p


@dataclass
class ParryChain:
    labels: list
    transition: np.ndarray  # vertex-to-vertex probabilities
    stationary: np.ndarray
    rho: float
    entropy: float  # -sum pi_i p_e log p_e over edges
    period: int
    edge_prob: np.ndarray  # probability of a single edge i -> j

    @property
    def log_rho(self) -> float:
        return math.log(self.rho)


def parry_measure(trunc) -> ParryChain:
    """Maximal-entropy Markov chain of an irreducible truncation (or of an
    irreducible MarkovGraph)."""
    if isinstance(trunc, MarkovGraph):
        g, verts, a = trunc, list(range(trunc.n_vertices)), trunc.adjacency()
        if len(_components(a)) != 1:
            raise ValueError("graph is not irreducible")
    else:
        if not trunc.irreducible:
            raise ValueError("truncation is not irreducible")
        g, verts, a = trunc.graph, trunc.vertices, trunc.adjacency
    rho, r = _power_radius(a)
    _, lft = _power_radius(a.T.tocsr())
    dense = a.toarray().astype(np.float64)
    q = np.outer(1.0 / r, r) / rho  # per-edge probability r_j / (rho r_i)
    p = dense * q
    p = p / p.sum(axis=1, keepdims=True)
    pi = lft * r
    pi = pi / pi.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(dense > 0, dense * q * np.log(np.where(dense > 0, q, 1.0)), 0.0)
    ent = float(-(pi[:, None] * terms).sum())
    return ParryChain([g.labels[v] for v in verts], p, pi, rho, ent, _period(g.succ, verts), q)


def sample_orbit(chain: ParryChain, length: int, seed: int) -> list:
    """Vertex-label path of the stationary chain, deterministic per seed."""
    rng = np.random.default_rng(seed)
    cum = np.cumsum(chain.transition, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(length)
    state = int(np.searchsorted(np.cumsum(chain.stationary), u[0], side="right"))
    state = min(state, len(chain.labels) - 1)
    out = [state]
    for k in range(1, length):
        state = int(np.searchsorted(cum[state], u[k], side="right"))
        out.append(state)
    return [chain.labels[s] for s in out]


def project_letters(path) -> tuple:
    """Piece letters of a word-graph path: vertex (w, i) reads w[i]."""
    return tuple(w[i] for w, i in path)


# --------------------------------------------------------------------------
# graph files and built-in graphs

_LINE = re.compile(r"^\s*(vertex|edge)\s+(.*?)\s*$")


def parse_graph_file(text: str) -> MarkovGraph:
    """Lines ``vertex NAME [base]`` and ``edge U V [MULT]``; '#' comments.

    Without any ``base`` marker every vertex is a base vertex.
    """
    labels, base, edges = [], [], []
    seen = set()
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise GraphSpecError(f"expected 'vertex' or 'edge': {raw.strip()!r}", ln)
        toks = m.group(2).split()
        if m.group(1) == "vertex":
            if len(toks) not in (1, 2) or (len(toks) == 2 and toks[1] != "base"):
                raise GraphSpecError("usage: vertex NAME [base]", ln)
            if toks[0] in seen:
                raise GraphSpecError(f"duplicate vertex {toks[0]}", ln)
            seen.add(toks[0])
            labels.append(toks[0])
            if len(toks) == 2:
                base.append(toks[0])
        else:
            if len(toks) not in (2, 3):
                raise GraphSpecError("usage: edge U V [MULT]", ln)
            mult = 1
            if len(toks) == 3:
                if not toks[2].isdigit() or int(toks[2]) < 1:
                    raise GraphSpecError(f"bad multiplicity {toks[2]!r}", ln)
                mult = int(toks[2])
            for t in toks[:2]:
                if t not in seen:
                    seen.add(t)
                    labels.append(t)
            edges.append((toks[0], toks[1], mult))
    g = graph_from_edges(edges, base=None)
    # keep isolated declared vertices and declaration order
    index = {lab: i for i, lab in enumerate(labels)}
    succ = [[] for _ in labels]
    for i, row in enumerate(g.succ):
        for j, m in row:
            succ[index[g.labels[i]]].append((index[g.labels[j]], m))
    for row in succ:
        row.sort()
    base_ids = frozenset(index[b] for b in base) if base else frozenset(range(len(labels)))
    return MarkovGraph(labels, succ, base_ids)


def vertex_name(label) -> str:
    if isinstance(label, tuple) and len(label) == 2 and isinstance(label[0], tuple):
        return "+".join(label[0]) + ":" + str(label[1])
    return str(label)


def format_graph(g: MarkovGraph) -> str:
    lines = []
    for i, lab in enumerate(g.labels):
        lines.append(f"vertex {vertex_name(lab)}" + (" base" if i in g.base else ""))
    for i, row in enumerate(g.succ):
        for j, m in row:
            tail = f" {m}" if m != 1 else ""
            lines.append(f"edge {vertex_name(g.labels[i])} {vertex_name(g.labels[j])}{tail}")
    return "\n".join(lines) + "\n"


def builtin_graphs() -> dict:
    return {
        "two-shift": graph_from_edges([("o", "o", 2)]),
        "two-shift-pair": graph_from_edges([("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")]),
        "golden-mean": graph_from_edges([("a", "a"), ("a", "b"), ("b", "a")]),
        "two-cycles": graph_from_edges([("a", "x"), ("x", "a"), ("b", "y"), ("y", "b")], base=["a", "b"]),
    }


def load_graph(src: str) -> MarkovGraph:
    if src.startswith("gallery:"):
        name = src[len("gallery:"):]
        gal = builtin_graphs()
        if name not in gal:
            raise KeyError(f"unknown gallery graph {name!r}; known: {', '.join(sorted(gal))}")
        return gal[name]
    with open(src) as fh:
        try:
            return parse_graph_file(fh.read())
        except GraphSpecError as e:
            raise GraphSpecError(f"{src}: {e}") from None
