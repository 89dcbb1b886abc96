"""Itineraries, cylinder enumeration, entropy estimators and multiplicity."""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from gmpy2 import mpq

from .geom import (
    AffineMap2,
    ConvexRegion,
    apply_affine,
    canonical_line,
    clip_halfplane,
    fmt_point,
    invert_affine,
)

DEFAULT_BUDGET = 10**6


class BoundaryHit(Exception):
    """The orbit met a piece boundary (or left the domain) at step k."""

    def __init__(self, k, point):
        super().__init__(f"orbit hits a piece boundary at k={k}, point {fmt_point(point)}")
        self.k = k
        self.point = point


class TruncatedTree(Exception):
    pass


# --------------------------------------------------------------------------
# points


def locate(system, x, k=0):
    """Piece of the step-k partition whose open interior holds x."""
    px, py = x
    for piece, hps in system.halfplanes_at(k):
        inside = True
        for a, b, c in hps:
            v = a * px + b * py + c
            if v <= 0:
                inside = False
                if v == 0 and all(a2 * px + b2 * py + c2 >= 0 for a2, b2, c2 in hps):
                    raise BoundaryHit(k, x)
                break
        if inside:
            return piece
    raise BoundaryHit(k, x)


def preimage(system, x, k=0):
    """Unique y with T(y) = x, y interior to a step-(k-1) piece."""
    found = None
    for piece in system.pieces_at(k - 1):
        if piece.branch.det == 0:
            raise ValueError(f"backward step through singular branch {piece.id}")
        y = invert_affine(piece.branch)(x)
        if piece.domain.contains(y, strict=True):
            if found is not None:
                raise ValueError(f"point {fmt_point(x)} has several preimages")
            found = (piece, y)
        elif piece.domain.contains(y):
            raise BoundaryHit(k - 1, y)
    if found is None:
        raise BoundaryHit(k - 1, x)
    return found


def orbit(system, x, n):
    """Exact points x_0..x_n and the pieces used for each step."""
    pts, pieces = [x], []
    for k in range(n):
        p = locate(system, x, k)
        x = p.branch(x)
        pieces.append(p)
        pts.append(x)
    return pts, pieces


def itinerary(system, x, n_back=0, n_fwd=1):
    """Piece ids of T^k x for -n_back <= k < n_fwd."""
    word = [p.id for p in orbit(system, x, n_fwd)[1]]
    y = x
    back = []
    for j in range(n_back):
        piece, y = preimage(system, y, -j)
        back.append(piece.id)
    return tuple(reversed(back)) + tuple(word)


def compose_word(system, word, phase=0) -> AffineMap2:
    """Affine map T_{w[-1]} o ... o T_{w[0]}."""
    f = AffineMap2.identity()
    for k, pid in enumerate(word):
        f = system.piece(pid, phase + k).branch.compose(f)
    return f


def closed_cylinder(system, word, phase=0) -> ConvexRegion:
    """Intersection of the pulled-back closures of the word's pieces."""
    region = system.piece(word[0], phase).domain
    f = AffineMap2.identity()
    for k, pid in enumerate(word):
        piece = system.piece(pid, phase + k)
        if k:
            for h in piece.domain.halfplanes():
                region = clip_halfplane(region, f.pullback(h[:3]), h[3] + (k,) if h[3] else None)
                if region.is_empty:
                    return region
        f = piece.branch.compose(f)
    return region


# --------------------------------------------------------------------------
# cylinder tree


@dataclass
class CylinderNode:
    word: tuple
    region: ConvexRegion
    composed: AffineMap2
    children: list = field(default_factory=list)

    @property
    def depth(self):
        return len(self.word)

    @property
    def image(self) -> ConvexRegion:
        return apply_affine(self.composed, self.region)


@dataclass
class CylinderTree:
    root: CylinderNode
    depth: int
    counts: list  # counts[k] = c_k, counts[0] = 1
    degenerate: list  # zero-area closed cylinders found at each depth
    truncated: bool = False
    system: object = None

    def level(self, k):
        nodes = [self.root]
        for _ in range(k):
            nodes = [c for n in nodes for c in n.children]
        return nodes

    def nodes(self):
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))


def _sorted_pieces(system, k):
    return sorted(system.pieces_at(k), key=lambda p: p.id)


def enumerate_cylinders(system, n: int, budget: int = DEFAULT_BUDGET) -> CylinderTree:
    """Breadth-first exact enumeration of positive-area cylinders to depth n.

    ``budget`` caps the number of retained nodes; when exceeded the tree is
    returned with ``truncated`` set and counts only for complete levels.
    """
    if n < 0:
        raise ValueError("depth must be >= 0")
    root = CylinderNode((), system.domain, AffineMap2.identity())
    counts, degenerate = [1], [0]
    frontier = [root]
    total = 1
    truncated = False
    for k in range(n):
        pieces = _sorted_pieces(system, k)
        nxt = []
        degen = 0
        for node in frontier:
            f = node.composed
            for piece in pieces:
                region = node.region
                for h in piece.domain.halfplanes():
                    region = clip_halfplane(region, f.pullback(h[:3]), h[3] + (k,) if h[3] else None)
                    if region.is_empty:
                        break
                if region.is_empty:
                    continue
                if not region.is_polygon:
                    degen += 1
                    continue
                child = CylinderNode(node.word + (piece.id,), region, piece.branch.compose(f))
                node.children.append(child)
                nxt.append(child)
                total += 1
                if total > budget:
                    truncated = True
                    break
            if truncated:
                break
        if truncated:
            break
        counts.append(len(nxt))
        degenerate.append(degen)
        frontier = nxt
    return CylinderTree(root, len(counts) - 1, counts, degenerate, truncated, system)


# lean forward-image counting ------------------------------------------------


def _clip_pts(vs, a, b, c):
    vals = [a * x + b * y + c for x, y in vs]
    if min(vals) >= 0:
        return vs
    if max(vals) <= 0:
        return [v for v, s in zip(vs, vals) if s == 0]
    out = []
    n = len(vs)
    for i in range(n):
        p, sp = vs[i], vals[i]
        q, sq = vs[(i + 1) % n], vals[(i + 1) % n]
        if sp >= 0:
            out.append(p)
        if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _positive(vs):
    n = len(vs)
    if n < 3:
        return False
    s = 0
    for i in range(n):
        x1, y1 = vs[i]
        x2, y2 = vs[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s != 0


def cylinder_counts(system, n: int, max_visits: int | None = None):
    """Counts c_0..c_n by depth-first streaming over forward images.

    Only the current root-to-leaf path is held in memory.  Requires
    invertible branches (images then determine cylinders).  Returns
    ``(counts, degenerate, truncated)``.
    """
    for k in range(system.period):
        if any(p.branch.det == 0 for p in system.pieces_at(k)):
            tree = enumerate_cylinders(system, n, budget=max_visits or DEFAULT_BUDGET)
            return tree.counts, tree.degenerate, tree.truncated
    per = system.period
    table = []
    for k in range(per):
        rows = []
        for p in _sorted_pieces(system, k):
            br = p.branch
            rows.append(([h[:3] for h in p.domain.halfplanes()], (br.a, br.b, br.c, br.d, br.e, br.f),
                         p.domain.bbox()))
        table.append(rows)
    counts = [0] * (n + 1)
    degenerate = [0] * (n + 1)
    counts[0] = 1
    visits = [0]
    cap = max_visits if max_visits is not None else math.inf

    def walk(vs, k):
        if k == n:
            return
        xs = [v[0] for v in vs]
        ys = [v[1] for v in vs]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        for hps, (a, b, c, d, e, f), (px0, py0, px1, py1) in table[k % per]:
            if px0 > x1 or px1 < x0 or py0 > y1 or py1 < y0:
                continue
            w = vs
            for ha, hb, hc in hps:
                w = _clip_pts(w, ha, hb, hc)
                if not w:
                    break
            if not w:
                continue
            if not _positive(w):
                degenerate[k + 1] += 1
                continue
            counts[k + 1] += 1
            visits[0] += 1
            if visits[0] > cap:
                raise TruncatedTree
            walk([(a * x + b * y + e, c * x + d * y + f) for x, y in w], k + 1)

    try:
        walk(list(system.domain.vertices), 0)
    except TruncatedTree:
        return counts, degenerate, True
    return counts, degenerate, False


@dataclass
class EntropyEstimates:
    counts: list
    average: list  # (1/k) log c_k, k >= 1
    ratio: list  # log(c_{k+1}/c_k), k >= 1


def entropy_estimates(tree_or_counts) -> EntropyEstimates:
    if isinstance(tree_or_counts, CylinderTree):
        if tree_or_counts.truncated:
            raise TruncatedTree("entropy estimates need a complete tree")
        counts = tree_or_counts.counts
    else:
        counts = list(tree_or_counts)
    avg = [math.log(c) / k for k, c in enumerate(counts) if k >= 1]
    ratio = [math.log(counts[k + 1] / counts[k]) for k in range(1, len(counts) - 1)]
    return EntropyEstimates(list(counts), avg, ratio)


# --------------------------------------------------------------------------
# multiplicity


def _torus_reps(p):
    """All representatives in the closed unit square of the torus point p."""
    xs = {p[0] % 1}
    ys = {p[1] % 1}
    if p[0] % 1 == 0:
        xs.add(p[0] * 0 + 1)
    if p[1] % 1 == 0:
        ys.add(p[1] * 0 + 1)
    return [(x, y) for x in xs for y in ys]


def _canon(p, wrap):
    if wrap == "unit-torus":
        return (p[0] % 1, p[1] % 1)
    return p


def _line_param(key, p):
    a, b, _ = key
    # position along the direction (-b, a)
    return -b * p[0] + a * p[1]


@dataclass
class MultiplicityProfile:
    per_depth: list  # (depth, max mult, witness)
    max_mult: int
    witness: tuple


def _mult_depth(regions, wrap):
    """Max multiplicity over the vertex/edge skeleton of the regions."""
    holders = {}
    lines = {}
    cands = []
    for idx, r in enumerate(regions):
        vs = r.vertices
        for v in vs:
            holders.setdefault(v, set()).add(idx)
        n = len(vs)
        for i in range(n):
            p, q = vs[i], vs[(i + 1) % n]
            key = canonical_line(p, q)
            t0, t1 = sorted((_line_param(key, p), _line_param(key, q)))
            lines.setdefault(key, []).append((t0, t1, idx))
            cands.append((key, p))
            cands.append((key, ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)))
    if wrap == "unit-torus":
        extra = []
        for key, c in cands:
            for rep in _torus_reps(c):
                if rep != c:
                    for bkey in _boundary_keys(rep):
                        extra.append((bkey, rep))
        cands.extend(extra)
    by_line = {}
    for key, c in cands:
        by_line.setdefault(key, set()).add(c)
    all_pts = set()
    for key, pts in by_line.items():
        all_pts.update(pts)
        segs = lines.get(key)
        if not segs:
            continue
        pts = sorted(pts, key=lambda c: _line_param(key, c))
        params = [_line_param(key, c) for c in pts]
        for t0, t1, idx in segs:
            lo = bisect_right(params, t0)
            hi = bisect_left(params, t1)
            for c in pts[lo:hi]:
                holders.setdefault(c, set()).add(idx)
    # In a tiling, a vertex inside another cell's edge is also the endpoint
    # of some edge on that same line, so per-line buckets see it.
    out = {}
    for c in all_pts:
        out.setdefault(_canon(c, wrap), set()).update(holders.get(c, ()))
    best, wit = 0, None
    for key in sorted(out):
        v = len(out[key])
        if v > best:
            best, wit = v, key
    return best, wit


def _boundary_keys(p):
    keys = []
    one, zero = mpq(1), mpq(0)
    if p[0] in (zero, one):
        keys.append((one, zero, p[0]))
    if p[1] in (zero, one):
        keys.append((zero, one, p[1]))
    return keys


def multiplicity_profile(system, n: int, tree: CylinderTree | None = None,
                         identify_torus: bool = False) -> MultiplicityProfile:
    """Max multiplicity of the depth-k cylinder closures, k = 1..n.

    Closures are counted in the chart (the planar fundamental domain);
    ``identify_torus`` merges the mod-1 representatives of a point instead.
    """
    wrap = "unit-torus" if identify_torus and system.wrap == "unit-torus" else "none"
    if tree is None:
        tree = enumerate_cylinders(system, n)
    if tree.truncated or tree.depth < n:
        raise TruncatedTree("multiplicity needs a complete tree")
    per = []
    level = [tree.root]
    for k in range(1, n + 1):
        level = [c for node in level for c in node.children]
        best, wit = _mult_depth([c.region for c in level], wrap)
        per.append((k, best, wit))
    return MultiplicityProfile(per, per[-1][1] if per else 0, per[-1][2] if per else None)


def mult_at(tree: CylinderTree, x, depth: int, wrap="none") -> int:
    """#{depth-k cylinders whose closure holds x} (any torus representative)."""
    reps = _torus_reps(x) if wrap == "unit-torus" else [x]
    count = 0
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.depth and not any(node.region.contains(r) for r in reps):
            continue
        if node.depth == depth:
            count += 1
        else:
            stack.extend(node.children)
    return count
