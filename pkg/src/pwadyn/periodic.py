"""Exact periodic points of a piecewise affine map and the normalized growth
of their counts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

from gmpy2 import mpq

from .geom import ConvexRegion, clip_halfplane, fmt_point
from .symdyn import closed_cylinder, enumerate_cylinders

_ZERO = mpq(0)


@dataclass
class PeriodicWords:
    n: int
    open: list  # words whose wrapped word w + w[0] has a positive-area cylinder
    closed: list  # words whose wrapped word has a nonempty closed cylinder


def periodic_cylinders(system, n: int, tree=None) -> PeriodicWords:
    """Length-n words with a positive-area cylinder that can be followed by
    their own first letter, under the open and the closed convention."""
    if n < 1:
        raise ValueError("period must be >= 1")
    if tree is None or tree.depth < n:
        tree = enumerate_cylinders(system, n)
    opened, closed = [], []
    for node in tree.level(n):
        w = node.word
        first = system.piece(w[0], n).domain
        img = node.composed
        region = node.region
        for h in first.halfplanes():
            region = clip_halfplane(region, img.pullback(h[:3]))
            if region.is_empty:
                break
        if region.is_empty:
            continue
        closed.append(w)
        if region.is_polygon:
            opened.append(w)
    return PeriodicWords(n, opened, closed)


@dataclass
class PeriodicRecord:
    word: tuple
    point: tuple | None  # exact fixed point of the composed branch
    shift: tuple  # lattice vector k with T_w(x) = x + k
    inside: bool  # point lies in the closed cylinder
    multiplicity: int = 1  # number of (word, shift) pairs giving this point
    words: list = field(default_factory=list)


@dataclass
class FixedFamily:
    word: tuple
    shift: tuple
    kind: str  # "region" (linear part is the identity) or "line"
    region: ConvexRegion  # fixed set intersected with the closed cylinder


@dataclass
class FixedPointReport:
    n: int
    isolated: list
    families: list
    words_checked: int
    truncated: bool = False

    @property
    def count(self) -> int:
        return len(self.isolated)


def _shifts(system):
    if system.wrap == "unit-torus":
        return list(product((-1, 0, 1), repeat=2))
    return [(0, 0)]


def _frac(v):
    return v - mpq(math.floor(v))


def _key(p, wrap):
    if wrap == "unit-torus":
        return (_frac(p[0]), _frac(p[1]))
    return p


def _solve(f, k):
    """Fixed set of x -> f(x) - k: ('point', p), ('line', (r, c)),
    ('plane', None) or ('none', None)."""
    m11, m12, m21, m22 = 1 - f.a, -f.b, -f.c, 1 - f.d
    r1, r2 = f.e - k[0], f.f - k[1]
    det = m11 * m22 - m12 * m21
    if det != 0:
        return "point", ((r1 * m22 - m12 * r2) / det, (m11 * r2 - m21 * r1) / det)
    rows = [((m11, m12), r1), ((m21, m22), r2)]
    nz = [(r, c) for r, c in rows if r != (_ZERO, _ZERO)]
    if not nz:
        return ("plane", None) if r1 == 0 and r2 == 0 else ("none", None)
    (a, b), c = nz[0]
    for (a2, b2), c2 in rows:
        # every row must be the same equation up to scale
        if a * b2 - b * a2 != 0 or a * c2 - a2 * c != 0 or b * c2 - b2 * c != 0:
            return "none", None
    return "line", ((a, b), c)


def fixed_points(system, n: int, budget: int = 10**6, tree=None) -> FixedPointReport:
    """Isolated points and fixed families of T^n, one solve per positive-area
    depth-n cylinder and lattice shift.

    Isolated points are de-duplicated (modulo the lattice on the torus) and
    dropped when they lie on a family.  Families are excluded from the count.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    if tree is None or tree.depth < n:
        tree = enumerate_cylinders(system, n, budget)
    wrap = system.wrap
    points = {}
    families = []
    checked = 0
    for node in sorted(tree.level(n), key=lambda nd: nd.word) if tree.depth >= n else []:
        checked += 1
        f = node.composed
        cyl = None
        for k in _shifts(system):
            kind, sol = _solve(f, k)
            if kind == "none":
                continue
            if kind == "point":
                if not node.region.contains(sol, strict=False):
                    continue
                key = _key(sol, wrap)
                rec = points.get(key)
                if rec is None:
                    points[key] = PeriodicRecord(node.word, sol, k, True, 1, [node.word])
                else:
                    rec.multiplicity += 1
                    rec.words.append(node.word)
                continue
            if cyl is None:
                cyl = closed_cylinder(system, node.word)
            if kind == "plane":
                families.append(FixedFamily(node.word, k, "region", cyl))
                continue
            (a, b), c = sol
            seg = clip_halfplane(clip_halfplane(cyl, (a, b, -c)), (-a, -b, c))
            if not seg.is_empty:
                families.append(FixedFamily(node.word, k, "line", seg))
    isolated = []
    for key in sorted(points):
        rec = points[key]
        if any(_on_family(rec.point, fam, wrap) for fam in families):
            continue
        isolated.append(rec)
    return FixedPointReport(n, isolated, families, checked, tree.truncated and tree.depth < n)


def _on_family(p, fam, wrap):
    if wrap != "unit-torus":
        return fam.region.contains(p, strict=False)
    q = _key(p, wrap)
    return any(fam.region.contains((q[0] + i, q[1] + j), strict=False)
               for i, j in product((-1, 0), repeat=2))


def describe_family(fam: FixedFamily) -> str:
    vs = " ".join(fmt_point(v) for v in fam.region.vertices)
    return f"{fam.kind}:{'.'.join(fam.word)}:shift={fam.shift[0]},{fam.shift[1]}:{vs}"


# --------------------------------------------------------------------------
# growth


@dataclass
class GrowthRow:
    n: int
    count: int
    normalized: float
    trailing_min: float
    log_rate: float


def growth_report(counts, h: float, window: int = 3) -> list:
    """e^{-n h} N(n), its minimum over the last ``window`` values and the
    logarithmic rate (1/n) log N(n); counts start at n = 1."""
    if h < 0:
        raise ValueError("entropy must be >= 0")
    rows = []
    norm = []
    for i, c in enumerate(counts):
        n = i + 1
        v = float(c) if h == 0 else c * math.exp(-n * h)
        norm.append(v)
        rate = math.log(c) / n if c > 0 else float("-inf")
        rows.append(GrowthRow(n, c, v, min(norm[-window:]), rate))
    return rows
