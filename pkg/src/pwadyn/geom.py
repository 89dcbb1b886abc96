"""Exact rational plane geometry: affine maps, convex regions, clipping.

Every predicate (containment, emptiness, collinearity) is decided with
exact rationals (``gmpy2.mpq``).  Floats only show up in metrics such as
diameters, widths and log-norms.

A closed halfplane is a triple ``(a, b, c)`` meaning ``a*x + b*y + c >= 0``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpq

Rat = type(mpq(0))
Point = tuple  # (mpq, mpq)

ZERO = mpq(0)
ONE = mpq(1)

_RAT_RE = re.compile(r"^-?\d+(/\d+)?$")


class GeomError(Exception):
    pass


class SingularMapError(GeomError):
    pass


def rat(value) -> Rat:
    """Coerce an int, mpq, Fraction or ``p/q`` string to an exact rational."""
    if isinstance(value, str):
        return parse_rat(value)
    if isinstance(value, float):
        raise GeomError(f"floating value {value!r} is not an exact rational")
    return mpq(value)


def parse_rat(token: str) -> Rat:
    token = token.strip()
    if not _RAT_RE.match(token):
        raise GeomError(f"not a rational literal: {token!r}")
    num, _, den = token.partition("/")
    if den and int(den) == 0:
        raise GeomError(f"zero denominator in {token!r}")
    return mpq(int(num), int(den) if den else 1)


def fmt_rat(q) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def fmt_point(p) -> str:
    return f"({fmt_rat(p[0])},{fmt_rat(p[1])})"


def pt(x, y) -> Point:
    return (rat(x), rat(y))


def cross(o, a, b):
    """z-component of (a - o) x (b - o)."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _area2(vs) -> Rat:
    n = len(vs)
    s = ZERO
    for i in range(n):
        x1, y1 = vs[i]
        x2, y2 = vs[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s


def line_through(p, q):
    """Halfplane whose boundary is the line pq, left side (CCW interior) kept."""
    a = p[1] - q[1]
    b = q[0] - p[0]
    return (a, b, -(a * p[0] + b * p[1]))


def canonical_line(p, q):
    """Hashable exact key for the undirected line through p != q."""
    a = q[1] - p[1]
    b = p[0] - q[0]
    c = a * p[0] + b * p[1]
    s = a if a != 0 else b
    return (a / s, b / s, c / s)


_MPQ = type(mpq(0))

# --------------------------------------------------------------------------
# affine maps


@dataclass(frozen=True)
class AffineMap2:
    """``x -> [[a, b], [c, d]] x + (e, f)``."""

    a: Rat
    b: Rat
    c: Rat
    d: Rat
    e: Rat = ZERO
    f: Rat = ZERO

    def __post_init__(self):
        for k in ("a", "b", "c", "d", "e", "f"):
            v = getattr(self, k)
            if type(v) is not _MPQ:
                object.__setattr__(self, k, rat(v))

    @classmethod
    def from_rows(cls, linear, translate=(0, 0)) -> "AffineMap2":
        (a, b), (c, d) = linear
        return cls(rat(a), rat(b), rat(c), rat(d), rat(translate[0]), rat(translate[1]))

    @classmethod
    def identity(cls) -> "AffineMap2":
        return cls(ONE, ZERO, ZERO, ONE)

    @property
    def linear(self):
        return ((self.a, self.b), (self.c, self.d))

    @property
    def translate(self):
        return (self.e, self.f)

    @property
    def det(self) -> Rat:
        return self.a * self.d - self.b * self.c

    def __call__(self, p) -> Point:
        x, y = p
        return (self.a * x + self.b * y + self.e, self.c * x + self.d * y + self.f)

    def compose(self, other: "AffineMap2") -> "AffineMap2":
        """``self o other``: apply ``other`` first."""
        a, b, c, d = self.a, self.b, self.c, self.d
        return AffineMap2(
            a * other.a + b * other.c,
            a * other.b + b * other.d,
            c * other.a + d * other.c,
            c * other.b + d * other.d,
            a * other.e + b * other.f + self.e,
            c * other.e + d * other.f + self.f,
        )

    def pullback(self, hp):
        """Halfplane ``{x : self(x) in hp}``."""
        ha, hb, hc = hp
        return (
            ha * self.a + hb * self.c,
            ha * self.b + hb * self.d,
            ha * self.e + hb * self.f + hc,
        )


def invert_affine(f: AffineMap2) -> AffineMap2:
    det = f.det
    if det == 0:
        raise SingularMapError("affine map has zero determinant")
    a, b, c, d = f.d / det, -f.b / det, -f.c / det, f.a / det
    return AffineMap2(a, b, c, d, -(a * f.e + b * f.f), -(c * f.e + d * f.f))


# --------------------------------------------------------------------------
# convex regions


@dataclass(frozen=True)
class ConvexRegion:
    """Closed convex polygon, segment, point or the empty set.

    ``tags[i]`` records the provenance of the edge ``vertices[i] ->
    vertices[i+1]`` for polygons; segments and points carry no tags.
    ``degenerate`` is set when the region came from collapsing a polygon
    through a singular affine map.
    """

    kind: str
    vertices: tuple = ()
    tags: tuple = ()
    degenerate: bool = field(default=False, compare=False)

    # constructors ----------------------------------------------------------

    @classmethod
    def empty(cls) -> "ConvexRegion":
        return cls("empty")

    @classmethod
    def polygon(cls, vertices: Sequence, tags: Sequence | None = None) -> "ConvexRegion":
        """Strictly convex polygon from vertices in either orientation.

        Raises GeomError for non-convex, collinear or zero-area input.
        """
        vs = [pt(*v) for v in vertices]
        n = len(vs)
        tg = list(tags) if tags is not None else [None] * n
        if len(tg) != n:
            raise GeomError("tag count differs from vertex count")
        if n < 3:
            raise GeomError("polygon needs at least 3 vertices")
        a2 = _area2(vs)
        if a2 == 0:
            raise GeomError("polygon has zero area")
        if a2 < 0:
            vs.reverse()
            # edge i of the reversed list is old edge n-2-i
            tg = [tg[(n - 2 - i) % n] for i in range(n)]
        for i in range(n):
            if cross(vs[i - 1], vs[i], vs[(i + 1) % n]) <= 0:
                raise GeomError(f"polygon is not strictly convex at vertex {fmt_point(vs[i])}")
        return cls("polygon", tuple(vs), tuple(tg))

    @classmethod
    def segment(cls, p, q) -> "ConvexRegion":
        p, q = pt(*p), pt(*q)
        if p == q:
            return cls("point", (p,))
        return cls("segment", tuple(sorted((p, q))))

    @classmethod
    def point(cls, p) -> "ConvexRegion":
        return cls("point", (pt(*p),))

    @classmethod
    def box(cls, x0, y0, x1, y1, tag=None) -> "ConvexRegion":
        return cls.polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], [tag] * 4 if tag else None)

    # queries ---------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    @property
    def is_polygon(self) -> bool:
        return self.kind == "polygon"

    @property
    def area(self) -> Rat:
        if self.kind != "polygon":
            return ZERO
        return _area2(self.vertices) / 2

    def edges(self):
        vs = self.vertices
        if self.kind == "polygon":
            n = len(vs)
            return [(vs[i], vs[(i + 1) % n], self.tags[i]) for i in range(n)]
        if self.kind == "segment":
            return [(vs[0], vs[1], None)]
        return []

    def halfplanes(self):
        """Closed halfplanes (a, b, c, tag) whose intersection is the region."""
        vs = self.vertices
        if self.kind == "polygon":
            n = len(vs)
            return [line_through(vs[i], vs[(i + 1) % n]) + (self.tags[i],) for i in range(n)]
        if self.kind == "segment":
            p, q = vs
            a, b, c = line_through(p, q)
            dx, dy = q[0] - p[0], q[1] - p[1]
            return [
                (a, b, c, None),
                (-a, -b, -c, None),
                (dx, dy, -(dx * p[0] + dy * p[1]), None),
                (-dx, -dy, dx * q[0] + dy * q[1], None),
            ]
        if self.kind == "point":
            x, y = vs[0]
            return [(ONE, ZERO, -x, None), (-ONE, ZERO, x, None),
                    (ZERO, ONE, -y, None), (ZERO, -ONE, y, None)]
        raise GeomError("empty region has no halfplane description")

    def contains(self, p, strict: bool = False) -> bool:
        """Closed containment; ``strict`` asks for the interior (polygons only)."""
        if self.kind == "empty":
            return False
        if strict and self.kind != "polygon":
            return False
        x, y = p
        for a, b, c, _ in self.halfplanes():
            v = a * x + b * y + c
            if v < 0 or (strict and v == 0):
                return False
        return True

    def is_subset_of(self, other: "ConvexRegion") -> bool:
        if self.kind == "empty":
            return True
        return all(other.contains(v) for v in self.vertices)

    def bbox(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def centroid(self) -> Point:
        """Vertex average (exact); lies in the relative interior."""
        n = len(self.vertices)
        return (sum(v[0] for v in self.vertices) / n, sum(v[1] for v in self.vertices) / n)

    def same_set(self, other: "ConvexRegion") -> bool:
        return self.kind == other.kind and set(self.vertices) == set(other.vertices)

    def retag(self, tag_fn) -> "ConvexRegion":
        if self.kind != "polygon":
            return self
        return ConvexRegion("polygon", self.vertices, tuple(tag_fn(t) for t in self.tags))

    def __repr__(self) -> str:
        vs = " ".join(fmt_point(v) for v in self.vertices)
        return f"ConvexRegion({self.kind}: {vs})"


def convex_hull(points) -> list:
    """Exact monotone-chain hull, counter-clockwise, collinear points dropped."""
    pts = sorted(set((mpq(x), mpq(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower, upper = half(pts), half(reversed(pts))
    return lower[:-1] + upper[:-1]


def canonicalize(vertices: list, tags: list, prefer_tag=None) -> ConvexRegion:
    """Build a region from a CCW vertex cycle that may contain duplicate or
    collinear vertices.  Zero-area cycles become segments or points."""
    vs, tg = [], []
    for v, t in zip(vertices, tags):
        if vs and vs[-1] == v:
            continue
        vs.append(v)
        tg.append(t)
    while len(vs) > 1 and vs[0] == vs[-1]:
        vs.pop()
        tg.pop()
    if not vs:
        return ConvexRegion.empty()
    if len(vs) >= 3 and _area2(vs) > 0:
        changed = True
        while changed and len(vs) > 3:
            changed = False
            n = len(vs)
            for i in range(n):
                if cross(vs[i - 1], vs[i], vs[(i + 1) % n]) == 0:
                    t_prev, t_cur = tg[i - 1], tg[i]
                    keep = t_cur if (t_cur == prefer_tag and prefer_tag is not None) else t_prev
                    tg[i - 1] = keep
                    del vs[i]
                    del tg[i]
                    changed = True
                    break
        return ConvexRegion("polygon", tuple(vs), tuple(tg))
    uniq = sorted(set(vs))
    if len(uniq) == 1:
        return ConvexRegion("point", (uniq[0],))
    return ConvexRegion("segment", (uniq[0], uniq[-1]))


def _clip_cycle(vs, tg, a, b, c, tag):
    """Sutherland-Hodgman step keeping a*x + b*y + c >= 0."""
    n = len(vs)
    vals = [a * x + b * y + c for x, y in vs]
    if all(v >= 0 for v in vals):
        return vs, tg, False
    if all(v <= 0 for v in vals):
        on = [vs[i] for i in range(n) if vals[i] == 0]
        return on, [tag] * len(on), True
    out_v, out_t = [], []
    for i in range(n):
        p, q = vs[i], vs[(i + 1) % n]
        sp, sq = vals[i], vals[(i + 1) % n]
        if sp > 0:
            out_v.append(p)
            out_t.append(tg[i] if sq >= 0 else tg[i])
            if sq < 0:
                t = sp / (sp - sq)
                out_v.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                out_t.append(tag)
        elif sp == 0:
            out_v.append(p)
            out_t.append(tg[i] if sq >= 0 else tag)
        elif sq > 0:
            t = sp / (sp - sq)
            out_v.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
            out_t.append(tg[i])
    return out_v, out_t, True


def clip_halfplane(r: ConvexRegion, hp, tag=None) -> ConvexRegion:
    """Intersect r with the closed halfplane hp = (a, b, c)."""
    if r.kind == "empty":
        return r
    a, b, c = hp[:3]
    if r.kind == "polygon":
        vs, tg, changed = _clip_cycle(list(r.vertices), list(r.tags), a, b, c, tag)
        if not changed:
            return r
        return canonicalize(vs, tg, prefer_tag=tag)
    kept = [v for v in r.vertices if a * v[0] + b * v[1] + c >= 0]
    if r.kind == "point":
        return r if kept else ConvexRegion.empty()
    p, q = r.vertices
    sp = a * p[0] + b * p[1] + c
    sq = a * q[0] + b * q[1] + c
    if sp >= 0 and sq >= 0:
        return r
    if sp < 0 and sq < 0:
        return ConvexRegion.empty()
    t = sp / (sp - sq)
    m = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
    return ConvexRegion.segment(p if sp >= 0 else q, m)


def clip_all(r: ConvexRegion, halfplanes: Iterable) -> ConvexRegion:
    for h in halfplanes:
        if r.kind == "empty":
            break
        r = clip_halfplane(r, h[:3], h[3] if len(h) > 3 else None)
    return r


def intersect_convex(p: ConvexRegion, q: ConvexRegion) -> ConvexRegion:
    """Exact intersection; edge tags come from whichever input edge bounds
    the result (p's tag wins where edges coincide)."""
    if p.kind == "empty" or q.kind == "empty":
        return ConvexRegion.empty()
    if p.kind != "polygon" and q.kind == "polygon":
        return clip_all(p, q.halfplanes())
    return clip_all(p, q.halfplanes())


def apply_affine(f: AffineMap2, r: ConvexRegion) -> ConvexRegion:
    """Image region; re-oriented CCW for orientation-reversing maps."""
    if r.kind == "empty":
        return r
    vs = [f(v) for v in r.vertices]
    det = f.det
    if r.kind != "polygon":
        if len(vs) == 1:
            return ConvexRegion("point", (vs[0],))
        return ConvexRegion.segment(vs[0], vs[1])
    if det == 0:
        uniq = sorted(set(vs))
        out = ConvexRegion.point(uniq[0]) if len(uniq) == 1 else ConvexRegion.segment(uniq[0], uniq[-1])
        return ConvexRegion(out.kind, out.vertices, (), degenerate=True)
    tg = list(r.tags)
    if det < 0:
        n = len(vs)
        vs.reverse()
        tg = [tg[(n - 2 - i) % n] for i in range(n)]
    return ConvexRegion("polygon", tuple(vs), tuple(tg))


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class RegionMetrics:
    area: Rat
    diameter: float
    width: float
    long_axis: tuple  # (Point, Point)


def _dist(p, q) -> float:
    return math.sqrt(float((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2))


def region_metrics(r: ConvexRegion) -> RegionMetrics:
    if r.kind == "empty":
        raise GeomError("metrics of an empty region")
    vs = r.vertices
    best, axis = ZERO, (vs[0], vs[0])
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            d2 = (vs[i][0] - vs[j][0]) ** 2 + (vs[i][1] - vs[j][1]) ** 2
            if d2 > best:
                best, axis = d2, (vs[i], vs[j])
    width = 0.0
    if r.kind == "polygon":
        width = math.inf
        n = len(vs)
        for i in range(n):
            p, q = vs[i], vs[(i + 1) % n]
            far = max(abs(cross(p, q, v)) for v in vs)
            width = min(width, float(far) / _dist(p, q))
    return RegionMetrics(r.area, math.sqrt(float(best)), width, axis)


def _mpfr_log(q) -> float:
    with gmpy2.context(gmpy2.get_context(), precision=200):
        return float(gmpy2.log(gmpy2.mpfr(q)))


def singular_log_norms(linear) -> tuple:
    """(log sigma1, log sigma2) of a 2x2 rational matrix, sigma1 >= sigma2.

    Computed from the exact Frobenius norm and determinant at 200-bit
    precision, so entries far outside the double range are fine.
    """
    (a, b), (c, d) = linear
    a, b, c, d = mpq(a), mpq(b), mpq(c), mpq(d)
    fro = a * a + b * b + c * c + d * d
    det = abs(a * d - b * c)
    if fro == 0:
        return (-math.inf, -math.inf)
    lo = fro - 2 * det  # (s1 - s2)^2, exact
    hi = fro + 2 * det  # (s1 + s2)^2, exact
    with gmpy2.context(gmpy2.get_context(), precision=200):
        s1 = (gmpy2.sqrt(gmpy2.mpfr(hi)) + gmpy2.sqrt(gmpy2.mpfr(lo))) / 2
        log_s1 = float(gmpy2.log(s1))
    if det == 0:
        return (log_s1, -math.inf)
    return (log_s1, _mpfr_log(det) - log_s1)


def line_angle(p0, p1, q0, q1) -> float:
    """Angle in [0, pi/2] between the lines p0p1 and q0q1."""
    u = (float(p1[0] - p0[0]), float(p1[1] - p0[1]))
    v = (float(q1[0] - q0[0]), float(q1[1] - q0[1]))
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0 or nv == 0:
        return float("nan")
    c = abs(u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.acos(min(1.0, c))


def max_min_chord(r: ConvexRegion, x) -> float:
    """sup over lines through x of min(distance from x to the two ends of
    the chord).  For a segment through x inside r this bounds the distance
    from x to the segment's nearer endpoint from above."""
    if r.kind == "point":
        return 0.0
    xf, yf = float(x[0]), float(x[1])
    if r.kind == "segment":
        p, q = r.vertices
        return min(_dist(p, x), _dist(q, x))
    vs = [(float(v[0]) - xf, float(v[1]) - yf) for v in r.vertices]
    n = len(vs)
    # edge i: normal direction phi_i, distance h_i from x
    edges = []
    for i in range(n):
        (x1, y1), (x2, y2) = vs[i], vs[(i + 1) % n]
        ex, ey = x2 - x1, y2 - y1
        L = math.hypot(ex, ey)
        nx, ny = ey / L, -ex / L  # outward normal for CCW
        h = x1 * nx + y1 * ny
        edges.append((math.atan2(ny, nx), max(h, 0.0)))

    def ray(theta):
        best = math.inf
        ct, st = math.cos(theta), math.sin(theta)
        for phi, h in edges:
            den = ct * math.cos(phi) + st * math.sin(phi)
            if den > 1e-15:
                best = min(best, h / den)
        return best

    cands = [math.atan2(v[1], v[0]) for v in vs if v != (0.0, 0.0)]
    for i in range(n):
        for j in range(n):
            pi_, hi = edges[i]
            pj, hj = edges[j]
            A = hi * math.cos(pj) + hj * math.cos(pi_)
            B = hi * math.sin(pj) + hj * math.sin(pi_)
            # solve hi*cos(t - pj) + hj*cos(t - pi) = 0
            cands.append(math.atan2(A, -B))
    best = 0.0
    for t in cands:
        for th in (t, t + math.pi):
            best = max(best, min(ray(th), ray(th + math.pi)))
    return best
