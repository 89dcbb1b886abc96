"""Markov rectangles, crossing predicates, hyperbolic and admissible strips,
control verdicts and good return times."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

from gmpy2 import mpq

from .geom import (
    ConvexRegion,
    GeomError,
    apply_affine,
    canonical_line,
    clip_halfplane,
    cross,
    fmt_point,
    intersect_convex,
    region_metrics,
)
from .manifold import STABLE, UNSTABLE, diagnostics_from_past, max_min_chord, sample_points, stable_region
from .pwamap import MapSpecError, PwaMap, cyclic_schedule, refine_with_rectangles
from .symdyn import BoundaryHit, compose_word, closed_cylinder, itinerary, orbit


# --------------------------------------------------------------------------
# rectangles


@dataclass(frozen=True)
class Rectangle:
    """Convex quadrilateral; side i runs from corner i to corner i+1."""

    id: str
    corners: tuple
    stable_sides: tuple = (0, 2)
    provenance: tuple = ()  # per side: (direction, word, depth) or None

    def __post_init__(self):
        region = ConvexRegion.polygon(self.corners)
        if len(region.vertices) != 4:
            raise GeomError(f"rectangle {self.id} is not a quadrilateral")
        if tuple(region.vertices) != tuple(self.corners):
            # corners were given clockwise: keep side labels attached to the
            # same geometric segments after re-orientation
            old = [tuple(sorted((self.corners[i], self.corners[(i + 1) % 4]))) for i in range(4)]
            vs = region.vertices
            new = [tuple(sorted((vs[i], vs[(i + 1) % 4]))) for i in range(4)]
            stable = tuple(sorted(new.index(old[i]) for i in self.stable_sides))
            object.__setattr__(self, "corners", tuple(vs))
            object.__setattr__(self, "stable_sides", stable)
        s = sorted(self.stable_sides)
        if s not in ([0, 2], [1, 3]):
            raise GeomError(f"rectangle {self.id}: stable sides must be opposite, got {self.stable_sides}")
        object.__setattr__(self, "stable_sides", tuple(s))

    @property
    def region(self) -> ConvexRegion:
        return ConvexRegion.polygon(self.corners)

    @property
    def unstable_sides(self):
        return tuple(i for i in range(4) if i not in self.stable_sides)

    def side(self, i):
        return (self.corners[i], self.corners[(i + 1) % 4])

    def sides(self, kind):
        idx = self.stable_sides if kind == STABLE else self.unstable_sides
        return [self.side(i) for i in idx]

    @property
    def diameter(self) -> float:
        return region_metrics(self.region).diameter


_RECT_RE = re.compile(r"^rect\s+(\S+)\s+corners\s+(.*?)\s+stable\s+(\d)\s+(\d)\s*$")
_PT_RE = re.compile(r"\(([^,()]+),([^,()]+)\)")


def parse_rect_file(text: str):
    from .geom import parse_rat

    rects = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        mt = _RECT_RE.match(line)
        if not mt:
            raise MapSpecError("expected 'rect <id> corners (x,y) x4 stable i j'", ln, 1)
        pts = _PT_RE.findall(mt.group(2))
        if len(pts) != 4:
            raise MapSpecError("a rectangle needs exactly 4 corners", ln, 1)
        try:
            corners = tuple((parse_rat(a), parse_rat(b)) for a, b in pts)
            rects.append(Rectangle(mt.group(1), corners, (int(mt.group(3)), int(mt.group(4)))))
        except GeomError as exc:
            raise MapSpecError(str(exc), ln, 1) from None
    return rects


def format_rect(r: Rectangle) -> str:
    cs = " ".join(fmt_point(c) for c in r.corners)
    return f"rect {r.id} corners {cs} stable {r.stable_sides[0]} {r.stable_sides[1]}"


# --------------------------------------------------------------------------
# crossing


def _on_segment(p, a, b):
    if cross(a, b, p) != 0:
        return False
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def crossing_check(q: ConvexRegion, r: Rectangle, mode: str):
    """Exact crossing test; returns (ok, reason).

    mode 's': q spans r between its unstable sides (q's own sides on r are
    pieces of r's unstable sides, its free sides are stable).  mode 'u': the
    same with the roles of stable and unstable sides swapped.
    """
    if mode not in ("s", "u"):
        raise ValueError("mode must be 's' or 'u'")
    if not q.is_polygon or len(q.vertices) != 4:
        return False, f"not a quadrilateral ({q.kind}, {len(q.vertices)} vertices)"
    host = r.region
    if not q.is_subset_of(host):
        bad = next(v for v in q.vertices if not host.contains(v))
        return False, f"vertex {fmt_point(bad)} outside the rectangle"
    targets = r.sides(UNSTABLE if mode == "s" else STABLE)
    vs = q.vertices
    edges = [(vs[i], vs[(i + 1) % 4]) for i in range(4)]
    hit = []
    for side in targets:
        on = [i for i, (p, w) in enumerate(edges) if _on_segment(p, *side) and _on_segment(w, *side)]
        if len(on) != 1:
            return False, f"{len(on)} edges on side {fmt_point(side[0])}-{fmt_point(side[1])}"
        hit.append(on[0])
    if (hit[0] - hit[1]) % 4 != 2:
        return False, "edges on the two target sides are adjacent"
    for i in range(4):
        if i in hit:
            continue
        p, w = edges[i]
        mid = ((p[0] + w[0]) / 2, (p[1] + w[1]) / 2)
        if not host.contains(mid, strict=True):
            return False, f"free side {fmt_point(p)}-{fmt_point(w)} runs along the rectangle boundary"
    return True, ""


def crossing(q: ConvexRegion, r: Rectangle, mode: str) -> bool:
    return crossing_check(q, r, mode)[0]


# --------------------------------------------------------------------------
# rectangle proposal


def _rat_of(x: float, max_den=4096):
    f = Fraction(x).limit_denominator(max_den)
    return mpq(f.numerator, f.denominator)


def _meet(n1, c1, n2, c2):
    """Solve n1.p = c1, n2.p = c2."""
    det = n1[0] * n2[1] - n1[1] * n2[0]
    return ((c1 * n2[1] - c2 * n1[1]) / det, (n1[0] * c2 - n2[0] * c1) / det)


def propose_rectangles(m: PwaMap, samples: int, depth: int, l0: float, theta0: float,
                       seed: int = 0, cell_diam: float | None = None, pad: float = 1 / 8):
    """Heuristic Markov array.

    Samples with rho_upper > l0 and alpha_hat > theta0 are bucketed into
    grid cells of diameter ``cell_diam`` (default l0/10).  Each bucket is
    wrapped in a parallelogram whose sides follow the deep stable and
    unstable long axes of its first point.  Parallelograms leaving a single
    closed piece, or overlapping an earlier (larger) one, are dropped.
    """
    if cell_diam is None:
        cell_diam = l0 / 10
    side = _rat_of(cell_diam / math.sqrt(2))
    buckets = {}
    for y in sample_points(m.domain, samples, seed):
        try:
            x, diag, s, u = diagnostics_from_past(m, y, depth, full=True)
        except BoundaryHit:
            continue
        if diag.degenerate or not (diag.rho_upper > l0 and diag.alpha_hat > theta0):
            continue
        key = (int(x[0] // side), int(x[1] // side))
        buckets.setdefault(key, []).append((x, s, u))
    order = sorted(buckets, key=lambda k: (-len(buckets[k]), k))
    rects = []
    for key in order:
        pts = buckets[key]
        x0, s, u = pts[0]
        ds = (s.long_axis[1][0] - s.long_axis[0][0], s.long_axis[1][1] - s.long_axis[0][1])
        du = (u.long_axis[1][0] - u.long_axis[0][0], u.long_axis[1][1] - u.long_axis[0][1])
        ns = (-ds[1], ds[0])
        nu = (-du[1], du[0])
        if ns[0] * nu[1] - ns[1] * nu[0] == 0:
            continue
        # normalise so that side * |n|_1 is a comparable length
        ns = tuple(v / (abs(ns[0]) + abs(ns[1])) for v in ns)
        nu = tuple(v / (abs(nu[0]) + abs(nu[1])) for v in nu)
        ext = []
        for n in (ns, nu):
            vals = [n[0] * p[0] + n[1] * p[1] for p, _, _ in pts]
            lo, hi = min(vals), max(vals)
            grow = (hi - lo) * mpq(pad) if hi > lo else 0
            grow = max(grow, side * mpq(pad))
            ext.append((lo - grow, hi + grow))
        (s_lo, s_hi), (u_lo, u_hi) = ext
        corners = [_meet(ns, a, nu, b) for a, b in ((s_lo, u_lo), (s_lo, u_hi), (s_hi, u_hi), (s_hi, u_lo))]
        try:
            region = ConvexRegion.polygon(corners)
        except GeomError:
            continue
        vs = region.vertices
        stable = tuple(i for i in range(4)
                       if ns[0] * (vs[(i + 1) % 4][0] - vs[i][0]) + ns[1] * (vs[(i + 1) % 4][1] - vs[i][1]) == 0)
        if len(stable) != 2:
            continue
        if not any(region.is_subset_of(p.domain) for p in m.pieces):
            continue
        if any(intersect_convex(region, r.region).area > 0 for r in rects):
            continue
        prov = tuple(
            (STABLE, depth) if i in stable else (UNSTABLE, depth) for i in range(4)
        )
        rects.append(Rectangle(f"R{len(rects)}", vs, stable, prov))
    return rects


# --------------------------------------------------------------------------
# strips


@dataclass
class Strip:
    word: tuple  # extended word A_0..A_n
    region: ConvexRegion
    start: str
    end: str
    s_cross_exact: bool
    u_cross_exact: bool
    manifold_sides_by_provenance: bool
    admissible: str = "unknown"

    @property
    def n(self) -> int:
        return len(self.word) - 1


@dataclass
class StripSet:
    strips: list
    max_n: int
    truncated: bool
    realized: list  # every enumerated realized word starting in a rectangle
    rects: dict = field(default_factory=dict)

    def by_word(self):
        return {s.word: s for s in self.strips}


def strip_system(m: PwaMap, rects, period: int = 1):
    """Map (or schedule) whose step-0 partition contains each rectangle as
    a single piece named after it."""
    refined = refine_with_rectangles(m, rects)
    if period == 1:
        return refined
    return cyclic_schedule(m, refined, period)


def _iterate_of(tag):
    """Time index appended to a pulled-back edge tag (0 for original edges)."""
    if tag and ((tag[0] == "domain" and len(tag) == 2) or (tag[0] == "piece" and len(tag) == 4)):
        return tag[-1]
    return 0


def _free_tags(q: ConvexRegion, r: Rectangle, kind):
    lines = {canonical_line(*r.side(i)) for i in (r.unstable_sides if kind == "s" else r.stable_sides)}
    return [t for p, w, t in q.edges() if canonical_line(p, w) not in lines]


def _piece_index(system, k):
    out = []
    for p in sorted(system.pieces_at(k), key=lambda p: p.id):
        out.append((p, p.domain.halfplanes(), p.domain.bbox()))
    return out


def detect_strips(system, rects, max_n: int, budget: int = 10**6) -> StripSet:
    """All n-strips (1 <= n <= max_n) starting and ending in rectangles.

    Cylinders are enumerated from each rectangle cell; a word ending in a
    rectangle is certified when its closed cylinder s-crosses the start
    rectangle and its exact image u-crosses the end rectangle.
    """
    rect_by_id = {r.id: r for r in rects}
    for r in rects:
        try:
            cell = system.piece(r.id, 0)
        except KeyError:
            raise ValueError(f"rectangle {r.id} is not a cell of the partition") from None
        if not cell.domain.same_set(r.region):
            raise ValueError(f"rectangle {r.id} straddles partition pieces")
    strips, realized = [], []
    visited = 0
    truncated = False
    per = system.period
    index = [_piece_index(system, k) for k in range(per)]
    for r in sorted(rects, key=lambda r: r.id):
        start = system.piece(r.id, 0)
        stack = [((r.id,), start.domain, start.branch)]
        while stack:
            word, region, f = stack.pop()
            k = len(word)
            if k > max_n:
                continue
            bx0, by0, bx1, by1 = apply_affine(f, region).bbox()
            children = []
            for piece, hps, (px0, py0, px1, py1) in index[k % per]:
                if px0 > bx1 or px1 < bx0 or py0 > by1 or py1 < by0:
                    continue
                child = region
                for h in hps:
                    child = clip_halfplane(child, f.pullback(h[:3]), h[3] + (k,) if h[3] else None)
                    if child.is_empty:
                        break
                if not child.is_polygon:
                    continue
                visited += 1
                if visited > budget:
                    truncated = True
                    break
                w = word + (piece.id,)
                realized.append(w)
                if piece.id in rect_by_id and k % per == 0:
                    end = rect_by_id[piece.id]
                    image = apply_affine(f, child)
                    if crossing(child, r, "s") and crossing(image, end, "u"):
                        prov = all(1 <= _iterate_of(t) <= k for t in _free_tags(child, r, "s")) and all(
                            _iterate_of(t) < k for t in _free_tags(image, end, "u"))
                        strips.append(Strip(w, child, r.id, end.id, True, True, prov))
                children.append((w, child, piece.branch.compose(f)))
            if truncated:
                break
            stack.extend(reversed(children))
        if truncated:
            break
    strips.sort(key=lambda s: (len(s.word), s.word))
    realized.sort(key=lambda w: (len(w), w))
    return StripSet(strips, max_n, truncated, realized, rect_by_id)


def _touches_both(region: ConvexRegion, sides):
    return all(not intersect_convex(region, ConvexRegion.segment(*sd)).is_empty for sd in sides)


def admissible_filter(system, strip_set: StripSet) -> StripSet:
    """Three-valued admissibility by increasing length.

    A strip S with word A_0..A_n is checked at every m < n whose prefix
    A_0..A_m is a non-rejected strip: T^m(S) must avoid the interior of
    every hyperbolic strip.  Detected strips are tested exactly; strips
    longer than the horizon could only interfere if the cylinder of
    A_m..A_n spans the rectangle A_m, and then the verdict is ``unknown``.
    """
    by_word = {}
    by_start = {}
    for s in strip_set.strips:
        by_start.setdefault(s.start, []).append(s)
    out = []
    for s in sorted(strip_set.strips, key=lambda s: (len(s.word), s.word)):
        status = "yes"
        if s.n > 1:
            outcomes = []
            for m in range(1, s.n):
                prefix = by_word.get(s.word[: m + 1])
                if prefix is None or prefix.admissible == "no":
                    continue
                img = apply_affine(compose_word(system, s.word[:m]), s.region)
                hit = any(intersect_convex(img, h.region).area > 0 for h in by_start.get(s.word[m], ()))
                if hit:
                    outcomes.append("no" if prefix.admissible == "yes" else "unknown")
                    continue
                rect = strip_set.rects[s.word[m]]
                tail = closed_cylinder(system, s.word[m:], phase=m)
                if strip_set.truncated or _touches_both(tail, rect.sides(UNSTABLE)):
                    outcomes.append("unknown")
            if "no" in outcomes:
                status = "no"
            elif "unknown" in outcomes:
                status = "unknown"
        s2 = replace(s, admissible=status)
        by_word[s.word] = s2
        out.append(s2)
    return replace(strip_set, strips=out)


class AmbiguousDecomposition(Exception):
    pass


def decompose_forward(word, statuses: dict):
    """Chain of admissible strip words covering the longest possible prefix
    of ``word`` (consecutive blocks share their junction letter).

    ``statuses`` maps extended strip words to yes/no/unknown; only ``yes``
    blocks are used.  Two distinct chains ending at the same position raise
    AmbiguousDecomposition.  Returns a list of blocks or None.
    """
    word = tuple(word)
    chains = {0: [[]]}
    for i in range(len(word)):
        if i not in chains:
            continue
        for j in range(i + 1, len(word)):
            if statuses.get(word[i: j + 1]) == "yes":
                for ch in chains[i]:
                    chains.setdefault(j, []).append(ch + [word[i: j + 1]])
    best = None
    for j in sorted(chains):
        if len(chains[j]) > 1:
            raise AmbiguousDecomposition(f"{len(chains[j])} chains cover {word[:j + 1]}")
        if j > 0:
            best = chains[j][0]
    return best


# --------------------------------------------------------------------------
# control


@dataclass(frozen=True)
class ControlVerdict:
    level: str
    verdict: str  # refuted | heuristic_yes | unknown
    depth: int
    witness: str = ""


LEVELS = ("s_controlled", "controlled", "ten_controlled")


def control_status(system, x, r: Rectangle, depth: int, eps: float | None = None, factor: float = 10.0):
    """Verdicts for s-control, control and ten-control of x in r.

    Depth-n regions contain the true manifolds, so failing to reach a side
    (or a too-short rho_upper) is an exact refutation.  Acceptance is
    heuristic: both sides reached and width below ``eps``.
    """
    if eps is None:
        eps = 1e-6 * region_metrics(system.domain).diameter
    dyn = getattr(system, "dynamics", system)
    s = stable_region(dyn, x, depth, STABLE)
    u = stable_region(dyn, x, depth, UNSTABLE)

    def one(approx, sides, name):
        for sd in sides:
            if intersect_convex(approx.region, ConvexRegion.segment(*sd)).is_empty:
                return "refuted", f"{name} region misses side {fmt_point(sd[0])}-{fmt_point(sd[1])}"
        return ("heuristic_yes" if approx.width < eps else "unknown"), ""

    vs, ws = one(s, r.sides(UNSTABLE), "stable")
    vu, wu = one(u, r.sides(STABLE), "unstable")
    out = {"s_controlled": ControlVerdict("s_controlled", vs, depth, ws)}
    if "refuted" in (vs, vu):
        vc, wc = "refuted", ws or wu
    elif vs == vu == "heuristic_yes":
        vc, wc = "heuristic_yes", ""
    else:
        vc, wc = "unknown", ""
    out["controlled"] = ControlVerdict("controlled", vc, depth, wc)
    rho = min(max_min_chord(s.region, x), max_min_chord(u.region, x))
    limit = factor * r.diameter
    if vc == "refuted":
        vt, wt = "refuted", wc
    elif rho <= limit:
        vt, wt = "refuted", f"rho_upper {rho:.6g} <= {factor:g} diam {r.diameter:.6g}"
    else:
        vt, wt = vc, ""
    out["ten_controlled"] = ControlVerdict("ten_controlled", vt, depth, wt)
    return out


# --------------------------------------------------------------------------
# return times


class HorizonExceeded(Exception):
    def __init__(self, record):
        super().__init__(f"no good return within horizon {record.N}")
        self.record = record


@dataclass
class ReturnRecord:
    tau: int | None
    taus: list
    N: int
    N0: int
    N1: int
    N2: int
    admissible_times: list
    hyperbolic_times: list  # one list per gap after an admissible time
    heuristic: bool = True
    unknown_seen: bool = False


def good_return_time(system, x, strip_set: StripSet, horizon: int, depth: int = 20, eps=None):
    """tau(x), its iterates within the horizon and the Prop. 4.1 integers.

    ``strip_set`` must carry admissibility flags.  Words longer than the
    strip horizon count as ``unknown``.
    """
    statuses = {s.word: s.admissible for s in strip_set.strips}
    rects = strip_set.rects
    pts, pieces = orbit(system, x, horizon)
    word = tuple(p.id for p in pieces) + (itinerary(system, pts[-1], 0, 1)[0],)
    ctl_cache = {}

    def ctl(k, level):
        if word[k] not in rects:
            return "refuted"
        if k not in ctl_cache:
            try:
                ctl_cache[k] = control_status(system, pts[k], rects[word[k]], depth, eps)
            except BoundaryHit:
                ctl_cache[k] = {lv: ControlVerdict(lv, "unknown", depth) for lv in LEVELS}
        return ctl_cache[k][level].verdict

    unknown = False

    def status(i, j):
        nonlocal unknown
        w = word[i: j + 1]
        if j - i > strip_set.max_n:
            unknown = True
            return "unknown"
        st = statuses.get(w)
        if st == "unknown":
            unknown = True
        return st

    def tau_from(i):
        for j in range(i + 1, horizon + 1):
            if status(i, j) == "yes" and ctl(j, "s_controlled") == "heuristic_yes":
                return j - i
        return None

    tau = tau_from(0)
    taus = []
    pos = 0
    while True:
        t = tau_from(pos)
        if t is None:
            break
        pos += t
        taus.append(pos)
    N = tau if tau is not None else horizon
    ten = [ctl(k, "ten_controlled") == "heuristic_yes" for k in range(N)]
    hyper = [k > 0 and statuses.get(word[: k + 1]) is not None for k in range(N)]
    N0 = next((k for k in range(1, N) if ten[k] and hyper[k]), N)
    N1 = next((k for k in range(N) if ten[k]), None)
    if N1 is None:
        N1 = N0 = N
    N2 = next((k for k in range(N0 - 1, -1, -1) if ten[k]), None)
    if N2 is None:
        N2 = N1 = N0
    adm = [k for k in range(1, N) if status(0, k) == "yes"]
    gaps = []
    for i, n_i in enumerate(adm):
        nxt = adm[i + 1] if i + 1 < len(adm) else N
        gaps.append([m for m in range(n_i + 1, nxt)
                     if hyper[m] and ctl(m, "s_controlled") == "heuristic_yes"])
    rec = ReturnRecord(tau, taus, N, N0, N1, N2, adm, gaps, True, unknown)
    if tau is None:
        raise HorizonExceeded(rec)
    return rec
