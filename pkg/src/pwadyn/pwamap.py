"""Piecewise affine maps: spec-file parsing, validation, gallery, refinement
by rectangles and cyclic partition schedules."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations

from .geom import (
    AffineMap2,
    ConvexRegion,
    GeomError,
    apply_affine,
    canonical_line,
    clip_halfplane,
    fmt_point,
    intersect_convex,
    line_through,
    parse_rat,
    pt,
)

WRAPS = ("none", "unit-torus")


class MapSpecError(Exception):
    def __init__(self, msg, line=None, col=None):
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Piece:
    id: str
    domain: ConvexRegion
    branch: AffineMap2

    @property
    def halfplanes(self):
        return self.domain.halfplanes()


_ID_RE = re.compile(r"^[A-Za-z0-9_.@-]+$")


@dataclass
class PwaMap:
    domain: ConvexRegion
    pieces: list
    wrap: str = "none"
    flags: dict = field(default_factory=lambda: dict.fromkeys(
        ("pieces_disjoint", "covering", "branches_invertible", "continuous", "homeomorphism"),
        "unchecked"))
    name: str = ""
    # the unrefined map whose partition defines manifolds and control
    parent: "PwaMap | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = [p.id for p in self.pieces]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise MapSpecError(f"duplicate piece id {dup!r}")
        bad = next((i for i in ids if not _ID_RE.match(i)), None)
        if bad is not None:
            raise MapSpecError(f"piece id {bad!r} must use letters, digits and _ . @ - only")
        if self.wrap not in WRAPS:
            raise MapSpecError(f"unknown wrap {self.wrap!r}")
        self._hp = [(p, [h[:3] for h in p.halfplanes]) for p in self.pieces]
        self._by_id = {p.id: p for p in self.pieces}

    # the schedule protocol: maps are schedules of period 1
    period = 1

    def pieces_at(self, k: int):
        return self.pieces

    def piece(self, pid: str, k: int = 0) -> Piece:
        return self._by_id[pid]

    def halfplanes_at(self, k: int):
        return self._hp

    @property
    def base(self) -> "PwaMap":
        return self

    @property
    def dynamics(self) -> "PwaMap":
        return self.parent.dynamics if self.parent is not None else self

    @property
    def is_homeomorphism(self) -> bool:
        return self.flags.get("homeomorphism") is True


@dataclass(frozen=True)
class PartitionSchedule:
    """Time-dependent partition: step k uses ``partitions[k % period]``.

    Each partition is a PwaMap sharing the dynamics of ``base``; only the
    way the domain is cut into pieces differs.
    """

    base: PwaMap
    partitions: tuple

    @property
    def period(self) -> int:
        return len(self.partitions)

    @property
    def domain(self):
        return self.base.domain

    @property
    def wrap(self):
        return self.base.wrap

    @property
    def dynamics(self):
        return self.base.dynamics

    @property
    def flags(self):
        return self.base.flags

    @property
    def is_homeomorphism(self) -> bool:
        return self.base.is_homeomorphism

    def pieces_at(self, k: int):
        return self.partitions[k % self.period].pieces

    def piece(self, pid: str, k: int = 0) -> Piece:
        return self.partitions[k % self.period].piece(pid)

    def halfplanes_at(self, k: int):
        return self.partitions[k % self.period].halfplanes_at(0)


def cyclic_schedule(m: PwaMap, refined: PwaMap, L: int) -> PartitionSchedule:
    if L < 1:
        raise ValueError("schedule period must be at least 1")
    return PartitionSchedule(m, (refined,) + (m,) * (L - 1))


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\([^()\s]*\)|[^\s()]+|\(")
_PAIR = re.compile(r"^\(([^,()]+),([^,()]+)\)$")


def _tokens(line):
    for mt in _TOKEN.finditer(line):
        yield mt.group(0), mt.start() + 1


def _point(tok, ln, col):
    mt = _PAIR.match(tok)
    if not mt:
        raise MapSpecError(f"expected a point (x,y), got {tok!r}", ln, col)
    try:
        return (parse_rat(mt.group(1)), parse_rat(mt.group(2)))
    except GeomError as exc:
        raise MapSpecError(str(exc), ln, col) from None


def _rat(tok, ln, col):
    try:
        return parse_rat(tok)
    except GeomError as exc:
        raise MapSpecError(str(exc), ln, col) from None


def parse_map_spec(text: str, name: str = "") -> PwaMap:
    domain = None
    wrap = "none"
    pieces = []
    seen = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = list(_tokens(line))
        if not toks:
            continue
        head, col = toks[0]
        if head == "domain":
            pts = [_point(t, ln, c) for t, c in toks[1:]]
            try:
                domain = ConvexRegion.polygon(pts)
            except GeomError as exc:
                raise MapSpecError(f"domain: {exc}", ln, col) from None
        elif head == "wrap":
            if len(toks) != 2 or toks[1][0] not in WRAPS:
                raise MapSpecError("expected 'wrap unit-torus' or 'wrap none'", ln, col)
            wrap = toks[1][0]
        elif head == "piece":
            pieces.append(_parse_piece(toks, ln, seen))
        else:
            raise MapSpecError(f"unknown directive {head!r}", ln, col)
    if domain is None:
        raise MapSpecError("missing 'domain' line")
    if not pieces:
        raise MapSpecError("map has no pieces")
    return make_map(domain, pieces, wrap, name)


def _parse_piece(toks, ln, seen):
    if len(toks) < 2:
        raise MapSpecError("piece needs an id", ln, toks[0][1])
    pid, pcol = toks[1]
    if pid in seen:
        raise MapSpecError(f"duplicate piece id {pid!r}", ln, pcol)
    seen.add(pid)
    i = 2
    if i >= len(toks) or toks[i][0] != "vertices":
        raise MapSpecError("expected 'vertices'", ln, toks[min(i, len(toks) - 1)][1])
    i += 1
    pts = []
    while i < len(toks) and toks[i][0].startswith("("):
        pts.append(_point(toks[i][0], ln, toks[i][1]))
        i += 1
    if i >= len(toks) or toks[i][0] != "linear":
        raise MapSpecError("expected 'linear'", ln, toks[min(i, len(toks) - 1)][1])
    if i + 8 > len(toks) or toks[i + 5][0] != "translate":
        raise MapSpecError("expected 'linear a b c d translate e f'", ln, toks[i][1])
    a, b, c, d = (_rat(t, ln, cc) for t, cc in toks[i + 1:i + 5])
    e, f = (_rat(t, ln, cc) for t, cc in toks[i + 6:i + 8])
    if i + 8 != len(toks):
        raise MapSpecError("trailing tokens", ln, toks[i + 8][1])
    try:
        region = ConvexRegion.polygon(pts)
    except GeomError as exc:
        raise MapSpecError(f"piece {pid}: {exc}", ln, pcol) from None
    return Piece(pid, region, AffineMap2(a, b, c, d, e, f))


def _edge_on_boundary(p, q, domain):
    key = canonical_line(p, q)
    for a, b, _ in domain.edges():
        if canonical_line(a, b) == key:
            return True
    return False


def make_map(domain, pieces, wrap="none", name="") -> PwaMap:
    """Assemble a map, tagging each piece edge by its provenance: domain
    boundary edges get ``("domain",)``, interior ones ``("piece", id, i)``."""
    tagged = []
    for p in pieces:
        vs = p.domain.vertices
        n = len(vs)
        tags = tuple(
            ("domain",) if _edge_on_boundary(vs[i], vs[(i + 1) % n], domain) else ("piece", p.id, i)
            for i in range(n)
        )
        tagged.append(Piece(p.id, ConvexRegion("polygon", vs, tags), p.branch))
    return PwaMap(domain, tagged, wrap, name=name)


def format_map_spec(m: PwaMap) -> str:
    from .geom import fmt_rat

    out = ["domain " + " ".join(fmt_point(v) for v in m.domain.vertices)]
    if m.wrap != "none":
        out.append(f"wrap {m.wrap}")
    for p in m.pieces:
        br = p.branch
        lin = " ".join(fmt_rat(v) for v in (br.a, br.b, br.c, br.d))
        out.append(f"piece {p.id} vertices " + " ".join(fmt_point(v) for v in p.domain.vertices)
                   + f" linear {lin} translate {fmt_rat(br.e)} {fmt_rat(br.f)}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# validation


@dataclass
class CheckResult:
    ok: bool
    witness: str = ""


@dataclass
class ValidationReport:
    checks: dict  # name -> CheckResult, in check order

    @property
    def flags(self):
        return {k: v.ok for k, v in self.checks.items()}

    def records(self):
        for k, v in self.checks.items():
            rec = {k: v.ok}
            if v.witness:
                rec["witness"] = v.witness
            yield rec


def _frac_part(q):
    return q - (q.numerator // q.denominator)


def _agree(p, q, wrap):
    if wrap == "unit-torus":
        return _frac_part(p[0] - q[0]) == 0 and _frac_part(p[1] - q[1]) == 0
    return p == q


def validate(m: PwaMap) -> ValidationReport:
    checks = {}
    pieces = m.pieces

    witness = ""
    for p, q in combinations(pieces, 2):
        inter = intersect_convex(p.domain, q.domain)
        if inter.area > 0:
            witness = f"{p.id}&{q.id}:" + " ".join(fmt_point(v) for v in inter.vertices)
            break
    checks["pieces_disjoint"] = CheckResult(not witness, witness)

    witness = ""
    outside = [p.id for p in pieces if not p.domain.is_subset_of(m.domain)]
    total = sum((p.domain.area for p in pieces), start=0 * m.domain.area)
    if outside:
        witness = f"piece {outside[0]} leaves the domain"
    elif total != m.domain.area:
        witness = f"area sum {total} != domain area {m.domain.area}"
    checks["covering"] = CheckResult(not witness, witness)

    singular = [p.id for p in pieces if p.branch.det == 0]
    checks["branches_invertible"] = CheckResult(
        not singular, f"piece {singular[0]} has det 0" if singular else "")

    witness = ""
    for p, q in combinations(pieces, 2):
        shared = intersect_convex(p.domain, q.domain)
        if shared.kind != "segment":
            continue
        for v in shared.vertices:
            a, b = p.branch(v), q.branch(v)
            if not _agree(a, b, m.wrap):
                witness = (f"edge {p.id}|{q.id} at {fmt_point(v)}: "
                           f"{p.id}->{fmt_point(a)} {q.id}->{fmt_point(b)}")
                break
        if witness:
            break
    checks["continuous"] = CheckResult(not witness, witness)

    witness = ""
    if not checks["branches_invertible"].ok:
        witness = "non-invertible branch"
    elif not checks["continuous"].ok:
        witness = "discontinuous"
    else:
        images = [(p.id, apply_affine(p.branch, p.domain)) for p in pieces]
        for (i, a), (j, b) in combinations(images, 2):
            inter = intersect_convex(a, b)
            if inter.area > 0:
                witness = f"images {i}&{j} overlap:" + " ".join(fmt_point(v) for v in inter.vertices)
                break
        if not witness:
            stray = [i for i, a in images if not a.is_subset_of(m.domain)]
            area = sum((a.area for _, a in images), start=0 * m.domain.area)
            if stray:
                witness = f"image of {stray[0]} leaves the domain"
            elif area != m.domain.area:
                witness = f"image area {area} != domain area {m.domain.area}"
    checks["homeomorphism"] = CheckResult(not witness, witness)

    for k, v in checks.items():
        m.flags[k] = v.ok
    return ValidationReport(checks)


def inverse_map(m: PwaMap) -> PwaMap:
    """Inverse of a homeomorphism: pieces are the images, branches inverted."""
    from .geom import invert_affine

    if not m.is_homeomorphism:
        raise ValueError("inverse_map needs a homeomorphism-validated map")
    pieces = [Piece(p.id, apply_affine(p.branch, p.domain), invert_affine(p.branch)) for p in m.pieces]
    inv = make_map(m.domain, pieces, m.wrap, (m.name or "map") + "-inverse")
    validate(inv)
    return inv


# --------------------------------------------------------------------------
# refinement


def _split(region, hp, tag):
    a, b, c = hp
    pos = clip_halfplane(region, (a, b, c), tag)
    neg = clip_halfplane(region, (-a, -b, -c), tag)
    return [r for r in (pos, neg) if r.is_polygon]


def refine_with_rectangles(m: PwaMap, rects) -> PwaMap:
    """Cut every piece along the full edge lines of every rectangle, then
    fuse the cells lying in a common rectangle back into one cell named
    after that rectangle.  Other cells are named ``<piece>.<k>``."""
    if not rects:
        return m
    lines = []
    for r in rects:
        cs = r.corners
        for i in range(4):
            lines.append((line_through(cs[i], cs[(i + 1) % 4]), ("rect", r.id, i)))
    pieces = []
    for p in m.pieces:
        cells = [p.domain]
        for hp, tag in lines:
            nxt = []
            for c in cells:
                nxt.extend(_split(c, hp, tag))
            cells = nxt
        k = 0
        inside = {}
        for c in cells:
            ctr = c.centroid()
            host = next((r for r in rects if r.region.contains(ctr, strict=True)), None)
            if host is None:
                pieces.append(Piece(f"{p.id}.{k}", c, p.branch))
                k += 1
            else:
                inside.setdefault(host.id, host)
        for rid, host in inside.items():
            cell = intersect_convex(host.region, p.domain)
            pid = rid if cell.same_set(host.region) else f"{rid}@{p.id}"
            pieces.append(Piece(pid, cell, p.branch))
    out = make_map(m.domain, pieces, m.wrap, m.name + "+R" if m.name else "")
    out.flags.update(m.flags)
    out.parent = m
    return out


# --------------------------------------------------------------------------
# gallery


def _piece(pid, verts, linear, translate=(0, 0)):
    return Piece(pid, ConvexRegion.polygon([pt(*v) for v in verts]), AffineMap2.from_rows(linear, translate))


def _c1_cone():
    A, B, O, M = (-2, 2), (2, 2), (0, 0), (0, 2)
    return make_map(
        ConvexRegion.polygon([O, B, A]),
        [
            _piece("t0", [A, M, O], [[1, "1/2"], [0, "1/2"]]),
            _piece("t1", [M, B, O], [[-1, "1/2"], [0, "1/2"]]),
        ],
        name="c1-cone",
    )


def _c4_nomax():
    O, X, Y = (0, 0), (-2, 2), (2, 2)
    A, B, M = (-1, 1), (1, 1), (0, 1)
    return make_map(
        ConvexRegion.polygon([O, Y, X]),
        [
            # A->A', M->B', O->O
            _piece("AMO", [A, M, O], [[1, "1/2"], [0, "1/2"]]),
            # M->Y, B->X, O->O
            _piece("MBO", [M, B, O], [[-4, 2], [0, 2]]),
            _piece("XYBA", [X, A, B, Y], [[1, 0], [0, 1]]),
        ],
        name="c4-nomax",
    )


def _tent_product():
    return make_map(
        ConvexRegion.box(0, 0, 1, 1),
        [
            _piece("L", [(0, 0), ("1/2", 0), ("1/2", 1), (0, 1)], [[2, 0], [0, 1]]),
            _piece("R", [("1/2", 0), (1, 0), (1, 1), ("1/2", 1)], [[-2, 0], [0, 1]], (2, 0)),
        ],
        name="tent-product",
    )


def _cat():
    lin = [[2, 1], [1, 1]]
    h = "1/2"
    return make_map(
        ConvexRegion.box(0, 0, 1, 1),
        [
            _piece("a", [(0, 0), (h, 0), (0, 1)], lin),
            _piece("b", [(h, 0), (1, 0), (0, 1)], lin, (-1, 0)),
            _piece("c", [(1, 0), (h, 1), (0, 1)], lin, (-1, -1)),
            _piece("d", [(1, 0), (1, 1), (h, 1)], lin, (-2, -1)),
        ],
        wrap="unit-torus",
        name="cat",
    )


_GALLERY = {
    "c1-cone": _c1_cone,
    "c4-nomax": _c4_nomax,
    "tent-product": _tent_product,
    "cat": _cat,
}


def builtin_gallery() -> dict:
    """Fresh, validated copies of the built-in example maps."""
    out = {}
    for name, build in _GALLERY.items():
        m = build()
        validate(m)
        out[name] = m
    return out


def load_map(ref: str) -> PwaMap:
    """``gallery:NAME`` or a path to a map-spec file."""
    if ref.startswith("gallery:"):
        name = ref.split(":", 1)[1]
        if name not in _GALLERY:
            raise MapSpecError(f"unknown gallery map {name!r}; have {', '.join(sorted(_GALLERY))}")
        m = _GALLERY[name]()
        validate(m)
        return m
    with open(ref, encoding="utf-8") as fh:
        m = parse_map_spec(fh.read(), name=ref)
    validate(m)
    return m
