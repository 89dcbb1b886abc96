import math

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from pwadyn.geom import (
    AffineMap2,
    ConvexRegion,
    GeomError,
    SingularMapError,
    apply_affine,
    clip_halfplane,
    convex_hull,
    fmt_rat,
    intersect_convex,
    invert_affine,
    parse_rat,
    region_metrics,
    singular_log_norms,
)

LAMBDA = (3 + math.sqrt(5)) / 2


def lin(a, b, c, d):
    return AffineMap2.from_rows(((a, b), (c, d)))

unit = ConvexRegion.box(0, 0, 1, 1)


def square_at(x, y):
    return ConvexRegion.box(x, y, x + 1, y + 1)


# --- rationals ---------------------------------------------------------------

def test_parse_rat_accepts_integers_and_fractions():
    assert parse_rat("-3/6") == mpq(-1, 2)
    assert parse_rat("7") == 7
    assert fmt_rat(mpq(4, 2)) == "2" and fmt_rat(mpq(-1, 3)) == "-1/3"


@pytest.mark.parametrize("tok", ["0.5", "1e3", "1/0", "a", "--1"])
def test_parse_rat_rejects_non_rationals(tok):
    with pytest.raises(GeomError):
        parse_rat(tok)


# --- intersection ------------------------------------------------------------

def test_intersect_identical_squares():
    assert intersect_convex(unit, unit).same_set(unit)


def test_intersect_offset_squares():
    r = intersect_convex(unit, square_at(mpq(1, 2), mpq(1, 2)))
    assert r.kind == "polygon" and r.area == mpq(1, 4)
    assert set(r.vertices) == {(mpq(1, 2), mpq(1, 2)), (1, mpq(1, 2)), (1, 1), (mpq(1, 2), 1)}


def test_intersect_disjoint_squares():
    assert intersect_convex(unit, square_at(2, 0)).is_empty


def test_intersect_shared_edge_is_a_segment():
    a = ConvexRegion.polygon([(0, 0), (1, 0), (0, 1)])
    b = ConvexRegion.polygon([(1, 0), (0, 1), (1, 1)])
    r = intersect_convex(a, b)
    assert r.kind == "segment" and set(r.vertices) == {(1, 0), (0, 1)}


def test_touching_corner_is_a_point():
    r = intersect_convex(unit, square_at(1, 1))
    assert r.kind == "point" and r.vertices[0] == (1, 1)


# --- affine maps --------------------------------------------------------------

def test_identity_image():
    assert apply_affine(AffineMap2.identity(), unit).same_set(unit)


def test_cat_linear_image_area():
    img = apply_affine(lin(2, 1, 1, 1), unit)
    assert img.kind == "polygon" and img.area == 1


def test_singular_map_collapses_to_flagged_segment():
    img = apply_affine(lin(1, 0, 0, 0), unit)
    assert img.kind == "segment" and img.degenerate
    assert set(img.vertices) == {(0, 0), (1, 0)}


def test_orientation_reversing_image_is_ccw():
    img = apply_affine(lin(-1, 0, 0, 1), unit)
    assert img.area == 1 and img.same_set(ConvexRegion.box(-1, 0, 0, 1))


def test_invert_examples():
    assert invert_affine(AffineMap2.identity()) == AffineMap2.identity()
    assert invert_affine(lin(2, 1, 1, 1)) == lin(1, -1, -1, 2)
    half = AffineMap2(mpq(1, 2), 0, 0, mpq(1, 2), mpq(1, 4), mpq(1, 4))
    assert invert_affine(half) == AffineMap2(2, 0, 0, 2, mpq(-1, 2), mpq(-1, 2))


def test_invert_singular_raises():
    with pytest.raises(SingularMapError):
        invert_affine(lin(1, 2, 2, 4))


# --- metrics --------------------------------------------------------------------

def test_metrics_unit_square():
    m = region_metrics(unit)
    assert m.area == 1 and m.diameter == pytest.approx(math.sqrt(2)) and m.width == pytest.approx(1)


def test_metrics_segment():
    m = region_metrics(ConvexRegion.segment((0, 0), (1, 0)))
    assert m.area == 0 and m.diameter == pytest.approx(1) and m.width == 0


def test_metrics_triangle():
    m = region_metrics(ConvexRegion.polygon([(0, 0), (1, 0), (0, 1)]))
    assert m.area == mpq(1, 2) and m.diameter == pytest.approx(math.sqrt(2))


def test_metrics_of_empty_raises():
    with pytest.raises(GeomError):
        region_metrics(ConvexRegion.empty())


def test_singular_log_norms_examples():
    assert singular_log_norms(((1, 0), (0, 1))) == pytest.approx((0.0, 0.0), abs=1e-15)
    s1, s2 = singular_log_norms(((2, 0), (0, mpq(1, 2))))
    assert s1 == pytest.approx(math.log(2), abs=1e-12) and s2 == pytest.approx(-math.log(2), abs=1e-12)
    s1, s2 = singular_log_norms(((2, 1), (1, 1)))
    assert abs(s1 - math.log(LAMBDA)) < 1e-9 and abs(s2 + math.log(LAMBDA)) < 1e-9


def test_singular_log_norms_rank_one():
    s1, s2 = singular_log_norms(((1, 2), (2, 4)))
    assert s2 == -math.inf and s1 == pytest.approx(math.log(5))


def test_convex_hull_drops_interior_and_collinear_points():
    hull = convex_hull([(0, 0), (2, 0), (1, 0), (1, 1), (2, 2), (0, 2)])
    assert ConvexRegion.polygon(hull).same_set(ConvexRegion.box(0, 0, 2, 2))


def test_polygon_rejects_collinear_input():
    with pytest.raises(GeomError):
        ConvexRegion.polygon([(0, 0), (1, 0), (2, 0)])


# --- properties -------------------------------------------------------------------

small = st.integers(-6, 6)
rat = st.builds(lambda p, q: mpq(p, q), st.integers(-24, 24), st.integers(1, 4))


@st.composite
def polygons(draw):
    pts = draw(st.lists(st.tuples(rat, rat), min_size=3, max_size=8))
    hull = convex_hull(pts)
    if len(hull) < 3:
        x, y = draw(rat), draw(rat)
        w = draw(st.integers(1, 5))
        return ConvexRegion.box(x, y, x + w, y + w)
    return ConvexRegion.polygon(hull)


halfplanes = st.tuples(small, small, small).filter(lambda h: h[0] or h[1]).map(
    lambda h: tuple(mpq(v) for v in h))
maps = st.tuples(small, small, small, small, rat, rat).map(lambda t: AffineMap2(*t))


@given(polygons(), polygons())
def test_intersection_commutative_and_monotone(p, q):
    a, b = intersect_convex(p, q), intersect_convex(q, p)
    assert a.kind == b.kind and set(a.vertices) == set(b.vertices)
    if not a.is_empty:
        assert a.is_subset_of(p) and a.is_subset_of(q)


@given(polygons())
def test_intersection_idempotent(p):
    assert intersect_convex(p, p).same_set(p)


@given(polygons(), halfplanes)
def test_halfplane_area_additivity(p, h):
    neg = tuple(-v for v in h)
    assert clip_halfplane(p, h).area + clip_halfplane(p, neg).area == p.area


@given(polygons(), maps)
def test_affine_area_scaling(p, f):
    assert apply_affine(f, p).area == abs(f.det) * p.area


@given(maps)
def test_inverse_is_two_sided(f):
    if f.det == 0:
        return
    g = invert_affine(f)
    assert f.compose(g) == AffineMap2.identity() == g.compose(f)
    assert invert_affine(g) == f


@given(st.tuples(small, small, small, small))
def test_singular_log_norms_sum_and_transpose(m):
    a, b, c, d = m
    det = a * d - b * c
    s1, s2 = singular_log_norms(((a, b), (c, d)))
    t1, t2 = singular_log_norms(((a, c), (b, d)))
    assert s1 >= s2 and (s1, s2) == pytest.approx((t1, t2), abs=1e-12)
    if det:
        assert abs(s1 + s2 - math.log(abs(det))) < 1e-12
