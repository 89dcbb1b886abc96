import pytest
from gmpy2 import mpq

from pwadyn.geom import AffineMap2, ConvexRegion, pt
from pwadyn.pwamap import (
    MapSpecError,
    Piece,
    cyclic_schedule,
    format_map_spec,
    inverse_map,
    load_map,
    make_map,
    parse_map_spec,
    refine_with_rectangles,
    validate,
)
from pwadyn.strips import Rectangle
from pwadyn.symdyn import cylinder_counts, enumerate_cylinders

C1_TEXT = """\
# two-triangle cone map
domain (0,0) (2,2) (-2,2)
piece t0 vertices (-2,2) (0,2) (0,0) linear 1 1/2 0 1/2 translate 0 0
piece t1 vertices (0,2) (2,2) (0,0) linear -1 1/2 0 1/2 translate 0 0
"""


def single_piece(branch=None):
    unit = ConvexRegion.box(0, 0, 1, 1)
    return make_map(unit, [Piece("P", unit, branch or AffineMap2.identity())], name="id")


def test_parse_c1_file_has_two_pieces():
    m = parse_map_spec(C1_TEXT)
    assert [p.id for p in m.pieces] == ["t0", "t1"]
    rep = validate(m)
    assert rep.flags["continuous"] is True
    assert rep.flags["homeomorphism"] is False


def test_clockwise_vertices_are_reoriented():
    cw = C1_TEXT.replace("(-2,2) (0,2) (0,0)", "(0,0) (0,2) (-2,2)")
    m = parse_map_spec(cw)
    ref = parse_map_spec(C1_TEXT)
    assert m.pieces[0].domain.same_set(ref.pieces[0].domain)
    assert m.pieces[0].domain.area > 0


def test_float_literal_is_a_syntax_error_with_position():
    bad = C1_TEXT.replace("(0,2) (0,0) linear", "(0,0.5) (0,0) linear", 1)
    with pytest.raises(MapSpecError) as exc:
        parse_map_spec(bad)
    assert exc.value.line == 3
    assert exc.value.col is not None


@pytest.mark.parametrize("text, fragment", [
    ("piece a vertices (0,0) (1,0) (0,1) linear 1 0 0 1 translate 0 0\n", "missing 'domain'"),
    ("domain (0,0) (1,0) (0,1)\n", "no pieces"),
    ("domain (0,0) (1,0) (0,1)\nwrap klein\n", "wrap"),
    ("domain (0,0) (1,0) (0,1)\nfoo\n", "unknown directive"),
    ("domain (0,0) (1,0) (0,1)\npiece a vertices (0,0) (1,0) (0,1) linear 1 0 0 1\n", "translate"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(MapSpecError, match=fragment):
        parse_map_spec(text)


def test_duplicate_piece_id_rejected():
    text = C1_TEXT.replace("piece t1", "piece t0")
    with pytest.raises(MapSpecError, match="duplicate"):
        parse_map_spec(text)


@pytest.mark.parametrize("pid", ["a,b", "a+b", "a:b", "a#b", "a=b"])
def test_piece_ids_must_round_trip_through_records(pid):
    unit = ConvexRegion.box(0, 0, 1, 1)
    with pytest.raises(MapSpecError):
        make_map(unit, [Piece(pid, unit, AffineMap2.identity())])


def test_format_then_parse_round_trip(gallery):
    for name, m in gallery.items():
        back = parse_map_spec(format_map_spec(m), name)
        assert back.wrap == m.wrap
        assert [p.id for p in back.pieces] == [p.id for p in m.pieces]
        for p, q in zip(back.pieces, m.pieces):
            assert p.domain.same_set(q.domain)
            assert p.branch == q.branch


def test_validate_gallery_flags(gallery):
    c1 = validate(gallery["c1-cone"])
    assert c1.flags["continuous"] is True and c1.flags["homeomorphism"] is False
    assert "overlap" in c1.checks["homeomorphism"].witness

    c4 = validate(gallery["c4-nomax"])
    assert c4.flags["continuous"] is False
    # at M=(0,1) one branch lands on B'=B/2, the other on Y
    w = c4.checks["continuous"].witness
    assert "(0,1)" in w and "(1/2,1/2)" in w and "(2,2)" in w

    cat = validate(gallery["cat"])
    assert all(cat.flags.values())


def test_cat_images_tile_the_square_mod_one(gallery):
    # independent of validate(): translate each image by its integer shift
    # and check that the areas sum to 1 with pairwise overlaps of area 0
    from itertools import combinations

    from pwadyn.geom import apply_affine, intersect_convex

    cat = gallery["cat"]
    images = [apply_affine(p.branch, p.domain) for p in cat.pieces]
    assert sum(im.area for im in images) == 1
    for a, b in combinations(images, 2):
        assert intersect_convex(a, b).area == 0
    assert all(im.is_subset_of(cat.domain) for im in images)


def test_validate_is_idempotent(gallery):
    for m in gallery.values():
        a = validate(m)
        b = validate(m)
        assert a.checks == b.checks


def test_gallery_contents(gallery):
    assert set(gallery) >= {"c1-cone", "c4-nomax", "tent-product", "cat"}
    assert len(gallery["c1-cone"].pieces) == 2
    xyba = gallery["c4-nomax"].piece("XYBA")
    assert xyba.branch == AffineMap2.identity()
    assert gallery["cat"].is_homeomorphism
    assert gallery["tent-product"].flags["continuous"] is True


def test_load_map_unknown_gallery():
    with pytest.raises(MapSpecError, match="unknown gallery"):
        load_map("gallery:nope")


def test_refine_with_no_rectangles_is_unchanged(gallery):
    cat = gallery["cat"]
    assert refine_with_rectangles(cat, []) is cat


def test_refine_single_piece_with_inner_rectangle():
    m = single_piece()
    third, two = mpq(1, 3), mpq(2, 3)
    r = Rectangle("R", (pt(third, third), pt(two, third), pt(two, two), pt(third, two)))
    out = refine_with_rectangles(m, [r])
    assert len(out.pieces) == 9
    assert sum(p.domain.area for p in out.pieces) == m.domain.area
    assert out.piece("R").domain.same_set(r.region)
    assert out.dynamics is m
    assert validate(out).flags["pieces_disjoint"]


def test_refine_preserves_area_on_cat(gallery, cat_strips):
    rects, system, _ = cat_strips
    assert sum(p.domain.area for p in system.pieces) == 1
    for r in rects:
        assert system.piece(r.id).domain.same_set(r.region)


def test_cyclic_schedule_period_one_uses_refined(gallery, cat_strips):
    cat = gallery["cat"]
    _, refined, _ = cat_strips
    sched = cyclic_schedule(cat, refined, 1)
    for k in range(4):
        assert sched.pieces_at(k) is refined.pieces


def test_cyclic_schedule_rejects_zero_period(gallery):
    with pytest.raises(ValueError):
        cyclic_schedule(gallery["cat"], gallery["cat"], 0)


def test_cyclic_schedule_with_base_partition_matches_plain_map(gallery):
    cat = gallery["cat"]
    plain = enumerate_cylinders(cat, 5)
    sched = enumerate_cylinders(cyclic_schedule(cat, cat, 3), 5)
    assert plain.counts == sched.counts
    assert [n.word for n in plain.level(5)] == [n.word for n in sched.level(5)]


def test_cyclic_schedule_counts_lie_between_pure_partitions(gallery, cat_strips):
    cat = gallery["cat"]
    _, refined, _ = cat_strips
    n = 4
    pure = cylinder_counts(cat, n)[0]
    fine = cylinder_counts(refined, n)[0]
    mixed = cylinder_counts(cyclic_schedule(cat, refined, 3), n)[0]
    for k in range(n + 1):
        assert pure[k] <= mixed[k] <= fine[k]


def test_inverse_map_tree_has_same_counts(gallery):
    cat = gallery["cat"]
    inv = inverse_map(cat)
    assert inv.is_homeomorphism
    assert enumerate_cylinders(inv, 6).counts == enumerate_cylinders(cat, 6).counts


def test_inverse_map_needs_homeomorphism(gallery):
    with pytest.raises(ValueError):
        inverse_map(gallery["c1-cone"])
