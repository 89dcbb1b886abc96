import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwadyn.graph import (
    NEG_INF,
    GraphSpecError,
    build_word_graph,
    builtin_graphs,
    finite_truncation,
    format_graph,
    graph_from_edges,
    irreducible_components,
    load_graph,
    loop_counts,
    normalized_loops,
    parry_measure,
    parse_graph_file,
    project_letters,
    sample_orbit,
    spectral_radius,
)
from pwadyn.symdyn import closed_cylinder

PHI = (1 + math.sqrt(5)) / 2
GAL = builtin_graphs()


def brute_loops(edges, v, n):
    """Closed walks by enumerating every vertex sequence."""
    verts = sorted({x for e in edges for x in e[:2]})
    mult = {}
    for e in edges:
        mult[(e[0], e[1])] = mult.get((e[0], e[1]), 0) + (e[2] if len(e) > 2 else 1)
    total = 0
    for mid in product(verts, repeat=n - 1):
        path = (v,) + mid + (v,)
        w = 1
        for a, b in zip(path, path[1:]):
            w *= mult.get((a, b), 0)
            if not w:
                break
        total += w
    return total


def test_two_shift_entropy_any_n():
    for n in range(1, 8):
        assert abs(finite_truncation(GAL["two-shift"], n).entropy - math.log(2)) <= 1e-12


def test_golden_mean_entropy():
    for n in range(2, 8):
        assert abs(finite_truncation(GAL["golden-mean"], n).entropy - math.log(PHI)) <= 1e-9


def test_empty_truncation_is_neg_inf():
    g = graph_from_edges([("a", "b")])
    t = finite_truncation(g, 5)
    assert t.vertices == [] and t.entropy == NEG_INF


def test_truncation_rejects_zero_length():
    with pytest.raises(ValueError):
        finite_truncation(GAL["two-shift"], 0)


edges_st = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(1, 3)), min_size=1, max_size=18)


@given(edges_st)
@settings(max_examples=80)
def test_spectral_radius_matches_numpy_eigvals(edges):
    g = graph_from_edges([(f"v{u}", f"v{v}", m) for u, v, m in edges])
    a = g.adjacency()
    oracle = max(abs(np.linalg.eigvals(a.toarray().astype(float))))
    assert spectral_radius(a) == pytest.approx(oracle, rel=1e-9, abs=1e-9)


@given(edges_st)
@settings(max_examples=60)
def test_truncation_entropy_is_monotone(edges):
    g = graph_from_edges([(f"v{u}", f"v{v}", m) for u, v, m in edges], base=[f"v{edges[0][0]}"])
    prev_ent, prev_v = NEG_INF, set()
    for n in range(1, 9):
        t = finite_truncation(g, n)
        assert t.entropy >= prev_ent - 1e-12
        assert prev_v <= set(t.vertices)
        prev_ent, prev_v = t.entropy, set(t.vertices)


@given(edges_st)
@settings(max_examples=60)
def test_transpose_has_same_radius(edges):
    g = graph_from_edges([(f"v{u}", f"v{v}", m) for u, v, m in edges])
    assert spectral_radius(g.transpose().adjacency()) == pytest.approx(spectral_radius(g.adjacency()), rel=1e-9)


def test_loop_counts_two_shift():
    assert loop_counts(GAL["two-shift"], "o", 12) == [2**n for n in range(1, 13)]


def test_loop_counts_golden_mean_brute_force():
    edges = [("a", "a"), ("a", "b"), ("b", "a")]
    got = loop_counts(GAL["golden-mean"], "a", 10)
    assert got == [brute_loops(edges, "a", n) for n in range(1, 11)]
    assert got[:5] == [1, 2, 3, 5, 8]


def test_loop_counts_unknown_vertex():
    with pytest.raises(KeyError):
        loop_counts(GAL["golden-mean"], "zz", 3)


@pytest.mark.parametrize("name", ["two-shift", "two-shift-pair", "golden-mean"])
def test_normalized_loops_settle(name):
    g = GAL[name]
    rho = finite_truncation(g, g.n_vertices + 1).rho
    norm = normalized_loops(loop_counts(g, g.labels[0], 40), rho)[19:40]
    assert (max(norm) - min(norm)) / max(norm) < 0.10


def test_components_and_bound():
    comps, bound = irreducible_components(finite_truncation(GAL["two-shift"], 3))
    assert len(comps) == 1 and bound == 1
    comps, bound = irreducible_components(finite_truncation(GAL["two-cycles"], 4))
    assert len(comps) == 2 and bound == 2


def test_parry_two_shift_is_uniform():
    chain = parry_measure(finite_truncation(GAL["two-shift-pair"], 3))
    assert np.allclose(chain.transition, 0.5, atol=1e-12)
    assert np.allclose(chain.stationary, 0.5, atol=1e-12)
    assert chain.entropy == pytest.approx(math.log(2), abs=1e-12)


def test_parry_golden_mean_closed_form():
    chain = parry_measure(finite_truncation(GAL["golden-mean"], 4))
    pi = dict(zip(chain.labels, chain.stationary))
    assert abs(pi["a"] - PHI**2 / (1 + PHI**2)) <= 1e-9
    assert abs(pi["b"] - 1 / (1 + PHI**2)) <= 1e-9
    assert chain.entropy == pytest.approx(math.log(PHI), abs=1e-9)
    assert chain.entropy == pytest.approx(chain.log_rho, abs=1e-12)
    assert chain.period == 1


def test_parry_rejects_reducible():
    with pytest.raises(ValueError):
        parry_measure(finite_truncation(GAL["two-cycles"], 4))


def test_sampling_is_seeded_and_matches_stationary():
    chain = parry_measure(finite_truncation(GAL["golden-mean"], 4))
    a = sample_orbit(chain, 200_000, seed=11)
    assert a == sample_orbit(chain, 200_000, seed=11)
    freq = a.count("a") / len(a)
    assert abs(freq - PHI**2 / (1 + PHI**2)) < 0.01
    # b is never followed by b
    assert all(not (x == "b" and y == "b") for x, y in zip(a, a[1:]))


def test_word_graph_full_two_shift():
    strips = [(("A", x), "yes") for x in "AB"] + [(("B", x), "yes") for x in "AB"]
    g = build_word_graph(strips)
    assert g.n_vertices == 2
    assert finite_truncation(g, 3).entropy == pytest.approx(math.log(2), abs=1e-12)


def test_word_graph_single_self_follower():
    g = build_word_graph([(("A", "A"), "yes")])
    assert g.n_vertices == 1 and g.n_edges == 1
    assert finite_truncation(g, 2).entropy == pytest.approx(0.0, abs=1e-12)


def test_word_graph_counts_excluded():
    g = build_word_graph([(("A", "A"), "yes"), (("A", "B", "A"), "unknown"), (("B", "A"), "no")])
    assert g.excluded_unknown == 1 and g.excluded_no == 1


def test_word_graph_vertices_follow_words():
    g = build_word_graph([(("A", "B", "A"), "yes")])
    # word AB: vertices (AB,0) -> (AB,1) -> back to (AB,0)
    assert g.labels == [(("A", "B"), 0), (("A", "B"), 1)]
    assert loop_counts(g, (("A", "B"), 0), 4) == [0, 1, 0, 1]


def test_cat_word_graph(cat_strips):
    rects, system, ss = cat_strips
    g = build_word_graph(ss.strips)
    used = {s.word[0] for s in ss.strips if s.admissible == "yes"}
    assert set(g.rect_of.values()) == used
    t = finite_truncation(g, 20)
    _, bound = irreducible_components(t)
    assert bound <= len(rects)


def test_cat_samples_project_to_realized_words(cat_strips):
    rects, system, ss = cat_strips
    g = build_word_graph(ss.strips)
    t = finite_truncation(g, 20)
    comps, _ = irreducible_components(t)
    top = max(comps, key=lambda c: c.rho)
    sub = graph_from_edges(
        [(g.labels[u], g.labels[v], m) for u in top.vertices for v, m in g.succ[u] if v in set(top.vertices)])
    chain = parry_measure(sub)
    for seed in range(3):
        letters = project_letters(sample_orbit(chain, 12, seed))
        assert closed_cylinder(system, letters).is_polygon


def test_graph_file_round_trip():
    for g in GAL.values():
        back = parse_graph_file(format_graph(g))
        assert back.labels == [str(x) for x in g.labels]
        assert back.base == g.base
        assert (back.adjacency() != g.adjacency()).nnz == 0


def test_word_graph_file_round_trip(cat_strips):
    g = build_word_graph(cat_strips[2].strips)
    back = parse_graph_file(format_graph(g))
    assert back.n_vertices == g.n_vertices and back.n_edges == g.n_edges
    assert finite_truncation(back, 12).entropy == pytest.approx(finite_truncation(g, 12).entropy, abs=1e-12)


@pytest.mark.parametrize("text", ["vertex\n", "edge a\n", "edge a b 0\n", "node a\n", "vertex a\nvertex a\n"])
def test_graph_file_errors(text):
    with pytest.raises(GraphSpecError):
        parse_graph_file(text)


def test_load_graph_gallery_and_unknown():
    assert load_graph("gallery:golden-mean").n_edges == 3
    with pytest.raises(KeyError):
        load_graph("gallery:nope")
