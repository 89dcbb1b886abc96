"""Command-line front end.  Exit codes: 0 success, 1 check failure, 2 usage
or input error."""
from __future__ import annotations

import argparse
import math
import re
import sys

from gmpy2 import mpq

from . import __version__
from .geom import GeomError, fmt_point, parse_rat
from .pwamap import MapSpecError, load_map, validate
from .report import parse_record_line, render

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_DECIMAL = re.compile(r"^-?\d+\.\d+$")


class UsageError(Exception):
    pass


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _nonneg_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}")
    return v


def _positive_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}") from None
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def _point(s):
    parts = s.strip("()").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected a point x,y, got {s!r}")
    out = []
    for part in parts:
        part = part.strip()
        if _DECIMAL.match(part):
            out.append(mpq(part))  # decimal literals are exact
            continue
        try:
            out.append(parse_rat(part))
        except GeomError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    return tuple(out)


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}") from None


def _map(args):
    try:
        return load_map(args.map)
    except OSError as e:
        raise UsageError(f"{args.map}: {e.strerror}") from None
    except MapSpecError as e:
        raise UsageError(f"{args.map}: {e}") from None
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None


def _rects(path):
    from .strips import parse_rect_file

    try:
        return parse_rect_file(_read(path))
    except (MapSpecError, GeomError, ValueError) as e:
        raise UsageError(f"{path}: {e}") from None


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} samples points and needs --seed")


# --------------------------------------------------------------------------
# subcommands; each returns (records, exit code)


def cmd_validate(args):
    m = _map(args)
    rep = validate(m)
    recs = [{"map": args.map, **{k: v.ok for k, v in rep.checks.items()}}]
    recs += [{"check": k, "witness": v.witness} for k, v in rep.checks.items() if v.witness]
    core = ("pieces_disjoint", "covering", "branches_invertible")
    return recs, EXIT_OK if all(rep.checks[k].ok for k in core if k in rep.checks) else EXIT_FAIL


def cmd_entropy(args):
    from .symdyn import cylinder_counts, entropy_estimates

    m = _map(args)
    counts, degenerate, truncated = cylinder_counts(m, args.depth, max_visits=args.max_visits)
    est = entropy_estimates(counts)
    recs = []
    for n in range(1, len(counts)):
        recs.append({"n": n, "c_n": counts[n], "degenerate": degenerate[n], "avg": est.average[n - 1],
                     "ratio": est.ratio[n - 2] if n >= 2 else None})
    last = len(counts) - 1
    recs.append({"depth": last, f"c_{last}": counts[last], "truncated": truncated})
    return recs, EXIT_OK


def cmd_mult(args):
    from .symdyn import enumerate_cylinders, mult_at, multiplicity_profile

    m = _map(args)
    tree = enumerate_cylinders(m, args.depth, budget=args.budget)
    if tree.truncated:
        return [{"depth": tree.depth, "truncated": True, "budget": args.budget}], EXIT_FAIL
    recs = []
    if args.point is not None:
        wrap = m.wrap if args.torus else "none"
        for k in range(1, args.depth + 1):
            recs.append({"n": k, "point": args.point, "mult": mult_at(tree, args.point, k, wrap)})
        return recs, EXIT_OK
    prof = multiplicity_profile(m, args.depth, tree=tree, identify_torus=args.torus)
    for k, best, wit in prof.per_depth:
        recs.append({"n": k, "mult": best, "witness": fmt_point(wit) if wit else None})
    return recs, EXIT_OK


def cmd_manifold(args):
    from .manifold import lyapunov_estimate, stable_region
    from .symdyn import BoundaryHit

    m = _map(args)
    try:
        ap = stable_region(m, args.point, args.depth, args.direction)
    except BoundaryHit as e:
        return [{"point": args.point, "boundary_hit": True, "step": e.k}], EXIT_FAIL
    rec = {"direction": ap.direction, "depth": ap.depth, "width": ap.width, "diameter": ap.diameter,
           "segment_like": ap.segment_like, "decay_log_rate": ap.decay_log_rate,
           "vertices": " ".join(fmt_point(v) for v in ap.region.vertices)}
    recs = [rec]
    if args.lyapunov:
        try:
            lu, ls = lyapunov_estimate(m, args.point, args.lyapunov)
            recs.append({"lyapunov_n": args.lyapunov, "lambda_u": float(lu), "lambda_s": float(ls)})
        except BoundaryHit as e:
            recs.append({"lyapunov_n": args.lyapunov, "boundary_hit": True, "step": e.k})
    return recs, EXIT_OK


def cmd_diag(args):
    from .manifold import QUANTILES, orbit_statistics

    _require_seed(args)
    m = _map(args)
    st = orbit_statistics(m, args.samples, args.depth, args.seed)
    rec = {"samples": st.samples, "used": st.used, "boundary_hits": st.boundary_hits,
           "degenerate": st.degenerate, "distortion": st.distortion}
    for q, r in zip(QUANTILES, st.rho_quantiles):
        rec[f"rho_q{int(q * 100)}"] = r
    for q, a in zip(QUANTILES, st.alpha_quantiles):
        rec[f"alpha_q{int(q * 100)}"] = a
    return [rec], EXIT_OK


def cmd_rects(args):
    from .strips import format_rect, propose_rectangles

    _require_seed(args)
    m = _map(args)
    rects = propose_rectangles(m, args.samples, args.depth, args.l0, args.theta0, seed=args.seed,
                               cell_diam=args.cell_diam)
    if args.write:
        try:
            with open(args.write, "w") as fh:
                fh.write("".join(format_rect(r) + "\n" for r in rects))
        except OSError as e:
            raise UsageError(f"{args.write}: {e.strerror}") from None
    recs = [{"id": r.id, "corners": " ".join(fmt_point(c) for c in r.corners),
             "stable": r.stable_sides, "diameter": r.diameter} for r in rects]
    recs.append({"rects": len(rects)})
    return recs, EXIT_OK


def _strip_set(args):
    from .strips import admissible_filter, detect_strips, strip_system

    m = _map(args)
    rects = _rects(args.rects)
    system = strip_system(m, rects, args.period)
    ss = admissible_filter(system, detect_strips(system, rects, args.maxn, budget=args.budget))
    return m, rects, system, ss


def cmd_strips(args):
    _, rects, _, ss = _strip_set(args)
    recs = []
    for s in sorted(ss.strips, key=lambda s: (s.n, s.word)):
        recs.append({"word": s.word, "n": s.n, "start": s.start, "end": s.end, "admissible": s.admissible,
                     "s_cross": s.s_cross_exact, "u_cross": s.u_cross_exact,
                     "provenance": s.manifold_sides_by_provenance})
    tally = {k: sum(s.admissible == k for s in ss.strips) for k in ("yes", "no", "unknown")}
    recs.append({"rects": len(rects), "strips": len(ss.strips), "max_n": ss.max_n,
                 "truncated": ss.truncated, **tally})
    return recs, EXIT_OK


def cmd_return(args):
    from .strips import HorizonExceeded, good_return_time
    from .symdyn import BoundaryHit

    _, _, system, ss = _strip_set(args)
    try:
        rec, exceeded = good_return_time(system, args.point, ss, args.horizon, depth=args.depth), False
    except HorizonExceeded as e:
        rec, exceeded = e.record, True
    except BoundaryHit as e:
        return [{"point": args.point, "boundary_hit": True, "step": e.k}], EXIT_FAIL
    gaps = ";".join(",".join(map(str, g)) or "-" for g in rec.hyperbolic_times)
    return [{"point": args.point, "tau": rec.tau, "taus": rec.taus or None, "N": rec.N, "N0": rec.N0,
             "N1": rec.N1, "N2": rec.N2, "admissible_times": rec.admissible_times or None,
             "hyperbolic_times": gaps or None, "horizon_exceeded": exceeded,
             "unknown_seen": rec.unknown_seen, "heuristic": rec.heuristic}], EXIT_OK


def read_strip_records(text: str):
    """(word, status) pairs from ``strips`` record output."""
    out = []
    for line in text.splitlines():
        rec = parse_record_line(line)
        if "word" in rec and "admissible" in rec:
            out.append((tuple(rec["word"].split(",")), rec["admissible"]))
    return out


def _load_graph(src):
    from .graph import GraphSpecError, load_graph

    try:
        return load_graph(src)
    except OSError as e:
        raise UsageError(f"{src}: {e.strerror}") from None
    except GraphSpecError as e:
        raise UsageError(str(e)) from None
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None


def cmd_graph(args):
    from .graph import build_word_graph, finite_truncation, format_graph, irreducible_components

    g = build_word_graph(read_strip_records(_read(args.strips)))
    if args.write:
        try:
            with open(args.write, "w") as fh:
                fh.write(format_graph(g))
        except OSError as e:
            raise UsageError(f"{args.write}: {e.strerror}") from None
    recs = [{"vertices": g.n_vertices, "edges": g.n_edges, "base": len(g.base),
             "rects": len(set(g.rect_of.values())), "excluded_unknown": g.excluded_unknown,
             "excluded_no": g.excluded_no}]
    for n in range(1, args.truncate + 1):
        t = finite_truncation(g, n)
        comps, bound = irreducible_components(t)
        recs.append({"n": n, "entropy": t.entropy, "bound": "lower", "vertices": len(t.vertices),
                     "components": len(comps), "mme_bound": bound})
    return recs, EXIT_OK


def cmd_loops(args):
    from .graph import finite_truncation, loop_counts

    g = _load_graph(args.graph)
    try:
        counts = loop_counts(g, args.vertex, args.nmax)
    except KeyError:
        raise UsageError(f"{args.graph}: no vertex {args.vertex!r}") from None
    rho = finite_truncation(g, g.n_vertices).rho if g.n_edges else 0.0
    recs = [{"n": k + 1, "loops": c, "normalized": c / rho ** (k + 1) if rho > 0 else None}
            for k, c in enumerate(counts)]
    return recs, EXIT_OK


def cmd_sample(args):
    from .graph import finite_truncation, parry_measure, sample_orbit, vertex_name

    _require_seed(args)
    g = _load_graph(args.graph)
    if not g.n_edges:
        return [{"graph": args.graph, "error": "no edges"}], EXIT_FAIL
    t = finite_truncation(g, args.truncate or g.n_vertices)
    if not t.irreducible:
        # restrict to the first component of maximal spectral radius
        from .graph import irreducible_components

        comps, _ = irreducible_components(t)
        best = max(comps, key=lambda c: (c.rho, -c.vertices[0]))
        sub_edges = [(g.labels[v], g.labels[j], m) for v in best.vertices for j, m in g.succ[v]
                     if j in set(best.vertices)]
        from .graph import graph_from_edges

        g = graph_from_edges(sub_edges)
        t = finite_truncation(g, g.n_vertices)
    chain = parry_measure(t)
    path = sample_orbit(chain, args.len, args.seed)
    recs = [{"entropy": chain.entropy, "log_rho": chain.log_rho, "period": chain.period,
             "vertices": len(chain.labels)}]
    counts = {}
    for lab in path:
        counts[lab] = counts.get(lab, 0) + 1
    for lab, pi in zip(chain.labels, chain.stationary):
        recs.append({"vertex": vertex_name(lab), "stationary": float(pi),
                     "frequency": counts.get(lab, 0) / len(path)})
    recs.append({"path": ",".join(vertex_name(lab) for lab in path[: args.show])})
    return recs, EXIT_OK


def cmd_periodic(args):
    from .periodic import describe_family, fixed_points, growth_report
    from .symdyn import enumerate_cylinders

    m = _map(args)
    tree = enumerate_cylinders(m, args.nmax, budget=args.budget)
    if tree.truncated:
        return [{"depth": tree.depth, "truncated": True, "budget": args.budget}], EXIT_FAIL
    reports = [fixed_points(m, n, tree=tree) for n in range(1, args.nmax + 1)]
    rows = growth_report([r.count for r in reports], args.h)
    recs = []
    for r, row in zip(reports, rows):
        recs.append({"n": r.n, "count": r.count, "families": len(r.families), "normalized": row.normalized,
                     "trailing_min": row.trailing_min, "log_rate": row.log_rate})
    if args.list:
        for r in reports:
            for p in r.isolated:
                recs.append({"n": r.n, "point": p.point, "word": p.word, "shift": p.shift,
                             "multiplicity": p.multiplicity})
            for f in r.families:
                recs.append({"n": r.n, "family": describe_family(f)})
    return recs, EXIT_OK


def cmd_suite(args):
    from .suite import run_suite

    outcomes = run_suite(quick=args.quick, seed=args.seed if args.seed is not None else 0)
    recs = [o.record() for o in outcomes]
    passed = sum(o.passed for o in outcomes)
    recs.append({"passed": passed, "failed": len(outcomes) - passed})
    return recs, EXIT_OK if passed == len(outcomes) else EXIT_FAIL


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", choices=("records", "table"), default="records")
    common.add_argument("--seed", type=_nonneg_int, default=None)
    common.add_argument("--budget", type=_positive_int, default=10**6,
                        help="maximum retained cylinder-tree nodes")

    p = argparse.ArgumentParser(prog="pwadyn", description="Exact analysis of piecewise affine surface maps.")
    p.add_argument("--version", action="version", version=f"pwadyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("validate", cmd_validate, "check a map specification")
    sp.add_argument("--map", required=True)

    sp = add("entropy", cmd_entropy, "cylinder counts and entropy estimates")
    sp.add_argument("--map", required=True)
    sp.add_argument("--depth", type=_positive_int, required=True)
    sp.add_argument("--max-visits", type=_positive_int, default=None)

    sp = add("mult", cmd_mult, "cylinder-closure multiplicity")
    sp.add_argument("--map", required=True)
    sp.add_argument("--depth", type=_positive_int, required=True)
    sp.add_argument("--point", type=_point)
    sp.add_argument("--torus", action="store_true", help="identify points modulo the unit lattice")

    sp = add("manifold", cmd_manifold, "stable/unstable region at a point")
    sp.add_argument("--map", required=True)
    sp.add_argument("--point", type=_point, required=True)
    sp.add_argument("--depth", type=_nonneg_int, required=True)
    sp.add_argument("--direction", choices=("s", "u"), default="s")
    sp.add_argument("--lyapunov", type=_positive_int, default=None, metavar="N")

    sp = add("diag", cmd_diag, "rho/alpha statistics over sampled orbits")
    sp.add_argument("--map", required=True)
    sp.add_argument("--samples", type=_positive_int, required=True)
    sp.add_argument("--depth", type=_positive_int, required=True)

    sp = add("rects", cmd_rects, "propose Markov rectangles")
    sp.add_argument("--map", required=True)
    sp.add_argument("--samples", type=_positive_int, required=True)
    sp.add_argument("--depth", type=_positive_int, required=True)
    sp.add_argument("--l0", type=_positive_float, required=True)
    sp.add_argument("--theta0", type=_positive_float, required=True)
    sp.add_argument("--cell-diam", type=_positive_float, default=None)
    sp.add_argument("--write", metavar="FILE", help="also write a rectangle file")

    for name, fn, help_ in (("strips", cmd_strips, "hyperbolic and admissible strips"),
                            ("return", cmd_return, "good return time of a point")):
        sp = add(name, fn, help_)
        sp.add_argument("--map", required=True)
        sp.add_argument("--rects", required=True)
        sp.add_argument("--maxn", type=_positive_int, required=True)
        sp.add_argument("--period", type=_positive_int, default=1)
        if name == "return":
            sp.add_argument("--point", type=_point, required=True)
            sp.add_argument("--horizon", type=_positive_int, required=True)
            sp.add_argument("--depth", type=_positive_int, default=20, help="control depth")

    sp = add("graph", cmd_graph, "word graph and truncation entropies")
    sp.add_argument("--strips", required=True, help="record output of the strips command")
    sp.add_argument("--truncate", type=_positive_int, default=10)
    sp.add_argument("--write", metavar="FILE", help="also write the graph file")

    sp = add("loops", cmd_loops, "exact loop counts at a vertex")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--vertex", required=True)
    sp.add_argument("--nmax", type=_positive_int, required=True)

    sp = add("sample", cmd_sample, "sample the maximal-entropy chain")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--len", type=_positive_int, required=True)
    sp.add_argument("--truncate", type=_positive_int, default=None)
    sp.add_argument("--show", type=_nonneg_int, default=50, help="path prefix length to print")

    sp = add("periodic", cmd_periodic, "periodic points and growth")
    sp.add_argument("--map", required=True)
    sp.add_argument("--nmax", type=_positive_int, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--list", action="store_true", help="list every point and family")

    sp = add("suite", cmd_suite, "run the acceptance experiments")
    sp.add_argument("--quick", action="store_true")
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if getattr(args, "h", 0.0) is not None and getattr(args, "h", 0.0) < 0:
        print("pwadyn: error: --h must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        records, code = args.func(args)
    except UsageError as e:
        print(f"pwadyn: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    stdout.write(render(records, args.out))
    stdout.flush()
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
