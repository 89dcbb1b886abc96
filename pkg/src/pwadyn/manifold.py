"""Finite-depth stable/unstable manifold regions, Lyapunov estimates and the
rho/alpha point diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from gmpy2 import mpq

from .geom import (
    AffineMap2,
    ConvexRegion,
    apply_affine,
    clip_halfplane,
    invert_affine,
    line_angle,
    max_min_chord,
    region_metrics,
    singular_log_norms,
)
from .symdyn import BoundaryHit, itinerary, orbit

STABLE, UNSTABLE = "stable", "unstable"
# a region whose width exceeds this fraction of its diameter is not
# segment-like, so its long axis says nothing about a manifold direction
SHAPE_TOL = 0.25


def _direction(d):
    if d in ("s", STABLE):
        return STABLE
    if d in ("u", UNSTABLE):
        return UNSTABLE
    raise ValueError(f"direction must be stable or unstable, got {d!r}")


@dataclass(frozen=True)
class ManifoldApprox:
    direction: str
    depth: int
    region: ConvexRegion
    width: float
    diameter: float
    long_axis: tuple
    decay_log_rate: float

    @property
    def segment_like(self) -> bool:
        return self.diameter > 0 and self.width <= SHAPE_TOL * self.diameter


def stable_regions(system, word, phase=0):
    """Regions for depths 0..len(word)-1 along the forward word A_0 A_1 ...

    Depth 0 is the closed piece A_0; depth n >= 1 is the intersection of the
    closed pieces A_1..A_n pulled back through the affine compositions of
    the word (extended past the piece boundaries).
    """
    first = system.piece(word[0], phase)
    out = [first.domain]
    if len(word) == 1:
        return out
    f = first.branch
    region = apply_affine(invert_affine(f), system.piece(word[1], phase + 1).domain)
    out.append(region)
    f = system.piece(word[1], phase + 1).branch.compose(f)
    for k in range(2, len(word)):
        piece = system.piece(word[k], phase + k)
        for h in piece.domain.halfplanes():
            region = clip_halfplane(region, f.pullback(h[:3]), h[3])
        out.append(region)
        f = piece.branch.compose(f)
    return out


def unstable_regions(system, current, past, phase=0):
    """Regions for depths 0..len(past) of the point whose piece is
    ``current`` and whose past letters (oldest first) are ``past``.

    Depth n is the intersection over j = 1..n of the closed piece A_{-j}
    pushed forward to time 0 through the affine compositions.
    """
    out = [system.piece(current, phase).domain]
    region = None
    g = AffineMap2.identity()  # maps time -j+1 to time 0
    for j in range(1, len(past) + 1):
        piece = system.piece(past[-j], phase - j)
        g = g.compose(piece.branch)
        img = apply_affine(g, piece.domain)
        if region is None:
            region = img
        else:
            for h in img.halfplanes():
                region = clip_halfplane(region, h[:3], h[3])
        out.append(region)
    return out


def _approx(direction, regions):
    depth = len(regions) - 1
    r = regions[-1]
    mt = region_metrics(r)
    rate = math.nan
    if depth >= 1:
        prev = region_metrics(regions[-2]).width
        if prev > 0 and mt.width > 0:
            rate = math.log(mt.width / prev)
    return ManifoldApprox(direction, depth, r, mt.width, mt.diameter, mt.long_axis, rate)


def stable_region(system, x=None, depth=0, direction="s", word=None) -> ManifoldApprox:
    """Depth-n manifold region of x (or of a word: forward letters A_0..A_n
    for stable, past letters then the current piece for unstable)."""
    direction = _direction(direction)
    if direction == STABLE:
        if word is None:
            word = itinerary(system, x, 0, depth + 1)
        regions = stable_regions(system, tuple(word)[: depth + 1])
    else:
        if word is None:
            word = itinerary(system, x, depth, 1)
        word = tuple(word)
        regions = unstable_regions(system, word[-1], word[:-1][len(word) - 1 - depth:])
    return _approx(direction, regions)


def lyapunov_estimate(system, x, n: int):
    """((1/n) log sigma1, (1/n) log sigma2) of the composed linear part."""
    _, pieces = orbit(system, x, n)
    a, b, c, d = mpq(1), mpq(0), mpq(0), mpq(1)
    for p in pieces:
        br = p.branch
        a, b, c, d = br.a * a + br.b * c, br.a * b + br.b * d, br.c * a + br.d * c, br.c * b + br.d * d
    s1, s2 = singular_log_norms(((a, b), (c, d)))
    return s1 / n, s2 / n


@dataclass(frozen=True)
class PointDiagnostics:
    rho_upper: float
    alpha_hat: float
    depth: int
    degenerate: bool = False


def _diagnostics(x, stable: ManifoldApprox, unstable: ManifoldApprox, depth):
    rho = min(max_min_chord(stable.region, x), max_min_chord(unstable.region, x))
    alpha = line_angle(*stable.long_axis, *unstable.long_axis)
    degenerate = not (stable.segment_like and unstable.segment_like) or math.isnan(alpha)
    return PointDiagnostics(rho, alpha, depth, degenerate)


def rho_alpha(system, x, depth: int) -> PointDiagnostics:
    """rho_upper: smallest over the two directions of the largest
    nearer-end chord distance from x in the depth-n region (an upper bound
    for the distance to the ends of the true manifold); alpha_hat: angle
    between the regions' long axes."""
    s = stable_region(system, x, depth, STABLE)
    u = stable_region(system, x, depth, UNSTABLE)
    return _diagnostics(x, s, u, depth)


def diagnostics_from_past(system, y, depth: int, full: bool = False):
    """Diagnostics at x = T^depth(y), using y's orbit as the past of x.

    Needs no inverse branches, so it also serves non-injective maps.
    Returns (x, PointDiagnostics), plus both ManifoldApprox when ``full``.
    """
    pts, pieces = orbit(system, y, depth)
    x = pts[-1]
    past = tuple(p.id for p in pieces)
    fwd = itinerary(system, x, 0, depth + 1)
    s = _approx(STABLE, stable_regions(system, fwd))
    u = _approx(UNSTABLE, unstable_regions(system, fwd[0], past))
    if full:
        return x, _diagnostics(x, s, u, depth), s, u
    return x, _diagnostics(x, s, u, depth)


# --------------------------------------------------------------------------
# sampling and statistics


def sample_points(domain: ConvexRegion, count: int, seed: int, bits: int = 20):
    """Seeded rational points with denominator 2**bits, uniform in the
    domain's bounding box and rejected unless interior to the domain."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = domain.bbox()
    den = 1 << bits
    out = []
    while len(out) < count:
        i, j = rng.integers(0, den, size=2)
        p = (x0 + (x1 - x0) * mpq(int(i), den), y0 + (y1 - y0) * mpq(int(j), den))
        if domain.contains(p, strict=True):
            out.append(p)
    return out


def distortion_constant(system) -> float:
    """max over pieces of log(sigma1/sigma2) of the branch linear part."""
    best = 0.0
    seen = set()
    for k in range(system.period):
        for p in system.pieces_at(k):
            if p.id in seen and system.period == 1:
                continue
            seen.add(p.id)
            s1, s2 = singular_log_norms(p.branch.linear)
            best = max(best, s1 - s2)
    return best


QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class OrbitStatistics:
    samples: int
    used: int
    boundary_hits: int
    degenerate: int
    rho_quantiles: tuple
    alpha_quantiles: tuple
    distortion: float
    points: list  # (x, PointDiagnostics) for every used sample


def orbit_statistics(system, samples: int, depth: int, seed: int) -> OrbitStatistics:
    pts = sample_points(system.domain, samples, seed)
    results, hits = [], 0
    for y in pts:
        try:
            results.append(diagnostics_from_past(system, y, depth))
        except BoundaryHit:
            hits += 1
    rhos = [d.rho_upper for _, d in results]
    alphas = [d.alpha_hat for _, d in results if not math.isnan(d.alpha_hat)]
    rq = tuple(float(v) for v in np.quantile(rhos, QUANTILES)) if rhos else ()
    aq = tuple(float(v) for v in np.quantile(alphas, QUANTILES)) if alphas else ()
    return OrbitStatistics(
        samples, len(results), hits, sum(d.degenerate for _, d in results), rq, aq,
        distortion_constant(system), results,
    )
