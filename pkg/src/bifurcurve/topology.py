"""Fiber invariants: component counts, Betti numbers, Euler characteristic, mu(b)."""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .polymap import PolynomialMap
from .tracer import ARC, CIRCLE, FiberComponent, FiberSnapshot, TraceConfig, enumerate_fiber, sphere_crossings


class ClassificationError(RuntimeError):
    pass


def classify(component: FiberComponent) -> str:
    """Circle iff the trace closed with no boundary hits; Arc iff it has exactly two."""
    if component.tainted or component.incomplete:
        raise ClassificationError(f"component is not complete ({component.note})")
    closed = len(component.points) > 1 and np.allclose(component.points[0], component.points[-1], rtol=0, atol=0)
    hits = len(component.boundary_hits)
    if component.kind == CIRCLE and hits == 0:
        return CIRCLE
    if component.kind == ARC and hits == 2 and not closed:
        return ARC
    raise ClassificationError("inconsistent evidence: closed loop with boundary hits")


@dataclass
class SphereLadder:
    radii: list[float]
    counts: list[int]
    chi: int
    stabilized: bool
    inner_count: int = 0


def euler_via_sphere(fmap: PolynomialMap, t, cfg: TraceConfig, ladder=None) -> SphereLadder:
    """Half the number of fiber/sphere crossings on the largest rung of a radius ladder.

    A rung flagged as degenerate (near-tangential or clustered crossings) is
    recomputed once at 1.01 R.  The default ladder R0*{1,2,4,8} is extended by
    up to two further doublings while its top two counts differ.  In exterior mode the inner-sphere crossings
    are added before halving, so the result counts intervals.
    """
    R0 = cfg.radius
    extend = 2 if ladder is None else 0
    ladder = [R0 * k for k in (1, 2, 4, 8)] if ladder is None else list(ladder)
    if len(ladder) < 3 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly increasing with at least 3 radii")
    inner = 0
    if cfg.inner_radius > 0:
        inner = _count(fmap, t, cfg.inner_radius, cfg)[1]
    used, counts = [], []
    for R in ladder:
        r, c = _count(fmap, t, R, cfg)
        used.append(r)
        counts.append(c)
    # the default ladder keeps doubling (at most twice) until the top rungs agree
    while extend and counts[-1] != counts[-2]:
        r, c = _count(fmap, t, ladder[-1] * 2.0, cfg)
        ladder.append(ladder[-1] * 2.0)
        used.append(r)
        counts.append(c)
        extend -= 1
    total = counts[-1] + inner
    stabilized = counts[-1] == counts[-2] and total % 2 == 0
    return SphereLadder(used, counts, total // 2, stabilized, inner)


def _count(fmap, t, R, cfg):
    sc = sphere_crossings(fmap, t, R, cfg)
    if sc.degenerate:
        sc = sphere_crossings(fmap, t, R * 1.01, cfg)
    return sc.radius, sc.count


@dataclass
class FiberTopology:
    parameter: np.ndarray
    s: int
    l: int
    b0: int
    b1: int
    chi_components: int
    chi_sphere: int | None
    mu: float
    mu_is_bound: bool
    stabilized: bool
    radius_used: float
    reliable: bool = True
    crossing_counts: list[int] = field(default_factory=list)
    min_sigma: float = math.inf

    @property
    def consistent(self) -> bool:
        return self.reliable and self.stabilized and self.chi_sphere == self.chi_components

    @property
    def empty(self) -> bool:
        return self.b0 == 0 and (self.chi_sphere in (0, None))

    @property
    def chi(self) -> int:
        if self.stabilized and self.chi_sphere is not None:
            return self.chi_sphere
        return self.chi_components

    def key(self) -> tuple:
        """The tuple compared when testing local constancy."""
        return (self.s, self.l, self.b0, self.b1, self.chi)


def invariants(snapshot: FiberSnapshot, ladder: SphereLadder | None = None) -> FiberTopology:
    s = l = 0
    reliable = snapshot.reliable
    for c in snapshot.components:
        try:
            kind = classify(c)
        except ClassificationError:
            reliable = False
            continue
        if kind == CIRCLE:
            s += 1
        else:
            l += 1
    mu = -math.inf
    bound = False
    for c in snapshot.components:
        if c.min_norm > mu:
            mu = c.min_norm
            side = None
            if c.min_norm_is_bound and c.boundary_sides:
                k = 0 if np.linalg.norm(c.points[0]) <= np.linalg.norm(c.points[-1]) else 1
                side = c.boundary_sides[k]
            bound = c.min_norm_is_bound and side != "inner"
    if not snapshot.components:
        mu = math.nan
    return FiberTopology(
        parameter=np.asarray(snapshot.t, dtype=float),
        s=s,
        l=l,
        b0=s + l,
        b1=s,
        chi_components=l,
        chi_sphere=None if ladder is None else ladder.chi,
        mu=float(mu),
        mu_is_bound=bound,
        stabilized=False if ladder is None else ladder.stabilized,
        radius_used=snapshot.radius,
        reliable=reliable,
        crossing_counts=[] if ladder is None else list(ladder.counts),
        min_sigma=snapshot.min_sigma,
    )


def fiber_topology(fmap: PolynomialMap, t, cfg: TraceConfig, max_doublings: int = 3):
    """Enumerate X_t and its invariants, doubling the working radius while the
    component count disagrees with the stabilized sphere count.

    Returns (snapshot, topology).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    ladder = euler_via_sphere(fmap, t, cfg)
    R = cfg.radius
    for k in range(max_doublings + 1):
        snap = enumerate_fiber(fmap, t, cfg if k == 0 else cfg.with_radius(R))
        topo = invariants(snap, ladder)
        if topo.consistent or not ladder.stabilized or not topo.reliable:
            break
        R *= 2.0
    return snap, topo


@lru_cache(maxsize=4096)
def _cached_fiber(fmap: PolynomialMap, t: tuple, cfg: TraceConfig):
    return fiber_topology(fmap, np.asarray(t, dtype=np.float64), cfg)


def sample_fiber(fmap: PolynomialMap, t, cfg: TraceConfig):
    """Memoized :func:`fiber_topology`; results are shared, do not mutate them."""
    key = tuple(float(v) for v in np.atleast_1d(t))
    return _cached_fiber(fmap, key, cfg)
