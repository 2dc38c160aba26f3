"""Milnor sets of plane maps, asymptotic values along them, and the parity route.

For f: R^2 -> R the Milnor set M_c is the zero set of m_c = det[grad f; x - c],
the points where the level curve of f is tangent to a circle around c.  Its
unbounded branches carry the values S_c that f approaches at infinity while
staying tangent to large circles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .asymptotics import INCONCLUSIVE, ApproachSpec, build_tracks
from .polymap import Polynomial, PolynomialMap, milnor_polynomial
from .topology import sample_fiber
from .tracer import (
    ARC,
    CIRCLE,
    FiberComponent,
    TraceConfig,
    _run_branch,
    enumerate_fiber,
    locate_component,
    milnor_packed,
    trace_curve,
)

S_MATCH_TOL = 1e-2


@dataclass
class MilnorSet:
    center: tuple
    determinant: Polynomial
    branches: list[FiberComponent]
    degenerate: bool
    radius: float
    note: str = ""
    singular: bool = False

    @property
    def curve(self) -> PolynomialMap:
        return PolynomialMap.from_polys([self.determinant])


@dataclass
class BranchEnd:
    branch: int
    end: int  # 0: first point of the polyline, 1: last
    radii: list
    values: list
    limit: float | None
    confidence: float
    status: str  # converged | diverged | oscillating | returned | too_short


@dataclass
class AsymptoticValueEstimate:
    center: tuple
    values: list  # (t0, branch id, end, confidence)
    radii_used: list
    ends: list[BranchEnd] = field(default_factory=list)

    def contains(self, a: float, tol: float = S_MATCH_TOL) -> bool:
        return any(abs(v[0] - a) <= tol for v in self.values)


def _require_plane(fmap: PolynomialMap):
    if fmap.domain_dim != 2:
        raise ValueError("Milnor-set tracing is implemented for maps R^2 -> R only")


def trace_milnor_set(fmap: PolynomialMap, c, cfg: TraceConfig) -> MilnorSet:
    _require_plane(fmap)
    c = tuple(float(v) for v in c)
    m = milnor_polynomial(fmap, c)
    if m.is_zero():
        return MilnorSet(c, m, [], True, cfg.radius, "m_c vanishes identically")
    curve = PolynomialMap.from_polys([m])
    snap = enumerate_fiber(curve, [0.0], replace(cfg, inner_radius=0.0))
    # pieces ending at a singular point of M_c still carry usable far ends;
    # the set is only unusable when no branch reaches the sphere
    bad = [c_ for c_ in snap.components if not c_.complete]
    ms = MilnorSet(c, m, snap.components, False, cfg.radius, "", bool(bad))
    if bad:
        ms.note = "gradient of m_c vanishes on a branch"
        ms.degenerate = not any(True for _ in _branch_ends(ms))
    return ms


# ---------------------------------------------------------------------------
# following branches outward


def _outward_tangent(curve: PolynomialMap, x: np.ndarray, prev: np.ndarray) -> np.ndarray:
    J = curve.packed.jacobian(x)
    tau = np.array([-J[0, 1], J[0, 0]])
    nrm = np.linalg.norm(tau)
    if nrm == 0:
        return tau
    tau /= nrm
    if tau @ (x - prev) < 0:
        tau = -tau
    return tau


def _branch_ends(ms: MilnorSet):
    """Polyline ends lying on the outer sphere: (branch, end, point, neighbour)."""
    seen = []
    for i, br in enumerate(ms.branches):
        P = br.points
        if len(P) < 2:
            continue
        for end in (0, 1):
            x, prev = (P[0], P[1]) if end == 0 else (P[-1], P[-2])
            if np.linalg.norm(x) < ms.radius * (1 - 1e-9):
                continue
            if any(np.linalg.norm(x - q) <= 1e-6 * ms.radius for q in seen):
                continue
            seen.append(x)
            yield i, end, x.copy(), prev.copy()


def extend_branch(curve: PolynomialMap, x, prev, r_start: float, r_stop: float, cfg: TraceConfig, stop=None):
    """Follow a Milnor branch from a point on |x| = r_start outward, doubling the shell.

    Returns (polyline, radii reached, status) where status is 'reached',
    'returned' (the branch turned back inside) or 'failed'.  ``stop(points)``
    may end the walk early.
    """
    x = np.asarray(x, dtype=np.float64)
    prev = np.asarray(prev, dtype=np.float64)
    pieces = [x[None, :]]
    radii = [r_start]
    R = r_start
    while R < r_stop * (1 - 1e-12):
        Rn = min(2.0 * R, r_stop)
        tau = _outward_tangent(curve, x, prev)
        if not np.any(tau):
            return np.concatenate(pieces), radii, "failed"
        shell = replace(cfg.with_radius(Rn * 1.0), inner_radius=0.5 * R)
        pts, status, _, _ = _run_branch(curve.packed, np.zeros(1), x, tau, shell)
        if status != kernels.EXIT_OUTER:
            pieces.append(pts[1:])
            return np.concatenate(pieces), radii, "returned" if status == kernels.EXIT_INNER else "failed"
        pieces.append(pts[1:])
        prev, x = pts[-2], pts[-1]
        R = Rn
        radii.append(R)
        if stop is not None and stop(pts):
            break
    return np.concatenate(pieces), radii, "reached"


def _extrapolate(values: list[float]):
    """Aitken limit of the last three values; (limit, confidence, status)."""
    if len(values) < 3:
        return None, math.nan, "too_short"
    f = np.asarray(values, dtype=float)
    d = np.diff(f)
    scale = max(1.0, float(np.max(np.abs(f))))
    if np.all(np.abs(d[-2:]) <= 1e-13 * scale):
        return float(f[-1]), 0.0, "converged"
    tail = d[-3:] if len(d) >= 3 else d[-2:]
    ratios = [abs(p) / abs(q) if q != 0 else math.inf for p, q in zip(tail, tail[1:])]
    if all(r >= 1.5 for r in ratios):
        da, db = d[-2], d[-1]
        t0 = f[-1] - db * db / (db - da) if db != da else f[-1]
        if len(f) >= 4:
            dp, dq = d[-3], d[-2]
            prev = f[-2] - dq * dq / (dq - dp) if dq != dp else f[-2]
            conf = abs(t0 - prev)
        else:
            conf = abs(db)
        return float(t0), float(conf), "converged"
    signs = np.sign(tail)
    if np.any(signs[1:] != signs[:-1]) and not all(r >= 1.5 for r in ratios):
        return None, math.nan, "oscillating"
    return None, math.nan, "diverged"


def estimate_asymptotic_values(fmap: PolynomialMap, milnor: MilnorSet, ladder=None, cfg: TraceConfig | None = None) -> AsymptoticValueEstimate:
    _require_plane(fmap)
    if milnor.degenerate:
        raise ValueError("Milnor set is degenerate; retry with another centre")
    cfg = cfg or TraceConfig(radius=milnor.radius)
    R0 = milnor.radius
    ladder = [R0 * k for k in (1, 2, 4, 8, 16)] if ladder is None else list(ladder)
    curve = milnor.curve
    fsys = fmap.packed
    values, ends = [], []
    for i, end, x, prev in _branch_ends(milnor):
        P, radii, status = extend_branch(curve, x, prev, ladder[0], ladder[-1], cfg)
        if status != "reached":
            ends.append(BranchEnd(i, end, radii, [], None, math.nan, status))
            continue
        # F at the first polyline point past each rung
        nr = np.linalg.norm(P, axis=1)
        vals = []
        for R in ladder:
            k = int(np.searchsorted(np.maximum.accumulate(nr), R * (1 - 1e-9)))
            k = min(k, len(P) - 1)
            vals.append(float(fsys.values(P[k])[0]))
        t0, conf, st = _extrapolate(vals)
        ends.append(BranchEnd(i, end, list(ladder), vals, t0, conf, st))
        if t0 is not None:
            values.append((t0, i, end, conf))
    values.sort()
    return AsymptoticValueEstimate(milnor.center, values, list(ladder), ends)


@lru_cache(maxsize=64)
def _cached_estimate(fmap: PolynomialMap, c: tuple, cfg: TraceConfig):
    ms = trace_milnor_set(fmap, c, cfg)
    if ms.degenerate:
        return ms, None
    return ms, estimate_asymptotic_values(fmap, ms, cfg=cfg)


def choose_center(fmap: PolynomialMap, cfg: TraceConfig) -> tuple | None:
    """The origin if its Milnor set is usable, otherwise the first usable random centre."""
    for c in default_centers(cfg.random_seed, 8):
        if _cached_estimate(fmap, c, cfg)[1] is not None:
            return c
    return None


def default_centers(seed: int = 0, count: int = 4) -> list[tuple]:
    rng = np.random.default_rng(seed + 101)
    out = [(0.0, 0.0)]
    for _ in range(count):
        out.append(tuple(float(v) for v in np.round(rng.uniform(-3, 3, 2), 6)))
    return out


def estimate_s_infinity(fmap: PolynomialMap, centers=None, cfg: TraceConfig | None = None, tol: float = S_MATCH_TOL) -> list[float]:
    """Values present (within ``tol``) in S_c for every non-degenerate sampled centre."""
    _require_plane(fmap)
    cfg = cfg or TraceConfig()
    centers = default_centers(cfg.random_seed) if centers is None else [tuple(map(float, c)) for c in centers]
    if not centers:
        raise ValueError("need at least one centre")
    ests = []
    for c in centers:
        _, est = _cached_estimate(fmap, c, cfg)
        if est is not None:
            ests.append(est)
    if not ests:
        raise ValueError("every sampled centre gave a degenerate Milnor set")
    out = []
    for t0, *_ in ests[0].values:
        if all(e.contains(t0, tol) for e in ests[1:]) and not any(abs(t0 - v) <= tol for v in out):
            out.append(t0)
    return out


# ---------------------------------------------------------------------------
# parity route


@dataclass
class ParityResult:
    center: tuple
    in_s_c: bool
    verdict: str  # bifurcation | typical | inconclusive
    parities: dict  # "direction:track" -> list of per-scale counts (None = skipped)
    stabilized: dict  # same keys -> stabilized parity or None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "in_s_c": self.in_s_c,
            "verdict": self.verdict,
            "parities": self.parities,
            "stabilized": self.stabilized,
            "notes": self.notes,
        }


def _crossing_angle(fmap: PolynomialMap, curve: PolynomialMap, x) -> float:
    g = fmap.packed.jacobian(x)[0]
    h = curve.packed.jacobian(x)[0]
    ng, nh = np.linalg.norm(g), np.linalg.norm(h)
    if ng == 0 or nh == 0:
        return 0.0
    s = abs(g[0] * h[1] - g[1] * h[0]) / (ng * nh)
    return math.asin(min(1.0, s))


def _escaping_points(fmap, curve, center, polylines, t, R0, cfg):
    """Points of {f = t} on the asymptotic branch polylines outside B_R0.

    Returns (points, min crossing angle)."""
    msys = milnor_packed(fmap, center)
    fs = fmap.packed
    target = np.array([t, 0.0])
    out = []
    worst = math.pi / 2
    for P in polylines:
        vals = fs.values_batch(P)[:, 0] - t
        nr = np.linalg.norm(P, axis=1)
        idx = np.nonzero((np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0) & (nr[:-1] >= R0) & (nr[1:] >= R0))[0]
        for i in idx:
            v0, v1 = vals[i], vals[i + 1]
            w = 0.5 if v0 == v1 else v0 / (v0 - v1)
            guess = P[i] + w * (P[i + 1] - P[i])
            seg = np.linalg.norm(P[i + 1] - P[i])
            x, ok, _ = kernels.newton_point(
                msys.exps, msys.coeffs, msys.owner, msys.dexps, msys.dcoeffs, msys.downer,
                msys.nout, msys.maxdeg, target, guess, cfg.newton_tol, cfg.newton_max_iter, 2 * seg + 1e-12,
            )
            if not ok or np.linalg.norm(x) < R0:
                continue
            if any(np.linalg.norm(x - q) <= 1e-9 * max(1.0, np.linalg.norm(x)) for q in out):
                continue
            out.append(x)
            worst = min(worst, _crossing_angle(fmap, curve, x))
    return out, worst


def _components_of(fmap, t, x, snap, cfg) -> set | None:
    """Snapshot components lying on the fiber component through x.

    The component is followed from x until it enters the ball of radius
    snap.radius / 2; the entry points are located in the snapshot.  An empty
    set means it never enters; None means the trace failed.
    """
    if np.linalg.norm(x) <= 0.9 * snap.radius:
        j = locate_component(snap, x)
        return None if j is None else {j}
    big = cfg.with_radius(max(cfg.radius, 2.2 * float(np.linalg.norm(x))))
    big = replace(big, inner_radius=0.5 * snap.radius)
    comp = trace_curve(fmap.packed, np.atleast_1d(t), x, big)
    if not comp.complete:
        return None
    if comp.kind == CIRCLE:
        # a closed loop that is too small to resolve is numerical noise at a fold
        span = np.ptp(comp.points, axis=0).max()
        if len(comp.points) < 8 or span < 1e-6 * float(np.linalg.norm(x)):
            return None
    ids = set()
    for p, side in zip(comp.boundary_hits, comp.boundary_sides):
        if side != "inner":
            continue
        j = locate_component(snap, p)
        if j is None:
            return None
        ids.add(j)
    return ids


class _Groups:
    """Union-find over snapshot component ids (a fiber component can show up
    as several pieces when it leaves the snapshot ball and comes back)."""

    def __init__(self):
        self.parent = {}

    def find(self, j):
        self.parent.setdefault(j, j)
        while self.parent[j] != j:
            self.parent[j] = self.parent[self.parent[j]]
            j = self.parent[j]
        return j

    def union(self, ids):
        ids = list(ids)
        for j in ids[1:]:
            self.parent[self.find(j)] = self.find(ids[0])


def _stable_parity(seq, width: int = 3):
    valid = [v for v in seq if v is not None]
    if len(valid) >= width and len({v % 2 for v in valid[-width:]}) == 1:
        return valid[-1] % 2
    return None


def _track_sequences(fmap, params, counts, groups, cfg) -> dict:
    snaps = [sample_fiber(fmap, b, cfg)[0] for b in params]
    tracks = build_tracks(fmap, snaps, params, cfg)
    out = {}
    for q, tr in enumerate(tracks):
        seq = []
        for k, j in enumerate(tr):
            if counts[k] is None or j is None:
                seq.append(None)
            else:
                seq.append(counts[k].get(groups[k].find(j), 0))
        out[str(q)] = seq
    out["outside"] = [None if c is None else c.get(-1, 0) for c in counts]
    return out


def parity_test(fmap: PolynomialMap, a, c, approach: ApproachSpec | None, cfg: TraceConfig, tol: float = S_MATCH_TOL,
                max_extra: int = 4) -> ParityResult:
    """Parity of the escaping intersections of nearby fiber components with M_c.

    Only intersections outside the base ball on unbounded Milnor branches
    whose asymptotic value is a are counted; bounded intersections come in
    a parity that does not change as t -> a.  When the tail of the approach
    scales has not settled, up to ``max_extra`` further halvings are added.
    """
    _require_plane(fmap)
    a = float(np.atleast_1d(a)[0])
    c = tuple(float(v) for v in c)
    approach = approach or ApproachSpec.default(a, seed=cfg.random_seed)
    ms, est = _cached_estimate(fmap, c, cfg)
    if est is None:
        return ParityResult(c, False, INCONCLUSIVE, {}, {}, [f"degenerate Milnor set: {ms.note}"])
    if not est.contains(a, tol):
        return ParityResult(c, False, "typical", {}, {}, ["a is not an asymptotic value along M_c"])
    curve = ms.curve
    R0 = cfg.radius
    sc = approach.scales
    ratio = sc[-1] / sc[-2] if len(sc) > 1 else 0.5
    smin = sc[-1] * ratio**max_extra

    # walk each asymptotic end outward until f has settled within smin/4 of a
    polylines = []
    notes = []
    for e in est.ends:
        if e.limit is None or abs(e.limit - a) > tol:
            continue
        br = ms.branches[e.branch]
        x, prev = (br.points[0], br.points[1]) if e.end == 0 else (br.points[-1], br.points[-2])

        def settled(pts):
            return abs(float(fmap.packed.values(pts[-1])[0]) - a) < 0.25 * smin

        P, _, status = extend_branch(curve, x, prev, R0, R0 * 2.0**18, cfg, stop=settled)
        if not settled(P[-1:]):
            notes.append(f"branch {e.branch}/{e.end} did not settle ({status})")
        polylines.append(P)

    parities: dict[str, list] = {}
    stabilized: dict[str, object] = {}
    odd = False
    undecided = False
    for i, d in enumerate(approach.directions):
        scales = list(approach.scales)
        params = [approach.point(i, k) for k in range(len(scales))]
        counts = []  # per scale: {group root: count} or None when skipped
        groups = []
        k = 0
        while k < len(scales):
            b = params[k]
            snap = sample_fiber(fmap, b, cfg)[0]
            pts, angle = _escaping_points(fmap, curve, c, polylines, float(b[0]), R0, cfg)
            per, grp = None, _Groups()
            if angle < 1e-3:
                notes.append(f"direction {i} scale {k}: near-tangential intersection, skipped")
            else:
                hits = []
                for x in pts:
                    ids = _components_of(fmap, float(b[0]), x, snap, cfg)
                    if ids is None:
                        hits = None
                        notes.append(f"direction {i} scale {k}: intersection not attributed, skipped")
                        break
                    hits.append(ids)
                if hits is not None:
                    per = {}
                    for ids in hits:
                        if ids:
                            grp.union(ids)
                    for ids in hits:
                        root = grp.find(next(iter(ids))) if ids else -1
                        per[root] = per.get(root, 0) + 1
            counts.append(per)
            groups.append(grp)
            k += 1
            # keep halving past the approach scales until the tail parity settles
            if k == len(scales) and len(scales) < len(approach.scales) + max_extra:
                seqs = _track_sequences(fmap, params, counts, groups, cfg)
                if any(_stable_parity(q) is None for q in seqs.values()):
                    scales.append(scales[-1] * (scales[-1] / scales[-2]))
                    params.append(np.asarray(approach.target) + scales[-1] * np.asarray(d))
        seqs = _track_sequences(fmap, params, counts, groups, cfg)
        for name, seq in seqs.items():
            key = f"{i}:{name}"
            parities[key] = seq
            st = _stable_parity(seq)
            stabilized[key] = st
            if st is None:
                undecided = True
            elif st == 1:
                odd = True
    if odd:
        verdict = "bifurcation"
    elif undecided:
        verdict = INCONCLUSIVE
    else:
        verdict = "typical"
    return ParityResult(c, True, verdict, parities, stabilized, notes)
