"""Behaviour of fibers at infinity near a target value a.

Three phenomena are detected along finitely many geometric approach rays
b_k = a + s_k d:

* vanishing: some component of X_{b_k} runs off to infinity (mu(b_k) grows);
* splitting: a component of X_{b_k} converges to two or more components of X_a;
* circle breaking: a compact component converges to something non-compact.

A ``fail`` is a counterexample found along a ray; a ``pass`` only means none
was found on the sampled rays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .polymap import PolynomialMap
from .topology import FiberTopology, sample_fiber
from .tracer import ARC, CIRCLE, FiberComponent, FiberSnapshot, TraceConfig, _initial_tangent, _newton_batch

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ApproachSpec:
    target: tuple
    directions: tuple
    scales: tuple

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        if len(s) < 1 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise ValueError("scales must be positive and strictly decreasing")
        for d in self.directions:
            if len(d) != len(self.target) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
                raise ValueError("directions must be unit vectors in parameter space")

    @classmethod
    def default(cls, target, eps: float = 0.5, ratio: float = 0.5, count: int = 7, n_random: int = 4, seed: int = 0):
        a = tuple(float(v) for v in np.atleast_1d(target))
        p = len(a)
        dirs = []
        for i in range(p):
            for sgn in (1.0, -1.0):
                e = [0.0] * p
                e[i] = sgn
                dirs.append(tuple(e))
        rng = np.random.default_rng(seed)
        for _ in range(n_random):
            v = rng.standard_normal(p)
            v /= np.linalg.norm(v)
            dirs.append(tuple(float(x) for x in v))
        uniq = []
        for d in dirs:
            if not any(np.allclose(d, u, rtol=0, atol=1e-12) for u in uniq):
                uniq.append(d)
        scales = tuple(eps * ratio**k for k in range(count))
        return cls(a, tuple(uniq), scales)

    def point(self, i: int, k: int) -> np.ndarray:
        return np.asarray(self.target) + self.scales[k] * np.asarray(self.directions[i])


@dataclass
class ComponentMatching:
    base: FiberSnapshot
    other: FiberSnapshot
    assignment: dict
    is_bijection: bool
    unmatched_base: list
    unmatched_other: list
    newton_failures: list = field(default_factory=list)


@dataclass
class LimitSetEstimate:
    track: tuple
    receiving_base_components: tuple
    empty: bool
    ambiguous: bool = False
    unlocated: int = 0
    projected: int = 0


@dataclass
class InfinityVerdict:
    nv: str
    ns: str
    sns: str
    mu_series: dict
    witnesses: list
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.sns == PASS and self.ns != PASS:
            raise ValueError("sns cannot pass while ns does not")

    def to_dict(self) -> dict:
        return {
            "nv": self.nv,
            "ns": self.ns,
            "sns": self.sns,
            "witnesses": self.witnesses,
            "mu_series": self.mu_series,
            "notes": self.notes,
        }


# ---------------------------------------------------------------------------
# matching and limit sets


def match_components(fmap: PolynomialMap, base: FiberSnapshot, b, cfg: TraceConfig, other: FiberSnapshot | None = None) -> ComponentMatching:
    """Map each component of X_a to the component of X_b reached from its min-norm point.

    The correction moves orthogonally to the base tangent at the seed.
    """
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if other is None:
        other = sample_fiber(fmap, b, cfg)[0]
    s = fmap.packed
    assignment: dict[int, int] = {}
    unmatched, failures = [], []
    for j, comp in enumerate(base.components):
        z = np.asarray(comp.min_norm_point, dtype=np.float64)
        tau = _initial_tangent(s.jacobian(z))
        if not np.any(tau):
            unmatched.append(j)
            failures.append(j)
            continue
        x, ok = kernels.newton_hyperplane(
            s.exps, s.coeffs, s.owner, s.dexps, s.dcoeffs, s.downer, s.nout, s.maxdeg,
            b, z, tau, cfg.newton_tol, 2 * cfg.newton_max_iter,
        )
        if not ok:
            unmatched.append(j)
            failures.append(j)
            continue
        k = _locate(other, x)
        if k is None:
            unmatched.append(j)
        else:
            assignment[j] = k
    hit = set(assignment.values())
    unmatched_other = [k for k in range(len(other.components)) if k not in hit]
    bij = not unmatched and len(hit) == len(assignment) and not unmatched_other
    return ComponentMatching(base, other, assignment, bij, unmatched, unmatched_other, failures)


def _locate(snapshot: FiberSnapshot, x) -> int | None:
    x = np.asarray(x, dtype=np.float64)
    r = np.linalg.norm(x)
    if r > snapshot.radius or (snapshot.inner_radius > 0 and r < snapshot.inner_radius):
        return None
    hits = _locate_all(snapshot, x[None, :])[0]
    return hits[0] if len(hits) == 1 else None


def _locate_all(snapshot: FiberSnapshot, X: np.ndarray) -> list[list[int]]:
    """For each row of X, the components whose polyline passes within tolerance."""
    tol = 1e-6 * snapshot.radius
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = [[] for _ in range(len(X))]
    for j, c in enumerate(snapshot.components):
        e = kernels.polyline_excess(X, c.points, 0.06)
        for i in np.nonzero(e <= tol)[0]:
            out[i].append(j)
    return out


def limit_set(fmap: PolynomialMap, a, base: FiberSnapshot, component: FiberComponent, scale: float, cfg: TraceConfig,
              track=(), max_samples: int = 200) -> LimitSetEstimate:
    """Which components of X_a the given nearby component accumulates on.

    Points of the component inside the base ball are projected onto X_a by
    Gauss-Newton with displacement at most sqrt(scale).
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    P = component.points
    nr = np.linalg.norm(P, axis=1)
    keep = nr <= cfg.radius
    if cfg.inner_radius > 0:
        keep &= nr >= cfg.inner_radius
    P = P[keep]
    if len(P) > max_samples:
        P = P[np.linspace(0, len(P) - 1, max_samples).round().astype(int)]
    if len(P) == 0 or not base.components:
        return LimitSetEstimate(tuple(track), (), True)
    X, ok = _newton_batch(fmap.packed, a, P, cfg.newton_tol, cfg.newton_max_iter, math.sqrt(scale))
    X = X[ok]
    if cfg.inner_radius > 0:
        # projections that slipped into the removed ball are not on the restricted fiber
        X = X[np.linalg.norm(X, axis=1) >= cfg.inner_radius]
    receiving: set[int] = set()
    ambiguous = False
    unlocated = 0
    for hits in _locate_all(base, X):
        if len(hits) == 1:
            receiving.add(hits[0])
        elif len(hits) > 1:
            ambiguous = True
        else:
            unlocated += 1
    rec = tuple(sorted(receiving))
    return LimitSetEstimate(tuple(track), rec, not rec, ambiguous, unlocated, int(len(X)))


def build_tracks(fmap: PolynomialMap, snaps: list[FiberSnapshot], params: list, cfg: TraceConfig) -> list[list]:
    """Follow each component at the smallest scale up through larger scales.

    ``snaps[k]`` is the fiber at ``params[k]``, ordered by decreasing scale.
    Each track lists the component index per scale (None once lost).
    """
    K = len(snaps)
    tracks = [[None] * (K - 1) + [j] for j in range(len(snaps[-1].components))]
    for k in range(K - 2, -1, -1):
        m = match_components(fmap, snaps[k + 1], params[k], cfg, other=snaps[k])
        for tr in tracks:
            prev = tr[k + 1]
            tr[k] = None if prev is None else m.assignment.get(prev)
    return tracks


# ---------------------------------------------------------------------------
# detectors


@dataclass
class _Ray:
    direction: tuple
    params: list
    snaps: list
    topos: list

    @property
    def reliable(self) -> bool:
        return all(t.reliable for t in self.topos)


@dataclass
class _Samples:
    a: np.ndarray
    base: FiberSnapshot
    base_topo: FiberTopology
    rays: list


def collect_samples(fmap: PolynomialMap, approach: ApproachSpec, cfg: TraceConfig) -> _Samples:
    a = np.asarray(approach.target, dtype=np.float64)
    base, btopo = sample_fiber(fmap, a, cfg)
    rays = []
    for i, d in enumerate(approach.directions):
        params, snaps, topos = [], [], []
        for k in range(len(approach.scales)):
            b = approach.point(i, k)
            s, tp = sample_fiber(fmap, b, cfg)
            params.append(b)
            snaps.append(s)
            topos.append(tp)
        rays.append(_Ray(tuple(d), params, snaps, topos))
    return _Samples(a, base, btopo, rays)


def _mu_verdict(samples: _Samples, approach: ApproachSpec, cfg: TraceConfig):
    # distances are measured past the inner sphere in exterior mode
    lo = cfg.inner_radius
    R = cfg.radius - lo
    series = {}
    any_fail = False
    all_bounded = True
    reliable = samples.base_topo.reliable
    witnesses = []
    for i, ray in enumerate(samples.rays):
        mus = [tp.mu for tp in ray.topos]
        series[str(i)] = mus
        reliable &= ray.reliable
        finite = [m for m in mus if not math.isnan(m)]
        if any(m - lo > R / 4 for m in finite):
            all_bounded = False
        tail = mus[-4:]
        if len(tail) == 4 and all(not math.isnan(m) for m in tail):
            if tail[-1] - lo > R / 2 and all(y > x for x, y in zip(tail, tail[1:])):
                any_fail = True
                witnesses.append({
                    "kind": "vanishing",
                    "direction": list(ray.direction),
                    "scales": list(approach.scales[-4:]),
                    "mu": tail,
                })
    if any_fail:
        return FAIL, series, witnesses
    if all_bounded and reliable:
        return PASS, series, witnesses
    return INCONCLUSIVE, series, witnesses


def _tail_indices(approach: ApproachSpec, tail: int | None) -> range:
    K = len(approach.scales)
    if tail is None:
        return range(K)
    return range(max(0, K - tail), K)


def _split_verdict(fmap, samples: _Samples, approach: ApproachSpec, cfg: TraceConfig, tail: int):
    """Returns (verdict, witnesses, per-ray limit sets, notes).

    Splitting is looked for at every scale, since with a finite working
    radius it is often only visible at the larger ones; a pass needs clean
    evidence on the last ``tail`` scales.
    """
    witnesses, notes = [], []
    limits = []
    if not samples.base_topo.reliable:
        return INCONCLUSIVE, witnesses, limits, ["base fiber not reliable"]
    split = False
    undecided = False
    tail_k = set(_tail_indices(approach, tail))
    for i, ray in enumerate(samples.rays):
        ray_limits = {}
        for k in range(len(approach.scales)):
            snap, topo = ray.snaps[k], ray.topos[k]
            strict = k in tail_k
            if not topo.reliable:
                if strict:
                    undecided = True
                    notes.append(f"direction {i} scale {k}: unreliable fiber")
                continue
            if strict:
                m = match_components(fmap, samples.base, ray.params[k], cfg, other=snap)
                if not m.is_bijection:
                    undecided = True
            for j, comp in enumerate(snap.components):
                ls = limit_set(fmap, samples.a, samples.base, comp, approach.scales[k], cfg, track=(i, k, j))
                ray_limits[(k, j)] = ls
                if len(ls.receiving_base_components) >= 2:
                    split = True
                    witnesses.append({
                        "kind": "splitting",
                        "direction": list(ray.direction),
                        "scale": approach.scales[k],
                        "parameter": ray.params[k].tolist(),
                        "component": j,
                        "receiving": list(ls.receiving_base_components),
                    })
                elif strict and (ls.ambiguous or ls.unlocated):
                    undecided = True
        limits.append(ray_limits)
    if split:
        return FAIL, witnesses, limits, notes
    if undecided:
        return INCONCLUSIVE, witnesses, limits, notes
    return PASS, witnesses, limits, notes


def _circle_verdict(fmap, samples: _Samples, approach: ApproachSpec, cfg: TraceConfig, limits, tail: int):
    """Circle-breaking checks on top of the splitting verdict."""
    witnesses = []
    broken = False
    base = samples.base
    for i, ray in enumerate(samples.rays):
        for (k, j), ls in limits[i].items():
            comp = ray.snaps[k].components[j]
            if comp.kind != CIRCLE:
                continue
            kinds = {base.components[r].kind for r in ls.receiving_base_components}
            if ARC in kinds:
                broken = True
                witnesses.append({
                    "kind": "circle_breaking",
                    "direction": list(ray.direction),
                    "scale": approach.scales[k],
                    "component": j,
                    "receiving": list(ls.receiving_base_components),
                })
        last = ray.snaps[-1]
        if not any(c.kind == CIRCLE for c in last.components) or len(ray.snaps) < 3:
            continue
        tracks = build_tracks(fmap, ray.snaps, ray.params, cfg)
        for tr in tracks:
            if ray.snaps[-1].components[tr[-1]].kind != CIRCLE:
                continue
            ids = tr[-3:]
            if any(x is None for x in ids):
                continue
            diam = [ray.snaps[len(tr) - 3 + q].components[ids[q]].diameter() for q in range(3)]
            if diam[-1] > cfg.radius / 2 and all(y > 2 * x for x, y in zip(diam, diam[1:])):
                broken = True
                witnesses.append({
                    "kind": "circle_growth",
                    "direction": list(ray.direction),
                    "diameters": diam,
                })
    return broken, witnesses


def analyze_infinity(fmap: PolynomialMap, approach: ApproachSpec, cfg: TraceConfig, tail: int = 4) -> InfinityVerdict:
    samples = collect_samples(fmap, approach, cfg)
    nv, series, w_nv = _mu_verdict(samples, approach, cfg)
    ns, w_ns, limits, notes = _split_verdict(fmap, samples, approach, cfg, tail)
    if ns == FAIL:
        sns = FAIL
        w_sns = []
    else:
        broken, w_sns = _circle_verdict(fmap, samples, approach, cfg, limits, tail) if limits else (False, [])
        sns = FAIL if broken else ns
    return InfinityVerdict(nv, ns, sns, series, w_nv + w_ns + w_sns, notes)


def detect_vanishing(fmap: PolynomialMap, a, approach: ApproachSpec | None, cfg: TraceConfig):
    approach = approach or ApproachSpec.default(a, seed=cfg.random_seed)
    samples = collect_samples(fmap, approach, cfg)
    verdict, series, _ = _mu_verdict(samples, approach, cfg)
    return verdict, series


def detect_splitting(fmap: PolynomialMap, a, approach: ApproachSpec | None, cfg: TraceConfig, tail: int = 4):
    approach = approach or ApproachSpec.default(a, seed=cfg.random_seed)
    samples = collect_samples(fmap, approach, cfg)
    verdict, witnesses, _, _ = _split_verdict(fmap, samples, approach, cfg, tail)
    return verdict, witnesses


def detect_strong_splitting(fmap: PolynomialMap, a, approach: ApproachSpec | None, cfg: TraceConfig, tail: int = 4) -> str:
    approach = approach or ApproachSpec.default(a, seed=cfg.random_seed)
    return analyze_infinity(fmap, approach, cfg, tail).sns
