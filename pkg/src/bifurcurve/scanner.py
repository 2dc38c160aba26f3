"""Classification of target values and region sweeps for the bifurcation set."""
from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .asymptotics import FAIL, INCONCLUSIVE, PASS, ApproachSpec, InfinityVerdict, analyze_infinity, collect_samples
from .polymap import PolynomialMap
from .topology import sample_fiber
from .tracer import TraceConfig, sphere_crossings

TYPICAL = "typical"
CANDIDATE = "bifurcation_candidate"
CRITICAL = "critical_or_boundary"
CLASS_INCONCLUSIVE = "inconclusive"

# route conclusions
BIFURCATION = "bifurcation"
NOT_APPLICABLE = "not_applicable"

SIGMA_CRITICAL = 1e-6


@dataclass(frozen=True)
class ScanRegion:
    box: tuple  # ((lo, hi), ...) one interval per parameter axis
    grid: tuple  # samples per axis
    refine_depth: int = 3

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        grid = tuple(int(g) for g in np.broadcast_to(np.asarray(self.grid), (len(box),)))
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "grid", grid)
        if not box:
            raise ValueError("region needs at least one axis")
        if any(not hi > lo for lo, hi in box):
            raise ValueError("box must be nondegenerate on every axis")
        if any(g < 3 for g in grid):
            raise ValueError("grid needs at least 3 samples per axis")
        if self.refine_depth < 0:
            raise ValueError("refine_depth must be non-negative")

    @property
    def dim(self) -> int:
        return len(self.box)

    def finest_step(self) -> np.ndarray:
        """Node spacing on each axis after full refinement."""
        return np.array([(hi - lo) / ((g - 1) * 2**self.refine_depth) for (lo, hi), g in zip(self.box, self.grid)])

    def coords(self, idx) -> np.ndarray:
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        full = np.array([(g - 1) * 2**self.refine_depth for g in self.grid])
        # exact endpoints instead of lo + idx * step, so nodes on the box edge match it bit for bit
        return lo + (hi - lo) * (np.asarray(idx) / full)

    def to_dict(self) -> dict:
        return {"box": [list(b) for b in self.box], "grid": list(self.grid), "refine_depth": self.refine_depth}


@dataclass
class Verdict:
    value: list
    classification: str
    evidence: dict
    consistent: bool
    invariants: dict
    witnesses: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    min_sigma: float = math.inf

    def route_conclusions(self) -> dict:
        return {k: v["conclusion"] for k, v in self.evidence.items()}

    def to_dict(self) -> dict:
        return {
            "value": list(self.value),
            "classification": self.classification,
            "evidence": self.evidence,
            "consistent": self.consistent,
            "invariants": self.invariants,
            "witnesses": self.witnesses,
            "notes": self.notes,
            "min_sigma": self.min_sigma,
        }


@dataclass
class ScanReport:
    region: ScanRegion
    samples: list[Verdict]
    candidate_set: list
    excluded_critical: list
    inconclusive_cells: list
    stats: dict
    exterior_radius: float | None = None
    runtime: float = 0.0

    def to_dict(self) -> dict:
        # wall-clock time is left out so that reports are reproducible byte for byte
        return {
            "region": self.region.to_dict(),
            "exterior_radius": self.exterior_radius,
            "candidate_set": self.candidate_set,
            "excluded_critical": self.excluded_critical,
            "inconclusive_cells": self.inconclusive_cells,
            "stats": self.stats,
            "samples": [v.to_dict() for v in self.samples],
        }


# ---------------------------------------------------------------------------
# single value


def exterior_config(cfg: TraceConfig, R0: float) -> TraceConfig:
    """Tracing setup for the restriction of F to the outside of the ball of radius R0."""
    if R0 <= 0:
        raise ValueError("exterior radius must be positive")
    big = cfg if cfg.radius >= 2.0 * R0 else cfg.with_radius(2.0 * R0)
    return replace(big, inner_radius=float(R0))


def _combine(*parts: str) -> str:
    if any(p == FAIL for p in parts):
        return BIFURCATION
    if all(p == PASS for p in parts):
        return TYPICAL
    return INCONCLUSIVE


def _constancy(base, topos, key) -> str:
    """pass: every sample agrees with the base; fail: a trusted sample differs."""
    trusted = [t for t in topos if t.consistent]
    ref = key(base)
    if base.consistent and any(key(t) != ref for t in trusted):
        return FAIL
    if base.consistent and len(trusted) == len(topos) and all(key(t) == ref for t in trusted):
        return PASS
    return INCONCLUSIVE


def _parity_route(fmap, a, approach, cfg) -> tuple[dict, list]:
    from .milnor import choose_center, parity_test

    c = choose_center(fmap, cfg)
    if c is None:
        return {"conclusion": INCONCLUSIVE, "center": None, "in_s_c": None, "stabilized": {}}, ["no usable Milnor centre"]
    res = parity_test(fmap, a, c, approach, cfg)
    ev = {
        "conclusion": res.verdict,
        "center": list(res.center),
        "in_s_c": res.in_s_c,
        "stabilized": res.stabilized,
    }
    return ev, list(res.notes)


def default_approach(a, eps: float, seed: int) -> ApproachSpec:
    # axis directions only; random ones add cost without new information on a grid
    return ApproachSpec.default(a, eps=eps, n_random=0, seed=seed)


def classify_value(fmap: PolynomialMap, a, cfg: TraceConfig, exterior_radius: float | None = None,
                   approach: ApproachSpec | None = None, eps: float = 0.5, parity: bool = True) -> Verdict:
    """Classify the target value a from fiber invariants and behaviour at infinity.

    Four routes are evaluated: chi-constancy with non-vanishing, Betti
    constancy with non-splitting, strong non-splitting with non-vanishing and,
    for plane curves, the Milnor-set parity.  Any route that fails makes a a
    bifurcation candidate; a typical verdict needs a passing route and no
    failing one.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if len(a) != fmap.target_dim:
        raise ValueError(f"value has {len(a)} coordinates, map has {fmap.target_dim} components")
    if exterior_radius is not None:
        cfg = exterior_config(cfg, exterior_radius)
    approach = approach or default_approach(a, eps, cfg.random_seed)
    notes: list = []

    samples = collect_samples(fmap, approach, cfg)
    base = samples.base_topo
    topos = [tp for ray in samples.rays for tp in ray.topos]
    snaps = [samples.base] + [s for ray in samples.rays for s in ray.snaps]
    min_sigma = float(min(s.min_sigma for s in snaps))

    inv = {
        "s": base.s, "l": base.l, "b0": base.b0, "b1": base.b1, "chi": base.chi,
        "mu": base.mu, "stabilized": base.stabilized, "crossing_counts": list(base.crossing_counts),
    }

    critical = []
    if min_sigma < SIGMA_CRITICAL:
        critical.append(f"Jacobian min singular value {min_sigma:.3g} on a traced fiber")
    empty = [tp.empty for tp in topos]
    if base.empty and not all(empty):
        critical.append("fiber over a is empty while nearby fibers are not (boundary of the image)")
    if exterior_radius is not None and sphere_crossings(fmap, a, exterior_radius, cfg).degenerate:
        notes.append("fiber is not transversal to the inner sphere")

    tainted = [s for s in snaps if not s.reliable]
    if tainted:
        notes.append(f"{len(tainted)} tainted fiber snapshot(s)")

    chi_c = _constancy(base, topos, lambda t: t.chi)
    betti_c = _constancy(base, topos, lambda t: (t.b0, t.b1))
    inf: InfinityVerdict = analyze_infinity(fmap, approach, cfg)
    evidence = {
        "route_ab": {"chi_constant": chi_c, "nv": inf.nv, "conclusion": _combine(chi_c, inf.nv)},
        "route_abprime": {"betti_constant": betti_c, "ns": inf.ns, "conclusion": _combine(betti_c, inf.ns)},
        "route_cor": {"sns": inf.sns, "nv": inf.nv, "conclusion": _combine(inf.sns, inf.nv)},
    }
    notes.extend(inf.notes)
    if fmap.domain_dim == 2:
        if exterior_radius is not None:
            evidence["route_parity"] = {"conclusion": NOT_APPLICABLE}
        elif not parity or critical:
            evidence["route_parity"] = {"conclusion": INCONCLUSIVE}
        else:
            ev, pnotes = _parity_route(fmap, float(a[0]), approach, cfg)
            evidence["route_parity"] = ev
            notes.extend(pnotes)

    concl = [ev["conclusion"] for ev in evidence.values() if ev["conclusion"] in (TYPICAL, BIFURCATION)]
    consistent = len(set(concl)) <= 1
    if critical:
        cls = CRITICAL
        notes.extend(critical)
    elif tainted or any(n.startswith("fiber is not transversal") for n in notes):
        cls = CLASS_INCONCLUSIVE
    elif BIFURCATION in concl:
        cls = CANDIDATE
    elif TYPICAL in concl:
        cls = TYPICAL
    else:
        cls = CLASS_INCONCLUSIVE
    if all(empty) and base.empty and not tainted and not critical:
        # outside the image: the empty fibration is trivial
        cls = TYPICAL
    return Verdict(
        value=[float(v) for v in a],
        classification=cls,
        evidence=evidence,
        consistent=consistent,
        invariants=inv,
        witnesses=inf.witnesses,
        notes=notes,
        min_sigma=min_sigma,
    )


# ---------------------------------------------------------------------------
# region sweep


def _classify_node(args):
    fmap, a, cfg, R0, eps, parity = args
    return classify_value(fmap, a, cfg, exterior_radius=R0, eps=eps, parity=parity)


def _run_nodes(fmap, region, nodes, cfg, R0, parity, jobs):
    tasks = [(fmap, region.coords(idx), cfg, R0, eps, parity) for idx, eps in nodes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_classify_node, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [_classify_node(t) for t in tasks]


def _corners(origin, size):
    p = len(origin)
    for e in itertools.product((0, 1), repeat=p):
        yield tuple(o + size * k for o, k in zip(origin, e))


def _cell_box(region: ScanRegion, origin, size) -> list:
    lo = region.coords(origin)
    hi = region.coords(tuple(o + size for o in origin))
    return [[float(x), float(y)] for x, y in zip(lo, hi)]


def _merge_intervals(boxes: list) -> list:
    out: list = []
    for lo, hi in sorted(b[0] for b in boxes):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def scan(fmap: PolynomialMap, region: ScanRegion, cfg: TraceConfig, exterior_radius: float | None = None,
         jobs: int = 1, parity: bool = True) -> ScanReport:
    """Classify every grid node, bisect cells around non-typical nodes and collect candidate cells.

    Nodes live on the integer lattice of the finest refinement level, so a
    node shared by several cells is classified once.  A node first created
    with spacing h is probed at distances up to 0.4 h.
    """
    if region.dim != fmap.target_dim:
        raise ValueError("region dimension must match the number of map components")
    start = time.perf_counter()
    D = 2**region.refine_depth
    step = np.array([(hi - lo) / (g - 1) for (lo, hi), g in zip(region.box, region.grid)])
    verdicts: dict[tuple, Verdict] = {}

    def classify_new(cells):
        new = {}
        for origin, size in cells:
            h = float(np.min(step)) * size / D
            for idx in _corners(origin, size):
                if idx not in verdicts and idx not in new:
                    new[idx] = min(0.5, 0.4 * h)
        order = sorted(new)
        for idx, v in zip(order, _run_nodes(fmap, region, [(i, new[i]) for i in order], cfg, exterior_radius, parity, jobs)):
            verdicts[idx] = v

    leaves = [(tuple(D * k for k in i), D) for i in itertools.product(*[range(g - 1) for g in region.grid])]
    classify_new(leaves)
    rounds = []
    for _ in range(region.refine_depth):
        flagged = [c for c in leaves if any(verdicts[k].classification != TYPICAL for k in _corners(*c))]
        rounds.append(len(flagged))
        if not flagged:
            break
        flagged_set = set(flagged)
        children = []
        for origin, size in flagged:
            half = size // 2
            for e in itertools.product((0, 1), repeat=region.dim):
                children.append((tuple(o + half * k for o, k in zip(origin, e)), half))
        classify_new(children)
        leaves = sorted([c for c in leaves if c not in flagged_set] + children)

    def cells_with(cls):
        return [c for c in leaves if any(verdicts[k].classification == cls for k in _corners(*c))]

    cand = [_cell_box(region, *c) for c in cells_with(CANDIDATE)]
    crit = [_cell_box(region, *c) for c in cells_with(CRITICAL)]
    incl = [_cell_box(region, *c) for c in cells_with(CLASS_INCONCLUSIVE)]
    if region.dim == 1:
        cand = _merge_intervals(cand)
        crit = _merge_intervals(crit)
        incl = _merge_intervals(incl)
    order = sorted(verdicts)
    samples = [verdicts[k] for k in order]
    counts = {c: sum(v.classification == c for v in samples) for c in (TYPICAL, CANDIDATE, CRITICAL, CLASS_INCONCLUSIVE)}
    stats = {
        "nodes": len(samples),
        "leaf_cells": len(leaves),
        "refined_cells_per_round": rounds,
        "classification_counts": counts,
        "inconsistent_nodes": sum(not v.consistent for v in samples),
    }
    return ScanReport(region, samples, cand, crit, incl, stats, exterior_radius, time.perf_counter() - start)


def exterior_scan(fmap: PolynomialMap, region: ScanRegion, R0: float, cfg: TraceConfig, jobs: int = 1) -> ScanReport:
    return scan(fmap, region, cfg, exterior_radius=R0, jobs=jobs)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))
