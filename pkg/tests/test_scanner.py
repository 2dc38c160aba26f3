from __future__ import annotations

import numpy as np
import pytest

from bifurcurve import milnor, topology
from bifurcurve.report import dumps
from bifurcurve.scanner import (
    CANDIDATE,
    CRITICAL,
    NOT_APPLICABLE,
    TYPICAL,
    ScanRegion,
    classify_value,
    exterior_config,
    exterior_scan,
    scan,
)
from bifurcurve.tracer import TraceConfig

from conftest import DISK, F1, G, LINES, plane

KEY = ("s", "l", "b0", "b1", "chi")


@pytest.mark.parametrize(
    "expr,a,cls",
    [
        (F1, 0.0, CANDIDATE),
        (F1, 0.5, TYPICAL),
        (G, 0.0, TYPICAL),
        (DISK, 1.0, TYPICAL),
        (DISK, -1.0, TYPICAL),  # outside the image
        (DISK, 0.0, CRITICAL),
    ],
)
def test_classify_value(cfg, expr, a, cls):
    v = classify_value(plane(expr), a, cfg, eps=0.25)
    assert v.classification == cls
    assert v.consistent


def test_classify_value_checks_dimension(cfg):
    with pytest.raises(ValueError):
        classify_value(plane(F1), [0.0, 1.0], cfg)


@pytest.mark.parametrize(
    "kw",
    [
        {"box": [], "grid": 3},
        {"box": [(1, 1)], "grid": 3},
        {"box": [(0, 1)], "grid": 2},
        {"box": [(0, 1)], "grid": 5, "refine_depth": -1},
    ],
)
def test_region_validation(kw):
    with pytest.raises(ValueError):
        ScanRegion(**kw)


def test_region_geometry():
    r = ScanRegion([(-1, 1), (0, 2)], 5, 2)
    assert r.grid == (5, 5) and r.dim == 2
    np.testing.assert_allclose(r.finest_step(), [0.125, 0.125])
    np.testing.assert_array_equal(r.coords([16, 16]), [1.0, 2.0])


def test_refinement_shrinks_candidate_set(cfg):
    f = plane(F1)
    prev = None
    for depth in range(3):
        cs = scan(f, ScanRegion([(-1, 1)], 9, depth), cfg).candidate_set
        assert len(cs) == 1 and cs[0][0] < 0.0 < cs[0][1]
        if prev is not None:
            assert prev[0] <= cs[0][0] and cs[0][1] <= prev[1]
            assert cs[0][1] - cs[0][0] == pytest.approx((prev[1] - prev[0]) / 2)
        prev = cs[0]


def test_invariants_constant_between_typical_neighbours(cfg):
    rep = scan(plane(F1), ScanRegion([(-1, 1)], 9, 1), cfg)
    nodes = sorted(rep.samples, key=lambda v: v.value[0])
    pairs = 0
    for u, v in zip(nodes, nodes[1:]):
        if u.classification == v.classification == TYPICAL:
            pairs += 1
            assert [u.invariants[k] for k in KEY] == [v.invariants[k] for k in KEY]
    assert pairs > 0


def test_parallel_scan_matches_serial(cfg):
    region = ScanRegion([(-1, 1)], 9, 1)
    serial = scan(plane(F1), region, cfg, jobs=1)
    topology._cached_fiber.cache_clear()
    milnor._cached_estimate.cache_clear()
    parallel = scan(plane(F1), region, cfg, jobs=2)
    assert dumps(serial.to_dict()) == dumps(parallel.to_dict())


def test_exterior_config():
    c = exterior_config(TraceConfig(radius=10.0), 8.0)
    assert c.radius == 16.0 and c.inner_radius == 8.0
    with pytest.raises(ValueError):
        exterior_config(TraceConfig(), 0.0)


@pytest.mark.parametrize("expr,box,arcs", [(G, (-1, 1), 2), (LINES, (-1, 1), 2)])
def test_exterior_scan_typical(cfg, expr, box, arcs):
    rep = exterior_scan(plane(expr), ScanRegion([box], 9, 1), 5.0, cfg)
    assert rep.candidate_set == []
    assert rep.exterior_radius == 5.0
    for v in rep.samples:
        assert v.classification == TYPICAL
        assert v.invariants["l"] == arcs
        assert v.route_conclusions()["route_parity"] == NOT_APPLICABLE


def test_exterior_scan_finds_f1_value(cfg):
    rep = exterior_scan(plane(F1), ScanRegion([(-0.5, 0.5)], 9, 1), 5.0, cfg)
    assert len(rep.candidate_set) == 1
    lo, hi = rep.candidate_set[0]
    assert lo < 0.0 < hi
