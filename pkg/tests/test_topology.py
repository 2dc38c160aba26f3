from __future__ import annotations

import numpy as np
import pytest

from bifurcurve.topology import ClassificationError, classify, euler_via_sphere, fiber_topology, sample_fiber
from bifurcurve.tracer import ARC, CIRCLE, FiberComponent, TraceConfig

from conftest import DISK, F1, F3, G, LINES, SPACE, VANISH, plane, space


@pytest.mark.parametrize(
    "expr,t,key",
    [
        (F1, 0.5, (0, 2, 2, 0, 2)),
        (F1, -0.25, (0, 2, 2, 0, 2)),
        (F1, 0.0, (0, 3, 3, 0, 3)),
        (G, 0.3, (0, 1, 1, 0, 1)),
        (F3, 0.0, (0, 1, 1, 0, 1)),
        (F3, 0.45, (0, 1, 1, 0, 1)),
        (VANISH, 0.5, (0, 2, 2, 0, 2)),
        (VANISH, -0.5, (0, 0, 0, 0, 0)),
        (DISK, 1.0, (1, 0, 1, 1, 0)),
        (LINES, 0.7, (0, 1, 1, 0, 1)),
    ],
)
def test_fixture_invariants(cfg, expr, t, key):
    _, topo = fiber_topology(plane(expr), [t], cfg)
    assert topo.key() == key
    assert topo.consistent


def test_space_fiber_invariants(cfg):
    _, topo = fiber_topology(space(SPACE), [0.3, 0.0], cfg)
    assert topo.key() == (0, 3, 3, 0, 3)


def test_mu_values(cfg):
    assert fiber_topology(plane(DISK), [1.0], cfg)[1].mu == pytest.approx(1.0, abs=1e-8)
    assert fiber_topology(plane(LINES), [0.7], cfg)[1].mu == pytest.approx(0.7, abs=1e-8)
    assert np.isnan(fiber_topology(plane(VANISH), [-0.5], cfg)[1].mu)


def test_radius_escalation_when_fold_is_outside(cfg):
    # the fold of X_t sits near |y| = 1/(4t); at t = 2^-7 it is outside B_10
    _, topo = fiber_topology(plane(F1), [2.0**-7], cfg)
    assert topo.radius_used > cfg.radius
    assert topo.key() == (0, 2, 2, 0, 2)


def test_ladder_counts_even_and_stable(cfg):
    lad = euler_via_sphere(plane(F1), np.array([0.5]), cfg)
    assert lad.counts == [4, 4, 4, 4] and lad.stabilized and lad.chi == 2


def test_ladder_validation(cfg):
    with pytest.raises(ValueError):
        euler_via_sphere(plane(F1), np.array([0.5]), cfg, ladder=[10, 5, 20])
    with pytest.raises(ValueError):
        euler_via_sphere(plane(F1), np.array([0.5]), cfg, ladder=[10, 20])


def test_exterior_counts_intervals():
    cfg = TraceConfig(radius=10.0, inner_radius=5.0)
    _, topo = fiber_topology(plane(LINES), [0.0], cfg)
    assert topo.l == 2 and topo.chi == 2


def test_classify_rejects_bad_evidence():
    t = np.array([0.0])
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert classify(FiberComponent(t, pts, ARC, [pts[0], pts[1]], ["outer", "outer"])) == ARC
    with pytest.raises(ClassificationError):
        classify(FiberComponent(t, pts, CIRCLE, [pts[0]], ["outer"]))
    with pytest.raises(ClassificationError):
        classify(FiberComponent(t, pts, ARC, [], [], incomplete=True))


def test_sample_fiber_is_memoized(cfg):
    a = sample_fiber(plane(G), [0.1], cfg)
    b = sample_fiber(plane(G), np.array([0.1]), cfg)
    assert a is b
