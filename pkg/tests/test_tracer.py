from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bifurcurve.tracer import (
    ARC,
    CIRCLE,
    TraceConfig,
    dedupe_points,
    enumerate_fiber,
    locate_component,
    newton_to_fiber,
    sphere_crossings,
    trace_component,
)

from conftest import DISK, F1, LINES, SPACE, plane, space


def test_config_defaults_scale_with_radius():
    a, b = TraceConfig(radius=10.0), TraceConfig(radius=20.0)
    assert b.step_max == pytest.approx(2 * a.step_max)
    c = a.with_radius(20.0)
    assert c.step_min == pytest.approx(b.step_min) and c.dedup_tol == pytest.approx(b.dedup_tol)


@pytest.mark.parametrize("kw", [{"radius": -1}, {"inner_radius": 10.0}, {"step_init": 1.0, "step_max": 0.1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TraceConfig(**kw)


def test_circle_fiber(cfg):
    snap = enumerate_fiber(plane(DISK), [4.0], cfg)
    assert [c.kind for c in snap.components] == [CIRCLE]
    c = snap.components[0]
    assert c.boundary_hits == []
    np.testing.assert_allclose(np.linalg.norm(c.points, axis=1), 2.0, atol=1e-8)
    assert c.min_norm == pytest.approx(2.0, abs=1e-8)


def test_line_fiber_hits_sphere_twice(cfg):
    snap = enumerate_fiber(plane(LINES), [0.3], cfg)
    assert [c.kind for c in snap.components] == [ARC]
    hits = np.array(snap.components[0].boundary_hits)
    np.testing.assert_allclose(np.linalg.norm(hits, axis=1), 10.0, rtol=1e-10)
    np.testing.assert_allclose(hits[:, 0], 0.3, atol=1e-9)
    assert snap.components[0].min_norm == pytest.approx(0.3, abs=1e-8)


def test_traced_points_lie_on_fiber(cfg):
    f = plane(F1)
    snap = enumerate_fiber(f, [0.25], cfg)
    for c in snap.components:
        r = f.packed.values_batch(c.points)[:, 0] - 0.25
        assert np.max(np.abs(r)) < 1e-8


def test_f1_fiber_components(cfg):
    assert len(enumerate_fiber(plane(F1), [0.5], cfg).components) == 2
    assert len(enumerate_fiber(plane(F1), [0.0], cfg).components) == 3


def test_enumeration_is_deterministic(cfg):
    a = enumerate_fiber(plane(F1), [0.3], cfg)
    b = enumerate_fiber(plane(F1), [0.3], cfg)
    assert len(a.components) == len(b.components)
    for p, q in zip(a.components, b.components):
        assert np.array_equal(p.points, q.points)


def test_space_curve_fiber(cfg):
    snap = enumerate_fiber(space(SPACE), [0.2, 0.5], cfg)
    assert len(snap.components) == 2
    for c in snap.components:
        np.testing.assert_allclose(c.points[:, 2], 0.2, atol=1e-8)


def test_exterior_mode_splits_at_inner_sphere():
    cfg = TraceConfig(radius=10.0, inner_radius=5.0)
    snap = enumerate_fiber(plane(LINES), [0.0], cfg)
    # the line x = 0 minus a disk: two intervals, each from the inner to the outer sphere
    assert len(snap.components) == 2
    for c in snap.components:
        assert sorted(c.boundary_sides) == ["inner", "outer"]


def test_sphere_crossings(cfg):
    sc = sphere_crossings(plane(F1), [0.5], 10.0, cfg)
    assert sc.count == 4 and not sc.degenerate
    sc = sphere_crossings(space(SPACE), [0.3, 0.5], 10.0, cfg)
    assert sc.count == 4


def test_newton_and_locate(cfg):
    f = plane(F1)
    snap = enumerate_fiber(f, [0.5], cfg)
    x, ok = newton_to_fiber(f, [0.5], np.array([0.4, 0.5]), cfg)[:2]
    assert ok
    assert locate_component(snap, x) is not None
    assert locate_component(snap, np.array([5.0, 5.0])) is None


def test_trace_component_from_seed(cfg):
    f = plane(DISK)
    comp = trace_component(f, [1.0], np.array([1.0, 0.0]), cfg)
    assert comp.kind == CIRCLE and comp.complete


def test_dedupe_points():
    P = np.array([[0.0, 0.0], [1e-9, 0.0], [1.0, 1.0], [1.0, 1.0 + 1e-9]])
    assert len(dedupe_points(P, 1e-6)) == 2


def test_numpy_fallback_agrees_with_compiled(cfg):
    code = (
        "import json\n"
        "from bifurcurve._accel import backend\n"
        "from bifurcurve.polymap import parse_map\n"
        "from bifurcurve.tracer import TraceConfig\n"
        "from bifurcurve.topology import fiber_topology\n"
        "f = parse_map('x + x^2*y', ['x', 'y'])\n"
        "_, t = fiber_topology(f, [0.5], TraceConfig())\n"
        "print(json.dumps([backend(), t.s, t.l, t.chi, t.crossing_counts, round(t.mu, 8)]))\n"
    )
    env = dict(os.environ, BIFURCURVE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, s, l, chi, counts, mu = json.loads(out.stdout)
    assert backend == "numpy"
    from bifurcurve.topology import fiber_topology

    _, t = fiber_topology(plane(F1), [0.5], cfg)
    assert (s, l, chi, counts) == (t.s, t.l, t.chi, t.crossing_counts)
    assert mu == pytest.approx(t.mu, abs=1e-7)
