from __future__ import annotations

import numpy as np
import pytest

from bifurcurve.asymptotics import (
    FAIL,
    PASS,
    ApproachSpec,
    InfinityVerdict,
    analyze_infinity,
    build_tracks,
    detect_splitting,
    detect_strong_splitting,
    detect_vanishing,
    match_components,
)
from bifurcurve.topology import sample_fiber

from conftest import DISK, F1, F3, G, LINES, VANISH, plane


def test_default_approach():
    spec = ApproachSpec.default(0.0, eps=0.5)
    assert spec.directions == ((1.0,), (-1.0,))
    assert spec.scales[0] == 0.5 and spec.scales[-1] == pytest.approx(0.5 / 64)
    np.testing.assert_allclose(spec.point(1, 1), [-0.25])
    two = ApproachSpec.default((0.0, 0.0), n_random=2, seed=1)
    assert len(two.directions) == 6


@pytest.mark.parametrize(
    "kw",
    [
        {"scales": (0.1, 0.2)},
        {"scales": (0.1, -0.05)},
        {"directions": ((2.0,),)},
    ],
)
def test_approach_validation(kw):
    base = {"target": (0.0,), "directions": ((1.0,),), "scales": (0.2, 0.1)}
    with pytest.raises(ValueError):
        ApproachSpec(**{**base, **kw})


def test_sns_pass_requires_ns_pass():
    with pytest.raises(ValueError):
        InfinityVerdict(PASS, FAIL, PASS, {}, [])


def test_f1_splitting_at_zero(cfg):
    v = analyze_infinity(plane(F1), ApproachSpec.default(0.0), cfg)
    assert (v.nv, v.ns, v.sns) == (PASS, FAIL, FAIL)
    split = [w for w in v.witnesses if w["kind"] == "splitting"]
    assert split and all(len(w["receiving"]) == 2 for w in split)


@pytest.mark.parametrize("expr,a,eps", [(F1, 0.5, 0.25), (G, 0.0, 0.5), (DISK, 1.0, 0.5), (LINES, 0.0, 0.5), (F3, 0.0, 0.5)])
def test_typical_values_pass(cfg, expr, a, eps):
    spec = ApproachSpec.default(a, eps=eps)
    v = analyze_infinity(plane(expr), spec, cfg)
    assert (v.nv, v.ns, v.sns) == (PASS, PASS, PASS)


def test_vanishing_cycle_detected(cfg):
    spec = ApproachSpec((0.0,), ((1.0,),), tuple(0.5 * 0.5**k for k in range(7)))
    verdict, series = detect_vanishing(plane(VANISH), 0.0, spec, cfg)
    assert verdict == FAIL
    mu = series["0"]
    assert all(b > a for a, b in zip(mu, mu[1:]))


def test_detectors_agree_with_combined_analysis(cfg):
    f = plane(F1)
    spec = ApproachSpec.default(0.0)
    assert detect_splitting(f, 0.0, spec, cfg)[0] == FAIL
    assert detect_strong_splitting(f, 0.0, spec, cfg) == FAIL


def test_matching(cfg):
    f = plane(F1)
    base = sample_fiber(f, [0.5], cfg)[0]
    m = match_components(f, base, [0.4], cfg)
    assert m.is_bijection and m.assignment == {0: 0, 1: 1}
    # two of the three lines of X_0 land on the same component of X_0.1
    base0 = sample_fiber(f, [0.0], cfg)[0]
    m = match_components(f, base0, [0.1], cfg)
    assert not m.is_bijection
    assert len(set(m.assignment.values())) == 2


def test_tracks_follow_components(cfg):
    f = plane(G)
    params = [np.array([0.2]), np.array([0.1]), np.array([0.05])]
    snaps = [sample_fiber(f, p, cfg)[0] for p in params]
    assert build_tracks(f, snaps, params, cfg) == [[0, 0, 0]]
