"""Locate and trace the connected components of a fiber X_t = F^-1(t) inside a ball."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.spatial import cKDTree

from . import kernels
from .polymap import PackedSystem, Polynomial, PolynomialMap, milnor_polynomial, squared_distance

CIRCLE = "circle"
ARC = "arc"


@dataclass(frozen=True)
class TraceConfig:
    """Continuation and seeding parameters.  Unset step/tolerance fields scale with ``radius``."""

    radius: float = 10.0
    step_init: float | None = None
    step_min: float | None = None
    step_max: float | None = None
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    loop_close_tol: float | None = None
    dedup_tol: float | None = None
    seed_grid: int = 32
    inner_radius: float = 0.0
    max_points: int = 200_000
    sing_tol: float = 1e-12
    random_seed: int = 0

    def __post_init__(self):
        R = float(self.radius)
        if R <= 0:
            raise ValueError("radius must be positive")
        defaults = {
            "step_init": R / 200.0,
            "step_min": 1e-13 * R,
            "step_max": R / 40.0,
            "dedup_tol": 1e-6 * R,
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if self.loop_close_tol is None:
            object.__setattr__(self, "loop_close_tol", 10.0 * self.step_min)
        if not (self.step_min <= self.step_init <= self.step_max):
            raise ValueError("need step_min <= step_init <= step_max")
        for name in ("newton_tol", "loop_close_tol", "dedup_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_radius < 0 or self.inner_radius >= R:
            raise ValueError("inner_radius must lie in [0, radius)")

    def with_radius(self, radius: float) -> "TraceConfig":
        """Same configuration at another working radius, radius-relative quantities rescaled."""
        k = radius / self.radius
        return replace(
            self,
            radius=radius,
            step_init=self.step_init * k,
            step_min=self.step_min * k,
            step_max=self.step_max * k,
            loop_close_tol=self.loop_close_tol * k,
            dedup_tol=self.dedup_tol * k,
        )


@dataclass
class FiberComponent:
    t: np.ndarray
    points: np.ndarray
    kind: str | None
    boundary_hits: list = field(default_factory=list)
    boundary_sides: list = field(default_factory=list)
    min_norm_point: np.ndarray | None = None
    min_norm: float = math.nan
    min_norm_is_bound: bool = False
    max_residual: float = 0.0
    min_sigma: float = math.inf
    tainted: bool = False
    incomplete: bool = False
    note: str = ""

    @property
    def complete(self) -> bool:
        return not (self.tainted or self.incomplete) and self.kind is not None

    def diameter(self) -> float:
        P = self.points
        if len(P) < 2:
            return 0.0
        lo, hi = P.min(axis=0), P.max(axis=0)
        return float(np.linalg.norm(hi - lo))


@dataclass
class SeedAudit:
    found: int = 0
    merged: int = 0
    rejected: int = 0
    sphere: int = 0
    grid: int = 0
    critical: int = 0


@dataclass
class FiberSnapshot:
    t: np.ndarray
    radius: float
    components: list[FiberComponent]
    seed_audit: SeedAudit
    inner_radius: float = 0.0

    @property
    def reliable(self) -> bool:
        return all(c.complete for c in self.components)

    @property
    def min_sigma(self) -> float:
        return min((c.min_sigma for c in self.components), default=math.inf)


# ---------------------------------------------------------------------------
# packed systems and their caches


@lru_cache(maxsize=256)
def _sphere_packed(fmap: PolynomialMap) -> PackedSystem:
    return fmap.packed.stacked(PackedSystem.from_polys([squared_distance(fmap.variables)]))


@lru_cache(maxsize=256)
def milnor_packed(fmap: PolynomialMap, center: tuple) -> PackedSystem:
    """The square system (F, m_c)."""
    m = milnor_polynomial(fmap, center)
    if m.is_zero():
        return None
    return fmap.packed.stacked(PackedSystem.from_polys([m]))


def _newton_batch(system: PackedSystem, target, X0, tol, maxit, maxdist):
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    if X0.shape[0] == 0:
        return X0, np.zeros(0, dtype=bool)
    X, ok, _ = kernels.newton_batch(
        system.exps, system.coeffs, system.owner, system.dexps, system.dcoeffs, system.downer,
        system.nout, system.maxdeg, np.asarray(target, dtype=np.float64), X0, tol, maxit, maxdist,
    )
    return X, ok


def newton_to_fiber(fmap: PolynomialMap, t, x0, cfg: TraceConfig, maxdist: float = math.inf):
    """Minimum-norm Gauss-Newton from x0 onto X_t; returns (x, converged)."""
    s = fmap.packed
    x, ok, _ = kernels.newton_point(
        s.exps, s.coeffs, s.owner, s.dexps, s.dcoeffs, s.downer, s.nout, s.maxdeg,
        np.asarray(t, dtype=np.float64), np.asarray(x0, dtype=np.float64),
        cfg.newton_tol, cfg.newton_max_iter, maxdist,
    )
    return x, bool(ok)


def dedupe_points(P: np.ndarray, tol: float) -> np.ndarray:
    """Keep the first of every cluster of points closer than ``tol`` (order preserving)."""
    if len(P) <= 1:
        return P
    # collapse near-identical points first; Newton from many starts lands on few roots
    _, first = np.unique(np.floor(P / (0.5 * tol)), axis=0, return_index=True)
    P = P[np.sort(first)]
    tree = cKDTree(P)
    keep = np.ones(len(P), dtype=bool)
    for i, j in sorted(tree.query_pairs(tol)):
        if keep[i] and keep[j]:
            keep[j] = False
    return P[keep]


# ---------------------------------------------------------------------------
# sphere intersections {F = t, |x| = R}


@dataclass
class SphereCrossings:
    radius: float
    points: np.ndarray
    angles: np.ndarray  # angle between the fiber tangent and the sphere (radians)
    degenerate: bool

    @property
    def count(self) -> int:
        return len(self.points)


_PHASE = 0.6180339887498949


def _circle_candidates(poly: Polynomial, t: float, R: float, samples: int = 4096) -> np.ndarray:
    """Angles where poly(R cos th, R sin th) = t, via half-angle substitution plus a sign scan."""
    d = max(poly.degree, 1)
    c, s = math.cos(_PHASE), math.sin(_PHASE)
    X = np.array([c * R, -2 * s * R, -c * R])  # ascending powers of u
    Y = np.array([s * R, 2 * c * R, -s * R])
    D = np.array([1.0, 0.0, 1.0])
    total = np.zeros(2 * d + 1)
    Xp = [np.array([1.0])]
    Yp = [np.array([1.0])]
    Dp = [np.array([1.0])]
    for _ in range(d):
        Xp.append(npoly.polymul(Xp[-1], X))
        Yp.append(npoly.polymul(Yp[-1], Y))
        Dp.append(npoly.polymul(Dp[-1], D))
    for (a, b), coef in poly.terms:
        term = float(coef) * npoly.polymul(npoly.polymul(Xp[a], Yp[b]), Dp[d - a - b])
        total[: len(term)] += term
    total[: len(Dp[d])] -= t * Dp[d]
    angles = []
    nz = np.nonzero(np.abs(total) > 1e-300)[0]
    if len(nz):
        trimmed = total[: nz[-1] + 1]
        if len(trimmed) > 1:
            scale = np.max(np.abs(trimmed))
            roots = npoly.polyroots(trimmed / scale)
            for u in roots:
                if abs(u.imag) <= 1e-5 * (1.0 + abs(u.real)):
                    angles.append(_PHASE + 2.0 * math.atan(u.real))
    # the point u = infinity
    angles.append(_PHASE + math.pi)
    # dense sign scan catches anything the root finder smeared into a complex pair
    th = _PHASE + np.linspace(-math.pi, math.pi, samples, endpoint=False)
    pts = np.stack([R * np.cos(th), R * np.sin(th)], axis=1)
    vals = PackedSystem.from_polys([poly]).values_batch(pts)[:, 0] - t
    sgn = np.sign(vals)
    idx = np.nonzero(sgn * np.roll(sgn, -1) < 0)[0]
    for i in idx:
        angles.append(0.5 * (th[i] + th[(i + 1) % samples] + (2 * math.pi if i == samples - 1 else 0.0)))
    return np.asarray(angles)


def _lattice_on_sphere(n: int, R: float, count: int, rng: np.random.Generator) -> np.ndarray:
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z * z)
        phi = math.pi * (3 - math.sqrt(5)) * k
        P = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        P = rng.standard_normal((count, n))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
    return R * P


def sphere_crossings(fmap: PolynomialMap, t, radius: float, cfg: TraceConfig) -> SphereCrossings:
    """Transversal solutions of {F(x) = t, |x|^2 = radius^2}."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    n = fmap.domain_dim
    sysF = fmap.packed
    if n == 2:
        angles = _circle_candidates(fmap.components[0], float(t[0]), radius)
        starts = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    else:
        rng = np.random.default_rng(cfg.random_seed + 7)
        count = max(2048, 2 * cfg.seed_grid**2)
        starts = _lattice_on_sphere(n, radius, count, rng)
        spacing = radius * math.sqrt(4 * math.pi / count)
        off = kernels.linear_offsets(
            sysF.exps, sysF.coeffs, sysF.owner, sysF.dexps, sysF.dcoeffs, sysF.downer,
            sysF.nout, sysF.maxdeg, t, starts,
        )
        starts = starts[off <= 1.5 * spacing]
    P = np.zeros((0, n))
    if len(starts):
        Z, ok = kernels.sphere_newton_batch(
            sysF.exps, sysF.coeffs, sysF.owner, sysF.dexps, sysF.dcoeffs, sysF.downer,
            sysF.nout, sysF.maxdeg, t, np.ascontiguousarray(starts, dtype=np.float64), radius, cfg.newton_tol, 40,
        )
        Z = Z[ok & np.all(np.isfinite(Z), axis=1)]
        if len(Z):
            P = dedupe_points(Z, 1e-8 * radius)
            P = P[np.lexsort(P.T[::-1])]
    angles = np.empty(len(P))
    tang = np.zeros(n)
    for i, p in enumerate(P):
        J = sysF.jacobian(p)
        kernels.cofactor_vector(J, tang)
        nt = np.linalg.norm(tang)
        angles[i] = math.asin(min(1.0, abs(tang @ p) / (nt * radius))) if nt > 0 else 0.0
    degenerate = bool(len(P) and angles.min() < 1e-3)
    if len(P) > 1:
        dmin = cKDTree(P).query(P, k=2)[0][:, 1].min()
        if dmin < 1e-3 * radius:
            degenerate = True
    return SphereCrossings(radius, P, angles, degenerate)


# ---------------------------------------------------------------------------
# seeds


def _initial_tangent(J: np.ndarray) -> np.ndarray:
    tau = np.zeros(J.shape[1])
    kernels.cofactor_vector(np.ascontiguousarray(J), tau)
    nrm = np.linalg.norm(tau)
    if nrm == 0:
        return tau
    tau /= nrm
    for v in tau:
        if abs(v) > 1e-14:
            if v < 0:
                tau = -tau
            break
    return tau


def _shell_lattice(n: int, R: float, r_in: float, grid: int) -> tuple[np.ndarray, float]:
    h = 2.0 * R / grid
    axis = -R + h * (np.arange(grid) + 0.5)
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    nr = np.linalg.norm(mesh, axis=1)
    mask = nr <= R
    if r_in > 0:
        mask &= nr >= r_in
    return mesh[mask], h


def seed_centers(n: int, cfg: TraceConfig) -> list[tuple]:
    """Origin plus three random centres for the distance-critical seed family."""
    rng = np.random.default_rng(cfg.random_seed)
    cs = [tuple([0.0] * n)]
    for _ in range(3):
        cs.append(tuple(float(v) for v in np.round(rng.uniform(-0.3, 0.3, n) * cfg.radius, 6)))
    return cs


def find_seeds(fmap: PolynomialMap, t, cfg: TraceConfig):
    """Points on X_t inside the working shell from three families.

    (i) sphere crossings, (ii) Newton from a lattice, (iii) fiber points that
    are critical for the distance to a few centres.  Returns (seeds, families,
    audit) with ``families`` a parallel list of 'sphere' / 'critical' / 'grid'.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    n = fmap.domain_dim
    R = cfg.radius
    audit = SeedAudit()
    out = []
    fams = []

    for rad in [R] + ([cfg.inner_radius] if cfg.inner_radius > 0 else []):
        sc = sphere_crossings(fmap, t, rad, cfg)
        out.extend(sc.points)
        fams.extend(["sphere"] * sc.count)
        audit.sphere += sc.count

    # keep the lattice size roughly constant in higher dimension
    grid = max(8, cfg.seed_grid >> (n - 2))
    lattice, h = _shell_lattice(n, R, cfg.inner_radius, grid)
    sysF = fmap.packed
    off = kernels.linear_offsets(
        sysF.exps, sysF.coeffs, sysF.owner, sysF.dexps, sysF.dcoeffs, sysF.downer,
        sysF.nout, sysF.maxdeg, t, lattice,
    )
    near = lattice[off <= 0.75 * h * math.sqrt(n)]
    reach = 2.0 * h * math.sqrt(n)

    def inside(P):
        nr = np.linalg.norm(P, axis=1)
        m = nr <= R
        if cfg.inner_radius > 0:
            m &= nr >= cfg.inner_radius
        return m

    for c in seed_centers(n, cfg):
        msys = milnor_packed(fmap, c)
        if msys is None:
            continue
        X, ok = _newton_batch(msys, np.concatenate([t, [0.0]]), near, cfg.newton_tol, cfg.newton_max_iter, reach)
        good = ok & inside(X)
        audit.rejected += int((~good).sum())
        P = dedupe_points(X[good], 1e-7 * R)
        out.extend(P)
        fams.extend(["critical"] * len(P))
        audit.critical += len(P)

    X, ok = _newton_batch(sysF, t, near, cfg.newton_tol, cfg.newton_max_iter, reach)
    good = ok & inside(X)
    audit.rejected += int((~good).sum()) + int(len(lattice) - len(near))
    P = dedupe_points(X[good], 0.25 * h)
    out.extend(P)
    fams.extend(["grid"] * len(P))
    audit.grid += len(P)
    audit.found = len(out)
    seeds = np.asarray(out, dtype=np.float64).reshape(-1, n)
    return seeds, fams, audit


# ---------------------------------------------------------------------------
# tracing


def _run_branch(fmap_sys: PackedSystem, t, x0, tau, cfg: TraceConfig):
    s = fmap_sys
    return kernels.trace_branch(
        s.exps, s.coeffs, s.owner, s.dexps, s.dcoeffs, s.downer, s.nout, s.maxdeg,
        t, np.asarray(x0, dtype=np.float64), np.asarray(tau, dtype=np.float64),
        float(cfg.radius), float(cfg.inner_radius),
        float(cfg.step_init), float(cfg.step_min), float(cfg.step_max),
        float(cfg.newton_tol), int(cfg.newton_max_iter), float(cfg.loop_close_tol),
        int(cfg.max_points), float(cfg.sing_tol),
    )


def trace_curve(system: PackedSystem, t, seed, cfg: TraceConfig, center_system: PackedSystem | None = None):
    """Trace the component of {system = t} through ``seed``; returns a FiberComponent.

    ``center_system`` (F stacked with m_0) is used to refine the min-norm point.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    seed = np.asarray(seed, dtype=np.float64)
    J = system.jacobian(seed)
    tau = _initial_tangent(J)
    comp = FiberComponent(t=t, points=seed[None, :].copy(), kind=None)
    if not np.any(tau):
        comp.tainted = True
        comp.min_sigma = 0.0
        comp.note = "rank-deficient Jacobian at seed"
        return comp
    fwd, st1, sig1, res1 = _run_branch(system, t, seed, tau, cfg)
    if st1 == kernels.CLOSED:
        pts = fwd
        sig, res = sig1, res1
        status = (st1,)
    else:
        bwd, st2, sig2, res2 = _run_branch(system, t, seed, -tau, cfg)
        pts = np.concatenate([bwd[::-1], fwd[1:]], axis=0)
        sig, res = min(sig1, sig2), max(res1, res2)
        status = (st2, st1)
    comp.points = pts
    comp.min_sigma = float(sig)
    comp.max_residual = float(res)
    if any(s == kernels.SINGULAR for s in status):
        comp.tainted = True
        comp.note = "rank-deficient Jacobian on the trace"
    elif any(s in (kernels.UNDERFLOW, kernels.MAX_POINTS) for s in status):
        comp.incomplete = True
        comp.note = "step underflow" if kernels.UNDERFLOW in status else "point budget exhausted"
    elif status == (kernels.CLOSED,):
        comp.kind = CIRCLE
    else:
        comp.kind = ARC
        for end, st in ((pts[0], status[0]), (pts[-1], status[1])):
            comp.boundary_hits.append(end.copy())
            comp.boundary_sides.append("outer" if st == kernels.EXIT_OUTER else "inner")
    _refine_min_norm(comp, system, t, cfg, center_system)
    return comp


def _refine_min_norm(comp: FiberComponent, system: PackedSystem, t, cfg: TraceConfig, center_system):
    P = comp.points
    norms = np.linalg.norm(P, axis=1)
    k = int(np.argmin(norms))
    best = P[k].copy()
    bestn = float(norms[k])
    if comp.kind == ARC and (k == 0 or k == len(P) - 1):
        comp.min_norm_point, comp.min_norm, comp.min_norm_is_bound = best, bestn, True
        return
    if len(P) >= 3 and 0 < k < len(P) - 1:
        # golden-section search of |x| along the two segments around the best vertex
        a, m, b = P[k - 1], P[k], P[k + 1]

        def path(s):
            return a + (m - a) * (s + 1) if s < 0 else m + (b - m) * s

        lo, hi = -1.0, 1.0
        g = (math.sqrt(5) - 1) / 2
        c1, c2 = hi - g * (hi - lo), lo + g * (hi - lo)
        for _ in range(60):
            if np.linalg.norm(path(c1)) < np.linalg.norm(path(c2)):
                hi = c2
            else:
                lo = c1
            c1, c2 = hi - g * (hi - lo), lo + g * (hi - lo)
        guess = path(0.5 * (lo + hi))
        local = max(np.linalg.norm(m - a), np.linalg.norm(b - m))
        if center_system is not None:
            target = np.concatenate([t, [0.0]])
            x, ok, _ = kernels.newton_point(
                center_system.exps, center_system.coeffs, center_system.owner,
                center_system.dexps, center_system.dcoeffs, center_system.downer,
                center_system.nout, center_system.maxdeg, target, guess,
                cfg.newton_tol, cfg.newton_max_iter, 2.0 * local + 1e-12,
            )
            xn = float(np.linalg.norm(x))
            if ok and xn <= bestn * (1 + 1e-12) + 1e-15:
                best, bestn = x, xn
    comp.min_norm_point, comp.min_norm, comp.min_norm_is_bound = best, bestn, False


def trace_component(fmap: PolynomialMap, t, seed, cfg: TraceConfig) -> FiberComponent:
    n = fmap.domain_dim
    return trace_curve(fmap.packed, t, seed, cfg, milnor_packed(fmap, tuple([0.0] * n)))


def _same_component(a: FiberComponent, b: FiberComponent, tol: float) -> bool:
    ea = kernels.polyline_excess(a.points, b.points, 0.06)
    if ea.max() > tol:
        return False
    eb = kernels.polyline_excess(b.points, a.points, 0.06)
    return bool(eb.max() <= tol)


def enumerate_fiber(fmap: PolynomialMap, t, cfg: TraceConfig) -> FiberSnapshot:
    """Trace every component of X_t within the working shell, deduplicated."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    seeds, fams, audit = find_seeds(fmap, t, cfg)
    center_sys = milnor_packed(fmap, tuple([0.0] * fmap.domain_dim))
    comps: list[FiberComponent] = []
    covered = np.zeros(len(seeds), dtype=bool)
    tol = cfg.dedup_tol
    for i in range(len(seeds)):
        if covered[i]:
            continue
        comp = trace_curve(fmap.packed, t, seeds[i], cfg, center_sys)
        covered[i] = True
        if any(_same_component(comp, other, tol) for other in comps):
            audit.merged += 1
            continue
        comps.append(comp)
        rest = np.nonzero(~covered)[0]
        if len(rest):
            ex = kernels.polyline_excess(np.ascontiguousarray(seeds[rest]), comp.points, 0.06)
            hit = rest[ex <= tol]
            covered[hit] = True
            audit.merged += len(hit)
    comps = _canonical_order(comps)
    return FiberSnapshot(t=t, radius=cfg.radius, components=comps, seed_audit=audit, inner_radius=cfg.inner_radius)


def _canonical_order(comps: list[FiberComponent]) -> list[FiberComponent]:
    """Deterministic order: by min-norm point coordinates."""
    def key(c):
        p = c.min_norm_point if c.min_norm_point is not None else c.points[0]
        return tuple(np.round(p, 9))

    return sorted(comps, key=key)


def locate_component(snapshot: FiberSnapshot, x, tol: float | None = None) -> int | None:
    """Index of the snapshot component whose polyline passes through x (None if none does)."""
    if not snapshot.components:
        return None
    tol = snapshot.radius * 1e-6 if tol is None else tol
    P = np.asarray(x, dtype=np.float64)[None, :]
    best, arg = math.inf, None
    for j, c in enumerate(snapshot.components):
        e = float(kernels.polyline_excess(P, c.points, 0.06)[0])
        if e < best:
            best, arg = e, j
    return arg if best <= tol else None
