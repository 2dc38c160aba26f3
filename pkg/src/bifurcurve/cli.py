"""Command-line interface: ``bifurcurve {fiber,diagnose,milnor,scan}``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .asymptotics import ApproachSpec
from .polymap import PolynomialError, parse_map
from .report import dumps, invariants_csv, traces_csv, write_text
from .scanner import CLASS_INCONCLUSIVE, ScanRegion, classify_value, exterior_config, scan
from .topology import fiber_topology
from .tracer import TraceConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    map: str | None = None
    map_file: str | None = None
    vars: list = field(default_factory=lambda: ["x", "y"])
    # trace parameters
    radius: float = 10.0
    newton_tol: float = 1e-10
    seed_grid: int = 32
    # approach parameters
    eps: float = 0.5
    ratio: float = 0.5
    scales: int = 7
    # region
    box: list | None = None
    grid: list | None = None
    depth: int = 3
    exterior: float | None = None
    seed: int = 0
    jobs: int = 1
    # outputs
    json: str | None = None
    csv: str | None = None
    traces_csv: str | None = None

    def trace_config(self) -> TraceConfig:
        cfg = TraceConfig(radius=self.radius, newton_tol=self.newton_tol, seed_grid=self.seed_grid, random_seed=self.seed)
        return cfg

    def map_text(self) -> str:
        if self.map_file:
            try:
                with open(self.map_file, encoding="utf-8") as fh:
                    return fh.read().strip()
            except OSError as exc:
                raise InputError(f"cannot read map file: {exc}") from exc
        if not self.map:
            raise InputError("a map is required (--map or --map-file)")
        return self.map


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"{what}: expected comma-separated integers, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one line on stderr instead of the full usage block
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--map", help="components separated by ';', e.g. \"z; x + x^2*y\"")
    common.add_argument("--map-file", help="file holding the map expression")
    common.add_argument("--vars", help="comma-separated variable names (default x,y)")
    common.add_argument("--radius", type=float, help="working ball radius R (default 10)")
    common.add_argument("--seed", type=int, help="random seed (overridden by BIFURCURVE_SEED)")
    common.add_argument("--config", help="JSON file with RunConfig fields; overrides flags")
    common.add_argument("--json", help="write the JSON report here ('-' for stdout)")
    common.add_argument("--csv", help="write the invariants CSV here")
    common.add_argument("--traces-csv", help="write traced polylines here")

    approach = _Parser(add_help=False)
    approach.add_argument("--eps", type=float, help="largest approach distance (default 0.5)")
    approach.add_argument("--scales", type=int, help="number of approach scales (default 7)")
    approach.add_argument("--exterior", type=float, metavar="R0", help="restrict F to the outside of the ball of radius R0")

    p = _Parser(prog="bifurcurve", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    f = sub.add_parser("fiber", parents=[common], help="enumerate one fiber and print its invariants")
    f.add_argument("--t", required=True, help="target value, comma-separated for several components")
    d = sub.add_parser("diagnose", parents=[common, approach], help="classify one target value")
    d.add_argument("--a", required=True, help="target value")
    m = sub.add_parser("milnor", parents=[common, approach], help="Milnor set, S_c and parity at one value")
    m.add_argument("--a", required=True, help="target value")
    m.add_argument("--center", help="centre c (default: first usable of the seeded candidates)")
    s = sub.add_parser("scan", parents=[common, approach], help="sweep a parameter region")
    s.add_argument("--box", required=True, help="lo,hi per axis, e.g. -1,1 or -1,1,-1,1")
    s.add_argument("--grid", required=True, help="samples per axis, one value or one per axis")
    s.add_argument("--depth", type=int, help="refinement depth (default 3)")
    s.add_argument("--jobs", type=int, help="worker processes (default 1)")
    return p


def build_config(ns: argparse.Namespace) -> RunConfig:
    rc = RunConfig()
    simple = {"map", "map_file", "radius", "seed", "json", "csv", "traces_csv", "eps", "scales", "exterior", "depth", "jobs"}
    for name in simple:
        v = getattr(ns, name, None)
        if v is not None:
            setattr(rc, name, v)
    if ns.vars:
        rc.vars = [v.strip() for v in ns.vars.split(",")]
    if getattr(ns, "box", None):
        rc.box = _floats(ns.box, "--box")
    if getattr(ns, "grid", None):
        rc.grid = _ints(ns.grid, "--grid")
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config: {exc}") from exc
        known = {f_.name for f_ in fields(RunConfig)}
        bad = sorted(set(data) - known)
        if bad:
            raise InputError(f"unknown config field(s): {', '.join(bad)}")
        rc = replace(rc, **data)
    env = os.environ.get("BIFURCURVE_SEED")
    if env is not None:
        try:
            rc.seed = int(env)
        except ValueError as exc:
            raise InputError(f"BIFURCURVE_SEED must be an integer, got {env!r}") from exc
    return rc


def _approach(rc: RunConfig, a) -> ApproachSpec:
    return ApproachSpec.default(a, eps=rc.eps, ratio=rc.ratio, count=rc.scales, n_random=0, seed=rc.seed)


def _value(text: str, p: int, what: str) -> np.ndarray:
    v = np.asarray(_floats(text, what))
    if len(v) != p:
        raise InputError(f"{what}: map has {p} component(s), got {len(v)} value(s)")
    return v


def _cmd_fiber(rc, fmap, ns) -> int:
    t = _value(ns.t, fmap.target_dim, "--t")
    cfg = rc.trace_config()
    if rc.exterior is not None:
        cfg = exterior_config(cfg, rc.exterior)
    snap, topo = fiber_topology(fmap, t, cfg)
    print(
        f"t={','.join(format(float(v), '.17g') for v in t)} s={topo.s} l={topo.l} b0={topo.b0} b1={topo.b1} "
        f"chi={topo.chi} mu={topo.mu:.6g} stabilized={str(topo.stabilized).lower()} "
        f"consistent={str(topo.consistent).lower()}"
    )
    if rc.json:
        write_text(dumps({
            "parameter": t, "s": topo.s, "l": topo.l, "b0": topo.b0, "b1": topo.b1, "chi": topo.chi,
            "chi_components": topo.chi_components, "chi_sphere": topo.chi_sphere, "mu": topo.mu,
            "stabilized": topo.stabilized, "consistent": topo.consistent, "radius_used": topo.radius_used,
            "crossing_counts": topo.crossing_counts,
            "components": [{"kind": c.kind, "min_norm": c.min_norm, "points": len(c.points)} for c in snap.components],
        }), rc.json)
    if rc.csv:
        write_text(invariants_csv([topo]), rc.csv)
    if rc.traces_csv:
        write_text(traces_csv([c.points for c in snap.components], fmap.variables), rc.traces_csv)
    return EXIT_OK if topo.consistent else EXIT_INCONCLUSIVE


def _cmd_diagnose(rc, fmap, ns) -> int:
    a = _value(ns.a, fmap.target_dim, "--a")
    v = classify_value(fmap, a, rc.trace_config(), exterior_radius=rc.exterior, approach=_approach(rc, a))
    print(f"classification={v.classification} consistent={str(v.consistent).lower()}")
    if rc.json:
        write_text(dumps(v), rc.json)
    if rc.csv:
        write_text(invariants_csv(v), rc.csv)
    return EXIT_INCONCLUSIVE if v.classification == CLASS_INCONCLUSIVE else EXIT_OK


def _distinct(values, tol: float = 1e-6) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def _cmd_milnor(rc, fmap, ns) -> int:
    from .milnor import _cached_estimate, choose_center, parity_test

    if fmap.domain_dim != 2:
        raise InputError("milnor needs a map R^2 -> R")
    a = _value(ns.a, 1, "--a")
    cfg = rc.trace_config()
    if ns.center:
        c = tuple(_value(ns.center, 2, "--center"))
    else:
        c = choose_center(fmap, cfg)
        if c is None:
            raise InputError("no usable Milnor centre among the seeded candidates; pass --center")
    ms, est = _cached_estimate(fmap, c, cfg)
    if est is None:
        print(f"degenerate Milnor set at centre {list(c)}: {ms.note}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    res = parity_test(fmap, a, c, _approach(rc, a), cfg)
    out = {
        "center": list(c),
        "determinant": str(ms.determinant),
        "branches": len(ms.branches),
        "s_c_values": _distinct(v[0] for v in est.values),
        "parity": res.stabilized,
        "verdict": res.verdict,
        "in_s_c": res.in_s_c,
        "counts": res.parities,
        "notes": res.notes,
    }
    write_text(dumps(out), rc.json or "-")
    if rc.traces_csv:
        write_text(traces_csv([b.points for b in ms.branches], fmap.variables), rc.traces_csv)
    return EXIT_INCONCLUSIVE if res.verdict == CLASS_INCONCLUSIVE else EXIT_OK


def _cmd_scan(rc, fmap, ns) -> int:
    p = fmap.target_dim
    box = rc.box or []
    if len(box) != 2 * p:
        raise InputError(f"--box needs {2 * p} numbers for {p} parameter(s)")
    grid = list(rc.grid or [])
    if len(grid) == 1:
        grid = grid * p
    if len(grid) != p:
        raise InputError(f"--grid needs 1 or {p} integers")
    try:
        region = ScanRegion(tuple(zip(box[::2], box[1::2])), tuple(grid), rc.depth)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = scan(fmap, region, rc.trace_config(), exterior_radius=rc.exterior, jobs=max(1, rc.jobs))
    print(f"candidate_set={json.dumps(report.candidate_set)} nodes={report.stats['nodes']}")
    if rc.json:
        write_text(dumps(report), rc.json)
    if rc.csv:
        write_text(invariants_csv(report), rc.csv)
    return EXIT_OK


_VALUE_FLAGS = ("--box", "--t", "--a", "--center", "--grid")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """``--box -1,1`` -> ``--box=-1,1`` so argparse does not read -1,1 as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1][:1] == "-" and argv[i + 1][1:2] in "0123456789.":
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run_cli(argv=None) -> int:
    parser = _parser()
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        rc = build_config(ns)
        fmap = parse_map(rc.map_text(), rc.vars)
        handler = {"fiber": _cmd_fiber, "diagnose": _cmd_diagnose, "milnor": _cmd_milnor, "scan": _cmd_scan}[ns.command]
        return handler(rc, fmap, ns)
    except (InputError, PolynomialError, ValueError) as exc:
        print(f"bifurcurve: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"bifurcurve: error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
