"""Configuration-driven command line front end.

Configs are flat ``key=value`` files; numeric values may be arithmetic
expressions in ``pi``, e.g. ``theta=pi/6``. Run ``dtnafem solve --config
run.cfg`` to execute.
"""
from __future__ import annotations

import argparse
import ast
import math
import operator
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .adapt import AdaptConfig, ConvergenceRecord, run_adaptive, run_uniform
from .errors import (DegenerateEdge, InvalidGeometry, InvalidParams, ParseError, QuadratureOverflow,
                     SingularMatrix, SingularSystem, UnclassifiableEdge, ValidationError,
                     WoodAnomaly, InconsistentMesh)
from .export import write_convergence_csv, write_vtk
from .geometry import (FlatProfile, GeometrySpec, PiecewiseLinearProfile, Profile, example4_profile,
                       sawtooth_profile)
from .mesh import write_mesh
from .oracle import exact_flat
from .params import PhysicalParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVER = 4

SCENARIOS = {
    "example1": dict(omega=1.0, kappa=1.0, theta=math.pi / 6, rho_f=1.0, lam=1.0, mu=1.0,
                     rho=1.0, period=4.0, profile="flat"),
    "example2": dict(omega=1.0, kappa=1.0, theta=math.pi / 4, rho_f=1.0, lam=1.0, mu=1.0,
                     rho=1.0, period=4.0, profile="sawtooth", teeth=1, height=0.5),
    "example3": dict(omega=1.0, kappa=1.0, theta=math.pi / 4, rho_f=1.0, lam=2.0, mu=3.0,
                     rho=1.0, period=5.0, profile="sawtooth", teeth=3, height=0.5),
    "example4": dict(omega=1.0, kappa=5.0, theta=math.pi / 5, rho_f=1.0, lam=2.0, mu=4.0,
                     rho=1.0, period=2 * math.pi, profile="example4"),
    "custom": {},
}
PROFILES = ("flat", "sawtooth", "example4", "polyline")
MODES = ("adaptive", "uniform", "both")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "example1"
    omega: float = 1.0
    kappa: float = 1.0
    theta: float = math.pi / 6
    rho_f: float = 1.0
    lam: float = 1.0
    mu: float = 1.0
    rho: float = 1.0
    period: float = 4.0
    profile: str = "flat"
    level: float = 0.0
    teeth: int = 1
    height: float = 0.5
    points: str = ""
    b: Optional[float] = None
    tolerance: float = 1e-3
    tau: float = 0.5
    max_iterations: int = 40
    max_dof: int = 40_000
    dtn_tol: float = 1e-8
    initial_h: float = 0.5
    mode: str = "adaptive"
    output_dir: str = "out"
    export_vtk: bool = False
    record_timing: bool = False

    def physical(self) -> PhysicalParams:
        return PhysicalParams(self.omega, self.kappa, self.theta, self.rho_f, self.lam,
                              self.mu, self.rho, self.period)

    def make_profile(self) -> Profile:
        if self.profile == "flat":
            return FlatProfile(self.period, self.level)
        if self.profile == "sawtooth":
            return sawtooth_profile(self.period, self.teeth, self.height)
        if self.profile == "example4":
            prof = example4_profile()
            if abs(prof.period - self.period) > 1e-12:
                raise InvalidGeometry("the example4 profile requires period = 2*pi")
            return prof
        pts = []
        for item in self.points.split(";"):
            item = item.strip()
            if item:
                x, y = item.split(":")
                pts.append((_evaluate(x), _evaluate(y)))
        return PiecewiseLinearProfile(tuple(pts))

    def geometry(self) -> GeometrySpec:
        return GeometrySpec.from_profile(self.make_profile(), b=self.b)

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig(self.tolerance, self.tau, self.max_iterations, self.max_dof,
                           self.dtn_tol, self.initial_h)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"lambda": "lam"}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}


def _evaluate(text: str) -> float:
    """Evaluate a restricted arithmetic expression (numbers, pi, e, sqrt, + - * / **)."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {text!r}")
    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from exc


def _convert(key: str, raw: str, lineno: int):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "str":
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "int":
            v = _evaluate(raw)
            if v != int(v):
                raise ValueError(f"expected an integer, got {raw!r}")
            return int(v)
        return _evaluate(raw)
    except ValueError as exc:
        raise ParseError(f"{key}: {exc}", lineno) from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat key=value configuration."""
    if text is None or not text.strip():
        raise ParseError("empty configuration")
    values = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _FIELD_TYPES:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if not raw:
            raise ParseError(f"missing value for {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
        where[key] = lineno
    if not values:
        raise ParseError("configuration contains no settings")
    scenario = values.get("scenario", "example1")
    if scenario not in SCENARIOS:
        raise ParseError(f"unknown scenario {scenario!r}", where.get("scenario"))
    merged = {**SCENARIOS[scenario], **values}
    return validate(RunConfig(**merged))


def validate(config: RunConfig) -> RunConfig:
    if config.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {config.mode!r}")
    if config.profile not in PROFILES:
        raise ValidationError(f"profile must be one of {PROFILES}, got {config.profile!r}")
    if config.profile == "sawtooth" and config.teeth < 1:
        raise ValidationError("teeth must be at least 1")
    try:
        config.adapt_config()
        config.physical()
    except InvalidParams as exc:
        raise ValidationError(str(exc)) from exc
    try:
        config.geometry()
    except (InvalidGeometry, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"geometry: {exc}") from exc
    return config


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def _run_mode(config: RunConfig, mode: str, outdir: Path) -> ConvergenceRecord:
    outdir.mkdir(parents=True, exist_ok=True)
    params = config.physical()
    geometry = config.geometry()
    exact = exact_flat(params) if config.profile == "flat" and config.level == 0.0 else None

    def snapshot(it, mesh, sol, ind, marked):
        write_mesh(mesh, outdir / f"mesh_{it}.txt")
        if config.export_vtk:
            write_vtk(sol, outdir / f"solution_{it}.vtk")

    runner = run_adaptive if mode == "adaptive" else run_uniform
    _, record = runner(geometry, params, config.adapt_config(), exact=exact, on_iteration=snapshot)
    write_convergence_csv(record, outdir / "convergence.csv", timing=config.record_timing)
    return record


def format_table(record: ConvergenceRecord) -> str:
    rows = [f"{record.mode} (N={record.N}, status={record.status})",
            f"{'iter':>4} {'dof':>8} {'eps_h':>12} {'eps_N':>12} {'e_h':>12}"]
    for r in record.iterations:
        e = f"{r.e_h:12.5e}" if r.e_h is not None else f"{'-':>12}"
        rows.append(f"{r.iteration:>4} {r.dof:>8} {r.eps_h:12.5e} {r.eps_N:12.5e} {e}")
    return "\n".join(rows)


def run(config: RunConfig, stream=None) -> int:
    """Execute the configured pipelines and return a process exit code."""
    stream = sys.stdout if stream is None else stream
    try:
        out = Path(config.output_dir)
        modes = ("adaptive", "uniform") if config.mode == "both" else (config.mode,)
        for mode in modes:
            target = out / mode if config.mode == "both" else out
            record = _run_mode(config, mode, target)
            print(format_table(record), file=stream)
    except (ValidationError, ParseError, InvalidParams) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidGeometry, UnclassifiableEdge, DegenerateEdge, InconsistentMesh) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (SingularMatrix, SingularSystem, WoodAnomaly, QuadratureOverflow) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtnafem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run a configured experiment")
    solve.add_argument("--config", required=True, help="path to a key=value config file")
    solve.add_argument("--mode", choices=MODES, help="override the configured mode")
    solve.add_argument("--export-vtk", action="store_true", help="write solution_<iter>.vtk files")
    solve.add_argument("--out", help="output directory (overrides output_dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.export_vtk:
        overrides["export_vtk"] = True
    if args.out:
        overrides["output_dir"] = args.out
    return run(replace(config, **overrides))


__all__ = ["RunConfig", "SCENARIOS", "build_parser", "load_config", "main", "parse_config", "run",
           "validate"]
