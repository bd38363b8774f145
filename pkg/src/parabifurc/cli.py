"""Command-line front end.

Every subcommand builds a family from ``--family`` and ``--param`` options,
runs one library operation and writes JSON (reports) or CSV (tables) to
``--out`` or stdout.  Exit codes: 0 success, 2 domain or validation error,
3 numerical failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import ast
import cmath
import math
import operator
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import bifurcation, io, motions, parabolic
from .cycles import continue_branch, find_cycle, find_parabolic_pair, find_symmetric_parabolic
from .errors import DomainError, NumericalError
from .family import REGISTRY, make_family, validate_family
from .transversality import transversality_report

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64
COMMANDS = ("cycle", "transversality", "petals", "motion", "drho", "scan", "windows",
            "events", "continue", "diagram", "validate")
THREADS_ENV = "PARABIFURC_THREADS"

# Seeds used by ``transversality --pitchfork`` when none are given: the
# symmetric period-2 cycle of w sin z near its pitchfork.
PITCHFORK_SEEDS = {"sine-mult": (-2.2, [2.0])}


class UsageError(Exception):
    pass


# --- value parsing -------------------------------------------------------------

_NAMES = {"pi": math.pi, "e": math.e, "j": 1j, "i": 1j, "inf": math.inf}
_FUNCS = {"sqrt": cmath.sqrt, "cos": cmath.cos, "sin": cmath.sin, "exp": cmath.exp, "log": cmath.log}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_number(text: str) -> complex:
    """Evaluate a small arithmetic expression such as ``-0.5``, ``pi/2``, ``1+sqrt(8)`` or ``0.3+0.1j``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise UsageError(f"cannot parse number {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise UsageError(f"cannot parse number {text!r}") from None
    v = complex(ev(tree))
    return complex(v.real, 0.0) if v.imag == 0 else v


def parse_real(text: str) -> float:
    v = parse_number(text)
    if v.imag != 0:
        raise UsageError(f"expected a real number, got {text!r}")
    return v.real


def parse_list(text: str) -> list:
    return [parse_number(p) for p in text.split(",") if p.strip()]


def parse_range(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"expected a range lo:hi, got {text!r}")
    lo, hi = parse_real(parts[0]), parse_real(parts[1])
    if not lo < hi:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


def parse_param(text: str) -> tuple:
    if "=" not in text:
        raise UsageError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), parse_number(v)


# --- configuration ---------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a run depends on; identical configs give identical output bytes."""
    command: str
    family: str = "quad"
    params: dict = field(default_factory=dict)
    newton_tol: float = 1e-12
    class_tol: float = 1e-8
    degeneracy_tol: float = 1e-10
    t_range: Optional[tuple] = None
    grid_n: int = 200
    lambda_eps: float = motions.EPSILON
    w: Optional[complex] = None
    period: int = 1
    seed: Optional[list] = None
    out: Optional[str] = None
    pgm: Optional[str] = None
    height: int = 400
    pitchfork: bool = False
    locate: Optional[float] = None
    flower: bool = False
    alpha: float = parabolic.DEFAULT_ALPHA
    radius: float = 0.05
    kind: str = "speed"
    N: int = 60
    lifts: int = 8
    rho: float = 0.5
    t_end: Optional[float] = None
    burn: int = 900
    keep: int = 100
    n_samples: int = 100
    threads: int = 1

    def validate(self) -> None:
        for name in ("newton_tol", "class_tol", "degeneracy_tol", "lambda_eps"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.grid_n < 2:
            raise DomainError("grid_n must be >= 2")
        if self.period < 1 or self.N < 1 or self.threads < 1:
            raise DomainError("period, N and threads must be >= 1")
        if self.family not in REGISTRY:
            raise DomainError(f"unknown family {self.family!r}; known: {', '.join(sorted(REGISTRY))}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("out", "pgm", "threads")}


_FIELD_PARSERS = {
    "family": str, "newton_tol": parse_real, "class_tol": parse_real, "degeneracy_tol": parse_real,
    "t_range": parse_range, "grid_n": int, "lambda_eps": parse_real, "w": parse_number,
    "period": int, "seed": parse_list, "out": str, "pgm": str, "height": int,
    "pitchfork": lambda s: s.strip().lower() in ("1", "true", "yes"), "locate": parse_real,
    "flower": lambda s: s.strip().lower() in ("1", "true", "yes"), "alpha": parse_real,
    "radius": parse_real, "kind": str, "N": int, "lifts": int, "rho": parse_real,
    "t_end": parse_real, "burn": int, "keep": int, "n_samples": int, "threads": int,
}


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; ``param.<name> = value`` sets family parameters."""
    out, params = {}, {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("param."):
            params[key[6:]] = parse_number(value)
        elif key in _FIELD_PARSERS:
            try:
                out[key] = _FIELD_PARSERS[key](value)
            except ValueError as e:
                raise UsageError(f"{path}:{n}: bad value for {key}: {e}") from None
        else:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
    if params:
        out["params"] = params
    return out


# --- argument parser -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--family", help="builtin family id: " + ", ".join(sorted(REGISTRY)) + " (default quad)")
    g.add_argument("--param", action="append", type=parse_param, metavar="KEY=VALUE",
                   help="family parameter, repeatable (e.g. c=-0.5, w=1+sqrt(8))")
    g.add_argument("--config", help="key = value config file; command-line flags override it")
    g.add_argument("--out", help="output file (default stdout)")
    g.add_argument("--threads", type=int, help=f"worker threads for scan/diagram (default ${THREADS_ENV} or 1)")
    g.add_argument("--newton-tol", dest="newton_tol", type=parse_real, help="Newton residual tolerance (1e-12)")
    g.add_argument("--class-tol", dest="class_tol", type=parse_real, help="multiplier classification tolerance (1e-8)")
    g.add_argument("--degeneracy-tol", dest="degeneracy_tol", type=parse_real,
                   help="degeneracy tolerance for petal coefficients (1e-10)")

    cyc = argparse.ArgumentParser(add_help=False)
    g = cyc.add_argument_group("cycle options")
    g.add_argument("--w", type=parse_number, help="parameter value (default: the family's base value)")
    g.add_argument("--period", type=int, help="cycle period q (default 1)")
    g.add_argument("--seed", type=parse_list, help="comma-separated seed points (e.g. pi/2 or 0.5,-0.5)")

    grid = argparse.ArgumentParser(add_help=False)
    g = grid.add_argument_group("grid options")
    g.add_argument("--t", dest="t_range", type=parse_range, help="parameter range lo:hi")
    g.add_argument("--grid-n", dest="grid_n", type=int, help="number of grid parameters (200)")

    p = _Parser(prog="parabifurc", description="Parabolic cycles, transversality and bifurcations "
                                                "of analytic one-parameter families.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sub.add_parser("cycle", parents=[common, cyc], help="refine a cycle and classify its multiplier")
    s = sub.add_parser("transversality", parents=[common, cyc], help="transversality report of a cycle")
    s.add_argument("--pitchfork", action="store_true", default=None,
                   help="locate the symmetric parabolic cycle of an odd family first")
    s.add_argument("--locate", type=parse_real, default=None,
                   help="locate the parameter where the multiplier equals this value first")
    s = sub.add_parser("petals", parents=[common, cyc], help="petal directions of a parabolic cycle")
    s.add_argument("--locate", type=parse_real, default=None, help="locate multiplier LOCATE first (e.g. 1)")
    s.add_argument("--alpha", type=parse_real, help="cusp exponent (0.5)")
    s.add_argument("--radius", type=parse_real, help="cusp / sampling radius tau (0.05)")
    s.add_argument("--flower", action="store_true", default=None, help="run the sampled flower check")
    s.add_argument("--grid-n", dest="grid_n", type=int, help="flower grid size (101)")
    s.add_argument("--pgm", help="write the membership image of the first cycle point")
    s = sub.add_parser("motion", parents=[common], help="truncated motion and its invariance order")
    s.add_argument("--kind", choices=("speed", "average", "cycle"), help="motion to test (speed)")
    s.add_argument("--N", type=int, help="orbit points (60)")
    s.add_argument("--lifts", type=int, help="lifts to average (8)")
    s.add_argument("--lambda-eps", dest="lambda_eps", type=parse_real, help="radius of the lambda disk (1e-2)")
    s.add_argument("--seed", type=parse_list, help="cycle seed for --kind cycle")
    s.add_argument("--period", type=int, help="cycle period for --kind cycle")
    s = sub.add_parser("drho", parents=[common], help="partial sums of D(rho)")
    s.add_argument("--rho", type=parse_real, help="rho in (0, 1) (0.5)")
    s.add_argument("--N", type=int, help="terms (2000)")
    s = sub.add_parser("scan", parents=[common, grid], help="attractor period and multiplier over a grid (CSV)")
    s.add_argument("--seed", type=parse_list, help="orbit seed (default critical point)")
    s = sub.add_parser("windows", parents=[common, grid], help="attracting windows (JSON)")
    s.add_argument("--n-samples", dest="n_samples", type=int, help="multiplier samples per window (100)")
    s = sub.add_parser("events", parents=[common, grid], help="bifurcations at window edges (JSON)")
    s = sub.add_parser("continue", parents=[common, cyc], help="continue a cycle in the parameter (CSV)")
    s.add_argument("--t-end", dest="t_end", type=parse_real, help="end parameter")
    s = sub.add_parser("diagram", parents=[common, grid], help="bifurcation diagram point cloud (CSV)")
    s.add_argument("--seed", type=parse_list, help="orbit seed (default critical point, pi/2 for sine)")
    s.add_argument("--burn", type=int, help="transient iterates (900)")
    s.add_argument("--keep", type=int, help="iterates kept per parameter (100)")
    s.add_argument("--pgm", help="also write a PGM raster here")
    s.add_argument("--height", type=int, help="raster height in pixels (400)")
    sub.add_parser("validate", parents=[common], help="spot-check the family's declared properties")
    return p


_VALUE_OPTIONS = ("--t", "--seed", "--w", "--param", "--t-end", "--locate")


def _join_negative_values(argv: list) -> list:
    """Turn ``--t -10:10`` into ``--t=-10:10`` so values may start with a minus sign."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and not argv[i + 1].startswith("--"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


COMMAND_DEFAULTS = {"petals": {"grid_n": 101}, "drho": {"N": 2000}}


def make_config(argv: list) -> RunConfig:
    ns = build_parser().parse_args(_join_negative_values(list(argv)))
    values = dict(COMMAND_DEFAULTS.get(ns.command, {}))
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    if "threads" not in values and os.environ.get(THREADS_ENV):
        try:
            values["threads"] = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    for k, v in vars(ns).items():
        if k in ("command", "config", "param") or v is None:
            continue
        values[k] = v
    if ns.param:
        values["params"] = {**values.get("params", {}), **dict(ns.param)}
    cfg = RunConfig(command=ns.command, **values)
    cfg.validate()
    return cfg


# --- commands --------------------------------------------------------------------

def _family(cfg: RunConfig):
    params = {k: (v.real if v.imag == 0 else v) for k, v in cfg.params.items()}
    try:
        fam = make_family(cfg.family, **params)
    except TypeError as e:
        raise DomainError(f"bad parameters for {cfg.family}: {e}") from None
    return fam


def _w(cfg, fam) -> complex:
    return fam.c1 if cfg.w is None else complex(cfg.w)


def _seed_points(cfg, fam, w, q):
    if cfg.seed:
        pts = list(cfg.seed)
        if len(pts) == q:
            return pts
        if len(pts) != 1:
            raise DomainError(f"--seed needs 1 or {q} points, got {len(pts)}")
        z0 = pts[0]
    else:
        z0 = fam.marked_point(w)
    orb = [complex(z0)]
    for _ in range(q - 1):
        orb.append(complex(fam.G(w, orb[-1])))
    return orb


def _cycle(cfg, fam):
    w = _w(cfg, fam)
    return find_cycle(fam, w, cfg.period, _seed_points(cfg, fam, w, cfg.period),
                      tol=cfg.newton_tol, class_tol=cfg.class_tol)


def cmd_cycle(cfg, fam):
    return io.dumps({"family": fam.id, "cycle": _cycle(cfg, fam).to_dict()})


def cmd_transversality(cfg, fam):
    if cfg.pitchfork:
        if not fam.odd:
            raise DomainError(f"--pitchfork needs an odd family; {fam.id} is not odd")
        w0, pts = PITCHFORK_SEEDS.get(fam.id, (None, None))
        w_seed = _w(cfg, fam) if cfg.w is not None or w0 is None else w0
        h = max(1, cfg.period // 2)
        seed = cfg.seed if cfg.seed else (pts if pts is not None else _seed_points(cfg, fam, w_seed, h))
        _, cyc = find_symmetric_parabolic(fam, h, w_seed, seed[:h])
    elif cfg.locate is not None:
        w = _w(cfg, fam)
        _, cyc = find_parabolic_pair(fam, cfg.period, w, _seed_points(cfg, fam, w, cfg.period), cfg.locate)
    else:
        cyc = _cycle(cfg, fam)
    rep = transversality_report(fam, cyc)
    return io.dumps({"family": fam.id, "report": rep.to_dict()})


def cmd_petals(cfg, fam):
    w = _w(cfg, fam)
    seed = _seed_points(cfg, fam, w, cfg.period)
    if cfg.locate is not None:
        _, cyc = find_parabolic_pair(fam, cfg.period, w, seed, cfg.locate, class_tol=cfg.class_tol)
    else:
        cyc = find_cycle(fam, w, cfg.period, seed, tol=cfg.newton_tol, class_tol=max(cfg.class_tol, 1e-7))
    geom = parabolic.petal_geometry(fam, cyc, cfg.alpha, cfg.radius, cfg.degeneracy_tol)
    out = {"family": fam.id, "cycle": cyc.to_dict(), "petals": geom.to_dict()}
    if cfg.flower:
        rep = parabolic.flower_escape_check(fam, cyc, geom, grid_n=cfg.grid_n)
        out["flower"] = rep.to_dict()
        if cfg.pgm:
            io.write_pgm(cfg.pgm, rep.images[0])
    return io.dumps(out)


def cmd_motion(cfg, fam):
    if cfg.kind == "cycle":
        cyc = _cycle(cfg, fam)
        h = motions.cycle_branch_motion(fam, cyc, epsilon=cfg.lambda_eps)
    else:
        h = motions.speed_field_motion(fam, cfg.N, motions.radial_lambdas(cfg.lambda_eps))
    growth = None
    if cfg.kind == "average":
        seq = motions.lift_sequence(fam, h, cfg.lifts)
        growth = motions.spread_growth(seq)
        h = motions.average(seq)
    rep = motions.invariance_order(fam, h)
    out = {"family": fam.id, "kind": cfg.kind, "n_core": h.n_core,
           "basepoint_error": h.basepoint_error(), "order": rep.to_dict()}
    if growth is not None:
        out["lift_growth"] = growth
    return io.dumps(out)


def cmd_drho(cfg, fam):
    return io.dumps({"family": fam.id, "report": motions.d_rho(fam, cfg.rho, cfg.N).to_dict()})


def _t_range(cfg):
    if cfg.t_range is None:
        raise DomainError("--t lo:hi is required")
    return cfg.t_range


def cmd_scan(cfg, fam):
    seed = cfg.seed[0] if cfg.seed else None
    pts = bifurcation.scan(fam, _t_range(cfg), cfg.grid_n, seed=seed, threads=cfg.threads)
    return io.csv_text([["t", "status", "period", "kappa", "points"]] + [p.to_row() for p in pts])


def _windows(cfg, fam):
    pts = bifurcation.scan(fam, _t_range(cfg), cfg.grid_n, threads=cfg.threads)
    return bifurcation.detect_windows(fam, pts, cfg.n_samples)


def cmd_windows(cfg, fam):
    return io.dumps({"family": fam.id, "windows": [w.to_dict() for w in _windows(cfg, fam)]})


def cmd_events(cfg, fam):
    evs = bifurcation.window_events(fam, _windows(cfg, fam))
    return io.dumps({"family": fam.id, "events": [e.to_dict() for e in evs]})


def cmd_continue(cfg, fam):
    if cfg.t_end is None:
        raise DomainError("--t-end is required")
    br = continue_branch(fam, _cycle(cfg, fam), (_w(cfg, fam).real, cfg.t_end), tol=cfg.newton_tol)
    if br.status.value != "ReachedEndpoint":
        sys.stderr.write(f"parabifurc continue: branch stopped with status {br.status.value}\n")
    return io.csv_text(br.csv_rows())


def cmd_diagram(cfg, fam):
    seed = cfg.seed[0] if cfg.seed else None
    d = bifurcation.diagram(fam, _t_range(cfg), cfg.grid_n, seed, cfg.burn, cfg.keep, threads=cfg.threads)
    if cfg.pgm:
        io.write_pgm(cfg.pgm, d.raster(cfg.height))
    return io.csv_text(d.csv_rows())


def cmd_validate(cfg, fam):
    rep = validate_family(fam)
    text = io.dumps(rep.to_dict())
    if not rep.ok:
        raise _ValidationFailed(text)
    return text


class _ValidationFailed(DomainError):
    def __init__(self, text):
        super().__init__("family validation failed")
        self.text = text


HANDLERS = {name: globals()["cmd_" + name] for name in COMMANDS}


def _emit(cfg, text):
    if cfg.out:
        io.write_text(cfg.out, text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand, and return the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = make_config(argv)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        sys.stderr.write(f"parabifurc: usage error: {e}\n")
        return EXIT_USAGE
    except DomainError as e:
        sys.stderr.write(f"parabifurc: invalid configuration: {e}\n")
        return EXIT_DOMAIN
    context = f"family={cfg.family} params={ {k: str(v) for k, v in cfg.params.items()} }"
    try:
        fam = _family(cfg)
        text = HANDLERS[cfg.command](cfg, fam)
    except _ValidationFailed as e:
        _emit(cfg, e.text)
        sys.stderr.write(f"parabifurc {cfg.command}: {e} ({context})\n")
        return EXIT_DOMAIN
    except DomainError as e:
        sys.stderr.write(f"parabifurc {cfg.command}: {type(e).__name__}: {e} ({context})\n")
        return EXIT_DOMAIN
    except NumericalError as e:
        sys.stderr.write(f"parabifurc {cfg.command}: {type(e).__name__}: {e} ({context})\n")
        return EXIT_NUMERICAL
    _emit(cfg, text)
    return EXIT_OK


def reference_page() -> str:
    """Markdown reference of every subcommand's options, generated from the parser.

    Help text is wrapped at a fixed width so the page does not depend on the terminal.
    """
    saved = os.environ.get("COLUMNS")
    os.environ["COLUMNS"] = str(REFERENCE_WIDTH)
    try:
        return _reference_page()
    finally:
        if saved is None:
            del os.environ["COLUMNS"]
        else:
            os.environ["COLUMNS"] = saved


REFERENCE_WIDTH = 100


def _reference_page() -> str:
    p = build_parser()
    parts = ["# parabifurc command reference", "",
             "Generated from the argument parser; regenerate with "
             "`python3 -c \"from parabifurc.cli import reference_page; print(reference_page(), end='')\"`.", "",
             "```", p.format_help().rstrip(), "```", ""]
    sub = next(a for a in p._actions if isinstance(a, argparse._SubParsersAction))
    for name in COMMANDS:
        parts += [f"## {name}", "", "```", sub.choices[name].format_help().rstrip(), "```", ""]
    return "\n".join(parts)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
