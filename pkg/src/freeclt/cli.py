"""Command-line front end.

Every subcommand prints a JSON document (or CSV for ``clt-scan --format csv``)
carrying ``"schema": 1``. Failures print ``{"schema": 1, "error": ...}`` on
stderr and exit with the code of the error class.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .breaking import (
    LinearProcessSpec,
    alpha_G,
    build_breaking_graph,
    parse_p_values,
    slope_experiment,
    theorem53_check,
    verify_spectral_representation,
)
from .covariance import CovarianceModel, summability_check
from .diagram import CumulantRequest, cumulant_scan, edge_classes, joint_cumulant
from .errors import ConfigurationError, FreeCLTError
from .oracle import equivalence_grid, oracle_cumulant
from .orthopoly import Basis, FunctionalSeries, expand
from .partitions import (
    Partition,
    RowTable,
    enumerate_classical_diagrams,
    enumerate_free_diagrams,
    enumerate_noncrossing_pairings,
    enumerate_pair_partitions,
)
from .simulate import mc_distribution, rmt_clt_check

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_CODES = """exit codes:
  0  success
  2  usage or configuration error (bad flag, malformed value, precondition violated)
  3  size cap exceeded (enumeration cap, evaluation budget, oracle limits)
  4  hypothesis violation (sigma^2 = 0, non-summable covariance, constant functional)
  5  numeric failure (non-finite values, invalid covariance, engine disagreement)

environment:
  FREECLT_BUDGET  evaluation budget for J_N (default 1e9)
"""

BUILTIN_FUNCTIONS = {
    "x2": lambda x: x**2,
    "x3-2x": lambda x: x**3 - 2 * x,
    "clipsign": lambda x: np.clip(4 * x, -1.0, 1.0),
    "sign": np.sign,
}

SCHEMA = 1
UINT64 = 2**64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if isinstance(text, int):
        return [text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of integers, got {text!r}") from None


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def parse_series(text: str, world: str | None = None, max_deg: int = 10) -> FunctionalSeries:
    """``H2``, ``U3``, ``hermite:0,0,1``, ``chebyshev:0,1`` or ``expand:<fn>``."""
    text = text.strip()
    if len(text) >= 2 and text[0] in "HU" and text[1:].isdigit():
        basis = Basis.HERMITE if text[0] == "H" else Basis.CHEBYSHEV
        series = FunctionalSeries.pure(basis, int(text[1:]))
    elif text.startswith("expand:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_FUNCTIONS:
            raise ConfigurationError(f"unknown builtin function {name!r}; choose from {sorted(BUILTIN_FUNCTIONS)}")
        basis = Basis.for_world(world or "classical")
        series = expand(BUILTIN_FUNCTIONS[name], basis, max_deg)
    elif ":" in text:
        name, coeffs = text.split(":", 1)
        try:
            basis = Basis(name.strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown basis {name!r}") from None
        series = FunctionalSeries.centered(basis, _floats(coeffs))
    else:
        raise ConfigurationError(f"cannot parse series {text!r}")
    if world is not None and Basis.for_world(world) is not series.basis:
        raise ConfigurationError(f"series {text!r} is a {series.basis.value} series, not usable in the {world} world")
    return series


def _seed(v) -> int:
    s = int(v)
    if not 0 <= s < UINT64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {v}")
    return s


def _positive(name, v):
    if v is not None and v <= 0:
        raise ConfigurationError(f"--{name} must be positive, got {v}")
    return v


def _load_config(path: str) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        if p.suffix.lower() == ".toml":
            cfg = tomllib.loads(raw.decode())
        else:
            cfg = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a single JSON/TOML table")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON or TOML file whose keys mirror the flags; flags win")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--budget", type=int, default=None, help="evaluation budget for J_N")

    model = _Parser(add_help=False)
    model.add_argument("--model", default="geometric:0.5",
                       help="geometric:<a>, power:<beta> or tabulated:<r0,r1,...>")

    series = _Parser(add_help=False)
    series.add_argument("--series", default=None,
                        help="H1..Hn, U1..Un, hermite:<c0,c1,...>, chebyshev:<...> or expand:<fn> "
                             f"with fn in {sorted(BUILTIN_FUNCTIONS)}")
    series.add_argument("--max-deg", type=int, default=10, help="truncation degree for expand:<fn>")

    parser = _Parser(prog="freeclt", description="Diagram-formula cumulants and CLT checks.",
                     epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("partitions", parents=[common], help="count or list diagram classes",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--rows", default=None, help="row sizes, e.g. 2,2,2")
    p.add_argument("--class", dest="cls", default="classical",
                   choices=["pairings", "noncrossing", "classical", "free", "free-connected", "edge-classes"])
    p.add_argument("--world", choices=["classical", "free"], default="classical",
                   help="world for --class edge-classes")
    p.add_argument("--list", action="store_true", help="also list the partitions")

    p = sub.add_parser("cumulant", parents=[common, model], help="one joint cumulant",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--degrees", default=None)
    p.add_argument("--times", default=None)
    p.add_argument("--world", choices=["classical", "free"], default="classical")
    p.add_argument("--oracle", action="store_true", help="cross-check against the brute-force oracle")

    p = sub.add_parser("clt-scan", parents=[common, model, series], help="normalized cumulants of S_N",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--world", choices=["classical", "free"], default=None)
    p.add_argument("--N", default="64,128,256,512")
    p.add_argument("--Rmax", type=int, default=4)
    p.add_argument("--method", choices=["auto", "direct", "reduced", "contract"], default="auto")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("mc", parents=[common, model, series], help="classical Monte Carlo",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--reps", type=int, default=10_000)

    p = sub.add_parser("rmt", parents=[common, model, series], help="free random-matrix check",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--bins", type=int, default=0, help="also emit an eigenvalue histogram")

    p = sub.add_parser("breaking", parents=[common, model], help="breaking graphs and spectral checks",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--check53", action="store_const", dest="mode", const="check53")
    mode.add_argument("--alpha", action="store_const", dest="mode", const="alpha")
    mode.add_argument("--spectral", action="store_const", dest="mode", const="spectral")
    mode.add_argument("--slope", action="store_const", dest="mode", const="slope")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--p", nargs="+", default=None, help="k:p pairs, p may be inf")
    p.add_argument("--rows", default="2,2")
    p.add_argument("--partition", default="1-3,2-4", help="blocks as dash-joined elements, e.g. 1-3,2-4")
    p.add_argument("--c", default="1,1", help="linear-process coefficients c_0..c_L")
    p.add_argument("--d", nargs="+", default=["2:1"], help="k:d_k base cumulants")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--j", default="0,1")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--N", default="64,128,256,512,1024")

    p = sub.add_parser("selftest", parents=[common], help="oracle equivalence on the small grid",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--max-total", type=int, default=8)
    p.add_argument("--max-rows", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-10)
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = _Parser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    argv = _strip_config(list(argv))
    if known.config:
        cfg = _load_config(known.config)
        sub_name = cfg.pop("subcommand", None)
        if sub_name and not any(a in _subparsers(parser) for a in argv):
            argv.insert(0, sub_name)
        parser_for = _subparsers(parser)
        name = next((a for a in argv if a in parser_for), None)
        if name is None:
            raise ConfigurationError("no subcommand given")
        target = parser_for[name]
        valid = {a.dest for a in target._actions}
        unknown = set(cfg) - valid
        if unknown:
            raise ConfigurationError(f"unknown config keys for {name}: {sorted(unknown)}")
        target.set_defaults(**cfg)
    args = parser.parse_args(argv)
    if args.subcommand is None:
        raise ConfigurationError("no subcommand given; see --help")
    args.threads = _positive("threads", args.threads) or os.cpu_count() or 1
    _positive("budget", args.budget)
    args.seed = _seed(args.seed)
    return args


def _strip_config(argv: list[str]) -> list[str]:
    # the config is applied as parser defaults, so the flag itself must not reach the real parser
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--config":
            skip = True
        elif not a.startswith("--config="):
            out.append(a)
    return out


def _subparsers(parser) -> dict:
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices
    return {}


def _emit(text: str, out: str | None):
    if out:
        try:
            Path(out).write_text(text, newline="")
        except OSError as exc:
            raise ConfigurationError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def _require(value, flag):
    if value is None:
        raise ConfigurationError(f"{flag} is required")
    return value


def cmd_partitions(args) -> dict:
    rows = _ints(_require(args.rows, "--rows"))
    t = RowTable(tuple(rows))
    doc = {"schema": SCHEMA, "rows": rows, "class": args.cls}
    if args.cls == "edge-classes":
        classes = edge_classes(tuple(rows), args.world)
        doc["world"] = args.world
        doc["count"] = len(classes)
        doc["classes"] = [{"edge_matrix": np.array(k).reshape(len(rows), -1).tolist(), "multiplicity": m}
                          for k, m in classes]
        return doc
    parts = {
        "pairings": lambda: enumerate_pair_partitions(t.total),
        "noncrossing": lambda: enumerate_noncrossing_pairings(t.total),
        "classical": lambda: enumerate_classical_diagrams(t),
        "free": lambda: enumerate_free_diagrams(t, connected_only=False),
        "free-connected": lambda: enumerate_free_diagrams(t, connected_only=True),
    }[args.cls]()
    doc["count"] = len(parts)
    if args.list:
        doc["partitions"] = [p.to_list() for p in parts]
    return doc


def cmd_cumulant(args) -> dict:
    model = CovarianceModel.parse(args.model)
    req = CumulantRequest(tuple(_ints(_require(args.degrees, "--degrees"))),
                          tuple(_ints(_require(args.times, "--times"))), args.world, model)
    value = joint_cumulant(req)
    doc = {"schema": SCHEMA, "world": args.world, "degrees": list(req.degrees), "times": list(req.times),
           "model": model.to_dict(), "value": value}
    if args.oracle:
        ref = oracle_cumulant(req)
        doc["oracle"] = ref
        doc["abs_diff"] = abs(value - ref)
        doc["agree"] = doc["abs_diff"] <= 1e-10 * max(1.0, abs(ref))
    return doc


def _series(args, world=None):
    return parse_series(_require(args.series, "--series"), world, args.max_deg)


def cmd_clt_scan(args) -> str:
    s = _series(args, args.world)
    model = CovarianceModel.parse(args.model)
    N_values = _ints(args.N)
    if not N_values or any(N < 1 for N in N_values):
        raise ConfigurationError("--N needs positive integers")
    if args.Rmax < 2:
        raise ConfigurationError("--Rmax must be at least 2")
    scan = cumulant_scan(s, model, N_values, args.Rmax, method=args.method, budget=args.budget,
                         threads=args.threads)
    if args.format == "csv":
        return scan.to_csv()
    doc = scan.to_json()
    doc["model"] = model.to_dict()
    doc["series"] = s.to_json()
    doc["summability"] = summability_check(s, model)._asdict()
    return _json(doc)


def cmd_mc(args) -> dict:
    s = _series(args, "classical")
    model = CovarianceModel.parse(args.model)
    t0 = time.perf_counter()
    rep = mc_distribution(s, model, args.N, args.reps, seed=args.seed, threads=args.threads)
    doc = rep.to_json()
    doc["model"] = model.to_dict()
    doc["elapsed_s"] = time.perf_counter() - t0
    return doc


def cmd_rmt(args) -> dict:
    s = _series(args, "free")
    model = CovarianceModel.parse(args.model)
    rep = rmt_clt_check(s, model, args.N, args.dim, seed=args.seed)
    doc = rep.to_json()
    doc["model"] = model.to_dict()
    if args.bins:
        centers, density = rep.histogram(args.bins)
        doc["histogram"] = {"centers": centers.tolist(), "density": density.tolist()}
    return doc


def _parse_partition(text: str) -> Partition:
    try:
        blocks = [[int(e) for e in b.split("-")] for b in text.split(",") if b.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse partition {text!r}") from None
    return Partition.from_blocks(blocks)


def cmd_breaking(args) -> dict:
    mode = args.mode or "check53"
    if mode == "check53":
        return theorem53_check(args.m, parse_p_values(_require(args.p, "--p"))).to_json()
    if mode == "alpha":
        t = RowTable(tuple(_ints(args.rows)))
        g = build_breaking_graph(t, _parse_partition(args.partition), parse_p_values(_require(args.p, "--p")))
        res = alpha_G(g, threads=args.threads)
        return {"schema": SCHEMA, "graph": g.to_json(), "alpha_G": res.value, "witness": list(res.witness)}
    if mode == "spectral":
        d = {int(k): float(v) for k, v in (item.split(":", 1) for item in args.d)}
        spec = LinearProcessSpec(tuple(_floats(args.c)), d)
        chk = verify_spectral_representation(spec, args.k, _ints(args.j), args.grid)
        return {"schema": SCHEMA, "k": args.k, "j": _ints(args.j), "grid": args.grid, **chk._asdict()}
    t = RowTable(tuple(_ints(args.rows)))
    p_values = parse_p_values(args.p) if args.p else None
    rep = slope_experiment(t, _parse_partition(args.partition), CovarianceModel.parse(args.model),
                           _ints(args.N), p_values=p_values, budget=args.budget)
    return rep.to_json()


def cmd_selftest(args) -> tuple[dict, int]:
    models = [CovarianceModel.geometric(0.5), CovarianceModel.geometric(0.3)]
    t0 = time.perf_counter()
    res = equivalence_grid(models, args.max_total, args.max_rows)
    ok = res.max_abs_err <= args.tol
    doc = {"schema": SCHEMA, "requests": res.requests, "max_abs_err": res.max_abs_err, "tol": args.tol,
           "passed": ok, "elapsed_s": time.perf_counter() - t0}
    if not ok and res.worst is not None:
        doc["worst"] = {"degrees": list(res.worst.degrees), "times": list(res.worst.times),
                        "world": res.worst.world, "model": res.worst.model.to_dict()}
    return doc, 0 if ok else 5


def run(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        handler = {
            "partitions": cmd_partitions,
            "cumulant": cmd_cumulant,
            "clt-scan": cmd_clt_scan,
            "mc": cmd_mc,
            "rmt": cmd_rmt,
            "breaking": cmd_breaking,
            "selftest": cmd_selftest,
        }[args.subcommand]
        result = handler(args)
        code = 0
        if isinstance(result, tuple):
            result, code = result
        if isinstance(result, dict) and result.get("agree") is False:
            code = 5
        _emit(result if isinstance(result, str) else _json(result), args.out)
        return code
    except FreeCLTError as exc:
        err = {"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.exit_code
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
