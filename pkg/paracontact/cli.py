"""Command-line driver: check, induce, gauge, family, examples.

Exit codes: 0 when every requested check passes, 1 when a check (or a
gauge precondition) fails, 2 on usage, I/O, parse or config errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .config import RunConfig, build_run_config
from .errors import GaugeError, NotJTangentError, ParacontactError
from .exprlang import ImmersionSpec, format_immersion, parse_immersion
from .families import BUILTINS, builtin_claims, builtin_example, classification_family, parse_family_params
from .gauge import GaugeChange, apply_gauge, eta_parallel_gauge, full_parallel_gauge
from .paraframe import frame_at, induced_at, paracontact_at
from .tensorcalc import make_grid
from .verify import apply_claims, run_suite

logger = logging.getLogger("paracontact")


class UsageError(ParacontactError):
    pass


# ──────────────────────────────────────────────────────────────────
# Argument helpers
# ──────────────────────────────────────────────────────────────────


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses, so ``f(a, b)`` stays whole."""
    parts: list[str] = []
    current: list[str] = []
    depth = 0
    for c in text:
        if c == "(":
            depth += 1
        elif c == ")":
            depth = max(depth - 1, 0)
        elif c == sep and depth == 0:
            parts.append("".join(current).strip())
            current = []
            continue
        current.append(c)
    parts.append("".join(current).strip())
    return [p for p in parts if p]


def parse_point(text: str, m: int) -> np.ndarray:
    try:
        u = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"--point must be comma-separated numbers, got {text!r}")
    if u.size != m:
        raise UsageError(f"--point needs {m} coordinates, got {u.size}")
    return u


def load_spec(source: str | None, builtin: str | None) -> ImmersionSpec:
    if builtin:
        return builtin_example(builtin)
    if not source:
        raise UsageError("give an immersion file or --builtin NAME")
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {source}: {exc.strerror or exc}")
    return parse_immersion(text, name=Path(source).stem)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# ──────────────────────────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────────────────────────


def cmd_check(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = load_spec(cfg.source, cfg.builtin)
    grid = make_grid(spec, cfg.grid, cfg.seed)
    report = run_suite(spec, grid, cfg.tolerances, threads=cfg.threads)
    if cfg.builtin:
        report = apply_claims(report, builtin_claims(cfg.builtin))

    if cfg.report_format in ("text", "both"):
        sys.stdout.write(report.format_text())
    if cfg.report_format in ("json", "both") and not cfg.output:
        sys.stdout.write(report.to_json())
    if cfg.output:
        Path(cfg.output).write_text(report.to_json())
    return 0 if report.passed else 1


def _tensor_text(name: str, value) -> str:
    arr = np.asarray(value)
    body = np.array2string(arr, precision=12, max_line_width=100, suppress_small=True)
    return f"{name} =\n{body}\n"


def cmd_induce(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = load_spec(cfg.source, cfg.builtin)
    u = parse_point(args.point, spec.m)
    frame = frame_at(spec, u, cfg.tolerances)
    objs = induced_at(frame)
    tensors = {"Gamma": objs.Gamma, "h": objs.h, "S": objs.S, "tau": objs.tau}
    try:
        pc = paracontact_at(frame, cfg.tolerances)
        tensors.update({"xi": pc.xi, "eta": pc.eta, "phi": pc.phi})
    except NotJTangentError as exc:
        logger.warning("%s; ξ, η, φ omitted", exc)

    if cfg.report_format == "json":
        payload = {
            "spec": spec.name,
            "point": u.tolist(),
            "residual": objs.residual,
            **{k: np.asarray(v).tolist() for k, v in tensors.items()},
        }
        _emit(json.dumps(payload, indent=2) + "\n", cfg.output)
    else:
        head = f"spec: {spec.name}  u = {u.tolist()}  gauss residual {objs.residual!r}\n"
        _emit(head + "".join(_tensor_text(k, v) for k, v in tensors.items()), cfg.output)
    return 0


def cmd_gauge(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = load_spec(cfg.source, cfg.builtin)
    if args.eta_normalize:
        out = eta_parallel_gauge(spec, cfg.tolerances, seed=cfg.seed)
    elif args.full_parallel:
        out = full_parallel_gauge(spec, cfg.panels, cfg.tolerances, seed=cfg.seed)
    else:
        if args.z is None:
            raise UsageError("--phi/--z gauge needs --z with one component per variable")
        g = GaugeChange.parse(args.phi, split_top_level(args.z), spec)
        out = apply_gauge(spec, g)
    _emit(format_immersion(out), cfg.output)
    return 0


def cmd_family(cfg: RunConfig, args: argparse.Namespace) -> int:
    params = parse_family_params(args.n, args.b, args.v, args.alpha)
    spec = classification_family(params, tol=cfg.tolerances)
    _emit(format_immersion(spec), cfg.output)
    return 0


def cmd_examples(cfg: RunConfig, args: argparse.Namespace) -> int:
    width = max(len(name) for name in BUILTINS)
    for name, b in BUILTINS.items():
        sys.stdout.write(f"{name.ljust(width)}  {b.anchor}\n")
    return 0


COMMANDS = {
    "check": cmd_check,
    "induce": cmd_induce,
    "gauge": cmd_gauge,
    "family": cmd_family,
    "examples": cmd_examples,
}


# ──────────────────────────────────────────────────────────────────
# Parser
# ──────────────────────────────────────────────────────────────────


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("source", nargs="?", help="immersion file")
    p.add_argument("--builtin", metavar="NAME", help="use a built-in example instead of a file")


EPILOG = """\
commands and their flags:
  check    [SOURCE | --builtin NAME] [--grid N] [--seed N] [--tol-alg TOL]
           [--tol-fd TOL] [--json PATH] [--format text|json|both]
  induce   [SOURCE | --builtin NAME] --point V1,...,Vm [--format text|json]
           [--out PATH]
  gauge    [SOURCE | --builtin NAME] [--phi EXPR --z Z1,...,Zm | --eta-normalize
           | --full-parallel [--panels N]] [--seed N] [--out PATH]
  family   --n N --b B1;...;B2n --v V [--alpha EXPR] [--out PATH]
  examples

Run 'paracontact COMMAND --help' for details on one command.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paracontact",
        description="Verify induced almost paracontact structures on affine hypersurfaces.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run the full verification suite")
    _add_source(check)
    check.add_argument("--grid", type=int, help="number of sample points (default 50)")
    check.add_argument("--seed", type=int, help="grid seed (default 0)")
    check.add_argument("--tol-alg", type=float, help="tolerance for jet-exact residuals")
    check.add_argument("--tol-fd", type=float, help="tolerance for finite-difference residuals")
    check.add_argument("--json", metavar="PATH", dest="output", help="write the JSON report here")
    check.add_argument("--format", choices=("text", "json", "both"), dest="report_format")

    induce = sub.add_parser("induce", help="print Γ, h, S, τ, ξ, η, φ at a point")
    _add_source(induce)
    induce.add_argument(
        "--point", required=True, help="v1,...,v_{2n+1} (use --point=-1,... for a leading minus)"
    )
    induce.add_argument("--format", choices=("text", "json"), dest="report_format")
    induce.add_argument("--out", dest="output", metavar="PATH")

    gauge = sub.add_parser("gauge", help="emit a gauged immersion file")
    _add_source(gauge)
    mode = gauge.add_mutually_exclusive_group()
    mode.add_argument("--phi", default="1", help="scale factor Φ (default 1)")
    mode.add_argument("--eta-normalize", action="store_true", help="gauge so that ξ = ∂_y")
    mode.add_argument("--full-parallel", action="store_true", help="gauge to ∇φ = ∇η = ∇ξ = 0")
    gauge.add_argument("--z", help="tangent shift Z, comma-separated components")
    gauge.add_argument("--panels", type=int, help="quadrature panels for --full-parallel")
    gauge.add_argument("--seed", type=int)
    gauge.add_argument("--out", dest="output", metavar="PATH")

    family = sub.add_parser("family", help="emit a classification-family immersion")
    family.add_argument("--n", type=int, required=True)
    family.add_argument("--b", required=True, help="eigenvectors b_1;...;b_2n, each comma-separated")
    family.add_argument("--v", required=True, help="the vector v, comma-separated")
    family.add_argument("--alpha", default="y", help="α(y) (default y)")
    family.add_argument("--out", dest="output", metavar="PATH")

    sub.add_parser("examples", help="list built-in examples")
    return parser


def _configure_logging(verbose: bool) -> None:
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
    else:
        # run() may be called repeatedly with sys.stderr swapped (and the old one
        # closed) in between; setStream() would flush the closed stream
        for handler in logger.handlers:
            if isinstance(handler, logging.StreamHandler):
                handler.stream = sys.stderr
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _run_config(args: argparse.Namespace) -> RunConfig:
    return build_run_config(
        args.command,
        source=getattr(args, "source", None),
        builtin=getattr(args, "builtin", None),
        grid=getattr(args, "grid", None),
        seed=getattr(args, "seed", None),
        tol_alg=getattr(args, "tol_alg", None),
        tol_fd=getattr(args, "tol_fd", None),
        panels=getattr(args, "panels", None),
        output=getattr(args, "output", None),
        report_format=getattr(args, "report_format", None),
    )


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)

    try:
        cfg = _run_config(args)
        return COMMANDS[args.command](cfg, args)
    except GaugeError as exc:
        sys.stderr.write(f"Error: {exc}\n")
        for key, value in exc.diagnostics.items():
            sys.stderr.write(f"  {key}: {value!r}\n")
        return 1
    except ParacontactError as exc:
        sys.stderr.write(f"Error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"Error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
