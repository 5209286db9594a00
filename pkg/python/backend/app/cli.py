"""
Command-line surface.

    jacobichain build    --family krawtchouk --N 2 --p 0.5
    jacobichain evolve   --family hahn --N 6 --alpha 1 --beta 1 --s 0 --times 0,3.14159 --method all
    jacobichain pst-scan --family dualhahn --N 5 --gamma 0.5 --delta 0.5 --t-min 0 --t-max 12.57 --steps 400
    jacobichain verify   --max-N 16 --seed 7

Exit codes: 0 ok, 1 verification failed, 2 invalid input, 3 route discrepancy above --tol.
CSV numbers carry 12 significant digits; JSON numbers are the shortest
round-trip repr.  Logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from app.config import settings
from app.exceptions import DenominatorPole, InvalidSpec, NonTerminating, OutOfSupport, ZeroScale
from app.models import (
    Command,
    FamilyKind,
    FamilySpec,
    Method,
    MethodChoice,
    OutputFormat,
    RunConfig,
)
from app.services import chain as chain_svc
from app.services import dynamics, polyfam, verify

logger = logging.getLogger("jacobichain.cli")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_DISCREPANCY = 3

EVOLVE_HEADER = ["t", "r", "s", "re_f", "im_f", "abs_f", "method"]
PST_HEADER = ["t_peak", "fidelity", "family", "params"]

_FAMILY_FLAGS = ("N", "K_max", "p", "alpha", "beta", "gamma", "delta", "b", "c")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# ── Parser ────────────────────────────────────────────────────────────────────

def _times(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    family = argparse.ArgumentParser(add_help=False)
    family.add_argument("--family", required=True, choices=[k.value for k in FamilyKind])
    family.add_argument("--N", type=int, help="Chain order (finite families).")
    family.add_argument("--K-max", dest="K_max", type=int, help="Truncation for charlier / meixner.")
    for name in ("p", "alpha", "beta", "gamma", "delta", "b", "c"):
        family.add_argument(f"--{name}", type=float)

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--output", help="Write here instead of stdout.")
    output.add_argument("--format", dest="fmt", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--s", type=int, default=0, help="Sending site.")
    grid.add_argument("--r", type=int, help="Receiving site (default: all for evolve, N for pst-scan).")
    grid.add_argument("--times", type=_times, help="Comma-separated times.")
    grid.add_argument("--t-min", dest="t_min", type=float)
    grid.add_argument("--t-max", dest="t_max", type=float)
    grid.add_argument("--steps", type=int, help="Number of intervals; the grid includes both endpoints.")

    parser = argparse.ArgumentParser(
        prog="jacobichain", description="Jacobi-matrix spin chains and their transfer amplitudes."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser(Command.BUILD.value, parents=[family, output], help="Serialize the chain as JSON.")

    ev = sub.add_parser(Command.EVOLVE.value, parents=[family, grid, output], help="Tabulate f_{r,s}(t).")
    ev.add_argument("--method", choices=[m.value for m in MethodChoice], default=MethodChoice.SPECTRAL.value)
    ev.add_argument("--tol", type=float, default=settings.DISCREPANCY_TOL)

    pst = sub.add_parser(Command.PST_SCAN.value, parents=[family, grid, output], help="Find transfer peaks.")
    pst.add_argument("--threshold", type=float, default=1.0 - 1e-6)

    ver = sub.add_parser(Command.VERIFY.value, parents=[output], help="Run the cross-route check suite.")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--max-N", dest="max_N", type=int, default=16)
    ver.add_argument("--perturb", type=float, default=0.0, help="Add this to J_0 of every oracle chain.")
    ver.add_argument("--cases", type=int, default=20, help="Random instances per family for triple agreement.")
    return parser


def to_run_config(args: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(args).items() if v is not None and k not in _FAMILY_FLAGS + ("family", "cases")}
    if getattr(args, "family", None) is not None:
        spec_fields = {k: getattr(args, k) for k in _FAMILY_FLAGS if getattr(args, k, None) is not None}
        fields["family"] = FamilySpec.build(kind=FamilyKind(args.family), **spec_fields)
    return RunConfig(**fields)


# ── Output ────────────────────────────────────────────────────────────────────

def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        logger.info("[cli] wrote %s", path)
    else:
        sys.stdout.write(text)


def _csv(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _family_label(spec: FamilySpec) -> str:
    size = f"N={spec.N}" if spec.is_finite else f"K_max={spec.K_max}"
    return " ".join([size] + [f"{k}={v!r}" for k, v in spec.params.items()])


# ── Commands ──────────────────────────────────────────────────────────────────

def cmd_build(config: RunConfig) -> int:
    built = chain_svc.build_chain(config.family)
    _emit(chain_svc.chain_to_json(built), config.output)
    return EXIT_OK


def _routes(config: RunConfig) -> list[Method]:
    if config.method != MethodChoice.ALL:
        return [Method(config.method.value)]
    if config.family.is_finite:
        return [Method.SPECTRAL, Method.CLOSED, Method.ORACLE]
    return [Method.CLOSED, Method.ORACLE]


def cmd_evolve(config: RunConfig) -> int:
    spec = polyfam.resolve(config.family)
    times = config.time_grid()
    receivers = [config.r] if config.r is not None else list(range(spec.last_index + 1))
    sites = [(r, config.s) for r in receivers]
    routes = _routes(config)
    grids = {m: dynamics.amplitude_grid(spec, sites, times, m) for m in routes}

    rows: list[dict] = []
    for j, t in enumerate(times):
        for i, (r, s) in enumerate(sites):
            for m in routes:
                f = complex(grids[m].values[i, j])
                rows.append(
                    {"t": t, "r": r, "s": s, "re_f": f.real, "im_f": f.imag, "abs_f": abs(f), "method": m.value}
                )

    if config.fmt == OutputFormat.JSON:
        payload = {"family": spec.kind.value, "params": spec.params, "N": spec.last_index, "rows": rows}
        _emit(_json(payload), config.output)
    else:
        table = [
            [_fmt(row["t"]), str(row["r"]), str(row["s"])]
            + [_fmt(row[k]) for k in ("re_f", "im_f", "abs_f")]
            + [row["method"]]
            for row in rows
        ]
        _emit(_csv(EVOLVE_HEADER, table), config.output)

    if len(routes) > 1:
        worst = 0.0
        for a in routes:
            for b in routes:
                worst = max(worst, float(abs(grids[a].values - grids[b].values).max(initial=0.0)))
        print(f"max discrepancy: {worst:.3e} (tol {config.tol:.3e})", file=sys.stderr)
        if worst > config.tol:
            logger.warning("[cli] route discrepancy %.3e exceeds %.3e", worst, config.tol)
            return EXIT_DISCREPANCY
    return EXIT_OK


def cmd_pst_scan(config: RunConfig) -> int:
    spec = polyfam.resolve(config.family)
    r = config.r if config.r is not None else spec.last_index
    events = dynamics.detect_pst(spec, config.s, r, config.time_grid(), config.threshold)
    label = _family_label(spec)
    if config.fmt == OutputFormat.JSON:
        payload = {
            "family": spec.kind.value,
            "params": label,
            "s": config.s,
            "r": r,
            "events": [{"t_peak": e.t, "fidelity": e.fidelity} for e in events],
        }
        _emit(_json(payload), config.output)
    else:
        _emit(_csv(PST_HEADER, [[_fmt(e.t), _fmt(e.fidelity), spec.kind.value, label] for e in events]), config.output)
    return EXIT_OK


def cmd_verify(config: RunConfig, cases: int = 20) -> int:
    report = verify.run_verify(seed=config.seed, max_N=config.max_N, perturb=config.perturb, cases=cases)
    payload = report.model_dump(mode="json")
    payload["passed"] = report.passed
    _emit(_json(payload), config.output)
    if not report.passed:
        names = ", ".join(c.name for c in report.failed)
        print(f"verification failed: {names}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


_COMMANDS = {
    Command.BUILD: cmd_build,
    Command.EVOLVE: cmd_evolve,
    Command.PST_SCAN: cmd_pst_scan,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        config = to_run_config(args)
        if config.command == Command.VERIFY:
            return cmd_verify(config, cases=args.cases)
        return _COMMANDS[config.command](config)
    except (InvalidSpec, OutOfSupport, NonTerminating, DenominatorPole, ZeroScale, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_exit() -> None:
    """Console-script wrapper."""
    sys.exit(main())
