"""Command-line front end.

    distbvp check  <file> [--out-json P]
    distbvp solve  <file> --out-csv P --out-json P [--tol --grid --max-iter --damping --force]
    distbvp integrate hk  <f> <a> <b> [--tol --method]
    distbvp integrate hks <g> <u> <a> <b> [--tol]

Problem files are TOML::

    f = "ex41_f"
    g = "gstar"
    u = "heaviside(0.5)"
    beta = 4
    eta = "1/4"          # numbers or exact fractions

    [bounds]
    k = "k41"
    h = "const(1)"
    M = 1

    [options]
    tol = 1e-8
    grid = 1025

Exit codes: 0 ok, 1 condition failed, 2 input error, 3 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import tomli

from . import catalog
from .integrate import IntegrationError, NonConvergenceError, PreconditionError, hk_integrate, hks_integrate
from .operator import BoundData, ProblemSpec
from .regulated import DomainError
from .solver import HypothesisError, SolveOptions, check_hypotheses, jump_points, solve, verify

EXIT_OK, EXIT_CONDITION, EXIT_INPUT, EXIT_NO_CONVERGENCE = 0, 1, 2, 3

CSV_COLUMNS = ("t", "x", "x_left", "x_right", "dx", "dx_left", "dx_right")

_TOP_KEYS = {"f", "g", "u", "beta", "eta", "bounds", "options", "name"}
_BOUND_KEYS = {"k", "h", "M"}
_OPTION_KEYS = {"tol": float, "grid": int, "max_iter": int, "damping": float}


class ProblemFileError(ValueError):
    def __init__(self, message: str, path: str = "<problem>", line: int | None = None, col: int | None = None):
        self.message, self.path, self.line, self.col = message, path, line, col
        where = path if line is None else f"{path}:{line}:{col}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class ProblemFile:
    path: str
    spec: ProblemSpec
    options: SolveOptions
    echo: dict


def _locate(text: str, section: str | None, key: str) -> tuple[int | None, int | None]:
    """1-based (line, column) of the value assigned to ``key`` in ``section``."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[\s*([A-Za-z0-9_.]+)\s*\]", line)
        if head:
            current = head.group(1)
            continue
        m = re.match(rf"\s*{re.escape(key)}\s*=\s*", line)
        if m and current == section:
            return lineno, m.end() + 1
    return None, None


class _Reader:
    def __init__(self, text: str, path: str):
        self.text, self.path = text, path

    def fail(self, message: str, section: str | None, key: str | None):
        line, col = self._where(section, key)
        raise ProblemFileError(message, self.path, line, col)

    def _where(self, section, key):
        if key is None:
            return None, None
        return _locate(self.text, section, key)

    def number(self, table: dict, key: str, section: str | None = None) -> float:
        if key not in table:
            self.fail(f"missing key {key!r}", section, None)
        raw = table[key]
        if isinstance(raw, bool):
            self.fail(f"{key} must be a number", section, key)
        if isinstance(raw, (int, float)):
            value = float(raw)
        elif isinstance(raw, str):
            try:
                value = float(Fraction(raw.strip()))
            except (ValueError, ZeroDivisionError):
                self.fail(f"{key} must be a number or a fraction like \"2/3\", got {raw!r}", section, key)
        else:
            self.fail(f"{key} must be a number", section, key)
        if not math.isfinite(value):
            self.fail(f"{key} must be finite", section, key)
        return value

    def name(self, table: dict, key: str, resolve, section: str | None = None):
        if key not in table:
            self.fail(f"missing key {key!r}", section, None)
        raw = table[key]
        if not isinstance(raw, str):
            self.fail(f"{key} must be a catalog name string", section, key)
        try:
            return resolve(raw)
        except catalog.CatalogError as exc:
            self.fail(str(exc), section, key)

    def unknown_keys(self, table: dict, allowed: set, section: str | None):
        for key in table:
            if key not in allowed:
                self.fail(f"unknown key {key!r}", section, key)


def parse_problem(text: str, path: str = "<problem>") -> ProblemFile:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"\(at line (\d+), column (\d+)\)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ProblemFileError(getattr(exc, "msg", str(exc)), path, line, col) from exc
    rd = _Reader(text, path)
    rd.unknown_keys(doc, _TOP_KEYS, None)

    f = rd.name(doc, "f", catalog.source)
    g = rd.name(doc, "g", catalog.coupling)
    u = rd.name(doc, "u", catalog.regulated)
    beta = rd.number(doc, "beta")
    eta = rd.number(doc, "eta")
    if not 0.0 <= eta <= 1.0:
        rd.fail("eta out of [0,1]", None, "eta")
    echo = {"f": doc["f"], "g": doc["g"], "u": doc["u"], "beta": beta, "eta": eta}

    bounds = None
    if "bounds" in doc:
        table = doc["bounds"]
        if not isinstance(table, dict):
            rd.fail("bounds must be a table", None, "bounds")
        rd.unknown_keys(table, _BOUND_KEYS, "bounds")
        k = rd.name(table, "k", catalog.integrand, "bounds")
        h = rd.name(table, "h", catalog.integrand, "bounds")
        M = rd.number(table, "M", "bounds")
        if M < 0.0:
            rd.fail("M must be non-negative", "bounds", "M")
        bounds = BoundData(k, h, M)
        echo["bounds"] = {"k": table["k"], "h": table["h"], "M": M}

    opts = {}
    table = doc.get("options", {})
    if not isinstance(table, dict):
        rd.fail("options must be a table", None, "options")
    rd.unknown_keys(table, set(_OPTION_KEYS), "options")
    for key, kind in _OPTION_KEYS.items():
        if key not in table:
            continue
        raw = table[key]
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or (kind is int and not isinstance(raw, int)):
            rd.fail(f"{key} must be {'an integer' if kind is int else 'a number'}", "options", key)
        opts[key] = kind(raw)
    try:
        options = SolveOptions(**opts)
    except ValueError as exc:
        rd.fail(str(exc), "options", next(iter(opts), None))

    name = doc.get("name", Path(path).stem)
    try:
        spec = ProblemSpec(f, g, u, beta, eta, bounds, name=str(name))
    except ValueError as exc:
        key = "eta" if "eta" in str(exc) else "beta" if "beta" in str(exc) else "g"
        rd.fail(str(exc), None, key)
    return ProblemFile(path, spec, options, echo)


def load_problem(path: str | Path) -> ProblemFile:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read: {exc.strerror}", path) from exc
    return parse_problem(text, path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


def _dump(doc: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def solution_rows(sol, u_breaks) -> list[tuple[float, ...]]:
    """One row per node; a breakpoint of u gets a left row, the node row and a right row."""
    rows = []
    marks = set(u_breaks)
    for i, t in enumerate(sol.grid):
        xl, xv, xr = sol.x_left[i], sol.x[i], sol.x_right[i]
        dl, dv, dr = sol.dx_left[i], sol.dx[i], sol.dx_right[i]
        if t in marks:
            rows.append((t, xl, xl, xr, dl, dl, dr))
            rows.append((t, xv, xl, xr, dv, dl, dr))
            rows.append((t, xr, xl, xr, dr, dl, dr))
        else:
            rows.append((t, xv, xl, xr, dv, dl, dr))
    return rows


def write_csv(path: str, sol, u_breaks) -> int:
    rows = solution_rows(sol, u_breaks)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows([_fmt(v) for v in row] for row in rows)
    return len(rows)


def _input_error(exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


def cmd_check(args) -> int:
    try:
        problem = load_problem(args.file)
        if problem.spec.bounds is None:
            raise ProblemFileError("check needs a [bounds] table with k, h, M", problem.path)
        report = check_hypotheses(problem.spec, problem.options.quad_tol)
    except (ProblemFileError, IntegrationError) as exc:
        return _input_error(exc)
    doc = report.to_dict()
    doc["input"] = problem.echo
    _dump(doc, args.out_json)
    if not report.condition_ok:
        print(f"condition fails: (|beta|+2)||K|| = {report.smallness:.17g} >= 1", file=sys.stderr)
        return EXIT_CONDITION
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        problem = load_problem(args.file)
        overrides = {k: v for k, v in (("tol", args.tol), ("grid", args.grid), ("max_iter", args.max_iter),
                                       ("damping", args.damping)) if v is not None}
        options = replace(problem.options, **overrides)
    except (ProblemFileError, ValueError) as exc:
        return _input_error(exc)
    try:
        result = solve(problem.spec, options, force=args.force)
    except HypothesisError as exc:
        print(f"error: {exc} (use --force to iterate anyway)", file=sys.stderr)
        return EXIT_CONDITION
    except IntegrationError as exc:
        return _input_error(exc)

    spec, sol = problem.spec, result.solution
    u_breaks = tuple(bp.tau for bp in spec.u.breakpoints)
    rows = write_csv(args.out_csv, sol, u_breaks)
    check = verify(spec, sol, options.tol)
    doc = {
        "input": {**problem.echo, "options": asdict(options), "force": bool(args.force)},
        "converged": result.converged,
        "status": "converged" if result.converged else "no-convergence",
        "iterations": result.iterations,
        "residual": result.residual,
        "bc_residuals": list(result.bc_residuals),
        "norm_x": result.norm_x,
        "within_ball": result.within_ball,
        "damping": result.damping,
        "residual_history": list(result.residual_history),
        "grid_size": int(sol.grid.size),
        "csv_rows": rows,
        "u_breakpoints": list(u_breaks),
        "dx_jump_points": list(jump_points(sol)),
        "dx0": sol.dx0,
        "x0": sol.x0,
        "hypotheses": result.report.to_dict() if result.report is not None else None,
        "verify": {
            "residual": check.residual,
            "bc_residuals": list(check.bc_residuals),
            "dx_jump_points": list(check.dx_jump_points),
            "jumps_match": check.jumps_match,
            "ok": check.ok,
        },
    }
    _dump(doc, args.out_json)
    if not result.converged:
        print(f"no convergence after {result.iterations} iterations; best residual {result.residual:.3g}",
              file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _endpoint(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise catalog.CatalogError(f"bad interval endpoint {text!r}") from exc


def cmd_integrate(args) -> int:
    want = 1 if args.kind == "hk" else 2
    if len(args.operands) != want + 2:
        names = "<f>" if want == 1 else "<g> <u>"
        return _input_error(ValueError(f"usage: integrate {args.kind} {names} <a> <b>"))
    *names, a, b = args.operands
    try:
        a, b = _endpoint(a), _endpoint(b)
        if args.kind == "hk":
            result = hk_integrate(catalog.integrand(names[0]), a, b, args.tol, args.method)
        else:
            if args.method != "auto":
                raise ValueError("--method applies to hk only")
            g, u = catalog.regulated(names[0]), catalog.regulated(names[1])
            result = hks_integrate(g, u, a, b) if args.tol is None else hks_integrate(g, u, a, b, args.tol)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (catalog.CatalogError, DomainError, PreconditionError, ValueError) as exc:
        return _input_error(exc)
    print(f"value: {_fmt(result.value)}")
    print(f"error_estimate: {_fmt(result.error_estimate)}")
    print(f"method: {result.method}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distbvp", description="Three-point distributional BVP toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="hypothesis report and invariant-ball radius")
    p.add_argument("file")
    p.add_argument("--out-json", default=None, help="write the report here instead of stdout")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("solve", help="fixed-point solve; writes solution CSV and report JSON")
    p.add_argument("file")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--force", action="store_true", help="iterate even if the smallness condition fails")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("integrate", help="HK or HKS integral of catalog functions")
    p.add_argument("kind", choices=("hk", "hks"))
    p.add_argument("operands", nargs="+", metavar="name|a|b")
    p.add_argument("--tol", type=float)
    p.add_argument("--method", default="auto", choices=("auto", "antiderivative", "adaptive", "improper-limit"))
    p.set_defaults(run=cmd_integrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.run(args)


if __name__ == "__main__":
    sys.exit(main())
