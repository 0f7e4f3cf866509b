"""Command-line front end.

Exit codes: 0 ok, 1 usage or parse error, 2 inconsistent boundary
condition, 3 non-unitary matrix, 4 root-count mismatch.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import sys

import numpy as np

from .boundary import (PRESETS, bc_from_json, bc_to_json, cayley, classify,
                       factor_u1_su4, haar_sample, matrix_from_json, matrix_to_json,
                       psd_margin)
from .energy import EnergyParams, regularized_energy
from .errors import (CasimirPlatesError, CountMismatch, InconsistentBoundaryCondition,
                     NonUnitaryResult, SpectrumContainsPlusMinusOne)
from .roots import ScanOptions, scan_roots
from .spectral import SpectralContext, closed_form, h_direct

EXIT_OK, EXIT_USAGE, EXIT_INCONSISTENT, EXIT_NON_UNITARY, EXIT_COUNT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved here
    def error(self, message):
        raise UsageError(message)


# -- value parsing ---------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Evaluate a real arithmetic expression that may use ``pi``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression: {text!r}")
    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_grid(text: str) -> list[float]:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range grid must be start:stop:num")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        num = int(parts[2])
        if num < 1:
            raise ValueError("grid needs at least one point")
        return [float(x) for x in np.linspace(start, stop, num)]
    values = [parse_number(t) for t in text.split(",") if t.strip()]
    if not values:
        raise ValueError("empty grid")
    return values


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        return float("%.17g" % x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def render_table(columns, rows, fmt_name, extra=None) -> str:
    """CSV with a header row, or JSON ``{"rows": [...]}`` plus extras."""
    if fmt_name == "json":
        doc = {"rows": [dict(zip(columns, r)) for r in rows]}
        doc.update(extra or {})
        return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    for key, value in (extra or {}).items():
        w.writerow([key, fmt(value)])
    return buf.getvalue()


def _emit(text: str, args):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- boundary-condition source ---------------------------------------------

def _preset_params(args, name):
    params = {}
    wanted = PRESETS[name].params
    if "alpha" in wanted and args.alpha is not None:
        params["alpha"] = args.alpha
    if "beta" in wanted and args.beta is not None:
        params["beta"] = args.beta
    if args.thetas is not None:
        params["thetas"] = parse_grid(args.thetas)
    return params


def _source_count(args) -> int:
    return sum(x is not None for x in (args.preset, args.matrix_file, args.input))


def load_bc(args, *, alpha=None):
    """Boundary condition from exactly one of --preset, --matrix-file,
    --input, or (alone) --seed for a Haar sample."""
    n = _source_count(args)
    if n > 1:
        raise UsageError("give exactly one boundary-condition source")
    if n == 0:
        if args.seed is None:
            raise UsageError("no boundary condition: use --preset, --matrix-file, --input or --seed")
        return haar_sample(args.seed)
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}")
        params = _preset_params(args, args.preset)
        if alpha is not None:
            params["alpha"] = alpha
        obj = {"preset": args.preset, "params": params}
    else:
        if args.matrix_file is not None:
            with open(args.matrix_file, encoding="utf-8") as fh:
                obj = json.load(fh)
        else:
            obj = json.loads(args.input)
        if not isinstance(obj, dict):
            raise UsageError("boundary-condition JSON must be an object")
    return bc_from_json(obj, reunitarize=args.reunitarize)


def _raw_matrix(args):
    """The input matrix without the unitarity gate, for validate reports."""
    if args.matrix_file is not None:
        with open(args.matrix_file, encoding="utf-8") as fh:
            obj = json.load(fh)
    elif args.input is not None:
        obj = json.loads(args.input)
    else:
        return None
    return matrix_from_json(obj["matrix"]) if isinstance(obj, dict) and "matrix" in obj else None


def _exit_for(bc) -> int:
    return EXIT_OK if bc.classification.is_consistent else EXIT_INCONSISTENT


def _energy_params(args, L=None, eps=None) -> EnergyParams:
    eps = args.heat_eps if eps is None else eps
    if eps is None:
        raise UsageError("--heat-eps is required")
    return EnergyParams(L=args.L if L is None else L, a=args.a, heat_epsilon=eps,
                        m=args.mass, tail_tol=args.tail_tol,
                        include_n0=args.include_n0, include_k0=args.include_k0)


# -- commands --------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        bc = load_bc(args)
    except NonUnitaryResult as exc:
        u = _raw_matrix(args)
        phases, cls = classify(u)
        report = {"label": "custom", "classification": cls.kind.value,
                  "witness": cls.witness, "message": str(exc),
                  "eigenphases": list(phases.thetas), "residuals": list(phases.residuals),
                  "matrix": matrix_to_json(u)}
        _emit(_render_report(report, args.format), args)
        return EXIT_NON_UNITARY
    try:
        cayley(bc.u)
        has_cayley, margin = True, psd_margin(bc.u)
    except SpectrumContainsPlusMinusOne:
        has_cayley, margin = False, None
    phase, _ = factor_u1_su4(bc.u)
    cls = bc.classification
    report = {
        "label": bc.label,
        "classification": cls.kind.value,
        "witness": cls.witness,
        "eigenphases": list(bc.eigenphases.thetas),
        "residuals": list(bc.eigenphases.residuals),
        "cayley_available": has_cayley,
        "cayley_min_eigenvalue": margin,
        "u1_phase": phase,
        "source": bc_to_json(bc),
        "matrix": matrix_to_json(bc.u),
    }
    _emit(_render_report(report, args.format), args)
    return _exit_for(bc)


def _render_report(report, fmt_name) -> str:
    if fmt_name == "json":
        return json.dumps(_jsonable(report), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    for key, value in report.items():
        if key in ("matrix", "source"):
            w.writerow([key, json.dumps(_jsonable(value))])
        elif isinstance(value, list):
            for i, v in enumerate(value, 1):
                w.writerow([f"{key}[{i}]", fmt(v)])
        else:
            w.writerow([key, "" if value is None else fmt(value)])
    return buf.getvalue()


def cmd_eval(args) -> int:
    bc = load_bc(args)
    if args.grid is None:
        raise UsageError("--grid is required")
    ks = np.array(parse_grid(args.grid))
    h = np.atleast_1d(h_direct(SpectralContext(bc, args.L), ks))
    columns = ["k", "re_h", "im_h", "abs_h"]
    rows = [[float(k), float(v.real), float(v.imag), float(abs(v))] for k, v in zip(ks, h)]
    if args.compare == "closed_form":
        if bc.label not in PRESETS:
            raise UsageError("--compare closed_form needs a preset boundary condition")
        cf = np.atleast_1d(closed_form(bc.label, dict(bc.params), ks, args.L))
        columns.append("abs_diff_closed_form")
        for r, v, c in zip(rows, h, cf):
            r.append(float(abs(v - c)))
    _emit(render_table(columns, rows, args.format), args)
    return EXIT_OK


def cmd_roots(args) -> int:
    bc = load_bc(args)
    if args.k_max is None or args.k_max <= 0:
        raise UsageError("--k-max must be positive")
    opts = ScanOptions(k_min=args.k_min, include_k0=args.include_k0)
    code = EXIT_OK
    try:
        report = scan_roots(SpectralContext(bc, args.L), args.k_max, opts)
    except CountMismatch as exc:
        report, code = exc.report, EXIT_COUNT
        print(f"error: {exc}", file=sys.stderr)
    rows = [[r.k, r.multiplicity, r.residual, r.method] for r in report.roots]
    extra = {"winding_total": report.winding_total, "consistent": report.consistent}
    _emit(render_table(["k", "multiplicity", "residual", "method"], rows, args.format, extra),
          args)
    return code


_ENERGY_COLUMNS = ["L", "energy", "tail_bound", "modes_used", "n_max", "k_count"]


def cmd_energy(args) -> int:
    bc = load_bc(args)
    if not bc.classification.is_consistent and not args.allow_inconsistent:
        print(f"error: boundary condition is {bc.classification.kind.value}; "
              "no energy computed", file=sys.stderr)
        return EXIT_INCONSISTENT
    p = _energy_params(args)
    res = regularized_energy(SpectralContext(bc, args.L), p,
                             allow_inconsistent=args.allow_inconsistent)
    row = [args.L, res.value, res.tail_bound, res.modes_used, res.n_max_used, res.k_count_used]
    _emit(render_table(_ENERGY_COLUMNS, [row], args.format), args)
    return EXIT_OK


def cmd_scan(args) -> int:
    if args.grid is None:
        raise UsageError("--grid is required for scan")
    values = parse_grid(args.grid)
    if args.axis == "alpha" and args.preset is None:
        raise UsageError("--axis alpha needs a preset with an alpha parameter")
    rows, code = [], EXIT_OK
    bc = None if args.axis == "alpha" else load_bc(args)
    for v in values:
        if args.axis == "alpha":
            point_bc = load_bc(args, alpha=v)
            L, eps = args.L, None
        else:
            point_bc = bc
            L, eps = (v, None) if args.axis == "L" else (args.L, v)
        if not point_bc.classification.is_consistent and not args.allow_inconsistent:
            rows.append([v, None, None, None, point_bc.classification.kind.value])
            code = EXIT_INCONSISTENT
            continue
        p = _energy_params(args, L=L, eps=eps)
        res = regularized_energy(SpectralContext(point_bc, L), p,
                                 allow_inconsistent=args.allow_inconsistent)
        rows.append([v, res.value, res.tail_bound, res.modes_used, "ok"])
    rows = [[("" if x is None else x) for x in r] for r in rows]
    _emit(render_table([args.axis, "energy", "tail_bound", "modes_used", "status"],
                       rows, args.format), args)
    return code


def catalogue_entries(family=None) -> list[dict]:
    names = sorted(PRESETS) if family is None else [family]
    out = []
    for name in names:
        spec = PRESETS[name]
        out.append({"preset": name, "params": {p: 0.0 for p in spec.params},
                    "description": spec.description, "closed_form": spec.closed_form})
    return out


def cmd_catalogue(args) -> int:
    if args.family is not None and args.family not in PRESETS:
        raise UsageError(f"unknown family {args.family!r}")
    entries = catalogue_entries(args.family)
    if args.json or args.format == "json":
        text = json.dumps(entries, indent=2) + "\n"
    else:
        lines = []
        for e in entries:
            params = ", ".join(e["params"]) or "-"
            lines.append(f"{e['preset']}  (parameters: {params})\n"
                         f"    {e['description']}\n    {e['closed_form']}\n")
        text = "".join(lines)
    _emit(text, args)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("boundary condition")
    g.add_argument("--preset", help="catalogue family name")
    g.add_argument("--alpha", type=parse_number)
    g.add_argument("--beta", type=parse_number)
    g.add_argument("--thetas", help="four comma-separated phases for diagonal families")
    g.add_argument("--matrix-file", help="JSON file with a 'matrix' or 'preset' entry")
    g.add_argument("--input", help="inline boundary-condition JSON")
    g.add_argument("--seed", type=int, help="Haar sample seed (used when no other source)")
    g.add_argument("--reunitarize", action="store_true",
                   help="orthonormalize an input matrix before validation")
    g = common.add_argument_group("physics")
    g.add_argument("--L", type=parse_number, default=1.0, help="plate separation")
    g.add_argument("--a", type=parse_number, default=1.0, help="lattice period")
    g.add_argument("--mass", type=parse_number, default=0.0)
    g.add_argument("--heat-eps", type=parse_number, help="heat-kernel regulator")
    g.add_argument("--tail-tol", type=parse_number, default=1e-10)
    g.add_argument("--k-max", type=parse_number)
    g.add_argument("--k-min", type=parse_number, default=1e-6)
    g.add_argument("--grid", help="start:stop:num or comma list; 'pi' allowed")
    g.add_argument("--include-n0", dest="include_n0", action="store_true", default=True)
    g.add_argument("--exclude-n0", dest="include_n0", action="store_false")
    g.add_argument("--include-k0", action="store_true")
    g.add_argument("--allow-inconsistent", action="store_true",
                   help="compute energies for inconsistent boundary conditions anyway")
    g = common.add_argument_group("output")
    g.add_argument("--output", help="write to this file instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="casimir-plates",
                     description="Boundary conditions, spectral functions, roots and "
                                 "regularized Casimir energies for two plates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="classify a boundary condition")
    p = sub.add_parser("eval", parents=[common], help="spectral function on a k grid")
    p.add_argument("--compare", choices=("closed_form",))
    sub.add_parser("roots", parents=[common], help="real zeros with multiplicity")
    sub.add_parser("energy", parents=[common], help="regularized vacuum energy")
    p = sub.add_parser("scan", parents=[common], help="energy along a parameter axis")
    p.add_argument("--axis", choices=("L", "alpha", "eps"), default="L")
    p = sub.add_parser("catalogue", parents=[common], help="list preset families")
    p.add_argument("--family")
    p.add_argument("--json", action="store_true")
    return parser


_COMMANDS = {"validate": cmd_validate, "eval": cmd_eval, "roots": cmd_roots,
             "energy": cmd_energy, "scan": cmd_scan, "catalogue": cmd_catalogue}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonUnitaryResult as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_UNITARY
    except InconsistentBoundaryCondition as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (CasimirPlatesError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
