"""Command-line entry point: ``spatialmix <subcommand> ...``.

Exit codes: 0 success, 2 a tolerance or convergence check failed, 3 bad input.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .branching import build_matrix, search_orders, spectral_radius, write_bm_text
from .capacity import DEFAULT_T_MAX, estimate_capacity
from .certify import certify, gamma
from .exactcount import CountResult, InfeasibleFixing, RegionTooLarge, count
from .lattice import DEFAULT_ORDER_SPEC, Constraint, NeighborOrder, induced_region
from .nakdynamics import F1_hat, F2_hat, iterate_gap, jacobian, perron_2x2, solve_fixed_point
from .sawtree import UncutPath, build_saw_tree, evaluate_ratios, graph_marginal, probability_from_ratio

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_INPUT = 3

SIG_DIGITS = 10


class InputError(Exception):
    pass


# ---- emission -------------------------------------------------------------


def _format(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return json.dumps(str(v))
        return format(v, f".{SIG_DIGITS}g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return _format(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_format(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_format(v) for v in value) + "]"
    if isinstance(value, np.ndarray):
        return _format(value.tolist())
    raise TypeError(f"cannot emit {type(value).__name__}")


def to_record(result: Any) -> Any:
    if isinstance(result, CountResult):
        return {"count": str(result.count), "log2count": result.log2count}
    if hasattr(result, "as_dict"):
        return result.as_dict()
    return result


def emit(result: Any, fmt: str = "json") -> bytes:
    """Serialise with stable key order and 10 significant digits."""
    if fmt == "json":
        return _format(to_record(result)).encode()
    if fmt == "bm-text":
        return write_bm_text(result).encode()
    if fmt == "csv":
        rows = to_record(result)
        buf = io.StringIO()
        if rows:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(list(rows[0].keys()))
            for row in rows:
                writer.writerow([_csv_cell(v) for v in row.values()])
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {fmt!r}")


def _csv_cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{SIG_DIGITS}g")
    return str(v)


def write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---- manifest -------------------------------------------------------------


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    versions: dict = field(default_factory=lambda: {
        "spatialmix": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    })
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)

    @property
    def hash(self) -> str:
        # wall time and outputs are excluded so the hash identifies the inputs
        key = json.dumps([self.subcommand, self.parameters, self.versions], sort_keys=True, default=str)
        return hashlib.sha256(key.encode()).hexdigest()

    def as_dict(self) -> dict:
        return {
            "hash": self.hash,
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "versions": self.versions,
            "wallTime": self.wall_time,
            "outputs": self.outputs,
        }


def _out(data: bytes) -> None:
    sys.stdout.write(data.decode() + "\n")


# ---- subcommands ----------------------------------------------------------


def _order(cons: Constraint, spec: Optional[str]) -> NeighborOrder:
    return NeighborOrder.from_sequence(cons, spec or DEFAULT_ORDER_SPEC)


def _load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def cmd_count(args: argparse.Namespace) -> int:
    cons = Constraint.parse(args.cons)
    region = induced_region(cons, args.m, args.n)
    fixed = {}
    if args.fix:
        # [[i, j, state], ...]
        for entry in _load_json(args.fix):
            i, j, s = entry
            fixed[(int(i), int(j))] = int(s)
    _out(emit(count(region, fixed)))
    return EXIT_OK


def _parse_graph(data: dict) -> tuple[dict, dict]:
    adj: dict = {}
    for v in data.get("vertices", []):
        adj.setdefault(v, [])
    for u, v in data.get("edges", []):
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    fixing = {}
    for k, s in (data.get("fixing") or {}).items():
        v = int(k) if isinstance(k, str) and k.lstrip("-").isdigit() else k
        fixing[v] = int(s)
    return adj, fixing


def cmd_saw_check(args: argparse.Namespace) -> int:
    adj, fixing = _parse_graph(_load_json(args.graph))
    if args.root not in adj:
        raise InputError(f"root {args.root} is not a vertex of the graph")
    tree = build_saw_tree(adj, args.root, depth_cap=args.depth)
    p_tree = probability_from_ratio(evaluate_ratios(tree, fixing=fixing))
    if args.root in fixing:
        p_tree = 1.0 if fixing[args.root] == 0 else 0.0
    p_graph = graph_marginal(adj, args.root, fixing)
    diff = abs(p_graph - p_tree)
    _out(emit({"pGraph": p_graph, "pTree": p_tree, "diff": diff, "treeNodes": len(tree)}))
    return EXIT_OK if diff <= 1e-12 else EXIT_TOLERANCE


def cmd_bm(args: argparse.Namespace) -> int:
    cons = Constraint.parse(args.cons)
    order = _order(cons, args.order_spec) if args.order else None
    bm = build_matrix(cons, args.l, apply_order=args.order, order=order)
    spec = spectral_radius(bm)
    name = f"{cons.value}_l{args.l}_{'ord' if args.order else 'unord'}.bm"
    path = Path(args.out_dir) / name
    write_atomic(path, emit(bm, "bm-text"))
    manifest = RunManifest("bm", {"cons": cons.value, "l": args.l, "order": bm.order.spec() if bm.order else None})
    manifest.outputs.append(str(path))
    write_atomic(path.with_suffix(".manifest.json"), emit(manifest))
    _out(emit({
        "ntypes": bm.ntypes,
        "ntypesReachable": bm.ntypes_reachable,
        "lambdaStar": spec.lambda_star,
        "residual": spec.residual,
        "file": str(path),
        "manifest": manifest.hash,
    }))
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    cons = Constraint.parse(args.cons)
    order = _order(cons, args.order_spec) if args.order else None
    _out(emit(certify(cons, args.l, ordered=args.order, order=order, margin=args.margin)))
    return EXIT_OK


def cmd_capacity(args: argparse.Namespace) -> int:
    est = estimate_capacity(args.cons, args.eps, args.t_max)
    _out(emit(est))
    return EXIT_OK if est.converged else EXIT_TOLERANCE


def cmd_nak_gap(args: argparse.Namespace) -> int:
    gaps = iterate_gap(args.depth, args.root)
    if args.csv:
        rows = [{"depth": k + 1, "gap": g} for k, g in enumerate(gaps)]
        write_atomic(Path(args.csv), emit(rows, "csv"))
    _out(emit({"depth": args.depth, "root": args.root, "gap": gaps[-1]}))
    return EXIT_OK


def cmd_nak_fixedpoint(args: argparse.Namespace) -> int:
    _out(emit(solve_fixed_point()))
    return EXIT_OK


# ---- reproduce ------------------------------------------------------------

TABLE_TARGETS = [f"table{k}" for k in range(1, 7)]
TARGETS = TABLE_TARGETS + ["fig4", "gamma", "nak-fixedpoint"]


def load_reference() -> dict:
    text = resources.files("spatialmix").joinpath("data/reference_values.json").read_text()
    return json.loads(text)


@dataclass
class Check:
    target: str
    cell: str
    expected: Any
    observed: Any
    ok: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "cell": self.cell,
            "expected": self.expected,
            "observed": self.observed,
            "pass": self.ok,
            "note": self.note,
        }


def _reproduce_table(target: str, ref: dict) -> tuple[list[dict], list[Check]]:
    spec = ref["tables"][target]
    tol = ref["tolerances"]
    cons = Constraint.parse(spec["cons"])
    rows, checks = [], []
    for cell in spec["cells"]:
        l = cell["l"]
        bm = build_matrix(cons, l, apply_order=spec["ordered"])
        lam = spectral_radius(bm).lambda_star
        order = bm.order.spec() if bm.order else ""
        accepted = [cell["lambdaStar"]] + ([cell["altLambdaStar"]] if "altLambdaStar" in cell else [])
        ok_n = abs(bm.ntypes - cell["ntypes"]) <= tol["ntypes"]
        ok_l = any(abs(lam - a) <= tol["lambdaStar"] for a in accepted)
        note = ""
        if spec["ordered"] and not (ok_n and ok_l):
            best = search_orders(cons, l, cell["ntypes"], cell["lambdaStar"])[0]
            order = best.order.spec()
            ok_n = abs(best.ntypes - cell["ntypes"]) <= tol["ntypes"]
            ok_l = any(abs(best.lambda_star - a) <= tol["lambdaStar"] for a in accepted)
            note = f"closest canonical order {order}: {best.ntypes} types, {best.lambda_star:.6f}"
            lam = best.lambda_star
        rows.append({
            "l": l,
            "ordered": int(spec["ordered"]),
            "ntypes": bm.ntypes,
            "ntypesReachable": bm.ntypes_reachable,
            "lambdaStar": lam,
            "order": order,
        })
        checks.append(Check(target, cell["cell"] + " types", cell["ntypes"], bm.ntypes, ok_n, note))
        checks.append(Check(target, cell["cell"] + " lambda", accepted, lam, ok_l, note))
    return rows, checks


def _reproduce_gamma(ref: dict) -> tuple[list[dict], list[Check]]:
    rows, checks = [], []
    for key, bounds in ref["gamma"].items():
        d = int(key[1:])
        thr = gamma(d)
        rows.append({"d": d, "gamma": thr.gamma, "xStar": thr.x_star})
        ok = bounds["lower"] < thr.gamma < bounds["upper"]
        checks.append(Check("gamma", key, [bounds["lower"], bounds["upper"]], thr.gamma, ok))
    return rows, checks


def _reproduce_fixedpoint(ref: dict) -> tuple[list[dict], list[Check]]:
    r = ref["nakFixedPoint"]
    xt, yt = r["xTilde"], r["yTilde"]
    f1, f2 = F1_hat(xt), F2_hat(yt)
    jac = jacobian(xt, yt)
    lam = perron_2x2(jac)
    fp = solve_fixed_point()
    jerr = float(np.abs(jac - np.array(r["jacobianAtTilde"])).max())
    checks = [
        Check("nak-fixedpoint", "F1hat(xTilde)", r["F1HatAtXTilde"], f1, abs(f1 - r["F1HatAtXTilde"]) <= r["hatTolerance"]),
        Check("nak-fixedpoint", "F2hat(yTilde)", r["F2HatAtYTilde"], f2, abs(f2 - r["F2HatAtYTilde"]) <= r["hatTolerance"]),
        Check("nak-fixedpoint", "jacobian(tilde)", r["jacobianAtTilde"], jac.tolist(), jerr <= r["jacobianTolerance"]),
        Check("nak-fixedpoint", "lambda(tilde)", r["lambdaStarAtTilde"], lam, abs(lam - r["lambdaStarAtTilde"]) <= r["lambdaTolerance"]),
        Check("nak-fixedpoint", "xhat < xTilde", xt, fp.xhat, fp.xhat < xt),
        Check("nak-fixedpoint", "yhat < yTilde", yt, fp.yhat, fp.yhat < yt),
        Check("nak-fixedpoint", "yhat = xhat/(1+xhat)", 0.0, fp.yhat - fp.xhat / (1 + fp.xhat), abs(fp.yhat - fp.xhat / (1 + fp.xhat)) <= 1e-12),
        Check("nak-fixedpoint", "repelling", "REPELLING", fp.verdict.value, fp.lambda_star > 1.0),
    ]
    return [fp.as_dict()], checks


def _reproduce_fig4(ref: dict) -> tuple[list[dict], list[Check]]:
    r = ref["fig4"]
    gaps = iterate_gap(r["depth"])
    lo, hi = r["floorDepths"]
    floor = min(gaps[lo - 1 : hi])
    rows = [{"depth": k + 1, "gap": g} for k, g in enumerate(gaps)]
    checks = [
        Check("fig4", "gap tail", r["gapLimit"], gaps[-1], abs(gaps[-1] - r["gapLimit"]) <= r["gapTolerance"]),
        Check("fig4", f"min gap depths {lo}..{hi}", r["gapFloor"], floor, floor >= r["gapFloor"]),
    ]
    return rows, checks


def run_target(target: str) -> tuple[str, list[dict], list[dict]]:
    ref = load_reference()
    if target in TABLE_TARGETS:
        rows, checks = _reproduce_table(target, ref)
    elif target == "gamma":
        rows, checks = _reproduce_gamma(ref)
    elif target == "nak-fixedpoint":
        rows, checks = _reproduce_fixedpoint(ref)
    elif target == "fig4":
        rows, checks = _reproduce_fig4(ref)
    else:
        raise InputError(f"unknown target {target!r}")
    return target, rows, [c.as_dict() for c in checks]


def max_workers() -> int:
    env = os.environ.get("SPATIALMIX_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise InputError(f"SPATIALMIX_THREADS must be an integer, got {env!r}") from None
    return cpus


def cmd_reproduce(args: argparse.Namespace) -> int:
    targets = TARGETS if args.target == "all" else [args.target]
    started = time.perf_counter()
    manifest = RunManifest("reproduce", {"target": args.target})
    out_dir = Path(args.out_dir)
    workers = min(max_workers(), len(targets))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_target, targets))
    else:
        results = [run_target(t) for t in targets]
    all_ok = True
    for target, rows, checks in results:
        fmt, ext = ("json", "json") if target == "nak-fixedpoint" else ("csv", "csv")
        path = out_dir / f"{target}.{ext}"
        payload = emit(rows[0] if fmt == "json" else rows, fmt)
        write_atomic(path, payload)
        write_atomic(out_dir / f"{target}.checks.json", emit({"manifest": manifest.hash, "checks": checks}))
        manifest.outputs.append(str(path))
        for c in checks:
            all_ok &= c["pass"]
            _out(emit(c))
    manifest.wall_time = time.perf_counter() - started
    write_atomic(out_dir / "manifest.json", emit(manifest))
    _out(emit({"manifest": manifest.hash, "pass": all_ok}))
    return EXIT_OK if all_ok else EXIT_TOLERANCE


# ---- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, which means tolerance failure here
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spatialmix", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cons_choices = [c.value for c in Constraint]

    s = sub.add_parser("count", help="exact independent-set count of an m x n region")
    s.add_argument("--cons", required=True, choices=cons_choices)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--fix", help="JSON list of [i, j, state] triples")
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("saw-check", help="compare graph and SAW-tree marginals")
    s.add_argument("--graph", required=True, help='JSON {"edges": [[u, v], ...], "fixing": {v: s}}')
    s.add_argument("--root", type=int, required=True)
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(func=cmd_saw_check)

    s = sub.add_parser("bm", help="generate a branching matrix")
    s.add_argument("--cons", required=True, choices=cons_choices)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--order", action="store_true", help="apply the neighbour-order pruning")
    s.add_argument("--order-spec", default=None)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_bm)

    s = sub.add_parser("certify", help="spectral SSM certificate")
    s.add_argument("--cons", required=True, choices=cons_choices)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--order", action="store_true")
    s.add_argument("--order-spec", default=None)
    s.add_argument("--margin", type=float, default=1e-6)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("capacity", help="sequential-cavity capacity estimate")
    s.add_argument("--cons", required=True, choices=cons_choices)
    s.add_argument("--eps", type=_positive_float, default=1e-3)
    s.add_argument("--t-max", type=int, default=DEFAULT_T_MAX)
    s.set_defaults(func=cmd_capacity)

    s = sub.add_parser("nak-gap", help="boundary gap of the NAK subtree recursion")
    s.add_argument("--depth", type=int, default=200)
    s.add_argument("--root", choices=["X", "Y", "O"], default="X")
    s.add_argument("--csv", default=None)
    s.set_defaults(func=cmd_nak_gap)

    s = sub.add_parser("nak-fixedpoint", help="fixed point and Jacobian of the NAK recursion")
    s.set_defaults(func=cmd_nak_fixedpoint)

    s = sub.add_parser("reproduce", help="regenerate reference results and compare")
    s.add_argument("target", choices=TARGETS + ["all"])
    s.add_argument("--out-dir", default="reproduce_out")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ValueError, KeyError, RegionTooLarge, InfeasibleFixing, UncutPath) as exc:
        print(f"spatialmix: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
