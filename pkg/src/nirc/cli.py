"""``nirc`` command-line entry point.

Exit codes: 0 success, 1 domain error (invalid graph, incompatibility,
unsatisfiable translation), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from nirc import analysis, dialects, engine, passes, serialize, streams
from nirc.errors import NIRError
from nirc.graph import validate


class _Failure(Exception):
    """Domain failure already reported; maps to exit code 1."""


def _csv_list(text):
    return [x for x in (s.strip() for s in text.split(",")) if x]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return (obj + 0.0).tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _print_json(doc):
    sys.stdout.write(json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n")


def _load(path):
    try:
        return serialize.load(path)
    except OSError as exc:
        raise _Failure(f"cannot read {path}: {exc.strerror}") from exc


def _emit_graph(graph, args):
    data = serialize.serialize(graph) + b"\n"
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    elif not args.json:
        sys.stdout.buffer.write(data)


def cmd_validate(args):
    graph = _load(args.graph)
    diags = validate(graph)
    if args.json:
        _print_json({"valid": not diags, "diagnostics": [str(d) for d in diags]})
    for d in diags:
        print(d, file=sys.stderr)
    return 1 if diags else 0


def cmd_run(args):
    graph = _load(args.graph)
    cfg = dialects.named_config(args.dialect, args.dt)
    inputs = streams.load_inputs(args.input, graph)
    trace = engine.run(graph, cfg, inputs, record=args.record)
    if args.out:
        streams.write_trace(trace, args.out)
    if args.json:
        _print_json({
            "dialect": cfg.name, "steps": trace.steps,
            "events": {n: int(np.sum(a)) for n, a in sorted(trace.outputs.items())},
            "overflow": trace.overflow, "out": args.out,
        })
    elif not args.out:
        sys.stdout.write(streams.trace_to_csv(trace))
    return 0


def cmd_check(args):
    graph = _load(args.graph)
    profile = passes.load_profile(args.profile)
    report = passes.check_constraints(graph, profile, try_rewrites=args.try_rewrites)
    if args.json:
        _print_json(report.to_json())
    for v in report.violations:
        print(v, file=sys.stderr)
    if not args.json and report.rewrites:
        print("rewrites: " + ", ".join(report.rewrites))
    return 0 if report.compatible else 1


def cmd_lower(args):
    graph = _load(args.graph)
    profile = passes.load_profile(args.profile)
    lowered, cfg, rescale = passes.translate_for_profile(graph, profile, args.dt)
    _emit_graph(lowered, args)
    if args.json:
        _print_json({"config": cfg.to_json(), "rescalings": rescale,
                     "graph": serialize.graph_to_json(lowered)})
    return 0


def cmd_quantize(args):
    graph = _load(args.graph)
    q, scales = passes.quantize(graph, args.bits)
    _emit_graph(q, args)
    if args.json:
        _print_json({"scales": scales, "graph": serialize.graph_to_json(q)})
    return 0


def cmd_decompose(args):
    graph = _load(args.graph)
    out = passes.decompose(graph, _csv_list(args.kinds))
    _emit_graph(out, args)
    if args.json:
        _print_json(serialize.graph_to_json(out))
    return 0


def cmd_recompose(args):
    graph = _load(args.graph)
    out = passes.recompose(graph, _csv_list(args.targets))
    _emit_graph(out, args)
    if args.json:
        _print_json(serialize.graph_to_json(out))
    return 0


def cmd_compare(args):
    graph = _load(args.graph)
    inputs = streams.load_inputs(args.input, graph)
    result = analysis.compare_dialects(
        graph, inputs, _csv_list(args.dialects), args.node, dt=args.dt,
        burn_in=args.burn_in, window=args.shift_window)
    files = analysis.emit_report(result, args.out) if args.out else []
    if args.json:
        doc = analysis.summary_json(result)
        doc["files"] = [str(f) for f in files]
        _print_json(doc)
    elif not args.out:
        sys.stdout.write(result.matrix.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nirc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text, out=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("graph", help="graph file (.nir.json)")
        p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        if out:
            p.add_argument("--out", help="output path (default: stdout)")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check structural validity", out=False)

    p = add("run", cmd_run, "simulate a graph under a dialect")
    p.add_argument("--dialect", required=True, choices=dialects.NAMED_DIALECTS)
    p.add_argument("--input", required=True, help="input stream (.csv or .json)")
    p.add_argument("--dt", type=float, default=1e-3, help="timestep in seconds")
    p.add_argument("--record", type=_csv_list, default=[], help="comma-separated node ids")

    p = add("check", cmd_check, "check compatibility with a platform profile", out=False)
    p.add_argument("--profile", required=True, help="built-in name or profile .json path")
    p.add_argument("--try-rewrites", action="store_true", help="apply rewrites before giving up")

    p = add("lower", cmd_lower, "lower a graph onto a platform profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--dt", type=float, default=1e-3)

    p = add("quantize", cmd_quantize, "symmetric per-tensor weight quantization")
    p.add_argument("--bits", type=int, default=8, choices=range(2, 33), metavar="{2..32}")

    p = add("decompose", cmd_decompose, "expand higher-order neurons")
    p.add_argument("--kinds", default="cuba_lif,lif,if")

    p = add("recompose", cmd_recompose, "fold primitive compositions into higher-order neurons")
    p.add_argument("--targets", default="cuba_lif,lif,if")

    p = add("compare", cmd_compare, "compare spiking activity across dialects")
    p.add_argument("--input", required=True)
    p.add_argument("--dialects", required=True, help="comma-separated dialect names")
    p.add_argument("--node", required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--shift-window", type=int, default=analysis.DEFAULT_SHIFT_WINDOW)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "dialects", None):
        bad = [d for d in _csv_list(args.dialects) if d not in dialects.NAMED_DIALECTS]
        if bad:
            parser.error(f"unknown dialects: {', '.join(bad)}")
    if getattr(args, "dt", 1.0) <= 0:
        parser.error("--dt must be positive")
    try:
        return args.func(args)
    except (NIRError, _Failure, ValueError) as exc:
        print(f"nirc {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
