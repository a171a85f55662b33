"""Command-line interface.

Commands read a JSON document (``--input``, ``-`` for stdin) or, for the
consensus and spatial analyses, plain numeric flags.  Results print to
stdout as deterministic JSON (sorted keys) or as flattened ``key,value``
CSV rows.  Exit codes: 0 on success, 1 on any error, 2 when the computed
verdict is Infeasible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import consensus as cons
from . import sls, spatial
from .errors import LocrelError
from .graphs import Partition, StructurePattern, graph_from_json
from .rational import RationalMatrix
from .relative import is_relative, relative_decompose, relative_decompose_rational
from .statespace import StateSpace, tf_of
from .structure import (
    build_structured_realization,
    check_realization_structure,
    is_tf_structured,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _load_input(path):
    if path is None:
        raise LocrelError("this command needs --input")
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _pattern_from_json(data):
    graph = graph_from_json(data["graph"])
    rp = data.get("rowPartition")
    cp = data.get("colPartition")
    row = Partition(tuple(rp)) if rp else Partition.scalar(graph.n)
    col = Partition(tuple(cp)) if cp else Partition.scalar(graph.n)
    return StructurePattern(graph, row, col)


def _structure_flags(result):
    return {
        "structured": result.structured,
        "networkRealizable": result.network,
        "inputSideDiagonal": result.input_side_diagonal,
        "outputSideDiagonal": result.output_side_diagonal,
    }


def _controller_from_json(data):
    if "static" in data:
        return np.asarray(data["static"], dtype=float)
    if "system" in data:
        return StateSpace.from_json(data["system"])
    if "matrix" in data:
        return RationalMatrix.from_json(data["matrix"])
    raise LocrelError("controller needs one of: static, system, matrix")


def _plant_from_json(data):
    A = np.asarray(data["a"], dtype=float)
    n = A.shape[0]
    B2 = np.asarray(data.get("b2", np.eye(n)), dtype=float)
    return sls.Plant(A=A, B1=np.eye(n), B2=B2)


def _cl_from_json(data):
    phi_x = RationalMatrix.from_json(data["phiX"])
    phi_u = RationalMatrix.from_json(data["phiU"])
    return sls.ClosedLoopPair(phi_x, phi_u)


def cmd_structure(args):
    doc = _load_input(args.input)
    pattern = _pattern_from_json(doc["pattern"])
    if args.action == "check":
        system = StateSpace.from_json(doc["system"])
        flags = _structure_flags(check_realization_structure(system, pattern))
        flags["tfStructured"] = bool(is_tf_structured(tf_of(system), pattern))
        return flags, 0
    matrix = RationalMatrix.from_json(doc["matrix"])
    orientation = doc.get("orientation", "rows")
    system = build_structured_realization(matrix, pattern, orientation)
    flags = _structure_flags(check_realization_structure(system, pattern))
    return {"system": system.to_json(), "structure": flags}, 0


def cmd_relative(args):
    doc = _load_input(args.input)
    if args.action == "check":
        if "matrix" in doc:
            flag = is_relative(RationalMatrix.from_json(doc["matrix"]))
        else:
            flag = is_relative(np.asarray(doc["gain"], dtype=float))
        return {"relative": bool(flag)}, 0
    graph = graph_from_json(doc["graph"])
    if "matrix" in doc:
        form = relative_decompose_rational(
            RationalMatrix.from_json(doc["matrix"]), graph
        )
        return form.to_json(), 0
    k = np.asarray(doc["gain"], dtype=float).reshape(-1)
    M = relative_decompose(k, graph)
    return {
        "m": [[float(v) for v in row] for row in M],
        "rowSums": [float(v) for v in M.sum(axis=1)],
    }, 0


def cmd_sls(args):
    doc = _load_input(args.input)
    if args.action in ("closed-loops", "check"):
        plant = _plant_from_json(doc["plant"])
        K = _controller_from_json(doc["controller"])
        cl = sls.closed_loops_of(plant, K)
        residual = sls.check_affine_constraint(
            cl, plant, n_samples=args.samples, seed=args.seed
        )
        if args.action == "check":
            return {
                "affineResidual": residual,
                "samples": args.samples,
                "ok": bool(residual <= args.tolerance),
            }, 0
        return {
            "phiX": tf_of(cl.phi_x).to_json(),
            "phiU": tf_of(cl.phi_u).to_json(),
            "affineResidual": residual,
        }, 0
    cl = _cl_from_json(doc["closedLoops"])
    if args.action == "recover":
        K = sls.recover_controller_sf(cl)
        if isinstance(K, RationalMatrix):
            return {"controller": {"matrix": K.to_json()}}, 0
        points = sls.sample_points(args.samples, args.seed)
        samples = [
            {
                "s": [s.real, s.imag],
                "value": [[[v.real, v.imag] for v in row] for row in K.evaluate(s)],
            }
            for s in points
        ]
        return {"controller": {"samples": samples}}, 0
    pattern = _pattern_from_json(doc["pattern"]) if "pattern" in doc else None
    impl, witness = sls.implementation_realization_sf(cl, pattern)
    out = {"system": impl.to_json()}
    out["structure"] = _structure_flags(witness) if witness is not None else None
    return out, 0


def _measure_for(n, doc_or_args):
    if isinstance(doc_or_args, dict):
        if "c" in doc_or_args:
            return np.asarray(doc_or_args["c"], dtype=float)
        name = doc_or_args.get("measure", "ave")
    else:
        name = doc_or_args
    return cons.consensus_measures(n, kinds=(name,))[name]


def cmd_consensus(args):
    doc = _load_input(args.input) if args.input else {}
    n = args.n if args.n is not None else doc.get("n")
    if n is None:
        raise LocrelError("consensus commands need n (flag or input document)")
    n = int(n)
    gamma = args.gamma if args.gamma is not None else float(doc.get("gamma", 0.0))
    if args.action == "feasibility":
        b = args.b if args.b is not None else doc.get("b")
        if b is None:
            raise LocrelError("feasibility needs the locality radius b")
        C = _measure_for(n, doc if doc else args.measure)
        prob = cons.ConsensusProblem(n=n, b=int(b), gamma=gamma, c=C)
        cert = cons.sls_relative_feasibility(prob)
        return cert.to_json(), (2 if cert.infeasible else 0)
    if args.action == "h2":
        C = _measure_for(n, doc if doc else args.measure)
        prob = cons.ConsensusProblem(n=n, b=1, gamma=gamma, c=C)
        choice = args.controller or doc.get("controller", "ks")
        if choice == "ka":
            a = args.a if args.a is not None else doc.get("a")
            if a is None:
                raise LocrelError("controller ka needs its pole (--a)")
            K = cons.proper_approximation(n, float(a))
        elif choice == "ks":
            K = cons.static_consensus_gain(n)
        elif isinstance(choice, dict):
            K = _controller_from_json(choice)
        else:
            raise LocrelError(f"unknown controller {choice!r}")
        return {"h2Squared": cons.h2_deflated(prob, K)}, 0
    b = args.b if args.b is not None else doc.get("b")
    if b is None:
        raise LocrelError("gap-demo needs the locality radius b")
    report = cons.gap_demonstration(n, int(b), gamma)
    payload = report.to_json()
    return payload, (2 if payload["verdict"] == "Infeasible" else 0)


def cmd_spatial(args):
    doc = _load_input(args.input) if args.input else {}
    if args.action == "feasibility":
        d = args.d if args.d is not None else doc.get("d")
        n = args.n if args.n is not None else doc.get("n")
        b = args.b if args.b is not None else doc.get("b")
        if d is None or n is None or b is None:
            raise LocrelError("spatial feasibility needs d, n and b")
        cert = spatial.spatial_feasibility(int(d), int(n), int(b))
        return cert.to_json(), (2 if cert.infeasible else 0)
    kernel = spatial.ConvKernelArray.from_json(doc["kernel"])
    squared = spatial.si_h2_squared(kernel)
    return {
        "h2Squared": squared,
        "h2": float(np.sqrt(squared)),
        "parsevalH2Squared": spatial.si_h2_squared_parseval(kernel),
    }, 0


def _flatten(value, prefix, out):
    if isinstance(value, dict):
        for key in value:
            _flatten(value[key], f"{prefix}.{key}" if prefix else str(key), out)
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _flatten(item, f"{prefix}[{i}]", out)
    else:
        out[prefix] = value


def _emit(payload, fmt):
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    flat = {}
    _flatten(payload, "", flat)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["key", "value"])
    for key in sorted(flat):
        writer.writerow([key, flat[key]])
    sys.stdout.write(buf.getvalue())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input JSON document (- for stdin)")
    common.add_argument(
        "--output", choices=("json", "csv"), default="json", help="output format"
    )
    common.add_argument("--tolerance", type=float, default=1e-8)
    common.add_argument("--samples", type=int, default=7)
    common.add_argument("--seed", type=int, default=0)

    parser = _Parser(
        prog="locrel",
        description="Locality and relative-feedback analysis for distributed controllers.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("structure", help="realization structure tools", parents=[common])
    p.add_argument("action", choices=("check", "realize"))
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("relative", help="relative feedback tools", parents=[common])
    p.add_argument("action", choices=("check", "decompose"))
    p.set_defaults(func=cmd_relative)

    p = sub.add_parser(
        "sls", help="closed-loop parameterization tools", parents=[common]
    )
    p.add_argument("action", choices=("closed-loops", "check", "recover", "implement"))
    p.set_defaults(func=cmd_sls)

    p = sub.add_parser("consensus", help="ring consensus analysis", parents=[common])
    p.add_argument("action", choices=("feasibility", "h2", "gap-demo"))
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--measure", choices=("le", "ave", "lr"), default="ave")
    p.add_argument(
        "--controller",
        choices=("ks", "ka"),
        help="static ring gain or its proper approximation",
    )
    p.add_argument("--a", type=float, help="pole of the proper approximation")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("spatial", help="spatially invariant analysis", parents=[common])
    p.add_argument("action", choices=("feasibility", "h2"))
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int)
    p.set_defaults(func=cmd_spatial)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload, code = args.func(args)
    except LocrelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
