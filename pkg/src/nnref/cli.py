"""Command line front end.

Exit codes: 0 success (valid model, passing diff), 1 semantic failure
(invalid model, failing diff), 2 malformed document, 3 backend error,
64 usage error. JSON results go to stdout, prose goes to stderr.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys

import numpy as np

from .errors import (
    BackendLaunchFailure,
    BadArity,
    CycleDetected,
    DanglingEdge,
    MalformedDocument,
    NnrefError,
    PrecondViolationError,
    UnknownKind,
    UnsupportedKind,
)
from .generate import GenConfig, run_generation_campaign
from .harness import (
    TolerancePolicy,
    check_model,
    run_campaign,
)
from .ir import (
    _emit_json,
    load_model,
    parse_bindings,
    topo_order,
)
from .kinds import KIND_BY_NAME, DEFAULT_PALETTE, LayerKind
from .rng import Rng
from .semantics import eval_model, eval_node
from .tensor import Tensor
from .validate import report_json, validate_model

_DOC_ERRORS = (MalformedDocument, UnknownKind, BadArity, CycleDetected, DanglingEdge)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_MALFORMED = 2
EXIT_BACKEND = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 64, not argparse's 2
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _print_json(doc) -> None:
    sys.stdout.write(_emit_json(doc))
    sys.stdout.write("\n")


def _load_pair(model_path: str, inputs_path: str):
    g = load_model(model_path)
    with open(inputs_path, "r", encoding="utf-8") as fh:
        bindings = parse_bindings(fh.read(), g)
    return g, bindings


def _parse_palette(text: str) -> tuple[LayerKind, ...]:
    kinds = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        if name not in KIND_BY_NAME:
            raise MalformedDocument(f"unknown layer kind in palette: {name}")
        kinds.append(KIND_BY_NAME[name])
    if not kinds:
        raise MalformedDocument("palette must name at least one kind")
    return tuple(kinds)


def _cmd_generate(args) -> int:
    palette = _parse_palette(args.palette) if args.palette else DEFAULT_PALETTE
    cfg = GenConfig(
        seed=args.seed,
        max_level=args.max_level,
        max_tries=args.max_tries,
        max_fanin=args.max_fanin,
        stop_probability=args.stop_probability,
        palette=palette,
        paper_bias=args.paper_bias,
    )
    summary = run_generation_campaign(cfg, args.count, args.out, jobs=args.jobs)
    _print_json(summary)
    return EXIT_OK


def _cmd_eval(args) -> int:
    g, bindings = _load_pair(args.model, args.inputs)
    try:
        result = eval_model(g, bindings)
    except PrecondViolationError as exc:
        _print_json(report_json([exc.violation]))
        return EXIT_FAIL
    doc = {"output": result.output.to_nested()}
    if args.trace:
        doc["trace"] = {k: v.to_nested() for k, v in result.trace.items()}
    _print_json(doc)
    return EXIT_OK


def _cmd_validate(args) -> int:
    g = load_model(args.model)
    bindings = None
    if args.inputs:
        with open(args.inputs, "r", encoding="utf-8") as fh:
            bindings = parse_bindings(fh.read(), g)
    violations = validate_model(g, bindings, all_violations=args.all)
    _print_json(report_json(violations))
    return EXIT_OK if not violations else EXIT_FAIL


def _cmd_diff(args) -> int:
    backend = shlex.split(args.backend)
    policy = TolerancePolicy(rtol=args.rtol, atol=args.atol)
    if os.path.isdir(args.model):
        report = run_campaign(
            args.model, backend, policy, jobs=args.jobs,
            localize=not args.no_localize,
        )
        _print_json(report.to_json())
        if report.count("fail"):
            return EXIT_FAIL
        if report.count("backend_error"):
            return EXIT_BACKEND
        return EXIT_OK
    if not args.inputs:
        sys.stderr.write("diff on a single model needs an inputs file\n")
        return EXIT_USAGE
    g, bindings = _load_pair(args.model, args.inputs)
    verdict = check_model(
        g, bindings, backend, policy, localize=not args.no_localize
    )
    _print_json(verdict.to_json())
    if verdict.status == "pass":
        return EXIT_OK
    if verdict.status == "backend_error":
        return EXIT_BACKEND
    return EXIT_FAIL


def _cmd_emit_script(args) -> int:
    from .emit import emit_backend_script

    g, bindings = _load_pair(args.model, args.inputs)
    sys.stdout.write(emit_backend_script(g, bindings))
    return EXIT_OK


def _cmd_fuzz(args) -> int:
    import tempfile

    palette = _parse_palette(args.palette) if args.palette else DEFAULT_PALETTE
    cfg = GenConfig(seed=args.seed, palette=palette, paper_bias=args.paper_bias)
    backend = shlex.split(args.backend)
    policy = TolerancePolicy(rtol=args.rtol, atol=args.atol)

    def run(out_dir: str) -> int:
        summary = run_generation_campaign(cfg, args.count, out_dir, jobs=args.jobs)
        report = run_campaign(out_dir, backend, policy, jobs=args.jobs)
        doc = report.to_json()
        doc["generation"] = summary
        _print_json(doc)
        if report.count("fail"):
            return EXIT_FAIL
        if report.count("backend_error"):
            return EXIT_BACKEND
        return EXIT_OK

    if args.out:
        return run(args.out)
    with tempfile.TemporaryDirectory(prefix="nnref-fuzz-") as tmp:
        return run(tmp)


def _simulated_dropout(t: Tensor, rate: float, rng: Rng) -> Tensor:
    kept = np.array(
        [0.0 if rng.next_float() < rate else 1.0 for _ in range(t.size)]
    ).reshape(t.shape)
    return Tensor.from_nd(t.nd * kept / (1.0 - rate))


def _cmd_backend(args) -> int:
    """Reference evaluation behind the backend file contract.

    --perturb-kind/--perturb-delta skew every layer of one kind,
    --dropout-sim makes Dropout actually drop; both exist so the harness
    can be exercised against a controllable subject.
    """
    def reject(message: str) -> int:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(_emit_json({"error": message}))
            fh.write("\n")
        return EXIT_BACKEND

    try:
        g, bindings = _load_pair(args.model, args.inputs)
    except _DOC_ERRORS as exc:
        return reject(str(exc))
    except OSError as exc:
        return reject(str(exc))

    violations = validate_model(g, bindings)
    if violations:
        v = violations[0]
        return reject(f"{v.layer_id}: {v.message}")

    perturb = KIND_BY_NAME.get(args.perturb_kind) if args.perturb_kind else None
    drop_rng = Rng(args.dropout_sim) if args.dropout_sim is not None else None

    computed: dict[str, Tensor] = dict(bindings)
    nodes = g.node_map()
    n_drop = 0
    for nid in topo_order(g):
        if nid in computed:
            continue
        node = nodes[nid]
        ins = [computed[ref] for ref in node.inputs]
        if drop_rng is not None and node.kind == LayerKind.DROPOUT:
            rate = float(node.args["rate"])
            stream = drop_rng.derive(n_drop)
            n_drop += 1
            out = _simulated_dropout(ins[0], rate, stream) if rate > 0 else ins[0]
        else:
            out = eval_node(node, ins)
        if perturb is not None and node.kind == perturb:
            out = Tensor.from_nd(out.nd + args.perturb_delta)
        computed[nid] = out

    doc = {"output": computed[g.output].to_nested()}
    if args.trace:
        doc["trace"] = {k: v.to_nested() for k, v in computed.items()}
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_emit_json(doc))
        fh.write("\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="nnref", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="write a campaign of random valid models")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-level", type=int, default=6)
    p.add_argument("--max-tries", type=int, default=200)
    p.add_argument("--max-fanin", type=int, default=3)
    p.add_argument("--stop-probability", type=float, default=0.5)
    p.add_argument("--palette", help="comma separated layer kinds")
    p.add_argument("--paper-bias", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("eval", help="evaluate a model on bound inputs")
    p.add_argument("model")
    p.add_argument("inputs")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("validate", help="check layer preconditions")
    p.add_argument("model")
    p.add_argument("inputs", nargs="?")
    p.add_argument("--all", action="store_true",
                   help="report every violation, not just the first")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("diff", help="compare a backend against the reference")
    p.add_argument("model", help="model file or campaign directory")
    p.add_argument("inputs", nargs="?")
    p.add_argument("--backend", required=True)
    p.add_argument("--rtol", type=float, default=1e-4)
    p.add_argument("--atol", type=float, default=1e-6)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-localize", action="store_true")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("emit-script", help="print a standalone Keras script")
    p.add_argument("model")
    p.add_argument("inputs")
    p.set_defaults(func=_cmd_emit_script)

    p = sub.add_parser("fuzz", help="generate a campaign and diff it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--rtol", type=float, default=1e-4)
    p.add_argument("--atol", type=float, default=1e-6)
    p.add_argument("--palette")
    p.add_argument("--paper-bias", action="store_true")
    p.set_defaults(func=_cmd_fuzz)

    p = sub.add_parser("backend", help="run the reference as a subject process")
    p.add_argument("model")
    p.add_argument("inputs")
    p.add_argument("out")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--perturb-kind")
    p.add_argument("--perturb-delta", type=float, default=1.0)
    p.add_argument("--dropout-sim", type=int, default=None, metavar="SEED")
    p.set_defaults(func=_cmd_backend)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _DOC_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_MALFORMED
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_MALFORMED
    except BackendLaunchFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_BACKEND
    except UnsupportedKind as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    except NnrefError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
