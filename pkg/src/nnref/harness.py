"""Differential harness: run a backend process against the reference.

The backend is any command honoring the file contract

    <cmd> <model.json> <inputs.json> <out.json> [--trace]

exiting 0 with {"output": ..., "trace": {...}?} on success, or 3 with
{"error": "..."} when it rejects the model. Reference outputs are
recomputed here rather than read from campaign artifacts, so a stale
expected file can never mask a regression.

Models containing an active Dropout are not compared value-by-value;
they are routed through the zero-rate statistic check instead, using
the backend's own trace for both sides of each Dropout node.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BackendLaunchFailure, MalformedDocument, Unlocalizable
from .ir import (
    ModelGraph,
    _emit_json,
    load_model,
    parse_bindings,
    serialize_bindings,
    serialize_model,
    subgraph,
    topo_order,
)
from .kinds import LayerKind
from .semantics import (
    StochasticCheckConfig,
    check_stochastic,
    eval_model,
)
from .tensor import ComparisonStats, Tensor, approx_equal

_MIN_DROPPABLE = 400
_MAX_TILE = 512


@dataclass(frozen=True)
class TolerancePolicy:
    rtol: float = 1e-4
    atol: float = 1e-6
    nan_equal: bool = False

    def __post_init__(self):
        if self.rtol < 0 or self.atol < 0:
            raise ValueError("tolerances must be non-negative")


@dataclass
class BackendResult:
    ok: bool
    output: Tensor | None = None
    trace: dict[str, Tensor] | None = None
    message: str = ""
    exit_code: int = 0


@dataclass
class Verdict:
    index: int
    status: str  # pass | fail | backend_error | skipped
    stats: ComparisonStats | None = None
    failing_layer: str | None = None
    message: str = ""
    stochastic: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        doc = {"index": self.index, "status": self.status}
        if self.stats is not None:
            doc["stats"] = self.stats.to_json()
        if self.failing_layer is not None:
            doc["failing_layer"] = self.failing_layer
        if self.message:
            doc["message"] = self.message
        if self.stochastic:
            doc["stochastic"] = self.stochastic
        return doc


@dataclass
class CampaignReport:
    verdicts: list[Verdict]

    @property
    def total(self) -> int:
        return len(self.verdicts)

    def count(self, status: str) -> int:
        return sum(1 for v in self.verdicts if v.status == status)

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "passed": self.count("pass"),
            "failed": self.count("fail"),
            "backend_errors": self.count("backend_error"),
            "skipped": self.count("skipped"),
            "models": [v.to_json() for v in self.verdicts],
        }


def compare_outputs(
    observed: Tensor, reference: Tensor, policy: TolerancePolicy = TolerancePolicy()
) -> ComparisonStats:
    return approx_equal(
        observed,
        reference,
        rtol=policy.rtol,
        atol=policy.atol,
        nan_equal=policy.nan_equal,
    )


def _parse_backend_doc(text: str) -> tuple[Tensor, dict[str, Tensor]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"backend wrote invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "output" not in doc:
        raise MalformedDocument("backend document is missing 'output'")
    output = Tensor.from_nested(doc["output"])
    trace = {}
    for key, value in (doc.get("trace") or {}).items():
        trace[key] = Tensor.from_nested(value)
    return output, trace


def run_backend(
    cmd: Sequence[str],
    model_path: str,
    inputs_path: str,
    out_path: str,
    trace: bool = False,
    timeout: float = 300.0,
) -> BackendResult:
    """One backend invocation under the file contract."""
    argv = list(cmd) + [str(model_path), str(inputs_path), str(out_path)]
    if trace:
        argv.append("--trace")
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=timeout
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise BackendLaunchFailure(f"cannot run backend {cmd!r}: {exc}") from None

    if proc.returncode == 0:
        try:
            with open(out_path, "r", encoding="utf-8") as fh:
                output, trace_map = _parse_backend_doc(fh.read())
        except (OSError, MalformedDocument) as exc:
            return BackendResult(False, message=str(exc), exit_code=proc.returncode)
        return BackendResult(True, output, trace_map, exit_code=0)

    message = ""
    try:
        with open(out_path, "r", encoding="utf-8") as fh:
            doc = json.loads(fh.read())
        if isinstance(doc, dict) and isinstance(doc.get("error"), str):
            message = doc["error"]
    except (OSError, json.JSONDecodeError):
        pass
    if not message:
        message = (proc.stderr or proc.stdout or "").strip()
    return BackendResult(False, message=message, exit_code=proc.returncode)


def _write_probe(tmp: str, tag: str, g: ModelGraph, bindings) -> tuple[str, str, str]:
    model_path = os.path.join(tmp, f"model_{tag}.json")
    inputs_path = os.path.join(tmp, f"inputs_{tag}.json")
    out_path = os.path.join(tmp, f"out_{tag}.json")
    with open(model_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(g))
        fh.write("\n")
    with open(inputs_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_bindings(bindings))
        fh.write("\n")
    return model_path, inputs_path, out_path


def _active_dropouts(g: ModelGraph) -> list:
    nodes = []
    for layer in g.layers:
        if layer.kind == LayerKind.DROPOUT and float(layer.args["rate"]) > 0:
            nodes.append(layer)
    return nodes


def _tile_bindings(bindings: Mapping[str, Tensor], factor: int) -> dict[str, Tensor]:
    if factor <= 1:
        return dict(bindings)
    out = {}
    for key, t in bindings.items():
        reps = (factor,) + (1,) * (t.rank - 1)
        out[key] = Tensor.from_nd(np.tile(t.nd, reps))
    return out


def localize_failure(
    g: ModelGraph,
    bindings: Mapping[str, Tensor],
    backend_cmd: Sequence[str],
    policy: TolerancePolicy = TolerancePolicy(),
) -> str:
    """First layer (in topological order) whose sub-model disagrees.

    Probes run the backend on the sub-model ending at each layer and
    compare against the reference value for that layer. Raises
    Unlocalizable when the full model fails but every probe passes
    (e.g. a stateful backend that only misbehaves across calls).
    """
    full = eval_model(g, bindings)
    with tempfile.TemporaryDirectory(prefix="nnref-probe-") as tmp:
        for nid in topo_order(g):
            if nid in g.input_map():
                continue
            sub = subgraph(g, nid)
            sub_bindings = {s.id: bindings[s.id] for s in sub.inputs}
            paths = _write_probe(tmp, nid, sub, sub_bindings)
            result = run_backend(backend_cmd, *paths)
            if not result.ok:
                return nid
            stats = compare_outputs(result.output, full.trace[nid], policy)
            if not stats.passed:
                return nid
    raise Unlocalizable("every per-layer probe agreed with the reference")


def _check_model_stochastic(
    g: ModelGraph,
    bindings: Mapping[str, Tensor],
    backend_cmd: Sequence[str],
    index: int,
    cfg: StochasticCheckConfig,
) -> Verdict:
    """Statistic route for models with active Dropout layers.

    The batch is tiled until every Dropout sees a few hundred elements,
    then one traced backend run supplies both sides of each check.
    """
    dropouts = _active_dropouts(g)
    base = eval_model(g, bindings)
    per_row = []
    for layer in dropouts:
        shape = base.trace[layer.inputs[0]].shape
        n = 1
        for d in shape[1:]:
            n *= d
        per_row.append(max(1, n))
    factor = min(_MAX_TILE, max(1, math.ceil(_MIN_DROPPABLE / min(per_row))))
    batch = next(iter(bindings.values())).shape[0] if bindings else 1
    tiled = _tile_bindings(bindings, math.ceil(factor / max(1, batch)))

    with tempfile.TemporaryDirectory(prefix="nnref-sto-") as tmp:
        paths = _write_probe(tmp, str(index), g, tiled)
        result = run_backend(backend_cmd, *paths, trace=True)
    if not result.ok:
        return Verdict(index, "backend_error", message=result.message)

    reports = []
    ok = True
    failing = None
    for layer in dropouts:
        upstream = result.trace.get(layer.inputs[0])
        observed = result.trace.get(layer.id)
        if upstream is None or observed is None:
            return Verdict(
                index,
                "backend_error",
                message=f"backend trace is missing values around {layer.id}",
            )
        report = check_stochastic(
            upstream, observed, float(layer.args["rate"]), cfg
        )
        reports.append({"layer": layer.id, **report.to_json()})
        if not report.passed and ok:
            ok = False
            failing = layer.id
    status = "pass" if ok else "fail"
    return Verdict(index, status, failing_layer=failing, stochastic=reports)


def check_model(
    g: ModelGraph,
    bindings: Mapping[str, Tensor],
    backend_cmd: Sequence[str],
    policy: TolerancePolicy = TolerancePolicy(),
    index: int = 0,
    localize: bool = True,
    stochastic_cfg: StochasticCheckConfig = StochasticCheckConfig(),
) -> Verdict:
    """Full verdict for one model: compare, then localize on failure."""
    if _active_dropouts(g):
        return _check_model_stochastic(g, bindings, backend_cmd, index, stochastic_cfg)

    reference = eval_model(g, bindings)
    with tempfile.TemporaryDirectory(prefix="nnref-diff-") as tmp:
        paths = _write_probe(tmp, str(index), g, bindings)
        result = run_backend(backend_cmd, *paths)
    if not result.ok:
        return Verdict(index, "backend_error", message=result.message)

    stats = compare_outputs(result.output, reference.output, policy)
    if stats.passed:
        return Verdict(index, "pass", stats=stats)

    failing = None
    message = ""
    if localize:
        try:
            failing = localize_failure(g, bindings, backend_cmd, policy)
        except Unlocalizable as exc:
            message = str(exc)
        except BackendLaunchFailure as exc:
            message = str(exc)
    return Verdict(index, "fail", stats=stats, failing_layer=failing, message=message)


def _campaign_indexes(campaign_dir) -> list[int]:
    pat = re.compile(r"model_(\d+)\.json$")
    found = []
    for name in os.listdir(campaign_dir):
        m = pat.match(name)
        if m:
            found.append(int(m.group(1)))
    return sorted(found)


def run_campaign(
    campaign_dir,
    backend_cmd: Sequence[str] | str,
    policy: TolerancePolicy = TolerancePolicy(),
    jobs: int = 1,
    localize: bool = True,
    stochastic_cfg: StochasticCheckConfig = StochasticCheckConfig(),
) -> CampaignReport:
    """Check every model in a campaign directory against a backend."""
    if isinstance(backend_cmd, str):
        backend_cmd = shlex.split(backend_cmd)

    def one(index: int) -> Verdict:
        model_path = os.path.join(campaign_dir, f"model_{index}.json")
        inputs_path = os.path.join(campaign_dir, f"inputs_{index}.json")
        if not os.path.exists(inputs_path):
            return Verdict(index, "skipped", message="inputs file is missing")
        g = load_model(model_path)
        with open(inputs_path, "r", encoding="utf-8") as fh:
            bindings = parse_bindings(fh.read(), g)
        return check_model(
            g, bindings, backend_cmd, policy, index, localize, stochastic_cfg
        )

    indexes = _campaign_indexes(campaign_dir)
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(one, indexes))
    else:
        verdicts = [one(i) for i in indexes]
    return CampaignReport(verdicts)


def report_to_text(report: CampaignReport) -> str:
    return _emit_json(report.to_json())
