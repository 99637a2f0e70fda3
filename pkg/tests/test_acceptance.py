"""Acceptance gate: eight checks, one printed pass/fail line each.

Each test evaluates its criterion fully, records a single summary line
for the terminal report, then asserts. Tolerances are pinned here and
nowhere else: golden integer examples are exact, the float convolution
example must hold at rtol 1e-9, the oracle equivalence is exact, and
the differential default is rtol 1e-4 / atol 1e-6.
"""

import filecmp
import json
import re
import subprocess
import sys
import time

import pytest

import naive_oracle as oracle
from conftest import record_acceptance
from fixtures import (
    dense_inputs_text,
    dense_model_text,
    overcrop_model_text,
)
from nnref.generate import DEFAULT_PALETTE, GenConfig, generate_model, \
    run_generation_campaign
from nnref.harness import run_campaign
from nnref.ir import parse_bindings, parse_model
from nnref.kinds import LayerKind
from nnref.rng import Rng
from nnref.semantics import (
    eval_conv1d,
    eval_conv2d,
    eval_dense,
    eval_model,
    eval_pool1d,
    eval_pool2d,
)
from nnref.tensor import Tensor, approx_equal
from nnref.validate import validate_model
from nnref.violations import CATEGORY, MESSAGE_TEMPLATE

BACKEND = [sys.executable, "-m", "nnref", "backend"]


def verdict(num: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {num} ({name}): {detail}"
    record_acceptance(line)
    print(line)
    assert ok, line


def t(nested) -> Tensor:
    return Tensor.from_nested(nested)


# --- 1. golden examples reproduce exactly ---


def test_criterion_1_golden_examples():
    t0 = time.perf_counter()
    checks = []

    g = parse_model(dense_model_text())
    out = eval_model(g, parse_bindings(dense_inputs_text(), g)).output
    checks.append(out.to_nested() == [[87.0, 89.0]])

    deep = eval_dense(
        t([[[[[1, 2, 3]]], [[[4, 5, 6]]]]]),
        t([[2, 3, 4], [5, 4, 6], [7, 6, 8]]),
        t([2, 3, 4]),
    )
    checks.append(
        deep.to_nested() == [[[[[35.0, 32.0, 44.0]]], [[[77.0, 71.0, 98.0]]]]]
    )

    conv_int = eval_conv1d(
        t([[[9, 9, 6, 5, 3], [4, 5, 5, 8, 2], [2, 4, 2, 3, 10]]]),
        t([[[4, 5], [4, 5], [3, 4], [2, 5], [4, 3]],
           [[5, 4], [5, 1], [3, 1], [5, 2], [3, 5]],
           [[2, 4], [1, 1], [5, 3], [3, 1], [3, 5]]]),
        t([0, 0]), strides=1, padding="valid",
    )
    checks.append(conv_int.to_nested() == [[[275.0, 271.0]]])

    conv_float = eval_conv1d(
        t([[[0.0113, 0.1557, 0.1804],
            [0.8732, 0.317, 0.9175],
            [0.7246, 0.833, 0.8881]]]),
        t([[[0.0419, 0.2172], [0.9973, 0.6763], [0.6917, 0.452]],
           [[0.0743, 0.9004], [0.52, 0.5426], [0.4529, 0.5032]]]),
        t([0, 0]), strides=1, padding="valid",
    )
    want = t([[[0.92579027, 1.60921455], [1.8765842, 2.3700637]]])
    checks.append(approx_equal(conv_float, want, rtol=1e-9, atol=0.0).passed)

    conv_model = json.dumps({
        "version": 1,
        "inputs": [{"id": "in0", "shape": [3, 3]}],
        "layers": [{
            "id": "c0", "kind": "Conv1D",
            "args": {"filters": 1, "kernel_size": 2, "strides": 1,
                     "padding": "valid"},
            "weights": [[[[1.0], [1.0], [1.0]], [[1.0], [1.0], [1.0]]], [0.0]],
            "inputs": ["in0"],
        }],
        "output": "c0",
    })
    g = parse_model(conv_model)
    bindings = {"in0": t([[[5, 8, 7], [9, 10, 7], [3, 7, 7]]])}
    checks.append(eval_model(g, bindings).output.to_nested() == [[[46.0], [43.0]]])

    ms = (time.perf_counter() - t0) * 1000.0
    verdict(1, "golden examples", all(checks) and ms < 1000.0,
            f"{sum(checks)}/5 examples exact, {ms:.1f} ms")


# --- 2. the empty-output regression is reported at the right layer ---


def test_criterion_2_empty_output_regression(tmp_path):
    model = tmp_path / "model.json"
    model.write_text(overcrop_model_text())
    proc = subprocess.run(
        [sys.executable, "-m", "nnref", "validate", str(model)],
        capture_output=True, text=True, timeout=300,
    )
    doc = json.loads(proc.stdout or "{}")
    violations = doc.get("violations") or [{}]
    ok = (
        proc.returncode == 1
        and violations[0].get("code") == "E_EMPTY_OUTPUT"
        and violations[0].get("layer") == "Cro"
    )
    verdict(2, "empty-output regression", ok,
            f"exit {proc.returncode}, {violations[0].get('code')} at "
            f"{violations[0].get('layer')!r}")


# --- 3. valid-generation rate over a 200-model campaign ---


def test_criterion_3_valid_generation_rate(tmp_path):
    t0 = time.perf_counter()
    summary = run_generation_campaign(GenConfig(seed=0), 200, tmp_path, jobs=4)
    dt = time.perf_counter() - t0
    rate = summary["valid_count"] / 200.0
    ok = rate >= 0.95 and dt <= 600.0
    verdict(3, "valid generation rate", ok,
            f"{summary['valid_count']}/200 valid ({rate:.1%}) in {dt:.1f} s")


# --- 4. error taxonomy over 100 harvested single-fault models ---


def test_criterion_4_error_taxonomy():
    cfg = GenConfig(seed=0)
    harvested = []
    index = 0
    while len(harvested) < 100 and index < 2000:
        out = generate_model(cfg, index).outcome
        index += 1
        if out.valid and out.last_invalid is not None:
            harvested.append((out.last_invalid, out.last_violation))

    localized = 0
    categories_ok = True
    by_code: dict = {}
    mask = lambda s: re.sub(r"-?\d+|\?", "#", s)
    for g, fault in harvested:
        violations = validate_model(g)
        if violations and violations[0].layer_id == fault.layer_id:
            localized += 1
        for v in violations[:1]:
            if CATEGORY[v.code] not in {
                "Dimension Error", "Inconsistent Input Shapes", "Argument Error"
            }:
                categories_ok = False
            by_code.setdefault(v.code, set()).add(mask(v.message))

    templates_ok = all(len(msgs) == 1 for msgs in by_code.values()) and all(
        msgs == {mask(MESSAGE_TEMPLATE[code].format(expected="#", observed="#"))}
        for code, msgs in by_code.items()
    )
    ok = (
        len(harvested) == 100
        and localized == 100
        and categories_ok
        and templates_ok
    )
    verdict(4, "error taxonomy", ok,
            f"{localized}/{len(harvested)} localized, "
            f"{len(by_code)} codes seen, templates "
            + ("stable" if templates_ok else "diverge"))


# --- 5. oracle equivalence on 1000 random instances ---


def _rand_tensor(shape, rng, lo=-2.0, hi=2.0):
    n = 1
    for d in shape:
        n *= d
    return Tensor(shape, [rng.uniform(lo, hi) for _ in range(n)])


def test_criterion_5_oracle_equivalence():
    rng = Rng(12345)
    total = agreements = 0

    for _ in range(250):
        steps = rng.next_int(1, 6)
        cin = rng.next_int(1, 3)
        f = rng.next_int(1, 3)
        padding = "same" if rng.next_bool(0.5) else "valid"
        k = rng.next_int(1, 6 if padding == "same" else steps)
        s = rng.next_int(1, 3)
        x = _rand_tensor((1, steps, cin), rng)
        kern = _rand_tensor((k, cin, f), rng)
        bias = _rand_tensor((f,), rng)
        ours = eval_conv1d(x, kern, bias, strides=s, padding=padding)
        naive = oracle.conv1d(x.to_nested(), kern.to_nested(),
                              bias.to_nested(), s, padding)
        total += 1
        agreements += ours.to_nested() == naive

    for _ in range(250):
        h, w = rng.next_int(1, 5), rng.next_int(1, 5)
        cin, f = rng.next_int(1, 3), rng.next_int(1, 2)
        padding = "same" if rng.next_bool(0.5) else "valid"
        kh = rng.next_int(1, 5 if padding == "same" else h)
        kw = rng.next_int(1, 5 if padding == "same" else w)
        sh, sw = rng.next_int(1, 2), rng.next_int(1, 2)
        x = _rand_tensor((1, h, w, cin), rng)
        kern = _rand_tensor((kh, kw, cin, f), rng)
        bias = _rand_tensor((f,), rng)
        ours = eval_conv2d(x, kern, bias, strides=(sh, sw), padding=padding)
        naive = oracle.conv2d(x.to_nested(), kern.to_nested(),
                              bias.to_nested(), (sh, sw), padding)
        total += 1
        agreements += ours.to_nested() == naive

    for _ in range(250):
        steps, ch = rng.next_int(1, 6), rng.next_int(1, 4)
        padding = "same" if rng.next_bool(0.5) else "valid"
        pool = rng.next_int(1, 6 if padding == "same" else steps)
        s = rng.next_int(1, 3)
        mode = "max" if rng.next_bool(0.5) else "avg"
        x = _rand_tensor((1, steps, ch), rng)
        ours = eval_pool1d(x, pool, strides=s, padding=padding, mode=mode)
        naive = oracle.pool1d(x.to_nested(), pool, s, padding, mode)
        total += 1
        agreements += ours.to_nested() == naive

    for _ in range(250):
        h, w = rng.next_int(1, 5), rng.next_int(1, 5)
        ch = rng.next_int(1, 3)
        padding = "same" if rng.next_bool(0.5) else "valid"
        ph = rng.next_int(1, 5 if padding == "same" else h)
        pw = rng.next_int(1, 5 if padding == "same" else w)
        sh, sw = rng.next_int(1, 2), rng.next_int(1, 2)
        mode = "max" if rng.next_bool(0.5) else "avg"
        x = _rand_tensor((1, h, w, ch), rng)
        ours = eval_pool2d(x, (ph, pw), strides=(sh, sw), padding=padding,
                           mode=mode)
        naive = oracle.pool2d(x.to_nested(), (ph, pw), (sh, sw), padding, mode)
        total += 1
        agreements += ours.to_nested() == naive

    verdict(5, "oracle equivalence", total == 1000 and agreements == total,
            f"{agreements}/{total} instances agree exactly")


# --- 6. performance curve on deep chains with 4 KiB inputs ---


def _chain_model(n_layers: int):
    width = 16
    gamma = [1.0] * width
    zero = [0.0] * width
    cycle = [
        ("Activation", {"fn": "tanh"}, None),
        ("ReLU", {"negative_slope": 0.01, "threshold": 0.0}, None),
        ("BatchNorm", {"epsilon": 1e-3}, [gamma, zero, zero, gamma]),
        ("Permute", {"order": [1, 2]}, None),
        ("Dropout", {"rate": 0.0}, None),
    ]
    layers = []
    prev = "in0"
    for i in range(n_layers):
        kind, args, weights = cycle[i % len(cycle)]
        layer = {"id": f"n{i}", "kind": kind, "args": args, "inputs": [prev]}
        if weights is not None:
            layer["weights"] = weights
        layers.append(layer)
        prev = f"n{i}"
    doc = {
        "version": 1,
        "inputs": [{"id": "in0", "shape": [32, width]}],
        "layers": layers,
        "output": prev,
    }
    g = parse_model(json.dumps(doc))
    values = [((i % 17) - 8) / 8.0 for i in range(32 * width)]
    return g, {"in0": Tensor((1, 32, width), values)}


def test_criterion_6_performance_curve():
    times = {}
    for n in (10, 20, 50):
        g, bindings = _chain_model(n)
        best = min(
            _timed_eval(g, bindings) for _ in range(3)
        )
        times[n] = best
    ok = times[10] <= 2.0 and times[50] <= 10.0
    curve = ", ".join(f"{n} layers: {dt * 1000:.1f} ms"
                      for n, dt in times.items())
    verdict(6, "performance curve", ok, curve + " (4 KiB input)")


def _timed_eval(g, bindings):
    t0 = time.perf_counter()
    eval_model(g, bindings)
    return time.perf_counter() - t0


# --- 7. campaign determinism across runs and job counts ---


def test_criterion_7_determinism(tmp_path):
    def run(out, jobs):
        proc = subprocess.run(
            [sys.executable, "-m", "nnref", "generate", "--seed", "1",
             "--count", "50", "--out", str(out), "--jobs", str(jobs)],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        return sorted(p.name for p in out.iterdir())

    names_a = run(tmp_path / "a", 1)
    names_b = run(tmp_path / "b", 1)
    names_c = run(tmp_path / "c", 8)

    ok = names_a == names_b == names_c
    if ok:
        for other in ("b", "c"):
            match, mismatch, errors = filecmp.cmpfiles(
                tmp_path / "a", tmp_path / other, names_a, shallow=False
            )
            ok = ok and not mismatch and not errors
    verdict(7, "determinism", ok,
            f"{len(names_a)} files byte-identical across reruns and jobs 1 vs 8")


# --- 8. fault injection round trip ---


def test_criterion_8_fault_injection(tmp_path):
    palette = tuple(k for k in DEFAULT_PALETTE if k != LayerKind.DROPOUT)
    cfg = GenConfig(seed=0, palette=palette)
    run_generation_campaign(cfg, 60, tmp_path, jobs=4)

    containing = set()
    kind_of = {}
    for path in tmp_path.glob("model_*.json"):
        idx = int(path.stem.split("_")[1])
        g = parse_model(path.read_text())
        kind_of[idx] = {layer.id: layer.kind for layer in g.layers}
        if LayerKind.DENSE in set(kind_of[idx].values()):
            containing.add(idx)

    backend = BACKEND + ["--perturb-kind", "Dense", "--perturb-delta", "1000.0"]
    report = run_campaign(tmp_path, backend, jobs=4)
    failed = {v.index for v in report.verdicts if v.status == "fail"}

    localizable = [v for v in report.verdicts
                   if v.status == "fail" and v.failing_layer is not None]
    hits = sum(
        1 for v in localizable
        if kind_of[v.index][v.failing_layer] == LayerKind.DENSE
    )
    share = hits / len(localizable) if localizable else 0.0
    ok = (
        bool(containing)
        and failed == containing
        and bool(localizable)
        and share >= 0.95
    )
    verdict(8, "fault injection", ok,
            f"failed set == containing set ({len(failed)} models), "
            f"{hits}/{len(localizable)} localizations name the perturbed kind")
