"""Reference semantics, fuzzer and differential harness for layer graphs."""

from .emit import emit_backend_script
from .errors import NnrefError, PrecondViolationError
from .generate import (
    GenConfig,
    RepairOutcome,
    find_valid_model,
    generate_inputs,
    generate_model,
    recursive_generation,
    run_generation_campaign,
)
from .harness import (
    CampaignReport,
    TolerancePolicy,
    Verdict,
    check_model,
    compare_outputs,
    localize_failure,
    run_backend,
    run_campaign,
)
from .ir import (
    InputSpec,
    LayerNode,
    ModelGraph,
    load_model,
    parse_bindings,
    parse_model,
    save_model,
    serialize_bindings,
    serialize_model,
    subgraph,
    topo_order,
)
from .kinds import LayerKind
from .semantics import (
    EvalResult,
    StochasticCheckConfig,
    StochasticCheckReport,
    check_stochastic,
    eval_model,
)
from .tensor import ComparisonStats, Tensor, approx_equal
from .validate import report_json, validate_model
from .violations import ErrorCode, PrecondViolation

__version__ = "0.1.0"

__all__ = [
    "CampaignReport",
    "ComparisonStats",
    "ErrorCode",
    "EvalResult",
    "GenConfig",
    "InputSpec",
    "LayerKind",
    "LayerNode",
    "ModelGraph",
    "NnrefError",
    "PrecondViolation",
    "PrecondViolationError",
    "RepairOutcome",
    "StochasticCheckConfig",
    "StochasticCheckReport",
    "Tensor",
    "TolerancePolicy",
    "Verdict",
    "approx_equal",
    "check_model",
    "check_stochastic",
    "compare_outputs",
    "emit_backend_script",
    "eval_model",
    "find_valid_model",
    "generate_inputs",
    "generate_model",
    "load_model",
    "localize_failure",
    "parse_bindings",
    "parse_model",
    "recursive_generation",
    "report_json",
    "run_backend",
    "run_campaign",
    "run_generation_campaign",
    "save_model",
    "serialize_bindings",
    "serialize_model",
    "subgraph",
    "topo_order",
    "validate_model",
    "__version__",
]
