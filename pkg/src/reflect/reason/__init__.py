"""Failure explanation and correction on top of the hierarchical summary."""

from .backends import BackendFailure, HttpBackend, LlmBackend, RecordingBackend, ReplayBackend, make_backend
from .core import (
    GROUNDING_THRESHOLD,
    CorrectionPlan,
    EmptyPlan,
    ExecutableAction,
    ExplanationReport,
    NoTimestampInAnswer,
    UnknownVerb,
    UnparseableAnswer,
    VerificationResult,
    class_plan,
    explain_execution,
    explain_planning,
    extract_times,
    ground_action,
    ground_vector,
    oracle_verify,
    parse_yes_no,
    plan_correction,
    plan_steps,
    predicate_holds,
    report_bundle,
    run_progressive,
    split_steps,
    unmet_predicates,
    verify_subgoal,
)
from .oracle import Belief, OracleBackend, correction_steps
