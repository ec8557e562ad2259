"""Cooperative multi-agent selection of preventive actions."""

from .agents import (
    QUALITY_ID, FailureModeAgent, Feedback, FeedbackKind, PreventiveActionAgent, QualityAgent,
    action_agent_id, agent_criticality_action, agent_criticality_failure_mode, agent_criticality_quality,
    fm_agent_id,
)
from .engine import (
    ALL_RECOMMENDED, EMPTY, LITERAL, SAFE_GREEDY, Add, Detection, Forward, NoOp, Remove, SimulationState,
    SolverConfig, SolverInputError, SolverResult, UnsupportedRelationError, detect_bad_safety_criticality,
    detect_bad_total_cost, initial_state, route_feedback, run, safely_removable, step,
)
from .trace import Violation, audit, dumps_trace, loads_trace

__all__ = [
    "ALL_RECOMMENDED", "Add", "Detection", "EMPTY", "FailureModeAgent", "Feedback", "FeedbackKind",
    "Forward", "LITERAL", "NoOp", "PreventiveActionAgent", "QUALITY_ID", "QualityAgent", "Remove",
    "SAFE_GREEDY", "SimulationState", "SolverConfig", "SolverInputError", "SolverResult",
    "UnsupportedRelationError", "Violation", "action_agent_id", "agent_criticality_action",
    "agent_criticality_failure_mode", "agent_criticality_quality", "audit", "detect_bad_safety_criticality",
    "detect_bad_total_cost", "dumps_trace", "fm_agent_id", "initial_state", "loads_trace", "route_feedback",
    "run", "safely_removable", "step",
]
