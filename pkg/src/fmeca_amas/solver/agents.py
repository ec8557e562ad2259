"""Agents, feedback messages and agent-criticality functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Set, Tuple

from ..core import FmecaModel, residual_criticality

QUALITY_ID = "quality"
MAX_CRITICALITY = 100.0


class FeedbackKind(str, Enum):
    SELECT_MORE = "select_more"        # up
    SELECT_LESS = "select_less"        # down
    SELECTION_GOOD = "selection_good"  # approx

    @property
    def symbol(self) -> str:
        return {"select_more": "↑", "select_less": "↓", "selection_good": "≈"}[self.value]


def fm_agent_id(fm_id: str) -> str:
    return f"fm:{fm_id}"


def action_agent_id(action_id: str) -> str:
    return f"pa:{action_id}"


def bare_id(agent_id: str) -> str:
    return agent_id.split(":", 1)[1] if ":" in agent_id else agent_id


@dataclass(frozen=True)
class Feedback:
    kind: FeedbackKind
    source: str
    target: str
    round: int
    subject: Optional[str] = None
    hop_trail: Tuple[str, ...] = ()

    def forward(self, via: str, to: str) -> "Feedback":
        if via in self.hop_trail or to in self.hop_trail or to == via:
            raise ValueError("forwarding would revisit an agent")
        return Feedback(self.kind, self.source, to, self.round, self.subject, self.hop_trail + (via,))


def _zero_annoyance() -> Dict[FeedbackKind, int]:
    return {kind: 0 for kind in FeedbackKind}


@dataclass
class FailureModeAgent:
    fm_id: str
    selected: Set[str] = field(default_factory=set)
    annoyance: Dict[FeedbackKind, int] = field(default_factory=_zero_annoyance)

    @property
    def agent_id(self) -> str:
        return fm_agent_id(self.fm_id)


@dataclass
class PreventiveActionAgent:
    action_id: str
    selected_by: Set[str] = field(default_factory=set)
    inbox: list = field(default_factory=list)
    annoyance: Dict[FeedbackKind, int] = field(default_factory=_zero_annoyance)

    @property
    def agent_id(self) -> str:
        return action_agent_id(self.action_id)


@dataclass
class QualityAgent:
    budget: Fraction
    last_cost: Fraction = Fraction(0)
    annoyance: int = 0

    agent_id = QUALITY_ID


def agent_criticality_failure_mode(agent: FailureModeAgent, model: FmecaModel) -> float:
    """0 when the threshold holds, else 100/(m+1) for m selected actions."""
    fm = model.failure_mode(agent.fm_id)
    actions = [model.action(a) for a in sorted(agent.selected)]
    if residual_criticality(fm, actions, model.scale_min) <= fm.critical_threshold:
        return 0.0
    return MAX_CRITICALITY / (len(agent.selected) + 1)


def agent_criticality_action(agent: PreventiveActionAgent) -> float:
    return MAX_CRITICALITY / (len(agent.selected_by) + 1)


def agent_criticality_quality(agent: QualityAgent, total_cost: Optional[Fraction] = None) -> float:
    """Budget overrun as a share of the budget, capped at 100."""
    tau = agent.last_cost if total_cost is None else total_cost
    beta = agent.budget
    if tau <= beta:
        return 0.0
    if beta == 0:
        return MAX_CRITICALITY
    return float(MAX_CRITICALITY * min(Fraction(1), (tau - beta) / beta))
