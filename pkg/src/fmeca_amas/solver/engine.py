"""
Round-based cooperative simulation selecting preventive actions.

Each round runs the same fixed phases: the quality agent and the
failure-mode agents detect non-cooperative situations and emit feedback,
feedback is delivered in (source, target) order, action agents route it
(adding, removing or forwarding), and the resulting add/remove intents are
applied together at the end of the round. Nothing here draws random
numbers, so a run is a pure function of the model and the configuration.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from ..core import (
    Configuration, Diagnostic, FmecaModel, Level, SOLVER_ONLY_CODES, evaluate, residual_criticality,
    validate,
)
from ..ingest.document import format_rational, model_digest
from .agents import (
    QUALITY_ID, FailureModeAgent, Feedback, FeedbackKind, PreventiveActionAgent, QualityAgent,
    action_agent_id, agent_criticality_action, agent_criticality_failure_mode,
    agent_criticality_quality, bare_id, fm_agent_id,
)

logger = logging.getLogger(__name__)

EMPTY = "empty"
ALL_RECOMMENDED = "all-recommended"
SAFE_GREEDY = "safe-greedy"
LITERAL = "literal"

MORE, LESS, GOOD = FeedbackKind.SELECT_MORE, FeedbackKind.SELECT_LESS, FeedbackKind.SELECTION_GOOD


class SolverInputError(ValueError):
    def __init__(self, message: str, diagnostics: Sequence[Diagnostic] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class UnsupportedRelationError(SolverInputError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    max_rounds: int = 10_000
    quiescence_window: int = 10
    psi_reorganization: int = 0
    initial_selection: str = EMPTY
    safety_precedence: bool = True
    select_less_mode: str = SAFE_GREEDY

    # agents never create or retire peers; there is nothing to configure
    psi_evolution = None

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        if self.quiescence_window < 1:
            raise ValueError("quiescence_window must be positive")
        if self.psi_reorganization < 0:
            raise ValueError("psi_reorganization must be non-negative")
        if self.initial_selection not in (EMPTY, ALL_RECOMMENDED):
            raise ValueError(f"initial_selection must be {EMPTY!r} or {ALL_RECOMMENDED!r}")
        if self.select_less_mode not in (SAFE_GREEDY, LITERAL):
            raise ValueError(f"select_less_mode must be {SAFE_GREEDY!r} or {LITERAL!r}")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "initial_selection": self.initial_selection,
            "max_rounds": self.max_rounds,
            "psi_reorganization": self.psi_reorganization,
            "quiescence_window": self.quiescence_window,
            "safety_precedence": self.safety_precedence,
            "seed": self.seed,
            "select_less_mode": self.select_less_mode,
        }


# -- routing decisions -------------------------------------------------------


@dataclass(frozen=True)
class Add:
    fm_id: str
    action_id: str


@dataclass(frozen=True)
class Remove:
    relations: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class Forward:
    feedback: Feedback


@dataclass(frozen=True)
class NoOp:
    kind: FeedbackKind
    annoyed: bool = False


Decision = Union[Add, Remove, Forward, NoOp]


@dataclass(frozen=True)
class Detection:
    """Outcome of one agent's NCS check in one round."""

    feedbacks: Tuple[Feedback, ...] = ()
    ncs: Optional[str] = None
    unresolvable: bool = False


# -- state ---------------------------------------------------------------------


@dataclass
class SimulationState:
    round: int
    failure_mode_agents: Dict[str, FailureModeAgent]
    action_agents: Dict[str, PreventiveActionAgent]
    quality: QualityAgent
    trace: List[Dict[str, Any]] = field(default_factory=list)
    quiet_streak: int = 0
    best: Optional[Configuration] = None
    within_budget_best: Optional[Configuration] = None
    unresolvable: Dict[str, int] = field(default_factory=dict)
    last_ncs: Tuple[str, ...] = ()
    conflicts: int = 0

    def selection(self) -> frozenset:
        return frozenset(a for a, agent in self.action_agents.items() if agent.selected_by)

    def relations(self) -> Set[Tuple[str, str]]:
        return {(g, p) for g, agent in self.failure_mode_agents.items() for p in agent.selected}


@dataclass
class SolverResult:
    best: Configuration
    final: Configuration
    within_budget_best: Configuration
    converged: bool
    rounds_used: int
    budget: Fraction
    model_digest: str
    config: SolverConfig
    unresolved: Dict[str, Any] = field(default_factory=dict)
    trace: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.best.feasible(self.budget)

    @property
    def budget_infeasible(self) -> bool:
        # threshold-safe configurations were found but none fits the budget
        return self.best.violations == 0 and self.best.total_cost > self.budget

    @property
    def safety_infeasible(self) -> bool:
        return self.best.violations > 0


def _canon(value):
    if isinstance(value, dict):
        return {str(k): _canon(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_canon(v) for v in value)
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, FeedbackKind):
        return value.value
    return value


def objective_payload(config: Configuration) -> List[Any]:
    v, e, c = config.objective
    return [v, e, format_rational(c)]


# -- detection -----------------------------------------------------------------


def _residual(model: FmecaModel, fm_id: str, selected: Iterable[str]) -> int:
    fm = model.failure_mode(fm_id)
    return residual_criticality(fm, [model.action(a) for a in sorted(selected)], model.scale_min)


def detect_bad_safety_criticality(agent: FailureModeAgent, model: FmecaModel, round: int) -> Detection:
    """Select-more to unselected recommended actions while the threshold is crossed.

    Mutates ``agent.annoyance``: +1 for every round the situation persists,
    reset to 0 once the threshold holds.
    """
    fm = model.failure_mode(agent.fm_id)
    source = agent.agent_id
    if _residual(model, fm.id, agent.selected) > fm.critical_threshold:
        agent.annoyance[MORE] += 1
        unselected = [a for a in sorted(fm.recommended_action_ids) if a not in agent.selected]
        if not unselected:
            return Detection(ncs="bad_safety_criticality", unresolvable=True)
        return Detection(
            feedbacks=tuple(Feedback(MORE, source, action_agent_id(a), round, subject=fm.id) for a in unselected),
            ncs="bad_safety_criticality",
        )
    agent.annoyance[MORE] = 0
    return Detection(feedbacks=tuple(
        Feedback(GOOD, source, action_agent_id(a), round, subject=fm.id)
        for a in sorted(fm.recommended_action_ids)))


def detect_bad_total_cost(quality: QualityAgent, state: SimulationState, model: FmecaModel) -> Detection:
    """Select-less to every selected action agent while the total cost exceeds the budget."""
    selected = state.selection()
    tau = sum((model.action(a).cost for a in sorted(selected)), Fraction(0))
    quality.last_cost = tau
    round = state.round + 1
    if tau > quality.budget:
        quality.annoyance += 1
        return Detection(
            feedbacks=tuple(Feedback(LESS, QUALITY_ID, action_agent_id(a), round) for a in sorted(selected)),
            ncs="bad_total_cost",
        )
    quality.annoyance = 0
    return Detection(feedbacks=tuple(
        Feedback(GOOD, QUALITY_ID, action_agent_id(a), round) for a in sorted(state.action_agents)))


# -- routing -------------------------------------------------------------------


def _more_key(state: SimulationState, model: FmecaModel, action_id: str):
    # most critical first, then cheaper, then lexical id
    return (-agent_criticality_action(state.action_agents[action_id]), model.action(action_id).cost, action_id)


def safely_removable(state: SimulationState, model: FmecaModel) -> List[str]:
    """Selected actions whose full deselection leaves every failure mode they serve at or below threshold."""
    out = []
    for action_id in sorted(state.selection()):
        agent = state.action_agents[action_id]
        ok = True
        for g in sorted(agent.selected_by):
            fm = model.failure_mode(g)
            remaining = state.failure_mode_agents[g].selected - {action_id}
            if _residual(model, g, remaining) > fm.critical_threshold:
                ok = False
                break
        if ok:
            out.append(action_id)
    return out


def route_feedback(agent: PreventiveActionAgent, feedback: Feedback, state: SimulationState,
                   model: FmecaModel, config: SolverConfig,
                   removable: Optional[Sequence[str]] = None) -> Decision:
    """Decide what ``agent`` does with one incoming feedback. Pure with respect to ``state``."""
    me = agent.action_id
    trail = {bare_id(a) for a in feedback.hop_trail}

    if feedback.kind is GOOD:
        return NoOp(GOOD)

    if feedback.kind is MORE:
        fm = model.failure_mode(feedback.subject)
        candidates = [me] + [a for a in fm.recommended_action_ids if a != me and a not in trail]
        best = min(candidates, key=lambda a: _more_key(state, model, a))
        if best != me:
            return Forward(feedback.forward(agent.agent_id, action_agent_id(best)))
        if agent.annoyance[MORE] < config.psi_reorganization:
            return NoOp(MORE, annoyed=True)
        return Add(fm.id, me)

    # select less
    if config.select_less_mode == LITERAL:
        others = [a for a in sorted(state.selection()) if a != me and a not in trail]
        best = min([me] + others, key=lambda a: _more_key(state, model, a))
        if best == me:
            if not others:
                return NoOp(LESS, annoyed=True)
            target = min(others, key=lambda a: _more_key(state, model, a))
            return Forward(feedback.forward(agent.agent_id, action_agent_id(target)))
        return Remove(tuple(sorted((g, me) for g in agent.selected_by)))

    if removable is None:
        removable = safely_removable(state, model)

    def costliest(ids):
        return min(ids, key=lambda a: (-model.action(a).cost, a))

    pool = [a for a in removable if a not in trail and a != me]
    if me in removable and costliest(pool + [me]) == me:
        return Remove(tuple(sorted((g, me) for g in agent.selected_by)))
    if pool:
        return Forward(feedback.forward(agent.agent_id, action_agent_id(costliest(pool))))
    return NoOp(LESS, annoyed=True)


# -- simulation ----------------------------------------------------------------


def check_model(model: FmecaModel) -> List[Diagnostic]:
    diagnostics = validate(model)
    unsupported = [d for d in diagnostics if d.code in SOLVER_ONLY_CODES]
    errors = [d for d in diagnostics if d.level is Level.ERROR and d.code not in SOLVER_ONLY_CODES]
    if errors:
        raise SolverInputError(f"model has {len(errors)} validation error(s): {errors[0]}", diagnostics)
    if unsupported:
        raise UnsupportedRelationError(str(unsupported[0]), diagnostics)
    return diagnostics


def initial_state(model: FmecaModel, config: SolverConfig) -> SimulationState:
    fm_agents = {fm.id: FailureModeAgent(fm.id) for fm in sorted(model.failure_modes, key=lambda f: f.id)}
    action_agents = {a.id: PreventiveActionAgent(a.id) for a in sorted(model.actions, key=lambda a: a.id)}
    if config.initial_selection == ALL_RECOMMENDED:
        for fm in model.failure_modes:
            for a in fm.recommended_action_ids:
                fm_agents[fm.id].selected.add(a)
                action_agents[a].selected_by.add(fm.id)
    state = SimulationState(0, fm_agents, action_agents, QualityAgent(Fraction(model.budget)))
    config0 = evaluate(model, state.selection())
    state.quality.last_cost = config0.total_cost
    state.best = config0
    state.within_budget_best = config0 if config0.total_cost <= model.budget else None
    state.trace.append(_record(0, "solver", "start", {
        "config": config.as_dict(),
        "model_digest": model_digest(model),
        "objective": objective_payload(config0),
        "selection": _selection_payload(state),
    }))
    return state


def _record(round: int, agent: str, event: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    return {"round": round, "agent": agent, "event": event, "payload": _canon(payload)}


def _selection_payload(state: SimulationState) -> Dict[str, List[str]]:
    return {g: sorted(agent.selected) for g, agent in state.failure_mode_agents.items()}


class _Round:
    """Mutable working set for one round; applied to the state at the end."""

    def __init__(self, state: SimulationState, model: FmecaModel, config: SolverConfig):
        self.state = state
        self.model = model
        self.config = config
        self.t = state.round + 1
        self.events: List[Dict[str, Any]] = []
        self.adds: Set[Tuple[str, str]] = set()
        self.removes: Set[Tuple[str, str]] = set()
        self.annoyed: Set[Tuple[str, FeedbackKind]] = set()
        self.ncs: List[str] = []
        self._removable: Optional[List[str]] = None

    def emit(self, agent: str, event: str, payload: Dict[str, Any]) -> None:
        self.events.append(_record(self.t, agent, event, payload))

    @property
    def removable(self) -> List[str]:
        if self._removable is None:
            self._removable = safely_removable(self.state, self.model)
        return self._removable

    def detect(self) -> List[Feedback]:
        state, model = self.state, self.model
        outgoing: List[Feedback] = []

        q = detect_bad_total_cost(state.quality, state, model)
        if q.ncs:
            self.ncs.append(f"{QUALITY_ID}:{q.ncs}")
            self.emit(QUALITY_ID, "ncs", {"kind": q.ncs, "total_cost": state.quality.last_cost,
                                          "budget": state.quality.budget})
        self._log_emission(QUALITY_ID, q.feedbacks)
        outgoing.extend(q.feedbacks)

        for g, agent in state.failure_mode_agents.items():
            d = detect_bad_safety_criticality(agent, model, self.t)
            if d.ncs:
                fm = model.failure_mode(g)
                self.ncs.append(f"{agent.agent_id}:{d.ncs}")
                self.emit(agent.agent_id, "ncs", {
                    "kind": "unresolvable" if d.unresolvable else d.ncs,
                    "residual": _residual(model, g, agent.selected),
                    "threshold": fm.critical_threshold,
                    "annoyance": agent.annoyance[MORE],
                })
                if d.unresolvable:
                    state.unresolvable[g] = state.unresolvable.get(g, 0) + 1
            self._log_emission(agent.agent_id, d.feedbacks)
            outgoing.extend(d.feedbacks)
        return outgoing

    def _log_emission(self, source: str, feedbacks: Sequence[Feedback]) -> None:
        if not feedbacks:
            return
        kind = feedbacks[0].kind
        if kind is GOOD:
            return  # acknowledgements are not traced; they only reset annoyance
        self.emit(source, "feedback", {"kind": kind, "subject": feedbacks[0].subject,
                                       "targets": [f.target for f in feedbacks]})

    def deliver(self, feedbacks: List[Feedback]) -> None:
        for f in sorted(feedbacks, key=lambda f: (f.source, f.target)):
            self.state.action_agents[bare_id(f.target)].inbox.append(f)

    def _served_order(self) -> List[Feedback]:
        state, model = self.state, self.model
        pending: List[Feedback] = []
        for agent in state.action_agents.values():
            pending.extend(agent.inbox)
            agent.inbox.clear()
        if not self.config.safety_precedence:
            return sorted(pending, key=lambda f: (f.source, f.target))
        fm_crit = {fm_agent_id(g): agent_criticality_failure_mode(a, model)
                   for g, a in state.failure_mode_agents.items()}
        rank = {MORE: 0, LESS: 1, GOOD: 2}
        return sorted(pending, key=lambda f: (rank[f.kind], -fm_crit.get(f.source, 0.0), f.source, f.target))

    def process(self) -> None:
        queue = self._served_order()
        # forwards of one kind are drained before the next kind is served
        i = 0
        while i < len(queue):
            f = queue[i]
            i += 1
            forwarded = self._handle(f)
            if forwarded is not None:
                j = i
                while j < len(queue) and queue[j].kind is f.kind:
                    j += 1
                queue.insert(j, forwarded)

    def _annoy(self, agent: PreventiveActionAgent, kind: FeedbackKind) -> None:
        if (agent.action_id, kind) not in self.annoyed:
            self.annoyed.add((agent.action_id, kind))
            agent.annoyance[kind] += 1
            self.emit(agent.agent_id, "noop", {"kind": kind, "annoyance": agent.annoyance[kind]})

    def _handle(self, f: Feedback) -> Optional[Feedback]:
        agent = self.state.action_agents[bare_id(f.target)]
        decision = route_feedback(agent, f, self.state, self.model, self.config,
                                  removable=self.removable if f.kind is LESS else None)
        if isinstance(decision, Add):
            self.adds.add((decision.fm_id, decision.action_id))
        elif isinstance(decision, Remove):
            self.removes.update(decision.relations)
        elif isinstance(decision, Forward):
            fw = decision.feedback
            self.emit(agent.agent_id, "forward", {"kind": fw.kind, "subject": fw.subject, "to": fw.target,
                                                  "hop_trail": list(fw.hop_trail)})
            return fw
        elif decision.annoyed:
            self._annoy(agent, decision.kind)
        elif f.kind is GOOD:
            reset = MORE if f.source != QUALITY_ID else LESS
            agent.annoyance[reset] = 0
        return None

    def apply(self) -> Tuple[List[Tuple[str, str]], List[Tuple[str, str]]]:
        state = self.state
        for g, p in sorted(self.adds & self.removes):
            self.emit(action_agent_id(p), "conflict", {"failure_mode": g, "resolution": "add"})
            state.conflicts += 1
        removes = sorted(self.removes - self.adds)
        adds = sorted(r for r in self.adds if r[1] not in state.failure_mode_agents[r[0]].selected)
        for g, p in removes:
            state.failure_mode_agents[g].selected.discard(p)
            state.action_agents[p].selected_by.discard(g)
            self.emit(action_agent_id(p), "remove", {"failure_mode": g})
        for g, p in adds:
            state.failure_mode_agents[g].selected.add(p)
            state.action_agents[p].selected_by.add(g)
            self.emit(action_agent_id(p), "add", {"failure_mode": g})
        return adds, removes


def _advance(state: SimulationState, model: FmecaModel, config: SolverConfig) -> SimulationState:
    rnd = _Round(state, model, config)
    rnd.deliver(rnd.detect())
    rnd.process()
    adds, removes = rnd.apply()

    current = evaluate(model, state.selection())
    if current.objective < state.best.objective:
        state.best = current
    if current.total_cost <= model.budget and (
            state.within_budget_best is None or current.objective < state.within_budget_best.objective):
        state.within_budget_best = current
    mutations = len(adds) + len(removes)
    quiet = not rnd.ncs and mutations == 0
    state.quiet_streak = state.quiet_streak + 1 if quiet else 0
    state.last_ncs = tuple(rnd.ncs)
    state.quality.last_cost = current.total_cost

    crit = {a.agent_id: agent_criticality_failure_mode(a, model) for a in state.failure_mode_agents.values()}
    crit.update({a.agent_id: agent_criticality_action(a) for a in state.action_agents.values()})
    crit[QUALITY_ID] = agent_criticality_quality(state.quality)
    annoyance = {}
    for a in list(state.failure_mode_agents.values()) + list(state.action_agents.values()):
        nonzero = {k.value: v for k, v in a.annoyance.items() if v}
        if nonzero:
            annoyance[a.agent_id] = nonzero
    if state.quality.annoyance:
        annoyance[QUALITY_ID] = {LESS.value: state.quality.annoyance}

    rnd.emit("solver", "round", {
        "added": [list(r) for r in adds],
        "removed": [list(r) for r in removes],
        "selection": _selection_payload(state),
        "selected_by": {p: sorted(a.selected_by) for p, a in state.action_agents.items()},
        "total_cost": current.total_cost,
        "objective": objective_payload(current),
        "best_objective": objective_payload(state.best),
        "criticality": crit,
        "annoyance": annoyance,
        "ncs": len(rnd.ncs),
        "quiet_streak": state.quiet_streak,
    })
    state.trace.extend(rnd.events)
    state.round = rnd.t
    return state


def step(state: SimulationState, model: FmecaModel, config: SolverConfig) -> SimulationState:
    """Return the successor of ``state`` after one round; ``state`` is left untouched."""
    if state.round >= config.max_rounds:
        raise ValueError("max_rounds already reached")
    return _advance(copy.deepcopy(state), model, config)


def run(model: FmecaModel, config: Optional[SolverConfig] = None) -> SolverResult:
    config = config or SolverConfig()
    check_model(model)
    state = initial_state(model, config)
    converged = False
    while state.round < config.max_rounds:
        _advance(state, model, config)
        if state.quiet_streak >= config.quiescence_window:
            converged = True
            break
    final = evaluate(model, state.selection())
    within = state.within_budget_best or evaluate(model, ())
    unresolved = {
        "conflicts": state.conflicts,
        "final_round_ncs": list(state.last_ncs),
        "unresolvable_rounds": dict(sorted(state.unresolvable.items())),
    }
    state.trace.append(_record(state.round, "solver", "end", {
        "converged": converged,
        "rounds_used": state.round,
        "best_objective": objective_payload(state.best),
        "best_selection": sorted(state.best.selected),
    }))
    logger.debug("solver finished after %d rounds (converged=%s)", state.round, converged)
    return SolverResult(
        best=state.best,
        final=final,
        within_budget_best=within,
        converged=converged,
        rounds_used=state.round,
        budget=Fraction(model.budget),
        model_digest=model_digest(model),
        config=config,
        unresolved=unresolved,
        trace=state.trace,
    )
