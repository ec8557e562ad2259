"""
FMECA domain types and criticality mathematics.

Everything here is a pure function of immutable inputs. Ranks are plain
integers checked against the model's rating scales; costs and the budget
are ``fractions.Fraction`` so that total-cost comparisons are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple


class Dimension(str, Enum):
    SEVERITY = "severity"
    OCCURRENCE = "occurrence"
    DETECTABILITY = "detectability"


DIMENSIONS = (Dimension.SEVERITY, Dimension.OCCURRENCE, Dimension.DETECTABILITY)


class ValidationError(ValueError):
    """Raised when a value falls outside what the model allows."""


@dataclass(frozen=True)
class RatingLevel:
    rank: int
    label: str
    description: str = ""


@dataclass(frozen=True)
class RatingScale:
    """Ordered evaluation matrix for one of severity/occurrence/detectability."""

    dimension: Dimension
    levels: Tuple[RatingLevel, ...]

    @property
    def scale_min(self) -> int:
        return self.levels[0].rank

    @property
    def scale_max(self) -> int:
        return self.levels[-1].rank

    def resolve(self, value) -> int:
        """Map a numeric rank or a level label (case-insensitive) to a rank."""
        if isinstance(value, bool):
            raise ValidationError(f"{self.dimension.value}: boolean is not a rank")
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            text = value.strip()
            if text.lstrip("-").isdigit():
                return int(text)
            for level in self.levels:
                if level.label.casefold() == text.casefold():
                    return level.rank
            raise ValidationError(f"unknown {self.dimension.value} label {value!r}")
        raise ValidationError(f"{self.dimension.value}: cannot interpret {value!r} as a rank")

    def label_of(self, rank: int) -> str:
        for level in self.levels:
            if level.rank == rank:
                return level.label
        raise ValidationError(f"{self.dimension.value} rank {rank} not on scale")


def _levels(rows) -> Tuple[RatingLevel, ...]:
    return tuple(RatingLevel(rank, label, descr) for rank, label, descr in rows)


# Evaluation matrices used for the train-detection example (ranks 1..4).
DEFAULT_SCALES: Dict[Dimension, RatingScale] = {
    Dimension.SEVERITY: RatingScale(Dimension.SEVERITY, _levels([
        (1, "Negligible", "Deterioration of the system with no impact on its availability neither functioning."),
        (2, "Significant", "Deterioration of the system, which makes it not available to perform some operations."),
        (3, "Critical", "Deterioration of the system, which leads to its unavailability, permanent or definitive."),
        (4, "Catastrophic", "User's deadly, potentially deadly or permanent injuries."),
    ])),
    Dimension.OCCURRENCE: RatingScale(Dimension.OCCURRENCE, _levels([
        (1, "Very Low", "Less than once a week."),
        (2, "Low", "At least once a week."),
        (3, "Medium", "Several times a week."),
        (4, "High", "Daily."),
    ])),
    Dimension.DETECTABILITY: RatingScale(Dimension.DETECTABILITY, _levels([
        (1, "High", "Failure mode systematically detectable before its appearance."),
        (2, "Medium", "Failure mode usually detectable before its appearance."),
        (3, "Low", "Failure mode hardly detectable before its appearance."),
        (4, "Very Low", "Failure mode not detectable before its appearance."),
    ])),
}


@dataclass(frozen=True)
class Component:
    id: str
    name: str = ""
    critical_threshold: Optional[int] = None


@dataclass(frozen=True)
class Mitigation:
    """Non-negative rank reductions an action applies to one failure mode."""

    severity: int = 0
    occurrence: int = 0
    detectability: int = 0

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.severity, self.occurrence, self.detectability)

    @property
    def is_zero(self) -> bool:
        return not any(self.as_tuple())


@dataclass(frozen=True)
class FailureMode:
    id: str
    component_id: str
    severity: int
    occurrence: int
    detectability: int
    critical_threshold: int
    recommended_action_ids: Tuple[str, ...] = ()
    description: str = ""
    function: str = ""
    causes: str = ""
    effects: str = ""
    # alternative-action groups; representable but rejected by the solver
    relation_groups: Tuple[Tuple[str, ...], ...] = ()

    @property
    def ranks(self) -> Tuple[int, int, int]:
        return (self.severity, self.occurrence, self.detectability)


@dataclass(frozen=True)
class PreventiveAction:
    id: str
    cost: Fraction
    mitigations: Mapping[str, Mitigation] = field(default_factory=dict)
    description: str = ""


@dataclass(frozen=True)
class FmecaModel:
    failure_modes: Tuple[FailureMode, ...]
    actions: Tuple[PreventiveAction, ...]
    budget: Fraction
    components: Tuple[Component, ...] = ()
    scales: Mapping[Dimension, RatingScale] = field(default_factory=lambda: dict(DEFAULT_SCALES))

    @cached_property
    def failure_mode_index(self) -> Dict[str, FailureMode]:
        return {fm.id: fm for fm in self.failure_modes}

    @cached_property
    def action_index(self) -> Dict[str, PreventiveAction]:
        return {a.id: a for a in self.actions}

    def failure_mode(self, fm_id: str) -> FailureMode:
        return self.failure_mode_index[fm_id]

    def action(self, action_id: str) -> PreventiveAction:
        try:
            return self.action_index[action_id]
        except KeyError:
            raise ValidationError(f"unknown preventive action {action_id!r}") from None

    @property
    def scale_min(self) -> int:
        return min(s.scale_min for s in self.scales.values())

    @property
    def scale_max(self) -> int:
        return max(s.scale_max for s in self.scales.values())

    def bounds(self, dim: Dimension) -> Tuple[int, int]:
        scale = self.scales[dim]
        return scale.scale_min, scale.scale_max


class Objective(NamedTuple):
    """Lexicographic objective: fewer violations, then less excess, then lower cost."""

    violations: int
    excess: int
    cost: Fraction


# -- criticality -----------------------------------------------------------


def criticality(s: int, o: int, d: int, scale_min: int = 1, scale_max: int = 4) -> int:
    """Safety-criticality of a failure: the product of its three ranks."""
    for name, value in (("severity", s), ("occurrence", o), ("detectability", d)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(f"{name} rank must be an integer, got {value!r}")
        if not scale_min <= value <= scale_max:
            raise ValidationError(f"{name} rank {value} outside scale [{scale_min}, {scale_max}]")
    return s * o * d


def initial_criticality(fm: FailureMode, scale_min: int = 1, scale_max: int = 4) -> int:
    return criticality(*fm.ranks, scale_min=scale_min, scale_max=scale_max)


def residual_ranks(fm: FailureMode, selected: Iterable[PreventiveAction],
                   scale_min: int = 1) -> Tuple[int, int, int]:
    """Ranks of ``fm`` once the selected actions are implemented.

    Deltas of every selected action that mitigates ``fm`` are summed per
    dimension; the result is clamped to ``[scale_min, initial rank]``.
    Actions without an entry for ``fm`` contribute nothing.
    """
    ds = do = dd = 0
    for action in selected:
        m = action.mitigations.get(fm.id)
        if m is not None:
            ds += m.severity
            do += m.occurrence
            dd += m.detectability
    return (
        min(fm.severity, max(scale_min, fm.severity - ds)),
        min(fm.occurrence, max(scale_min, fm.occurrence - do)),
        min(fm.detectability, max(scale_min, fm.detectability - dd)),
    )


def residual_criticality(fm: FailureMode, selected: Iterable[PreventiveAction],
                         scale_min: int = 1) -> int:
    s, o, d = residual_ranks(fm, selected, scale_min)
    return s * o * d


def is_critical(fm: FailureMode, selected: Iterable[PreventiveAction] = (),
                scale_min: int = 1) -> bool:
    # "higher than" the threshold: equality is acceptable
    return residual_criticality(fm, selected, scale_min) > fm.critical_threshold


# -- configurations ----------------------------------------------------------


def _selection_ids(selected) -> frozenset:
    if isinstance(selected, Configuration):
        return selected.selected
    return frozenset(selected)


def total_cost(selected, model: FmecaModel) -> Fraction:
    """Exact sum of costs over the selected actions, each counted once."""
    ids = _selection_ids(selected)
    return sum((model.action(a).cost for a in sorted(ids)), Fraction(0))


@dataclass(frozen=True)
class Configuration:
    """A selection of preventive actions plus everything derived from it."""

    selected: frozenset
    total_cost: Fraction
    residual: Mapping[str, int]
    critical: Mapping[str, bool]
    excess: int

    @property
    def violations(self) -> int:
        return sum(1 for flag in self.critical.values() if flag)

    @property
    def objective(self) -> Objective:
        return Objective(self.violations, self.excess, self.total_cost)

    def feasible(self, budget: Fraction) -> bool:
        return self.violations == 0 and self.total_cost <= budget

    def selected_for(self, model: FmecaModel, fm_id: str) -> List[str]:
        fm = model.failure_mode(fm_id)
        return sorted(a for a in fm.recommended_action_ids if a in self.selected)


def evaluate(model: FmecaModel, selected) -> Configuration:
    ids = _selection_ids(selected)
    actions = [model.action(a) for a in sorted(ids)]
    smin = model.scale_min
    residual: Dict[str, int] = {}
    critical: Dict[str, bool] = {}
    excess = 0
    for fm in model.failure_modes:
        r = residual_criticality(fm, actions, smin)
        residual[fm.id] = r
        critical[fm.id] = r > fm.critical_threshold
        excess += max(0, r - fm.critical_threshold)
    return Configuration(
        selected=ids,
        total_cost=sum((a.cost for a in actions), Fraction(0)),
        residual=residual,
        critical=critical,
        excess=excess,
    )


def objective(selected, model: FmecaModel) -> Objective:
    return evaluate(model, selected).objective


def is_feasible(selected, model: FmecaModel) -> bool:
    return evaluate(model, selected).feasible(model.budget)


# -- validation --------------------------------------------------------------


class Level(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    level: Level
    code: str
    message: str
    location: str = ""

    def __str__(self) -> str:
        where = f"{self.location}: " if self.location else ""
        return f"{self.level.value}: {where}{self.message} [{self.code}]"


# Errors that only matter to the solver; the model itself is representable.
SOLVER_ONLY_CODES = frozenset({"relation-type-3-unsupported", "relation-type-4-unsupported"})


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.level is Level.ERROR for d in diagnostics)


def _check_scales(model: FmecaModel, out: List[Diagnostic]) -> None:
    for dim in DIMENSIONS:
        scale = model.scales.get(dim)
        if scale is None:
            out.append(Diagnostic(Level.ERROR, "invalid-scale", f"missing {dim.value} scale", "scales"))
            continue
        ranks = [lvl.rank for lvl in scale.levels]
        if not ranks or ranks[0] < 1 or ranks != list(range(ranks[0], ranks[0] + len(ranks))):
            out.append(Diagnostic(Level.ERROR, "invalid-scale",
                                  f"{dim.value} ranks must be consecutive integers starting at >= 1",
                                  f"scales.{dim.value}"))
        labels = [lvl.label.casefold() for lvl in scale.levels]
        if len(set(labels)) != len(labels):
            out.append(Diagnostic(Level.ERROR, "invalid-scale",
                                  f"{dim.value} labels must be unique", f"scales.{dim.value}"))


def _duplicates(ids: Iterable[str]) -> List[str]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def validate(model: FmecaModel) -> List[Diagnostic]:
    """Return error and warning diagnostics for ``model``; never mutates it."""
    out: List[Diagnostic] = []
    _check_scales(model, out)

    for kind, ids in (("component", [c.id for c in model.components]),
                      ("failure mode", [f.id for f in model.failure_modes]),
                      ("action", [a.id for a in model.actions])):
        for dup in _duplicates(ids):
            out.append(Diagnostic(Level.ERROR, "duplicate-id", f"duplicate {kind} id {dup!r}"))

    if model.budget < 0:
        out.append(Diagnostic(Level.ERROR, "negative-budget", f"budget {model.budget} is negative", "budget"))
    if not model.failure_modes:
        out.append(Diagnostic(Level.WARNING, "no-failure-modes", "model has no failure modes; nothing to solve"))

    component_ids = {c.id for c in model.components}
    action_ids = {a.id for a in model.actions}
    fm_ids = {f.id for f in model.failure_modes}
    smin, smax = model.scale_min, model.scale_max
    recommenders: Dict[str, List[str]] = {}

    for fm in model.failure_modes:
        loc = f"failure_modes[{fm.id}]"
        if model.components and fm.component_id not in component_ids:
            out.append(Diagnostic(Level.ERROR, "unknown-reference",
                                  f"unknown component {fm.component_id!r}", loc))
        ranks_ok = True
        for dim, value in zip(DIMENSIONS, fm.ranks):
            lo, hi = model.bounds(dim) if dim in model.scales else (smin, smax)
            if not lo <= value <= hi:
                ranks_ok = False
                out.append(Diagnostic(Level.ERROR, "rank-out-of-scale",
                                      f"{dim.value} rank {value} outside scale [{lo}, {hi}]",
                                      f"{loc}.{dim.value}"))
        if fm.critical_threshold < 1:
            out.append(Diagnostic(Level.ERROR, "invalid-threshold",
                                  f"critical threshold {fm.critical_threshold} must be a positive integer",
                                  f"{loc}.critical_threshold"))
        elif not smin ** 3 <= fm.critical_threshold <= smax ** 3:
            out.append(Diagnostic(Level.WARNING, "threshold-outside-range",
                                  f"critical threshold {fm.critical_threshold} outside criticality range "
                                  f"[{smin ** 3}, {smax ** 3}]", f"{loc}.critical_threshold"))
        for dup in _duplicates(fm.recommended_action_ids):
            out.append(Diagnostic(Level.ERROR, "duplicate-id", f"action {dup!r} recommended twice", loc))
        for aid in fm.recommended_action_ids:
            if aid not in action_ids:
                out.append(Diagnostic(Level.ERROR, "unknown-reference", f"unknown action {aid!r}", loc))
            recommenders.setdefault(aid, []).append(fm.id)
        if ranks_ok and fm.critical_threshold >= 1 and not fm.recommended_action_ids:
            if fm.severity * fm.occurrence * fm.detectability > fm.critical_threshold:
                out.append(Diagnostic(Level.WARNING, "critical-without-actions",
                                      "failure mode is critical but has no recommended actions", loc))
        if fm.relation_groups:
            out.append(Diagnostic(Level.ERROR, "relation-type-3-unsupported",
                                  "alternative-action groups (relation type 3) are not supported by the solver",
                                  loc))
            for group in fm.relation_groups:
                for aid in group:
                    if aid not in fm.recommended_action_ids:
                        out.append(Diagnostic(Level.ERROR, "unknown-reference",
                                              f"alternative group names non-recommended action {aid!r}", loc))

    for action in model.actions:
        loc = f"actions[{action.id}]"
        if action.cost < 0:
            out.append(Diagnostic(Level.ERROR, "negative-cost", f"cost {action.cost} is negative", loc))
        for fm_id, m in sorted(action.mitigations.items()):
            if fm_id not in fm_ids:
                out.append(Diagnostic(Level.ERROR, "unknown-reference",
                                      f"mitigation targets unknown failure mode {fm_id!r}", loc))
                continue
            if fm_id not in recommenders.get(action.id, []):
                out.append(Diagnostic(Level.ERROR, "unknown-reference",
                                      f"failure mode {fm_id!r} does not recommend this action", loc))
            if any(v < 0 for v in m.as_tuple()):
                out.append(Diagnostic(Level.ERROR, "negative-delta",
                                      f"negative rank reduction for {fm_id!r}", loc))
            elif m.is_zero:
                out.append(Diagnostic(Level.WARNING, "zero-effect-mitigation",
                                      f"mitigation of {fm_id!r} has no effect", loc))
        for fm_id in recommenders.get(action.id, []):
            if fm_id not in action.mitigations:
                out.append(Diagnostic(Level.WARNING, "missing-mitigation",
                                      f"recommended for {fm_id!r} but declares no mitigation for it", loc))
        targets = set(recommenders.get(action.id, [])) | set(action.mitigations)
        if len(targets) > 1:
            out.append(Diagnostic(Level.ERROR, "relation-type-4-unsupported",
                                  f"action targets several failure modes ({', '.join(sorted(targets))}); "
                                  "relation type 4 is not supported by the solver", loc))
    return out
