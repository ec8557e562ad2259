"""
Exact reference optimum by subset enumeration.

Two independent routes reach the same answer: a plain enumeration over
``itertools.combinations`` that scores every subset with
``core.evaluate``, and a depth-first branch-and-bound with incremental
rank bookkeeping that only cuts branches whose lower bound is strictly
worse than both incumbents. Ties are broken canonically: fewer actions
first, then the lexicographically smallest sorted id tuple.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from .core import Configuration, FmecaModel, Level, Objective, SOLVER_ONLY_CODES, evaluate, validate
from .ingest.document import format_rational, model_digest
from .solver.engine import SolverResult

DEFAULT_LIMIT = 20


class OracleError(ValueError):
    pass


class InstanceTooLarge(OracleError):
    pass


class DigestMismatch(OracleError):
    pass


class OracleViolation(AssertionError):
    """A solver result beat the exact optimum; one of the two is wrong."""


@dataclass(frozen=True)
class OracleResult:
    optimal: Configuration
    within_budget: Configuration
    feasible_exists: bool
    enumerated_count: int
    model_digest: str
    pruned: bool

    @property
    def optimal_objective(self) -> Objective:
        return self.optimal.objective


def _canonical_key(objective: Objective, ids: Tuple[str, ...]) -> tuple:
    return (objective, len(ids), ids)


def _check(model: FmecaModel, limit: int) -> None:
    diagnostics = validate(model)
    unsupported = [d for d in diagnostics if d.code in SOLVER_ONLY_CODES]
    if unsupported:
        raise OracleError(str(unsupported[0]))
    errors = [d for d in diagnostics if d.level is Level.ERROR]
    if errors:
        raise OracleError(str(errors[0]))
    if len(model.actions) > limit:
        raise InstanceTooLarge(f"{len(model.actions)} actions exceed the enumeration limit of {limit}")


def _enumerate(model: FmecaModel):
    ids = sorted(a.id for a in model.actions)
    best = within = None
    count = 0
    for size in range(len(ids) + 1):
        for subset in itertools.combinations(ids, size):
            count += 1
            cfg = evaluate(model, subset)
            key = _canonical_key(cfg.objective, subset)
            if best is None or key < best[0]:
                best = (key, subset)
            if cfg.total_cost <= model.budget and (within is None or key < within[0]):
                within = (key, subset)
    return best[1], (within[1] if within else None), count


class _BranchAndBound:
    def __init__(self, model: FmecaModel):
        self.model = model
        self.ids = sorted(a.id for a in model.actions)
        self.fms = sorted(model.failure_modes, key=lambda f: f.id)
        fm_pos = {fm.id: i for i, fm in enumerate(self.fms)}
        self.smin = model.scale_min
        self.cost = [model.action(a).cost for a in self.ids]
        # per action: list of (fm index, dS, dO, dD)
        self.effects = [
            [(fm_pos[g], m.severity, m.occurrence, m.detectability)
             for g, m in sorted(model.action(a).mitigations.items()) if g in fm_pos]
            for a in self.ids
        ]
        n = len(self.ids)
        # suffix[i][f]: summed deltas of actions i..n-1 on failure mode f
        acc = [[0, 0, 0] for _ in self.fms]
        suffix = [None] * (n + 1)
        suffix[n] = [tuple(x) for x in acc]
        for i in range(n - 1, -1, -1):
            for f, ds, do, dd in self.effects[i]:
                acc[f][0] += ds
                acc[f][1] += do
                acc[f][2] += dd
            suffix[i] = [tuple(x) for x in acc]
        self.suffix = suffix
        self.best: Optional[tuple] = None
        self.within: Optional[tuple] = None
        self.count = 0

    def _score(self, deltas) -> Tuple[int, int]:
        violations = excess = 0
        smin = self.smin
        for fm, (ds, do, dd) in zip(self.fms, deltas):
            r = max(smin, fm.severity - ds) * max(smin, fm.occurrence - do) * max(smin, fm.detectability - dd)
            if r > fm.critical_threshold:
                violations += 1
                excess += r - fm.critical_threshold
        return violations, excess

    def run(self):
        self._visit(0, [[0, 0, 0] for _ in self.fms], [], Fraction(0))
        return self.best[1], (self.within[1] if self.within else None), self.count

    def _visit(self, i: int, deltas, chosen: List[str], cost: Fraction) -> None:
        n = len(self.ids)
        if i == n:
            self.count += 1
            v, e = self._score(deltas)
            subset = tuple(chosen)
            key = _canonical_key(Objective(v, e, cost), subset)
            if self.best is None or key < self.best[0]:
                self.best = (key, subset)
            if cost <= self.model.budget and (self.within is None or key < self.within[0]):
                self.within = (key, subset)
            return
        # adding actions never raises a residual, so taking every remaining
        # action bounds violations and excess from below; cost only grows
        optimistic = [(d[0] + s[0], d[1] + s[1], d[2] + s[2]) for d, s in zip(deltas, self.suffix[i])]
        v, e = self._score(optimistic)
        bound = Objective(v, e, cost)
        worse_than_best = self.best is not None and bound > self.best[0][0]
        over_budget = cost > self.model.budget
        worse_than_within = over_budget or (self.within is not None and bound > self.within[0][0])
        if worse_than_best and worse_than_within:
            return

        # include branch
        for f, ds, do, dd in self.effects[i]:
            deltas[f][0] += ds
            deltas[f][1] += do
            deltas[f][2] += dd
        chosen.append(self.ids[i])
        self._visit(i + 1, deltas, chosen, cost + self.cost[i])
        chosen.pop()
        for f, ds, do, dd in self.effects[i]:
            deltas[f][0] -= ds
            deltas[f][1] -= do
            deltas[f][2] -= dd
        # exclude branch
        self._visit(i + 1, deltas, chosen, cost)


def exact_best(model: FmecaModel, limit: int = DEFAULT_LIMIT, prune: bool = True) -> OracleResult:
    """Lexicographically optimal selection, plus the best one within budget."""
    _check(model, limit)
    if prune:
        best_ids, within_ids, count = _BranchAndBound(model).run()
    else:
        best_ids, within_ids, count = _enumerate(model)
    optimal = evaluate(model, best_ids)
    # budget >= 0 always admits the empty selection, so within_ids is set
    within = evaluate(model, within_ids if within_ids is not None else ())
    return OracleResult(
        optimal=optimal,
        within_budget=within,
        feasible_exists=within.violations == 0,
        enumerated_count=count,
        model_digest=model_digest(model),
        pruned=prune,
    )


# -- gap reporting ---------------------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    solver_objective: Objective
    oracle_objective: Objective
    cost_gap: Fraction
    relative_cost_gap: Optional[Fraction]
    solver_feasible: bool
    oracle_feasible: bool
    model_digest: str

    @property
    def feasibility_agrees(self) -> bool:
        return self.solver_feasible == self.oracle_feasible

    @property
    def optimal(self) -> bool:
        return self.solver_objective == self.oracle_objective

    def as_dict(self) -> Dict[str, Any]:
        rel = self.relative_cost_gap
        return {
            "format": "fmeca-amas-gap",
            "model_digest": self.model_digest,
            "solver_objective": _objective_dict(self.solver_objective),
            "oracle_objective": _objective_dict(self.oracle_objective),
            "cost_gap": format_rational(self.cost_gap),
            "relative_cost_gap": None if rel is None else format_rational(rel),
            "solver_feasible": self.solver_feasible,
            "oracle_feasible": self.oracle_feasible,
            "feasibility_agrees": self.feasibility_agrees,
            "verdict": "OPTIMAL" if self.optimal else "GAP",
        }


def _objective_dict(obj: Objective) -> Dict[str, Any]:
    return {"violations": obj.violations, "excess": obj.excess, "cost": format_rational(obj.cost)}


def gap(solver_objective: Objective, oracle_objective: Objective, solver_feasible: bool,
        oracle_feasible: bool, digest: str) -> GapReport:
    if solver_objective < oracle_objective:
        raise OracleViolation(f"solver objective {tuple(solver_objective)} beats the exact optimum "
                              f"{tuple(oracle_objective)}")
    cost_gap = Fraction(solver_objective.cost) - Fraction(oracle_objective.cost)
    if oracle_objective.cost:
        relative = cost_gap / oracle_objective.cost
    else:
        relative = Fraction(0) if cost_gap == 0 else None
    return GapReport(solver_objective, oracle_objective, cost_gap, relative, solver_feasible,
                     oracle_feasible, digest)


def compare(solver: SolverResult, oracle: OracleResult) -> GapReport:
    if solver.model_digest != oracle.model_digest:
        raise DigestMismatch(f"solver ran on {solver.model_digest}, oracle on {oracle.model_digest}")
    return gap(solver.best.objective, oracle.optimal_objective, solver.feasible, oracle.feasible_exists,
               solver.model_digest)
