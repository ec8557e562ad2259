"""
Seeded random FMECA instances for acceptance suites.

With ``feasible=True`` a cover is planted first: every initially critical
failure mode gets a subset of its actions whose joint effect brings it to
the threshold, and the budget is set at or above the planted cost.
Distractor actions with random effects and costs are added around it.
Each action serves exactly one failure mode (relation types 1 and 2).
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, List

from .core import (
    DEFAULT_SCALES, Component, FailureMode, FmecaModel, Mitigation, PreventiveAction, residual_criticality,
)
from .ingest.document import ModelDocument

THRESHOLDS = (2, 3, 4, 6, 8, 9, 12)


def _fm_id(i: int, n: int) -> str:
    return f"F{i + 1:0{len(str(n))}d}"


def _action_id(i: int, m: int) -> str:
    return f"A{i + 1:0{len(str(m))}d}"


def generate(n_failure_modes: int, n_actions: int, seed: int = 0, feasible: bool = True,
             slack: float = 0.25) -> ModelDocument:
    if n_failure_modes < 1 or n_actions < 1:
        raise ValueError("need at least one failure mode and one action")
    rng = random.Random(seed)
    smin, smax = 1, 4

    fm_ids = [_fm_id(i, n_failure_modes) for i in range(n_failure_modes)]
    action_ids = [_action_id(i, n_actions) for i in range(n_actions)]

    owner: Dict[str, str] = {}
    order = fm_ids[:]
    rng.shuffle(order)
    for i, a in enumerate(action_ids):
        owner[a] = order[i] if i < len(order) else rng.choice(fm_ids)
    actions_of: Dict[str, List[str]] = {g: sorted(a for a in action_ids if owner[a] == g) for g in fm_ids}

    ranks = {g: [rng.randint(smin, smax) for _ in range(3)] for g in fm_ids}
    thresholds = {g: rng.choice(THRESHOLDS) for g in fm_ids}
    deltas: Dict[str, List[int]] = {}
    costs: Dict[str, Fraction] = {}
    for a in action_ids:
        d = [0, 0, 0]
        for _ in range(rng.choice((1, 1, 2))):
            d[rng.randrange(3)] += rng.randint(1, 2)
        deltas[a] = d
        costs[a] = Fraction(rng.randint(1, 20))

    planted: List[str] = []
    for g in fm_ids:
        s, o, d = ranks[g]
        theta = thresholds[g]
        if s * o * d <= theta:
            continue
        mine = actions_of[g]
        if not feasible:
            continue
        if not mine:
            # nothing can mitigate this one: make it non-critical instead
            thresholds[g] = s * o * d
            continue
        cover = rng.sample(mine, rng.randint(1, len(mine)))
        residual = [s, o, d]
        for a in cover:
            residual = [max(smin, r - x) for r, x in zip(residual, deltas[a])]
        while residual[0] * residual[1] * residual[2] > theta:
            a = rng.choice(cover)
            dims = [k for k in range(3) if residual[k] > smin]
            k = rng.choice(dims)
            deltas[a][k] += 1
            residual[k] -= 1
        planted.extend(cover)

    fms = tuple(
        FailureMode(
            id=g, component_id=f"C{i % max(1, (n_failure_modes + 1) // 2) + 1}",
            severity=ranks[g][0], occurrence=ranks[g][1], detectability=ranks[g][2],
            critical_threshold=thresholds[g], recommended_action_ids=tuple(actions_of[g]),
            description=f"Generated failure mode {g}",
        )
        for i, g in enumerate(fm_ids)
    )
    actions = tuple(
        PreventiveAction(a, costs[a], {owner[a]: Mitigation(*deltas[a])}, description=f"Generated action {a}")
        for a in action_ids
    )
    planted_cost = sum((costs[a] for a in planted), Fraction(0))
    if feasible:
        budget = planted_cost + Fraction(round(float(planted_cost) * rng.uniform(0.0, slack)))
    else:
        budget = Fraction(rng.randint(0, int(sum(costs.values()))))
    components = tuple(sorted({Component(fm.component_id) for fm in fms}, key=lambda c: c.id))
    model = FmecaModel(fms, actions, budget, components, dict(DEFAULT_SCALES))

    if feasible:
        chosen = [model.action(a) for a in planted]
        assert all(residual_criticality(fm, chosen) <= fm.critical_threshold for fm in fms)
    return ModelDocument(model=model, metadata={
        "generator": "fmeca-amas gen",
        "seed": seed,
        "feasible": feasible,
    })
