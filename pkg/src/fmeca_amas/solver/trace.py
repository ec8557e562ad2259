"""
Trace export and the invariant auditor.

A trace is line-delimited JSON; every record has the fields ``round``,
``agent``, ``event`` and ``payload`` in that order, with payload keys
sorted. Costs appear as exact rational strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional

from ..core import FmecaModel
from ..ingest.document import parse_rational


def dumps_trace(records: Iterable[Dict[str, Any]]) -> bytes:
    lines = []
    for rec in records:
        ordered = {"round": rec["round"], "agent": rec["agent"], "event": rec["event"], "payload": rec["payload"]}
        lines.append(json.dumps(ordered, ensure_ascii=False, separators=(",", ":")))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def loads_trace(data) -> List[Dict[str, Any]]:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    return [json.loads(line) for line in data.splitlines() if line.strip()]


@dataclass(frozen=True)
class Violation:
    round: int
    check: str
    message: str

    def __str__(self) -> str:
        return f"round {self.round}: [{self.check}] {self.message}"


def _objective_key(obj) -> tuple:
    v, e, c = obj
    return (v, e, parse_rational(c))


def audit(records: List[Dict[str, Any]], model: Optional[FmecaModel] = None) -> List[Violation]:
    """Check a trace against the solver's structural invariants.

    Checks: selection/selected-by symmetry, disjoint applied add and remove
    sets per round, agent-criticality within [0, 100], selections drawn from
    recommended actions (needs ``model``), non-increasing best-so-far, and
    quiescence before a converged end.
    """
    out: List[Violation] = []
    recommended = None
    if model is not None:
        recommended = {fm.id: set(fm.recommended_action_ids) for fm in model.failure_modes}
    best_prev = None
    window = None
    rounds = [r for r in records if r["event"] == "round"]
    last_round = 0

    for rec in records:
        t, payload = rec["round"], rec["payload"]
        if rec["event"] == "start":
            window = payload["config"]["quiescence_window"]
            best_prev = _objective_key(payload["objective"])
            continue
        if rec["event"] == "forward":
            trail = payload["hop_trail"]
            if len(set(trail)) != len(trail) or payload["to"] in trail:
                out.append(Violation(t, "forwarding", f"hop trail revisits an agent: {trail} -> {payload['to']}"))
            continue
        if rec["event"] == "end":
            if payload["converged"] and window is not None:
                tail = rounds[-window:]
                if len(tail) < window or any(r["payload"]["ncs"] or r["payload"]["added"]
                                             or r["payload"]["removed"] for r in tail):
                    out.append(Violation(t, "convergence", "converged without a quiet final window"))
            continue
        if rec["event"] != "round":
            continue
        if t != last_round + 1:
            out.append(Violation(t, "ordering", f"round {t} follows round {last_round}"))
        last_round = t

        selection = payload["selection"]
        selected_by = payload["selected_by"]
        forward = {(g, p) for g, ps in selection.items() for p in ps}
        backward = {(g, p) for p, gs in selected_by.items() for g in gs}
        if forward != backward:
            diff = sorted(forward ^ backward)
            out.append(Violation(t, "symmetry", f"selection and selected-by disagree on {diff}"))

        added = {tuple(r) for r in payload["added"]}
        removed = {tuple(r) for r in payload["removed"]}
        if added & removed:
            out.append(Violation(t, "disjointness", f"relations both added and removed: {sorted(added & removed)}"))

        for agent, value in payload["criticality"].items():
            if not 0.0 <= value <= 100.0:
                out.append(Violation(t, "criticality-range", f"{agent} has agent-criticality {value}"))

        if recommended is not None:
            for g, ps in selection.items():
                extra = set(ps) - recommended.get(g, set())
                if extra:
                    out.append(Violation(t, "recommended-subset", f"{g} selected non-recommended {sorted(extra)}"))

        best = _objective_key(payload["best_objective"])
        current = _objective_key(payload["objective"])
        if best_prev is not None and best > best_prev:
            out.append(Violation(t, "best-monotonicity", f"best objective rose from {best_prev} to {best}"))
        if best > current:
            out.append(Violation(t, "best-monotonicity", f"best {best} worse than current {current}"))
        best_prev = best
    return out
