"""
Solver reports, oracle results and gap reports.

Reports are a pure function of (result, model, format). The machine
format is JSON in the same canonical dialect as model documents and can
be read back into a ``SolverResult`` (without its trace), so
regenerating a report from a report is byte-identical.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Dict, List, Sequence

from ..core import Configuration, FmecaModel, Level, Objective, evaluate, validate
from ..oracle import GapReport, OracleResult, gap
from ..solver.engine import SolverConfig, SolverResult
from .document import FORMAT_VERSION, format_rational, model_digest, parse_rational
from .structured import dumps, loads

MACHINE = "json"
TABLE = "table"
REPORT_FORMATS = (MACHINE, TABLE)


class ReportError(ValueError):
    pass


def _objective(obj: Objective) -> Dict[str, Any]:
    return {"violations": obj.violations, "excess": obj.excess, "cost": format_rational(obj.cost)}


def _read_objective(raw) -> Objective:
    return Objective(int(raw["violations"]), int(raw["excess"]), parse_rational(raw["cost"]))


def _config_block(cfg: Configuration, budget: Fraction) -> Dict[str, Any]:
    return {
        "selected": sorted(cfg.selected),
        "objective": _objective(cfg.objective),
        "feasible": cfg.feasible(budget),
    }


def _verdict(result: SolverResult) -> str:
    if result.feasible:
        return "FEASIBLE"
    if result.budget_infeasible:
        return "BUDGET-INFEASIBLE"
    return "SAFETY-INFEASIBLE"


def _check(result: SolverResult, model: FmecaModel) -> None:
    errors = [d for d in validate(model) if d.level is Level.ERROR]
    if errors:
        raise ReportError(f"model did not validate: {errors[0]}")
    digest = model_digest(model)
    if digest != result.model_digest:
        raise ReportError(f"result was produced from {result.model_digest}, not {digest}")


def failure_mode_rows(result: SolverResult, model: FmecaModel) -> List[Dict[str, Any]]:
    best = result.best
    rows = []
    for fm in sorted(model.failure_modes, key=lambda f: f.id):
        residual = best.residual[fm.id]
        rows.append({
            "id": fm.id,
            "component": fm.component_id,
            "description": fm.description,
            "severity": fm.severity,
            "occurrence": fm.occurrence,
            "detectability": fm.detectability,
            "initial_criticality": fm.severity * fm.occurrence * fm.detectability,
            "threshold": fm.critical_threshold,
            "residual_criticality": residual,
            "verdict": "critical" if residual > fm.critical_threshold else "acceptable",
            "selected_actions": best.selected_for(model, fm.id),
        })
    return rows


def report_payload(result: SolverResult, model: FmecaModel) -> Dict[str, Any]:
    budget = Fraction(model.budget)
    return {
        "format": "fmeca-amas-report",
        "version": FORMAT_VERSION,
        "model_digest": result.model_digest,
        "solver": {
            "config": result.config.as_dict(),
            "converged": result.converged,
            "rounds_used": result.rounds_used,
        },
        "verdict": _verdict(result),
        "best": _config_block(result.best, budget),
        "final": _config_block(result.final, budget),
        "within_budget_best": _config_block(result.within_budget_best, budget),
        "cost": {
            "total_cost": format_rational(result.best.total_cost),
            "budget": format_rational(budget),
            "within_budget": result.best.total_cost <= budget,
        },
        "flags": {
            "budget_infeasible": result.budget_infeasible,
            "safety_infeasible": result.safety_infeasible,
        },
        "unresolved": result.unresolved,
        "failure_modes": failure_mode_rows(result, model),
    }


def _table(headers: Sequence[str], rows: Sequence[Sequence[Any]], right: Sequence[bool]) -> List[str]:
    cells = [[str(c) for c in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]

    def fmt(row):
        parts = [c.rjust(w) if r else c.ljust(w) for c, w, r in zip(row, widths, right)]
        return "  ".join(parts).rstrip()

    return [fmt(headers), "  ".join("-" * w for w in widths)] + [fmt(r) for r in cells]


def report_table(result: SolverResult, model: FmecaModel) -> str:
    budget = Fraction(model.budget)
    best = result.best
    if result.converged:
        status = f"converged after {result.rounds_used} rounds"
    else:
        status = f"not converged ({result.rounds_used} rounds, limit {result.config.max_rounds})"
    v, e, c = best.objective
    lines = [
        "FMECA preventive-action selection report",
        f"model digest   : {result.model_digest}",
        f"solver status  : {status}",
        f"verdict        : {_verdict(result)}",
        f"objective      : violations={v} excess={e} cost={format_rational(c)}",
        f"total cost     : {format_rational(best.total_cost)} (budget {format_rational(budget)})",
    ]
    if not result.feasible:
        wb = result.within_budget_best
        wv, we, wc = wb.objective
        lines.append(f"within budget  : {', '.join(sorted(wb.selected)) or '(none)'} "
                     f"violations={wv} excess={we} cost={format_rational(wc)}")
    lines.append("")
    rows = [
        (r["component"], r["id"], r["severity"], r["occurrence"], r["detectability"],
         r["initial_criticality"], r["threshold"], r["residual_criticality"], r["verdict"],
         ", ".join(r["selected_actions"]) or "-")
        for r in failure_mode_rows(result, model)
    ]
    lines += _table(
        ("Component", "Failure mode", "S", "O", "D", "Criticality", "Threshold", "Residual", "Verdict",
         "Selected actions"),
        rows, (False, False, True, True, True, True, True, True, False, False))
    lines.append("")
    action_rows = [
        (a.id, format_rational(a.cost), "yes" if a.id in best.selected else "no", a.description)
        for a in sorted(model.actions, key=lambda a: a.id)
    ]
    lines += _table(("Action", "Cost", "Selected", "Description"), action_rows, (False, True, False, False))
    return "\n".join(lines) + "\n"


def write_report(result: SolverResult, model: FmecaModel, format: str = MACHINE) -> bytes:
    _check(result, model)
    if format == MACHINE:
        return dumps(report_payload(result, model))
    if format == TABLE:
        return report_table(result, model).encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


def read_report(data, model: FmecaModel) -> SolverResult:
    """Rebuild a trace-less ``SolverResult`` from a machine-readable report."""
    try:
        raw = loads(data)
        if raw.get("format") != "fmeca-amas-report":
            raise ReportError("not a solver report")
        solver = raw["solver"]
        config = SolverConfig(**solver["config"])
        result = SolverResult(
            best=evaluate(model, raw["best"]["selected"]),
            final=evaluate(model, raw["final"]["selected"]),
            within_budget_best=evaluate(model, raw["within_budget_best"]["selected"]),
            converged=bool(solver["converged"]),
            rounds_used=int(solver["rounds_used"]),
            budget=Fraction(model.budget),
            model_digest=raw["model_digest"],
            config=config,
            unresolved=raw.get("unresolved", {}),
        )
    except ReportError:
        raise
    except Exception as exc:
        raise ReportError(f"malformed solver report: {exc}") from None
    if result.model_digest != model_digest(model):
        raise ReportError("report does not belong to this model (digest mismatch)")
    return result


def report_summary(data) -> Dict[str, Any]:
    """Digest, best objective and feasibility from a report, without the model."""
    try:
        raw = loads(data)
        if raw.get("format") != "fmeca-amas-report":
            raise ReportError("not a solver report")
        return {
            "model_digest": raw["model_digest"],
            "objective": _read_objective(raw["best"]["objective"]),
            "feasible": bool(raw["best"]["feasible"]),
        }
    except ReportError:
        raise
    except Exception as exc:
        raise ReportError(f"malformed solver report: {exc}") from None


# -- oracle / gap ------------------------------------------------------------------


def oracle_payload(result: OracleResult, budget) -> Dict[str, Any]:
    return {
        "format": "fmeca-amas-oracle",
        "version": FORMAT_VERSION,
        "model_digest": result.model_digest,
        "optimal": _config_block(result.optimal, Fraction(budget)),
        "within_budget": _config_block(result.within_budget, Fraction(budget)),
        "feasible_exists": result.feasible_exists,
        "enumerated_count": result.enumerated_count,
        "pruned": result.pruned,
    }


def write_oracle(result: OracleResult, model: FmecaModel, format: str = MACHINE) -> bytes:
    payload = oracle_payload(result, model.budget)
    if format == MACHINE:
        return dumps(payload)
    opt = result.optimal
    v, e, c = opt.objective
    wb = result.within_budget
    lines = [
        "Exact optimum (exhaustive enumeration)",
        f"model digest     : {result.model_digest}",
        f"optimal          : {', '.join(sorted(opt.selected)) or '(none)'}",
        f"objective        : ({v}, {e}, {format_rational(c)})",
        f"within budget    : {', '.join(sorted(wb.selected)) or '(none)'} "
        f"({wb.objective.violations}, {wb.objective.excess}, {format_rational(wb.objective.cost)})",
        f"feasible exists  : {'yes' if result.feasible_exists else 'no'}",
        f"subsets scored   : {result.enumerated_count}",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def oracle_summary(data) -> Dict[str, Any]:
    try:
        raw = loads(data)
        if raw.get("format") != "fmeca-amas-oracle":
            raise ReportError("not an oracle result")
        return {
            "model_digest": raw["model_digest"],
            "objective": _read_objective(raw["optimal"]["objective"]),
            "feasible": bool(raw["feasible_exists"]),
        }
    except ReportError:
        raise
    except Exception as exc:
        raise ReportError(f"malformed oracle result: {exc}") from None


def compare_documents(report_bytes, oracle_bytes) -> GapReport:
    solver = report_summary(report_bytes)
    exact = oracle_summary(oracle_bytes)
    if solver["model_digest"] != exact["model_digest"]:
        raise ReportError(f"digest mismatch: report {solver['model_digest']}, oracle {exact['model_digest']}")
    return gap(solver["objective"], exact["objective"], solver["feasible"], exact["feasible"],
               solver["model_digest"])


def write_gap(report: GapReport, format: str = MACHINE) -> bytes:
    payload = report.as_dict()
    if format == MACHINE:
        return dumps(payload)
    rel = payload["relative_cost_gap"]
    rel_text = "n/a" if rel is None else f"{float(parse_rational(rel)) * 100:.2f}%"
    so, oo = payload["solver_objective"], payload["oracle_objective"]
    lines = [
        payload["verdict"],
        f"solver objective : ({so['violations']}, {so['excess']}, {so['cost']})",
        f"oracle objective : ({oo['violations']}, {oo['excess']}, {oo['cost']})",
        f"cost gap         : {payload['cost_gap']} ({rel_text})",
        f"feasibility      : solver={'yes' if report.solver_feasible else 'no'} "
        f"oracle={'yes' if report.oracle_feasible else 'no'} "
        f"agree={'yes' if report.feasibility_agrees else 'no'}",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")
