"""
Acceptance suite. One test per criterion; each prints a single
``[criterion N] PASS|FAIL ...`` line to the terminal.

Run on its own with ``pytest tests/test_acceptance.py -v``.
"""

import contextlib
import itertools
import random
import statistics
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

from fmeca_amas import sample_path
from fmeca_amas.cli import main
from fmeca_amas.core import (
    Mitigation, Objective, PreventiveAction, criticality, evaluate, is_critical, objective, residual_criticality,
    residual_ranks,
)
from fmeca_amas.generate import generate
from fmeca_amas.ingest import TABULAR, parse_model, write_model
from fmeca_amas.oracle import exact_best, gap
from fmeca_amas.solver import SolverConfig, audit, dumps_trace, loads_trace, run
from fmeca_amas.solver.engine import ALL_RECOMMENDED, initial_state, step
from conftest import fm as make_fm, make_model


@pytest.fixture
def criterion(capsys):
    """Print exactly one PASS/FAIL line for the wrapped block."""

    @contextlib.contextmanager
    def _run(number, budget_s=None):
        notes = {}
        start = time.perf_counter()
        try:
            yield notes
            elapsed = time.perf_counter() - start
            if budget_s is not None:
                notes["runtime"] = f"{elapsed:.2f}s/<{budget_s}s"
                assert elapsed < budget_s, f"runtime {elapsed:.2f}s exceeds {budget_s}s"
        except BaseException as exc:
            detail = " ".join(f"{k}={v}" for k, v in notes.items())
            with capsys.disabled():
                print(f"\n[criterion {number}] FAIL {detail} ({type(exc).__name__}: {exc})".rstrip())
            raise
        detail = " ".join(f"{k}={v}" for k, v in notes.items())
        with capsys.disabled():
            print(f"\n[criterion {number}] PASS {detail}".rstrip())

    return _run


# -- shared instance suites --------------------------------------------------------


def _solver_suite():
    rng = random.Random(12345)
    return [generate(rng.randint(2, 8), rng.randint(3, 12), seed=i, feasible=True).model for i in range(100)]


@pytest.fixture(scope="module")
def trace_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("traces")


@pytest.fixture(scope="module")
def solver_runs(trace_dir):
    """Solver and oracle on the 100-instance feasible suite; traces written to disk."""
    start = time.perf_counter()
    runs = []
    for i, model in enumerate(_solver_suite()):
        result = run(model, SolverConfig(max_rounds=10_000))
        path = trace_dir / f"suite-{i:03d}.jsonl"
        path.write_bytes(dumps_trace(result.trace))
        runs.append((model, result, exact_best(model), path))
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def determinism_runs(trace_dir):
    model_path = sample_path()
    outputs = []
    for k in range(10):
        report = trace_dir / f"det-{k}.json"
        trace = trace_dir / f"det-{k}.jsonl"
        code = main(["solve", str(model_path), "--seed", "7", "--out", str(report), "--trace-out", str(trace)])
        outputs.append((code, report, trace))
    return outputs


# -- criteria ----------------------------------------------------------------------


def test_criterion_1_criticality_formula(criterion):
    with criterion(1, budget_s=1.0) as notes:
        combos = list(itertools.product(range(1, 5), repeat=3))
        assert len(combos) == 64
        mismatches = [c for c in combos if criticality(*c) != c[0] * c[1] * c[2]]
        assert not mismatches, mismatches
        notes["combos"] = 64

        model = parse_model(sample_path().read_bytes()).model
        failure = model.failure_mode("Failure1")
        assert criticality(*failure.ranks) == 6
        assert failure.critical_threshold == 2
        assert is_critical(failure)
        notes["Failure1"] = "6>2:critical"


def test_criterion_2_oracle_correctness(criterion):
    with criterion(2, budget_s=60.0) as notes:
        rng = random.Random(2024)
        beaten = 0
        for i in range(200):
            m = rng.randint(1, 12)
            model = generate(rng.randint(1, 8), m, seed=10_000 + i, feasible=rng.random() < 0.7).model
            assert len(model.actions) <= 12
            pruned = exact_best(model, prune=True)
            plain = exact_best(model, prune=False)
            assert plain.enumerated_count == 2 ** len(model.actions)
            assert (pruned.optimal.selected, pruned.optimal.objective) == \
                (plain.optimal.selected, plain.optimal.objective), f"instance {i}"
            assert (pruned.within_budget.selected, pruned.within_budget.objective) == \
                (plain.within_budget.selected, plain.within_budget.objective), f"instance {i}"
            assert pruned.feasible_exists == plain.feasible_exists

            ids = [a.id for a in model.actions]
            best = pruned.optimal.objective
            best_in_budget = pruned.within_budget.objective
            for _ in range(1000):
                subset = [a for a in ids if rng.random() < 0.5]
                obj = objective(subset, model)
                if obj < best:
                    beaten += 1
                if obj.cost <= model.budget and obj < best_in_budget:
                    beaten += 1
        assert beaten == 0, f"{beaten} random configurations beat the oracle"
        notes["instances"] = 200
        notes["random_configs"] = 200_000


def test_criterion_3_solver_vs_oracle(criterion, solver_runs):
    runs, elapsed = solver_runs
    with criterion(3) as notes:
        assert len(runs) == 100
        for model, _, _, _ in runs:
            assert 2 <= len(model.failure_modes) <= 8 and 3 <= len(model.actions) <= 12
            assert all(len(a.mitigations) == 1 for a in model.actions)
        feasible = 0
        gaps = []
        for model, result, exact, _ in runs:
            assert exact.feasible_exists
            solver_obj = result.best.objective
            # hard assertion, zero tolerance
            assert solver_obj >= exact.optimal.objective, (solver_obj, exact.optimal.objective)
            report = gap(solver_obj, exact.optimal.objective, result.feasible, exact.feasible_exists,
                         result.model_digest)
            if result.feasible and result.rounds_used <= 10_000:
                feasible += 1
            rel = report.relative_cost_gap
            gaps.append(float("inf") if rel is None else float(rel))
        median = statistics.median(gaps)
        notes["feasible"] = f"{feasible}/100"
        notes["median_gap"] = f"{median:.3f}"
        notes["runtime"] = f"{elapsed:.2f}s/<120s"
        assert feasible >= 80
        assert median <= 0.25
        assert elapsed < 120.0


def test_criterion_4_determinism(criterion, determinism_runs):
    with criterion(4) as notes:
        codes = {code for code, _, _ in determinism_runs}
        assert codes == {0}, codes
        reports = {p.read_bytes() for _, p, _ in determinism_runs}
        traces = {t.read_bytes() for _, _, t in determinism_runs}
        assert len(reports) == 1 and len(traces) == 1
        assert next(iter(traces))
        notes["runs"] = 10
        notes["distinct_reports"] = len(reports)
        notes["distinct_traces"] = len(traces)


def test_criterion_5_invariant_audit(criterion, solver_runs, determinism_runs):
    runs, _ = solver_runs
    with criterion(5) as notes:
        files = [(path, model) for model, _, _, path in runs]
        generator = parse_model(sample_path().read_bytes()).model
        files += [(t, generator) for _, _, t in determinism_runs]
        violations = []
        records = 0
        for path, model in files:
            trace = loads_trace(Path(path).read_bytes())
            records += len(trace)
            violations += [(path.name, str(v)) for v in audit(trace, model)]
        notes["trace_files"] = len(files)
        notes["records"] = records
        notes["violations"] = len(violations)
        assert not violations, violations[:5]


def test_criterion_6_monotonicity(criterion):
    with criterion(6, budget_s=5.0) as notes:
        rng = random.Random(6)
        for _ in range(1000):
            ranks = tuple(rng.randint(1, 4) for _ in range(3))
            n = rng.randint(0, 6)
            ids = [f"A{i}" for i in range(n)]
            failure = make_fm(ranks=ranks, threshold=rng.randint(1, 64), actions=ids)
            actions = [PreventiveAction(a, Fraction(1), {"F1": Mitigation(*(rng.randint(0, 3) for _ in range(3)))})
                       for a in ids]
            b = [a for a in actions if rng.random() < 0.6]
            a_ = [a for a in b if rng.random() < 0.5]
            assert residual_criticality(failure, b) <= residual_criticality(failure, a_)
            for sub in (a_, b):
                for r, initial in zip(residual_ranks(failure, sub), ranks):
                    assert 1 <= r <= initial
        notes["pairs"] = 1000


def test_criterion_7_ncs_behavior(criterion):
    with criterion(7) as notes:
        rng = random.Random(7)
        over_budget = violating = 0
        for i in range(50):
            model = generate(rng.randint(1, 8), rng.randint(1, 12), seed=20_000 + i, feasible=rng.random() < 0.5).model

            # forced all-selected start with the budget just below its cost
            everything = {a for fm in model.failure_modes for a in fm.recommended_action_ids}
            tau = evaluate(model, everything).total_cost
            if tau > 0:
                tight = replace(model, budget=tau - Fraction(1, 2) if tau >= 1 else Fraction(0))
                config = SolverConfig(initial_selection=ALL_RECOMMENDED)
                after = step(initial_state(tight, config), tight, config)
                r1 = [r for r in after.trace if r["round"] == 1 and r["event"] == "feedback"]
                downs = [r for r in r1 if r["agent"] == "quality" and r["payload"]["kind"] == "select_less"]
                assert downs, f"instance {i}: no select-less in round 1"
                assert set(downs[0]["payload"]["targets"]) == {f"pa:{a}" for a in everything}
                over_budget += 1

            # empty start: every violating failure mode with candidates asks for more
            config = SolverConfig()
            after = step(initial_state(model, config), model, config)
            ups = {r["agent"] for r in after.trace
                   if r["round"] == 1 and r["event"] == "feedback" and r["payload"]["kind"] == "select_more"}
            for f in model.failure_modes:
                if is_critical(f) and f.recommended_action_ids:
                    assert f"fm:{f.id}" in ups, f"instance {i}: {f.id} silent in round 1"
                    violating += 1

        # fully satisfied models: exactly k quiet rounds, no mutations
        quiet_models = 0
        for k in (1, 3, 10, 25):
            model = make_model([make_fm("F1", (1, 2, 1), 4, ["A1"]), make_fm("F2", (2, 2, 2), 8, ["A2"])],
                               [("A1", 3, {"F1": (0, 1, 0)}), ("A2", 5, {"F2": (1, 0, 0)})], budget=10)
            assert objective([], model) == Objective(0, 0, 0)
            result = run(model, SolverConfig(quiescence_window=k))
            assert result.converged and result.rounds_used == k
            assert not [r for r in result.trace if r["event"] in ("add", "remove", "ncs")]
            quiet_models += 1
        notes["down_checks"] = over_budget
        notes["up_checks"] = violating
        notes["quiet_models"] = quiet_models
        assert over_budget > 0 and violating > 0


def test_criterion_8_round_trip(criterion):
    with criterion(8) as notes:
        sample = sample_path().read_bytes()
        doc = parse_model(sample)
        once = write_model(doc)
        assert write_model(parse_model(once)) == once
        assert parse_model(once).model == doc.model

        checked = 1
        for i in range(50):
            gen = generate(1 + i % 8, 1 + (i * 7) % 12, seed=30_000 + i, feasible=i % 3 != 0)
            for fmt in ("structured", TABULAR):
                first = write_model(gen, fmt)
                parsed = parse_model(first, format=fmt)
                assert write_model(parsed, fmt) == first, f"model {i} ({fmt})"
                assert parsed.model == gen.model, f"model {i} ({fmt})"
            checked += 1
        notes["models"] = checked
