import json
from dataclasses import replace
from fractions import Fraction

import pytest

from fmeca_amas.ingest.report import (
    MACHINE, TABLE, ReportError, compare_documents, read_report, write_gap, write_oracle, write_report,
)
from fmeca_amas.oracle import exact_best
from fmeca_amas.solver import run


def test_machine_report_fields(generator):
    payload = json.loads(write_report(run(generator), generator, MACHINE))
    assert payload["verdict"] == "FEASIBLE"
    assert payload["best"]["selected"] == ["A1", "A2"]
    assert payload["best"]["objective"] == {"violations": 0, "excess": 0, "cost": "17"}
    row = payload["failure_modes"][0]
    assert (row["initial_criticality"], row["residual_criticality"], row["threshold"]) == (6, 2, 2)
    assert row["verdict"] == "acceptable"
    assert payload["cost"] == {"total_cost": "17", "budget": "20", "within_budget": True}


def test_table_report(generator):
    text = write_report(run(generator), generator, TABLE).decode()
    assert "verdict        : FEASIBLE" in text
    assert "Failure1" in text and "acceptable" in text
    assert "Introduction of hardware redundancy" in text


def test_budget_infeasible_report(generator):
    model = replace(generator, budget=Fraction(0))
    result = run(model)
    payload = json.loads(write_report(result, model))
    assert payload["verdict"] == "BUDGET-INFEASIBLE"
    assert payload["within_budget_best"]["selected"] == []
    assert "within budget" in write_report(result, model, TABLE).decode()


def test_report_is_regenerable(generator):
    data = write_report(run(generator), generator)
    assert write_report(read_report(data, generator), generator) == data


def test_report_rejects_other_model(generator):
    result = run(generator)
    with pytest.raises(ReportError):
        write_report(result, replace(generator, budget=Fraction(21)))
    with pytest.raises(ReportError):
        read_report(write_report(result, generator), replace(generator, budget=Fraction(21)))
    with pytest.raises(ReportError):
        read_report(b"{}", generator)


def test_oracle_and_gap_documents(generator):
    report = write_report(run(generator), generator)
    oracle = write_oracle(exact_best(generator), generator)
    assert json.loads(oracle)["feasible_exists"] is True
    g = compare_documents(report, oracle)
    assert g.optimal
    assert write_gap(g, TABLE).decode().startswith("OPTIMAL")
    assert json.loads(write_gap(g, MACHINE))["verdict"] == "OPTIMAL"


def test_compare_documents_digest_mismatch(generator):
    report = write_report(run(generator), generator)
    other = replace(generator, budget=Fraction(30))
    with pytest.raises(ReportError):
        compare_documents(report, write_oracle(exact_best(other), other))
