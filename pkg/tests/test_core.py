import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fmeca_amas.core import (
    Level, Mitigation, Objective, PreventiveAction, ValidationError, criticality, evaluate, is_critical,
    objective, residual_criticality, residual_ranks, total_cost, validate,
)
from conftest import fm, make_model


def act(aid, cost=1, **deltas):
    target = deltas.pop("target", "F1")
    m = Mitigation(deltas.get("s", 0), deltas.get("o", 0), deltas.get("d", 0))
    return PreventiveAction(aid, Fraction(cost), {target: m})


# -- criticality -----------------------------------------------------------------

@pytest.mark.parametrize("ranks, expected", [((1, 1, 1), 1), ((4, 4, 4), 64), ((3, 2, 1), 6)])
def test_criticality_examples(ranks, expected):
    assert criticality(*ranks) == expected


def test_generator_failure_is_critical_at_threshold_two():
    assert criticality(3, 2, 1) > 2
    assert is_critical(fm(ranks=(3, 2, 1), threshold=2))


@pytest.mark.parametrize("ranks", [(0, 1, 1), (1, 5, 1), (1, 1, -2), (1.0, 1, 1)])
def test_criticality_rejects_out_of_scale(ranks):
    with pytest.raises(ValidationError):
        criticality(*ranks)


def test_criticality_custom_scale():
    assert criticality(5, 5, 2, scale_min=1, scale_max=5) == 50
    with pytest.raises(ValidationError):
        criticality(5, 1, 1)


# -- residuals ---------------------------------------------------------------------

def _clamp_oracle(initial, deltas, smin=1):
    # straight from the definition, one dimension at a time
    out = []
    for k in range(3):
        total = sum(d[k] for d in deltas)
        value = initial[k] - total
        if value < smin:
            value = smin
        if value > initial[k]:
            value = initial[k]
        out.append(value)
    return tuple(out)


def test_residual_ranks_examples():
    f = fm(ranks=(3, 2, 1))
    assert residual_ranks(f, []) == (3, 2, 1)
    assert residual_ranks(f, [act("A", o=1)]) == _clamp_oracle((3, 2, 1), [(0, 1, 0)]) == (3, 1, 1)
    both = [act("A", s=2), act("B", o=5)]
    assert residual_ranks(f, both) == _clamp_oracle((3, 2, 1), [(2, 0, 0), (0, 5, 0)]) == (1, 1, 1)


def test_residual_criticality_examples():
    f = fm(ranks=(3, 2, 1))
    assert residual_criticality(f, []) == 6
    assert residual_criticality(f, [act("A", o=1)]) == 3
    assert residual_criticality(f, [act("A", o=1), act("B", s=2)]) == 1


def test_actions_for_other_failure_modes_are_ignored():
    f = fm(ranks=(3, 2, 1))
    assert residual_ranks(f, [act("A", s=2, target="F9")]) == (3, 2, 1)


@pytest.mark.parametrize("residual, theta, expected", [(6, 2, True), (2, 2, False), (1, 2, False)])
def test_is_critical_threshold_is_strict(residual, theta, expected):
    # ranks (residual, 1, 1) give exactly the residual value
    assert is_critical(fm(ranks=(residual, 1, 1), threshold=theta)) is expected


# -- cost and objective ------------------------------------------------------------

def test_total_cost_examples():
    model = make_model([fm("F1", actions=["A1", "A2"]), fm("F2", actions=["A1", "A2"])],
                       [("A1", 10, {"F1": (1, 0, 0), "F2": (1, 0, 0)}),
                        ("A2", 7, {"F1": (0, 1, 0), "F2": (0, 1, 0)})])
    assert total_cost([], model) == 0
    assert total_cost(["A1"], model) == 10
    # each action is paid for once even though two failure modes select it
    pairs = [(g, a) for g in ("F1", "F2") for a in ("A1", "A2")]
    enumerated = sum({a: model.action(a).cost for _, a in pairs}.values())
    assert total_cost(["A1", "A2"], model) == enumerated == 17


def test_total_cost_is_exact():
    model = make_model([fm(actions=["A", "B", "C"])],
                       [("A", Fraction(1, 10), {"F1": (1, 0, 0)}), ("B", Fraction(1, 10), {"F1": (0, 1, 0)}),
                        ("C", Fraction(1, 10), {"F1": (0, 0, 0)})])
    assert total_cost(["A", "B", "C"], model) == Fraction(3, 10)


def test_total_cost_unknown_action():
    model = make_model([fm(actions=["A"])], [("A", 1, {"F1": (1, 0, 0)})])
    with pytest.raises(ValidationError):
        total_cost(["nope"], model)


def test_objective_examples():
    model = make_model([fm("F1", (3, 2, 1), 2, ["A1", "A2"])],
                       [("A1", 7, {"F1": (0, 1, 0)}), ("A2", 10, {"F1": (1, 0, 0)})])
    assert objective([], model) == Objective(1, 4, 0)
    assert objective(["A1", "A2"], model) == Objective(0, 0, 17)
    assert evaluate(model, ["A1", "A2"]).feasible(model.budget)
    assert objective(["A1"], model) == Objective(1, 1, 7)


def test_objective_orders_lexicographically():
    assert Objective(0, 9, 100) < Objective(1, 0, 0)
    assert Objective(0, 1, 100) > Objective(0, 0, 101)
    assert Objective(0, 0, Fraction(16)) < Objective(0, 0, Fraction(17))


# -- validation --------------------------------------------------------------------

def codes(diags, level=None):
    return {d.code for d in diags if level is None or d.level is level}


def test_validate_generator_has_no_errors(generator):
    assert not codes(validate(generator), Level.ERROR)


def test_validate_reports_missing_failure_mode():
    model = make_model([fm(actions=["A1"])], [("A1", 1, {"F1": (1, 0, 0), "F404": (1, 0, 0)})])
    assert "unknown-reference" in codes(validate(model), Level.ERROR)


def test_validate_flags_alternative_groups_as_unsupported():
    f = fm(actions=["A1", "A2"])
    f = type(f)(**{**f.__dict__, "relation_groups": (("A1", "A2"),)})
    model = make_model([f], [("A1", 1, {"F1": (1, 0, 0)}), ("A2", 1, {"F1": (0, 1, 0)})])
    assert "relation-type-3-unsupported" in codes(validate(model), Level.ERROR)


def test_validate_flags_shared_actions_as_unsupported():
    model = make_model([fm("F1", actions=["A1"]), fm("F2", actions=["A1"])],
                       [("A1", 1, {"F1": (1, 0, 0), "F2": (1, 0, 0)})])
    assert "relation-type-4-unsupported" in codes(validate(model), Level.ERROR)


def test_validate_errors_and_warnings():
    model = make_model(
        [fm("F1", (5, 1, 1), 2, ["A1"]), fm("F1", (1, 1, 1), 0, []), fm("F3", (4, 4, 4), 80, []),
         fm("F4", (4, 4, 4), 2, [])],
        [("A1", -1, {"F1": (0, 0, 0)})],
        budget=-5,
    )
    diags = validate(model)
    assert {"rank-out-of-scale", "duplicate-id", "invalid-threshold", "negative-cost",
            "negative-budget"} <= codes(diags, Level.ERROR)
    assert {"zero-effect-mitigation", "threshold-outside-range", "critical-without-actions"} <= \
        codes(diags, Level.WARNING)


def test_validate_is_pure(generator):
    before = repr(generator)
    assert validate(generator) == validate(generator)
    assert repr(generator) == before


# -- properties -------------------------------------------------------------------

def test_all_default_scale_products():
    for s, o, d in itertools.product(range(1, 5), repeat=3):
        assert criticality(s, o, d) == s * o * d


rank = st.integers(1, 4)
delta = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))


@given(ranks=st.tuples(rank, rank, rank), deltas=st.lists(delta, max_size=6), data=st.data())
def test_residual_monotone_and_clamped(ranks, deltas, data):
    f = fm(ranks=ranks, actions=[f"A{i}" for i in range(len(deltas))])
    actions = [PreventiveAction(f"A{i}", Fraction(1), {"F1": Mitigation(*d)}) for i, d in enumerate(deltas)]
    subset_b = data.draw(st.lists(st.sampled_from(actions), unique_by=lambda a: a.id)) if actions else []
    subset_a = [a for a in subset_b if data.draw(st.booleans())]
    assert residual_criticality(f, subset_b) <= residual_criticality(f, subset_a)
    for r, initial in zip(residual_ranks(f, subset_b), ranks):
        assert 1 <= r <= initial
    assert residual_ranks(f, subset_b) == _clamp_oracle(ranks, [a.mitigations["F1"].as_tuple() for a in subset_b])


@given(costs=st.lists(st.fractions(min_value=0, max_value=100, max_denominator=20), min_size=1, max_size=8),
       data=st.data())
@settings(max_examples=50)
def test_total_cost_additive_over_disjoint_selections(costs, data):
    ids = [f"A{i}" for i in range(len(costs))]
    model = make_model([fm(actions=ids)], [(a, c, {"F1": (1, 0, 0)}) for a, c in zip(ids, costs)])
    left = data.draw(st.sets(st.sampled_from(ids)))
    right = set(ids) - left
    assert total_cost(left | right, model) == total_cost(left, model) + total_cost(right, model)
    assert total_cost(set(), model) == 0


@given(ranks=st.lists(st.tuples(rank, rank, rank), min_size=1, max_size=5),
       thetas=st.lists(st.integers(1, 64), min_size=5, max_size=5))
@settings(max_examples=50)
def test_empty_objective_counts_initially_critical(ranks, thetas):
    fms = [fm(f"F{i}", r, thetas[i]) for i, r in enumerate(ranks)]
    model = make_model(fms, [])
    expected = sum(1 for f in fms if f.severity * f.occurrence * f.detectability > f.critical_threshold)
    obj = objective([], model)
    assert obj.cost == 0 and obj.violations == expected
