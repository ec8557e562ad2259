from fractions import Fraction

import pytest

from fmeca_amas import sample_path
from fmeca_amas.core import Component, FailureMode, FmecaModel, Mitigation, PreventiveAction
from fmeca_amas.ingest import parse_model


def make_model(fms, actions, budget=20, components=None):
    """Small helper: fms as FailureMode, actions as (id, cost, {fm: (dS, dO, dD)})."""
    acts = tuple(
        PreventiveAction(aid, Fraction(cost), {g: Mitigation(*d) for g, d in mit.items()}, description=aid)
        for aid, cost, mit in actions
    )
    if components is None:
        components = tuple(sorted({Component(f.component_id) for f in fms}, key=lambda c: c.id))
    return FmecaModel(tuple(fms), acts, Fraction(budget), components)


def fm(fm_id="F1", ranks=(3, 2, 1), threshold=2, actions=(), component="C1"):
    s, o, d = ranks
    return FailureMode(fm_id, component, s, o, d, threshold, tuple(actions))


@pytest.fixture
def generator_bytes():
    return sample_path().read_bytes()


@pytest.fixture
def generator_doc(generator_bytes):
    return parse_model(generator_bytes)


@pytest.fixture
def generator(generator_doc):
    return generator_doc.model
