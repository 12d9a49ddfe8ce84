from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import pytest
from hypothesis import given
from hypothesis import strategies as st

from budgeted_sampling.models import (
    DeltaThresholds,
    GriddedThresholds,
    OptimalEnvelope,
    ProcessKind,
    ProcessModel,
    SeriesConfig,
    SimulationReport,
    UniformDeterministic,
    mmse_reconstruct,
    normalize_ou,
    policy_from_dict,
    policy_from_json,
    policy_to_dict,
    policy_to_json,
)

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def _schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def test_process_model_validation():
    assert ProcessModel.brownian(2.0).kind is ProcessKind.BROWNIAN
    assert ProcessModel.ou(-1.5, 2.0).a_bar == -3.0
    assert ProcessModel("ou", -1.0).kind is ProcessKind.OU
    with pytest.raises(ValueError):
        ProcessModel(ProcessKind.BROWNIAN, drift_a=0.1)
    with pytest.raises(ValueError):
        ProcessModel.ou(1.0, T=0.0)
    with pytest.raises(ValueError):
        ProcessModel.ou(math.inf)


def test_normalize_ou():
    assert normalize_ou(0.5, 4.0) == 2.0
    with pytest.raises(ValueError):
        normalize_ou(1.0, -1.0)


def test_series_config_validation():
    with pytest.raises(ValueError):
        SeriesConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        SeriesConfig(max_terms=0)


def test_policy_validation():
    with pytest.raises(ValueError):
        UniformDeterministic(2, times=(0.5, 0.25), horizon=1.0)
    with pytest.raises(ValueError):
        UniformDeterministic(1, times=(1.5,), horizon=1.0)
    with pytest.raises(ValueError):
        DeltaThresholds(2, rho=(0.9,))
    with pytest.raises(ValueError):
        DeltaThresholds(0, rho=())
    with pytest.raises(ValueError):
        OptimalEnvelope(1, theta=(0.9, 0.3), gamma=(1.0,))
    with pytest.raises(ValueError):
        OptimalEnvelope(1, theta=(1.0, 1.0), gamma=(1.0,))
    with pytest.raises(ValueError):
        GriddedThresholds(1, time_grid=(0.0, 1.0), thresholds=((0.5, 0.7),))
    with pytest.raises(ValueError):
        GriddedThresholds(1, time_grid=(0.0, 1.0), thresholds=((0.5, 0.4, 0.3),))


def _examples():
    return [
        UniformDeterministic(2, times=(1 / 3, 2 / 3), horizon=1.0),
        DeltaThresholds(2, rho=(0.9389, 0.8741), c=(0.3954, 0.3473), lambda_star=(1.3995, 1.6146)),
        OptimalEnvelope(1, theta=(1.0, 0.366), gamma=(math.sqrt(3),)),
        GriddedThresholds(1, time_grid=(0.0, 0.5, 1.0), thresholds=((1.0, 0.7, 0.0),), a_bar=-1.0),
    ]


@pytest.mark.parametrize("policy", _examples(), ids=lambda p: p.kind)
def test_policy_json_round_trip_and_schema(policy):
    text = policy_to_json(policy)
    assert policy_from_json(text) == policy
    jsonschema.validate(json.loads(text), _schema("policy"))


def test_policy_from_dict_rejects_garbage():
    with pytest.raises(ValueError):
        policy_from_dict({"kind": "nope", "budget": 1, "coefficients": {}})
    with pytest.raises(ValueError):
        policy_from_dict({"budget": 1})


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=6, unique=True))
def test_uniform_round_trip_property(times):
    times = tuple(sorted(times))
    pol = UniformDeterministic(len(times), times=times, horizon=1.0)
    assert policy_from_dict(policy_to_dict(pol)) == pol


def test_simulation_report():
    rep = SimulationReport(0.1, 0.001, 10, 0.5, 3, "delta-N1", budget=1, horizon=2.0)
    assert rep.coefficient == pytest.approx(0.05)
    jsonschema.validate(rep.to_dict(), _schema("simulation_report"))
    with pytest.raises(ValueError):
        SimulationReport(0.1, -1.0, 10, 0.5, 3, "x")
    with pytest.raises(ValueError):
        SimulationReport(0.1, 0.0, 10, 2.0, 3, "x", budget=1)


def test_mmse_reconstruct_brownian_hold():
    m = ProcessModel.brownian(1.0, x0=0.3)
    assert mmse_reconstruct(m, [], 0.5) == 0.3
    assert mmse_reconstruct(m, [(0.2, 1.0), (0.4, -2.0)], 0.9) == -2.0


def test_mmse_reconstruct_ou_exponential_hold():
    m = ProcessModel.ou(-1.0, 1.0, x0=1.0)
    assert mmse_reconstruct(m, [], 0.5) == pytest.approx(math.exp(-0.5))
    assert mmse_reconstruct(m, [(0.25, 2.0)], 0.75) == pytest.approx(2.0 * math.exp(-0.5))


def test_mmse_reconstruct_errors():
    m = ProcessModel.brownian()
    with pytest.raises(ValueError):
        mmse_reconstruct(m, [], 1.5)
    with pytest.raises(ValueError):
        mmse_reconstruct(m, [(0.5, 1.0), (0.2, 0.0)], 0.9)
    with pytest.raises(ValueError):
        mmse_reconstruct(m, [(0.6, 1.0)], 0.5)
