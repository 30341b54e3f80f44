import dataclasses

import numpy as np
import pytest

from market.case import Bus, BusKind, Generator, Network
from market.caseio import CaseFileModel, build_case, load_case
from market.dispatch import (
    FeasibilityVerdict,
    check_batch_feasibility,
    ensure_feasible,
    least_cost_dispatch,
    throughput_limit,
)
from market.errors import InfeasibleCaseError
from market.kkt import assemble
from market.lemke import SolverConfig, solve_mixed
from market.network import Line
from market.scenarios import solve_ex_post

from conftest import single_bus_case, two_bus_hyperscaler_case


@pytest.mark.parametrize(
    "capacity, limit, expected",
    [
        (100.0, 50.0, 50.0),
        (100.0, 200.0, 100.0),
        (100.0, 0.0, 0.0),
    ],
)
def test_throughput_limit_examples(capacity, limit, expected):
    case = two_bus_hyperscaler_case(capacity=capacity, limit=limit)
    assert throughput_limit(case) == pytest.approx(expected, abs=1e-6)


def test_throughput_without_hyperscaler_is_zero(micro1):
    assert throughput_limit(micro1) == 0.0


def test_overloaded_case_is_infeasible():
    (verdict,) = check_batch_feasibility(load_case("micro-overload"))
    assert verdict.load == pytest.approx(60.0)
    assert verdict.limit == pytest.approx(50.0, abs=1e-6)
    assert not verdict.feasible


def test_empty_batch_load_is_feasible():
    case = two_bus_hyperscaler_case(loads=())
    assert all(v.feasible for v in check_batch_feasibility(case))
    assert check_batch_feasibility(single_bus_case()) == [FeasibilityVerdict(period=0, limit=0.0, load=0.0)]


def test_ensure_feasible_carries_limits_and_loads():
    case = two_bus_hyperscaler_case(capacity=100.0, limit=50.0, loads=(35.0, 25.0))
    with pytest.raises(InfeasibleCaseError) as excinfo:
        ensure_feasible(case)
    assert excinfo.value.loads == [pytest.approx(60.0)]
    assert excinfo.value.limits == [pytest.approx(50.0, abs=1e-6)]
    assert "Lambda*" in str(excinfo.value)


def test_scenario_refuses_infeasible_case():
    with pytest.raises(InfeasibleCaseError):
        solve_ex_post(load_case("micro-overload"))


def two_bus_network(limit):
    return Network(
        buses=(Bus(1, BusKind.LOAD), Bus(2, BusKind.LOAD)),
        lines=(Line("L1", 1, 2, reactance=0.1, limit=limit),),
        reference_bus=1,
    )


def test_uncongested_dispatch_has_one_price():
    gens = (Generator("G1", 1, c0=10.0, c1=0.1, capacity=500.0, emission_rate=0.5),)
    result = least_cost_dispatch(two_bus_network(1000.0), gens, {2: [100.0]})
    assert result.output["G1"] == [pytest.approx(100.0, abs=1e-6)]
    assert result.prices[1] == [pytest.approx(20.0, abs=1e-6)]
    assert result.prices[2] == [pytest.approx(20.0, abs=1e-6)]
    assert result.flows["L1"] == [pytest.approx(100.0, abs=1e-6)]


def test_congested_dispatch_separates_prices():
    gens = (
        Generator("G1", 1, c0=10.0, c1=0.1, capacity=500.0, emission_rate=0.9),
        Generator("G2", 2, c0=30.0, c1=0.1, capacity=500.0, emission_rate=0.4),
    )
    result = least_cost_dispatch(two_bus_network(50.0), gens, {2: [100.0]})
    assert result.output["G1"] == [pytest.approx(50.0, abs=1e-6)]
    assert result.output["G2"] == [pytest.approx(50.0, abs=1e-6)]
    assert result.prices[1] == [pytest.approx(15.0, abs=1e-6)]
    assert result.prices[2] == [pytest.approx(35.0, abs=1e-6)]
    assert result.flows["L1"] == [pytest.approx(50.0, abs=1e-6)]


def test_dispatch_beyond_capacity_is_infeasible():
    gens = (Generator("G1", 1, c0=10.0, c1=0.1, capacity=50.0, emission_rate=0.5),)
    with pytest.raises(InfeasibleCaseError, match="least-cost dispatch infeasible"):
        least_cost_dispatch(two_bus_network(1000.0), gens, {1: [30.0], 2: [40.0]})


def test_calibrated_market_reproduces_fixed_loads():
    document = {
        "name": "calibrated",
        "reference_bus": 1,
        "buses": [{"id": 1, "kind": "conventional-load"}, {"id": 2, "kind": "conventional-load"}],
        "lines": [{"id": "L1", "from_bus": 1, "to_bus": 2, "reactance": 0.1, "limit": 1000.0}],
        "generators": [{"id": "G1", "bus": 1, "c0": 10.0, "c1": 0.1, "capacity": 500.0, "emission_rate": 0.5}],
        "demand": {"fixed_loads": {1: 40.0, 2: 60.0}},
    }
    case = build_case(CaseFileModel.model_validate(document))
    curve = case.curve(1, 0)
    assert curve.b1 == pytest.approx(2.5, rel=1e-6)
    assert curve.b0 == pytest.approx(120.0, rel=1e-6)

    report = solve_ex_post(case).report
    assert report.demand["1,0"] == pytest.approx(40.0, abs=1e-5)
    assert report.demand["2,0"] == pytest.approx(60.0, abs=1e-5)


def test_feasibility_is_the_same_in_every_period():
    case = dataclasses.replace(two_bus_hyperscaler_case(capacity=100.0, limit=50.0, loads=(20.0,)), periods=2)
    verdicts = check_batch_feasibility(case)
    assert [v.period for v in verdicts] == [0, 1]
    assert verdicts[0].limit == verdicts[1].limit
    assert verdicts[0].to_dict() == {"period": 0, "limit": pytest.approx(50.0, abs=1e-6), "load": 20.0,
                                     "feasible": True}


def random_hub_cases(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        capacity, limit = rng.uniform(50.0, 300.0), rng.uniform(20.0, 300.0)
        factor = rng.uniform(0.5, 0.95) if rng.random() < 0.5 else rng.uniform(1.05, 1.5)
        load = min(capacity, limit) * factor
        yield two_bus_hyperscaler_case(capacity=capacity, limit=limit, loads=(load,))


def test_verdict_matches_equilibrium_existence():
    config = SolverConfig(relative_tolerance=True)
    outcomes = []
    for case in random_hub_cases(7, 50):
        (verdict,) = check_batch_feasibility(case)
        solution = solve_mixed(assemble(case), config)
        assert verdict.feasible == solution.solved, solution.message
        outcomes.append(verdict.feasible)
    assert any(outcomes) and not all(outcomes)
