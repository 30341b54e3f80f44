import dataclasses
import math

import pytest

from market.case import (
    DELTA_FLOOR,
    Bus,
    BusKind,
    DemandCurve,
    HyperscalerSpec,
    MdcSpec,
    Network,
    calibrate_demand,
    validate_case,
)
from market.errors import CalibrationError

from conftest import three_bus_case


def test_well_formed_case_has_no_violations(three_bus):
    assert validate_case(three_bus) == []


def test_delta_out_of_range_is_named():
    case = three_bus_case().with_delta(1.2)
    violations = validate_case(case)
    assert len(violations) == 1
    assert "delta" in violations[0]


def test_mdc_on_hyperscaler_bus_is_a_partition_violation(three_bus):
    spec = MdcSpec(bus=3, capacity=5.0, curtailed={"pv": (1.0,)}, admissible_batches=("b1",))
    case = dataclasses.replace(three_bus, mdcs=three_bus.mdcs + (spec,))
    violations = validate_case(case)
    assert len(violations) == 1
    assert "bus 3" in violations[0]


def test_missing_demand_curve_and_unknown_batch_are_reported(three_bus):
    mdc = dataclasses.replace(three_bus.mdcs[0], admissible_batches=("b1", "nope"))
    case = dataclasses.replace(three_bus, demand_curves=(), mdcs=(mdc,))
    violations = validate_case(case)
    assert any("no demand curve" in v for v in violations)
    assert any("unknown batch nope" in v for v in violations)


def test_unknown_reference_bus(three_bus):
    network = dataclasses.replace(three_bus.network, reference_bus=99)
    violations = validate_case(dataclasses.replace(three_bus, network=network))
    assert any("reference bus 99" in v for v in violations)


def test_bus_sets_are_disjoint(three_bus):
    assert three_bus.load_buses == (1,)
    assert three_bus.mdc_buses == (2,)
    assert three_bus.hyperscaler_buses == (3,)
    assert three_bus.buyer_buses == (1, 2, 3)
    assert three_bus.batch_load == pytest.approx(40.0)


def test_emission_weight_and_delta_floor():
    assert HyperscalerSpec(bus=1, delta=0.5).emission_weight == pytest.approx(1.0)
    assert HyperscalerSpec(bus=1, delta=1.0).emission_weight == 0.0
    floored = HyperscalerSpec(bus=1, delta=0.0)
    assert floored.effective_delta == DELTA_FLOOR
    assert floored.emission_weight == pytest.approx(1.0 / DELTA_FLOOR)


def test_emission_price_scales_the_weight():
    assert HyperscalerSpec(bus=1, delta=0.5, emission_price=120.0).emission_weight == pytest.approx(120.0)
    assert HyperscalerSpec(bus=1, delta=0.1, emission_price=120.0).emission_weight == pytest.approx(1080.0)
    assert HyperscalerSpec(bus=1, delta=1.0, emission_price=120.0).emission_weight == 0.0


def test_nonpositive_demand_intercept_is_a_violation(three_bus):
    curve = dataclasses.replace(three_bus.demand_curves[0], b0=0.0)
    violations = validate_case(dataclasses.replace(three_bus, demand_curves=(curve,)))
    assert violations == ["demand curve at bus 1 has b0 <= 0"]


def test_unknown_suppliers_are_named(three_bus):
    hs = dataclasses.replace(three_bus.hyperscaler, suppliers=("G1", "G9"), emission_price=-1.0)
    mdc = dataclasses.replace(three_bus.mdcs[0], suppliers=("G7",))
    violations = validate_case(dataclasses.replace(three_bus, hyperscaler=hs, mdcs=(mdc,)))
    assert "hyperscaler lists unknown supplier G9" in violations
    assert "MDC 2 lists unknown supplier G7" in violations
    assert any("emission price" in v for v in violations)
    assert len(violations) == 3


def test_consumers_buy_from_every_generator(three_bus):
    hs = dataclasses.replace(three_bus.hyperscaler, suppliers=("G2",))
    case = dataclasses.replace(three_bus, hyperscaler=hs)
    assert [gen.id for gen in case.sellers(1)] == ["G1", "G2"]
    assert [gen.id for gen in case.sellers(2)] == ["G1", "G2"]
    assert [gen.id for gen in case.sellers(3)] == ["G2"]


def test_without_batch_load_zeroes_batches_and_drops_forward(three_bus):
    baseline = three_bus.without_batch_load()
    assert baseline.batch_load == 0.0
    assert [b.id for b in baseline.batches] == ["b1", "b2"]
    assert baseline.forward is None


def test_network_kind_lookup():
    network = Network(buses=(Bus(1, BusKind.LOAD), Bus(2)), reference_bus=1)
    assert network.kind(2) == BusKind.TRANSIT
    assert network.buses_of(BusKind.LOAD) == (1,)
    with pytest.raises(KeyError):
        network.kind(3)


@pytest.mark.parametrize(
    "load, price, elasticity, b1, b0",
    [
        (100.0, 20.0, -0.2, 1.0, 120.0),
        (100.0, 20.0, -1.0, 0.2, 40.0),
    ],
)
def test_calibrate_demand_examples(load, price, elasticity, b1, b0):
    (curve,) = calibrate_demand({7: [load]}, {7: [price]}, elasticity)
    assert curve == DemandCurve(7, 0, b0=pytest.approx(b0), b1=pytest.approx(b1))
    assert curve.marginal_benefit(load) == pytest.approx(price, rel=1e-10)


def test_calibration_flattens_as_elasticity_grows():
    (curve,) = calibrate_demand({1: [80.0]}, {1: [25.0]}, -1e9)
    assert curve.b1 == pytest.approx(0.0, abs=1e-9)
    assert curve.b0 == pytest.approx(25.0)


def test_calibration_round_trip_over_periods():
    loads = {1: [100.0, 150.0], 2: [30.0, 45.0]}
    duals = {1: [18.0, 22.5], 2: [19.0, 26.0]}
    curves = calibrate_demand(loads, duals)
    assert len(curves) == 4
    for curve in curves:
        load = loads[curve.bus][curve.period]
        price = duals[curve.bus][curve.period]
        assert math.isclose(curve.b0 - curve.b1 * load, price, rel_tol=1e-10)


@pytest.mark.parametrize(
    "loads, duals, elasticity",
    [
        ({1: [0.0]}, {1: [20.0]}, -0.2),
        ({1: [100.0]}, {1: [0.0]}, -0.2),
        ({1: [100.0]}, {1: [20.0]}, 0.3),
        ({}, {1: [20.0]}, -0.2),
    ],
)
def test_calibration_errors(loads, duals, elasticity):
    with pytest.raises(CalibrationError):
        calibrate_demand(loads, duals, elasticity)
