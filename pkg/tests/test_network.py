import numpy as np
import pytest

from market.errors import BalanceError, NetworkNumericalError, TopologyError
from market.network import Line, compute_ptdf, congestion_cost, line_flows


def ring3():
    lines = (Line("L12", 1, 2, 0.1, 100.0), Line("L23", 2, 3, 0.1, 100.0), Line("L13", 1, 3, 0.1, 100.0))
    return compute_ptdf(lines, (1, 2, 3), reference_bus=1)


def nodal_flows(lines, buses, reference, injections):
    """Solve B theta = y with theta_ref = 0 and return (theta_from - theta_to) / x per line."""
    position = {bus: j for j, bus in enumerate(buses)}
    n = len(buses)
    bbus = np.zeros((n, n))
    for line in lines:
        a, b = position[line.from_bus], position[line.to_bus]
        s = 1.0 / line.reactance
        bbus[a, a] += s
        bbus[b, b] += s
        bbus[a, b] -= s
        bbus[b, a] -= s
    keep = [j for j, bus in enumerate(buses) if bus != reference]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(bbus[np.ix_(keep, keep)], np.asarray(injections)[keep])
    return np.array([(theta[position[l.from_bus]] - theta[position[l.to_bus]]) / l.reactance for l in lines])


def random_network(rng, n_buses):
    buses = tuple(range(1, n_buses + 1))
    lines = []
    for j in range(1, n_buses):
        lines.append(Line(f"T{j}", buses[int(rng.integers(0, j))], buses[j], float(rng.uniform(0.05, 0.5)), 100.0))
    for extra in range(n_buses // 2):
        a, b = rng.choice(n_buses, size=2, replace=False)
        lines.append(Line(f"X{extra}", buses[a], buses[b], float(rng.uniform(0.05, 0.5)), 100.0))
    return tuple(lines), buses


def test_two_bus_injection_at_far_bus():
    ptdf = compute_ptdf((Line("L1", 1, 2, 0.1, 50.0),), (1, 2), reference_bus=1)
    assert ptdf.entry(0, 2) == pytest.approx(-1.0)
    assert ptdf.entry(0, 1) == 0.0


def test_two_bus_flow_direction():
    ptdf = compute_ptdf((Line("L1", 1, 2, 0.1, 50.0),), (1, 2), reference_bus=1)
    assert line_flows(ptdf, [10.0, -10.0]) == pytest.approx([10.0])


def test_ring_splits_two_thirds_one_third():
    ptdf = ring3()
    column = ptdf.column(2)
    assert column[0] == pytest.approx(-2.0 / 3.0)
    assert column[1] == pytest.approx(1.0 / 3.0)
    assert column[2] == pytest.approx(-1.0 / 3.0)


def test_reference_column_is_zero():
    assert np.all(ring3().column(1) == 0.0)


def test_ring_flows_match_nodal_solution():
    ptdf = ring3()
    lines = (Line("L12", 1, 2, 0.1, 100.0), Line("L23", 2, 3, 0.1, 100.0), Line("L13", 1, 3, 0.1, 100.0))
    y = np.array([0.0, 30.0, -30.0])
    assert line_flows(ptdf, y) == pytest.approx(nodal_flows(lines, (1, 2, 3), 1, y))


def test_zero_injection_gives_zero_flow():
    assert np.all(line_flows(ring3(), np.zeros(3)) == 0.0)


def test_flows_over_periods():
    flows = line_flows(ring3(), np.array([[0.0, 10.0], [30.0, -5.0], [-30.0, -5.0]]))
    assert flows.shape == (3, 2)


@pytest.mark.parametrize("n_buses", [4, 7, 12])
def test_ptdf_matches_nodal_solve_on_random_networks(rng, n_buses):
    for _ in range(5):
        lines, buses = random_network(rng, n_buses)
        reference = buses[int(rng.integers(0, n_buses))]
        ptdf = compute_ptdf(lines, buses, reference)
        y = rng.normal(size=n_buses)
        y -= y.mean()
        assert line_flows(ptdf, y) == pytest.approx(nodal_flows(lines, buses, reference, y), abs=1e-9)


def test_ptdf_independent_of_reference_for_balanced_injections(rng):
    lines, buses = random_network(rng, 6)
    y = rng.normal(size=6)
    y -= y.mean()
    a = line_flows(compute_ptdf(lines, buses, buses[0]), y)
    b = line_flows(compute_ptdf(lines, buses, buses[-1]), y)
    assert a == pytest.approx(b, abs=1e-9)


def test_unbalanced_injections_are_rejected():
    with pytest.raises(BalanceError):
        line_flows(ring3(), [1.0, 0.0, 0.0])


def test_disconnected_network():
    with pytest.raises(TopologyError, match="disconnected"):
        compute_ptdf((Line("L1", 1, 2, 0.1, 10.0),), (1, 2, 3), reference_bus=1)


def test_unknown_reference_bus():
    with pytest.raises(TopologyError):
        compute_ptdf((Line("L1", 1, 2, 0.1, 10.0),), (1, 2), reference_bus=5)


def test_ill_conditioned_susceptance():
    lines = (Line("L1", 1, 2, 1e-9, 10.0), Line("L2", 2, 3, 1e9, 10.0))
    with pytest.raises(NetworkNumericalError):
        compute_ptdf(lines, (1, 2, 3), reference_bus=1)


def test_congestion_cost_examples():
    assert congestion_cost([50.0, 80.0], [0.0, 0.0], [0.0, 0.0]) == 0.0
    assert congestion_cost([50.0], [0.0], [2.0]) == pytest.approx(100.0)
    assert congestion_cost([], [], []) == 0.0
