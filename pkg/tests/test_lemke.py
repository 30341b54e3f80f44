import numpy as np
import pytest

from market.errors import SolverError
from market.kkt import MlcpInstance, Residual, aggregate_signature, assemble, residual
from market.lemke import (
    SolverConfig,
    SolveStatus,
    prepare_system,
    solve_lcp,
    solve_mixed,
    split_free_variables,
    symmetric_scaling,
)


def extragradient(M, q, iterations=20000):
    """Projected extragradient iteration for 0 <= z _|_ Mz + q >= 0."""
    step = 0.5 / np.linalg.norm(M, 2)
    z = np.zeros(len(q))
    for _ in range(iterations):
        half = np.maximum(z - step * (M @ z + q), 0.0)
        z = np.maximum(z - step * (M @ half + q), 0.0)
    return z


def monotone_matrix(rng, n, ridge=0.0):
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    S = rng.normal(size=(n, n))
    return A.T @ A + (S - S.T) / 2 + ridge * np.eye(n)


def planted_lcp(rng, n, ridge=0.0):
    """Monotone LCP with a known complementary solution."""
    M = monotone_matrix(rng, n, ridge)
    active = rng.random(n) < 0.5
    z = np.where(active, rng.uniform(0.5, 3.0, n), 0.0)
    w = np.where(active, 0.0, rng.uniform(0.5, 3.0, n))
    return M, w - M @ z, z


def test_separable_example():
    solution = solve_lcp([[1.0, 0.0], [0.0, 1.0]], [-1.0, 2.0])
    assert solution.status == SolveStatus.SOLVED
    assert solution.z == pytest.approx([1.0, 0.0])


def test_coupled_example():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    q = np.array([-5.0, -6.0])
    solution = solve_lcp(M, q)
    assert solution.z == pytest.approx([4.0 / 3.0, 7.0 / 3.0])
    assert M @ solution.z + q == pytest.approx([0.0, 0.0], abs=1e-12)


def test_nonnegative_q_needs_no_pivots():
    solution = solve_lcp([[1.0]], [3.0])
    assert solution.solved
    assert solution.pivots == 0
    assert solution.z == pytest.approx([0.0])


def test_monotone_ray_is_reported_infeasible():
    solution = solve_lcp([[0.0]], [-1.0])
    assert solution.status == SolveStatus.INFEASIBLE
    with pytest.raises(SolverError, match="Infeasible"):
        solution.raise_for_status()


def test_pivot_limit():
    solution = solve_lcp([[2.0, 1.0], [1.0, 2.0]], [-5.0, -6.0], SolverConfig(max_pivots=1))
    assert solution.status == SolveStatus.ITERATION_LIMIT
    assert solution.pivots == 1


@pytest.mark.parametrize("n", [3, 8, 20])
def test_planted_solution_is_recovered(rng, n):
    for _ in range(5):
        M, q, expected = planted_lcp(rng, n, ridge=0.5)
        solution = solve_lcp(M, q).raise_for_status()
        assert solution.z == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("n", [4, 10])
def test_agrees_with_extragradient_oracle(rng, n):
    M, q, _ = planted_lcp(rng, n, ridge=1.0)
    solution = solve_lcp(M, q).raise_for_status()
    oracle = extragradient(M, q)
    assert solution.z == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("seed", range(200))
def test_random_mixed_instances_meet_residual_bounds(seed):
    rng = np.random.default_rng(seed)
    n_pi = int(rng.integers(1, 9))
    n_z = int(rng.integers(4, 51 - 2 * n_pi))
    M = monotone_matrix(rng, n_z)
    N = rng.normal(size=(n_z, n_pi))
    S = rng.normal(size=(n_pi, n_pi))
    D = (S - S.T) / 2
    active = rng.random(n_z) < 0.5
    z = np.where(active, rng.uniform(0.5, 3.0, n_z), 0.0)
    w = np.where(active, 0.0, rng.uniform(0.5, 3.0, n_z))
    pi = rng.normal(size=n_pi)
    q = w - M @ z - N @ pi
    r = N.T @ z + D @ pi

    instance = MlcpInstance.from_arrays(M, q, N, D, r)
    assert n_z + 2 * n_pi <= 50
    solution = solve_mixed(instance).raise_for_status()
    assert solution.residual.within(1e-8)
    assert max(residual(instance, solution.z, solution.pi).as_tuple()) <= 1e-8


def test_split_matrix_keeps_symmetric_part_of_m(micro_mdc):
    instance = assemble(micro_mdc)
    big, q_big = split_free_variables(instance)
    n_z, n_pi = instance.n_z, instance.n_pi
    assert big.shape == (n_z + 2 * n_pi, n_z + 2 * n_pi)
    assert q_big.shape == (n_z + 2 * n_pi,)
    assert np.linalg.eigvalsh((big + big.T) / 2).min() >= -1e-9


def test_symmetric_scaling_equilibrates():
    scale = symmetric_scaling(np.diag([100.0, 0.01]))
    assert scale == pytest.approx([0.1, 10.0])


def test_solution_is_independent_of_scaling(micro1):
    instance = assemble(micro1)
    scaled = solve_mixed(instance, SolverConfig(scaling=True))
    plain = solve_mixed(instance, SolverConfig(scaling=False))
    assert scaled.z == pytest.approx(plain.z, abs=1e-8)


@pytest.mark.parametrize("tie_break", ["lexicographic", "lowest-index"])
@pytest.mark.parametrize("covering", ["ones", "ramp"])
def test_pivot_orderings_reach_the_same_aggregates(micro_mdc, tie_break, covering):
    instance = assemble(micro_mdc)
    reference = aggregate_signature(instance, solve_mixed(instance))
    solution = solve_mixed(instance, SolverConfig(tie_break=tie_break, covering=covering)).raise_for_status()
    assert aggregate_signature(instance, solution).max_difference(reference) <= 1e-6


def test_trace_file_has_one_line_per_pivot(tmp_path, micro1):
    path = tmp_path / "pivots.txt"
    solution = solve_mixed(assemble(micro1), SolverConfig(trace=True, trace_path=str(path)))
    lines = path.read_text().splitlines()
    assert len(lines) == solution.pivots + 1
    assert lines[0].startswith("pivot=0 enter=z0 leave=")
    assert all(" z0=" in line for line in lines)


@pytest.mark.parametrize(
    "overrides",
    [
        {"pivot_tolerance": 0.0},
        {"complementarity_tolerance": -1.0},
        {"equality_tolerance": 0.0},
        {"max_pivots": 0},
        {"tie_break": "random"},
        {"covering": "zeros"},
    ],
)
def test_solver_config_validation(overrides):
    with pytest.raises(ValueError):
        SolverConfig(**overrides)


def test_solution_to_dict_by_block(micro1):
    data = solve_mixed(assemble(micro1)).to_dict(by_block=True)
    assert data["status"] == "Solved"
    assert data["z"]["d"]["1,G1,1,0"] == pytest.approx(200.0, abs=1e-6)
    assert set(data["pi"]) >= {"theta_d", "omega", "y", "gamma"}


def test_tolerances_are_absolute_by_default():
    instance = MlcpInstance.from_arrays([[1.0]], [-1000.0])
    assert SolverConfig().tolerances(instance) == (1e-8, 1e-8)
    relative = SolverConfig(relative_tolerance=True, equality_tolerance=1e-7)
    assert relative.tolerances(instance) == pytest.approx((1e-5, 1e-4))


def test_absolute_tolerance_rejects_a_gap_that_relative_accepts(monkeypatch):
    monkeypatch.setattr("market.lemke.residual", lambda instance, z, pi: Residual(5e-8, 0.0, 0.0))
    M, q = [[1.0]], [-1000.0]
    assert solve_lcp(M, q).status == SolveStatus.NUMERICAL_BREAKDOWN
    assert solve_lcp(M, q, SolverConfig(relative_tolerance=True)).status == SolveStatus.SOLVED


def test_prepared_system_is_reused(micro_mdc, micro1):
    instance = assemble(micro_mdc)
    prepared = prepare_system(instance)
    fresh = solve_mixed(instance).raise_for_status()
    reused = solve_mixed(instance, prepared=prepared).raise_for_status()
    assert reused.z == pytest.approx(fresh.z, abs=1e-9)
    assert reused.pi == pytest.approx(fresh.pi, abs=1e-9)
    with pytest.raises(ValueError, match="prepared system has size"):
        solve_mixed(instance, prepared=prepare_system(assemble(micro1)))
