"""Trainer tests.

The depth-1 single-edge landscape has the closed form <Z0 Z1> =
sin(4 beta) sin(2 gamma w); the test first validates that formula against the
dense gate oracle and then checks the trainer reaches its minimum. Stochastic
quality targets (joint quadratization beating the clique ansatz, odd-parity
concentration) run at fixed seeds with generous margins.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import circuit_unitary
from quadqaoa.circuits import synthesize_qaoa
from quadqaoa.ising import ZPolynomial, build_labs
from quadqaoa.quadratize import clique_expand, variational_template
from quadqaoa.statevector import evolve_diagonal
from quadqaoa.swapnet import build_schedule, reachable_terms
from quadqaoa.training import (
    TrainConfig,
    TrainResult,
    train_depth1,
    train_depth_p_transition,
    train_joint_quadratization,
    train_truncated,
)

FAST = TrainConfig(grid_points=7, max_evals=60)


def single_edge_expectation(beta: float, gamma: float, w: float) -> float:
    """Closed-form depth-1 energy for the two-qubit cost w * Z0 Z1."""
    return w * np.sin(4.0 * beta) * np.sin(2.0 * gamma * w)


def angle_energy(h_ansatz: ZPolynomial, h_cost: ZPolynomial,
                 betas, gammas) -> float:
    psi = evolve_diagonal(h_ansatz.energy_table(), betas, gammas)
    return float((np.abs(psi) ** 2) @ h_cost.energy_table())


def assert_trace_shape(result: TrainResult) -> None:
    values = [v for _, v in result.trace]
    indices = [i for i, _ in result.trace]
    assert indices == list(range(len(values)))
    assert all(b >= a for a, b in zip(values[1:], values))
    assert values[-1] == result.energy


def test_single_edge_formula_matches_dense_oracle():
    h = ZPolynomial.from_terms(2, {(0, 1): 0.7})
    rng = np.random.default_rng(3)
    for beta, gamma in rng.uniform(0.0, np.pi, (8, 2)):
        c = synthesize_qaoa(h, [beta], [gamma])
        u = circuit_unitary(c)
        psi = u[:, 0]
        z0z1 = np.array([1.0, -1.0, -1.0, 1.0])
        dense = float(np.real(np.conj(psi) @ (0.7 * z0z1 * psi)))
        assert abs(dense - single_edge_expectation(beta, gamma, 0.7)) < 1e-12


def test_depth1_single_edge_reaches_analytic_optimum():
    h = ZPolynomial.from_terms(2, {(0, 1): 1.0})
    result = train_depth1(h, h, TrainConfig())
    assert abs(result.energy - (-1.0)) < 1e-6
    formula = single_edge_expectation(result.betas[0], result.gammas[0], 1.0)
    assert abs(formula - result.energy) < 1e-9
    assert_trace_shape(result)


def test_all_zero_cost_returns_grid_start():
    empty = ZPolynomial.from_terms(3, {})
    result = train_depth1(empty, empty, TrainConfig())
    assert result.energy == 0.0
    assert result.betas == (0.0,)
    assert result.gammas == (0.0,)
    assert all(v == 0.0 for _, v in result.trace)


def test_depth1_labs12_beats_uniform_mean():
    h = build_labs(12)
    result = train_depth1(h, h, TrainConfig())
    assert result.energy < 0.0
    assert abs(angle_energy(h, h, result.betas, result.gammas)
               - result.energy) < 1e-12


def test_grid_then_refine_dominance():
    h = build_labs(8)
    config = TrainConfig()
    result = train_depth1(h, h, config)
    axis = np.linspace(0.0, np.pi / 2, config.grid_points)
    grid_best = min(angle_energy(h, h, [b], [g]) for b in axis for g in axis)
    assert result.energy <= grid_best + 1e-12


def test_transition_start_reproduces_parent_exactly():
    h = build_labs(8)
    parent = train_depth1(h, h, FAST)
    child = train_depth_p_transition(h, h, parent, FAST)
    # zero-padded layer is an exact identity, bit-for-bit
    assert child.trace[0][1] == parent.energy
    assert child.energy <= parent.energy + 1e-9
    assert child.p == 2
    assert_trace_shape(child)


def test_transition_escapes_depth1_plateau_on_labs12():
    h = build_labs(12)
    parent = train_depth1(h, h, TrainConfig())
    child = train_depth_p_transition(h, h, parent, TrainConfig())
    assert child.energy < parent.energy - 1.0


def test_determinism_identical_config_identical_result():
    h = build_labs(8)
    runs = []
    for _ in range(2):
        parent = train_depth1(h, h, FAST)
        runs.append(train_depth_p_transition(h, h, parent, FAST))
    assert runs[0] == runs[1]


def test_objective_consistency_cost_not_ansatz():
    h = build_labs(8)
    quad = clique_expand(h).quadratic()
    result = train_depth1(quad, h, TrainConfig())
    recomputed = angle_energy(quad, h, result.betas, result.gammas)
    assert abs(recomputed - result.energy) < 1e-12
    against_ansatz = angle_energy(quad, quad, result.betas, result.gammas)
    assert abs(against_ansatz - result.energy) > 1e-6


def test_truncated_full_k_equals_standard_training():
    rng = np.random.default_rng(11)
    n = 6
    h = ZPolynomial.from_terms(
        n, {(i, j): rng.normal() for i in range(n) for j in range(i + 1, n)})
    schedule = build_schedule(n, n - 2, None)
    standard = train_depth1(h, h, FAST)
    truncated = train_truncated(h, schedule, n - 2, 1, FAST)
    assert abs(truncated.energy - standard.energy) < 1e-12
    assert np.allclose(truncated.betas, standard.betas, atol=1e-12)
    assert np.allclose(truncated.gammas, standard.gammas, atol=1e-12)


def test_truncated_k0_path_graph_equals_standard():
    rng = np.random.default_rng(12)
    n = 6
    h = ZPolynomial.from_terms(
        n, {(i, i + 1): rng.normal() for i in range(n - 1)})
    schedule = build_schedule(n, 0, tuple(range(n)))
    h_k, _ = reachable_terms(h, schedule.mapping, 0)
    assert h_k.terms == h.terms
    standard = train_depth1(h, h, FAST)
    truncated = train_truncated(h, schedule, 0, 1, FAST)
    assert abs(truncated.energy - standard.energy) < 1e-12


def test_truncated_mps_backend_matches_statevector():
    rng = np.random.default_rng(13)
    n = 6
    h = ZPolynomial.from_terms(
        n, {(i, j): rng.normal() for i in range(n) for j in range(i + 1, n)})
    schedule = build_schedule(n, 2, None)
    sv = train_truncated(h, schedule, 2, 1, FAST)
    mps = train_truncated(
        h, schedule, 2, 1,
        TrainConfig(grid_points=7, max_evals=60, backend="mps", chi=64))
    assert abs(sv.energy - mps.energy) < 1e-8
    assert np.allclose(sv.betas, mps.betas, atol=1e-6)


def test_joint_quartic_term_concentrates_on_odd_parity():
    h = ZPolynomial.from_terms(4, {(0, 1, 2, 3): 1.0})
    template = variational_template(4)
    result = train_joint_quadratization(template, h, 1, TrainConfig())
    table = template.materialize(np.array(result.theta)).energy_table()
    psi = evolve_diagonal(table, result.betas, result.gammas)
    probs = np.abs(psi) ** 2
    parity = np.array([bin(x).count("1") % 2 for x in range(16)])
    assert probs[parity == 1].sum() >= 0.5
    assert result.energy <= -0.5


def test_joint_theta_zero_is_uniform_for_any_angles():
    h = build_labs(8)
    template = variational_template(8)
    zero = template.materialize(np.zeros(template.num_parameters))
    rng = np.random.default_rng(7)
    for _ in range(4):
        betas, gammas = rng.uniform(0, np.pi, 2), rng.uniform(0, np.pi, 2)
        assert abs(angle_energy(zero, h, betas, gammas)) < 1e-12


def test_joint_labs12_beats_clique_ansatz():
    h = build_labs(12)
    joint = train_joint_quadratization(
        variational_template(12), h, 2, TrainConfig())
    clique = clique_expand(h).quadratic()
    parent = train_depth1(clique, h, TrainConfig())
    clique_result = train_depth_p_transition(clique, h, parent, TrainConfig())
    assert joint.energy < clique_result.energy
    assert_trace_shape(joint)
    ansatz = variational_template(12).materialize(np.array(joint.theta))
    recomputed = angle_energy(ansatz, h, joint.betas, joint.gammas)
    assert abs(recomputed - joint.energy) < 1e-12


@pytest.mark.parametrize("kwargs", [
    {"grid_points": 1},
    {"max_evals": 0},
    {"restarts": 0},
    {"backend": "density"},
    {"backend": "mps"},
    {"backend": "mps", "chi": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_train_depth1_rejects_mismatched_or_cubic_ansatz():
    h = build_labs(8)
    with pytest.raises(ValueError):
        train_depth1(ZPolynomial.from_terms(6, {(0, 1): 1.0}), h, FAST)
    quartic_other = ZPolynomial.from_terms(8, {(0, 1, 2, 3): 5.0})
    with pytest.raises(ValueError):
        train_depth1(quartic_other, h, FAST)


def test_train_truncated_validation():
    h = build_labs(8)
    quad = clique_expand(h).quadratic()
    schedule = build_schedule(8, 3, None)
    with pytest.raises(ValueError):
        train_truncated(h, schedule, 3, 1, FAST)
    with pytest.raises(ValueError):
        train_truncated(quad, schedule, 2, 1, FAST)
    with pytest.raises(ValueError):
        train_truncated(quad, schedule, 3, 0, FAST)


def test_train_joint_validation():
    h = build_labs(8)
    with pytest.raises(ValueError):
        train_joint_quadratization(variational_template(6), h, 1, FAST)
    with pytest.raises(ValueError):
        train_joint_quadratization(variational_template(8), h, 0, FAST)
    with pytest.raises(ValueError):
        train_joint_quadratization(
            variational_template(8), h, 1,
            TrainConfig(backend="mps", chi=8))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_dominance_and_monotone_trace_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    h = ZPolynomial.from_terms(
        n, {p: rng.normal() for p in pairs})
    config = TrainConfig(grid_points=4, max_evals=30)
    result = train_depth1(h, h, config)
    axis = np.linspace(0.0, np.pi / 2, config.grid_points)
    grid_best = min(angle_energy(h, h, [b], [g]) for b in axis for g in axis)
    assert result.energy <= grid_best + 1e-12
    assert_trace_shape(result)
