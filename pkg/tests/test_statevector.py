"""Statevector simulator tests.

Closed-form oracles used here:
- depth-1 QAOA on h = w Z0 Z1 from |++>:
    psi(even parity) = [cos(2b) exp(-i g w) - i sin(2b) exp(+i g w)] / 2
    psi(odd parity)  = [cos(2b) exp(+i g w) - i sin(2b) exp(-i g w)] / 2
  which gives <Z0 Z1> = sin(4 b) sin(2 g w).
- dense density-matrix evolution (oracles.py unitaries) for the trajectory
  mean, with the channel rho -> (1-lam) rho + lam/15 sum_P P rho P applied
  after every two-qubit gate.
"""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import circuit_unitary, gate_unitary, permutation_corrected
from quadqaoa.circuits import Gate, QaoaCircuit, lower_to_cz, synthesize_qaoa
from quadqaoa.ising import ZPolynomial, build_labs, build_qubo_full
from quadqaoa.statevector import (
    NoiseSpec,
    SampleSet,
    apply_gate,
    expectation,
    sample,
    simulate_noiseless,
    simulate_noisy,
    simulate_state,
    trajectory_state,
)
from quadqaoa.swapnet import build_schedule, reachable_terms


def _random_poly(n: int, rng: np.random.Generator, max_degree: int = 4) -> ZPolynomial:
    terms = {}
    pool = list(range(n))
    for _ in range(rng.integers(3, 9)):
        deg = int(rng.integers(1, min(max_degree, n) + 1))
        support = tuple(sorted(rng.choice(pool, size=deg, replace=False).tolist()))
        terms[support] = float(rng.normal())
    return ZPolynomial.from_terms(n, terms)


# ---------------------------------------------------------------------------
# noiseless fast path
# ---------------------------------------------------------------------------

def test_zero_angles_give_uniform_state():
    h = build_labs(6)
    psi = simulate_noiseless(h, [0.0], [0.0])
    assert np.allclose(psi, np.full(64, 2.0 ** -3), atol=1e-14)


def test_two_qubit_closed_form():
    w = 0.83
    h = ZPolynomial.from_terms(2, {(0, 1): w})
    for beta, gamma in [(0.3, 0.7), (1.1, -0.4), (0.0, 1.3), (0.9, 0.0)]:
        psi = simulate_noiseless(h, [beta], [gamma])
        even = (math.cos(2 * beta) * np.exp(-1j * gamma * w)
                - 1j * math.sin(2 * beta) * np.exp(1j * gamma * w)) / 2
        odd = (math.cos(2 * beta) * np.exp(1j * gamma * w)
               - 1j * math.sin(2 * beta) * np.exp(-1j * gamma * w)) / 2
        assert np.allclose(psi, [even, odd, odd, even], atol=1e-12)


def test_single_edge_landscape_formula():
    h = ZPolynomial.from_terms(2, {(0, 1): 1.0})
    for beta in np.linspace(0.0, np.pi / 2, 7):
        for gamma in np.linspace(0.0, np.pi / 2, 7):
            val = expectation(simulate_noiseless(h, [beta], [gamma]), h)
            assert abs(val - math.sin(4 * beta) * math.sin(2 * gamma)) < 1e-12
    best = expectation(simulate_noiseless(h, [3 * np.pi / 8], [np.pi / 4]), h)
    assert abs(best - (-1.0)) < 1e-12


def test_fast_path_matches_lowered_gate_level():
    rng = np.random.default_rng(11)
    for trial in range(20):
        n = int(rng.integers(2, 9))
        h = _random_poly(n, rng)
        p = int(rng.integers(1, 3))
        betas = rng.uniform(-1.5, 1.5, size=p)
        gammas = rng.uniform(-1.5, 1.5, size=p)
        fast = simulate_noiseless(h, betas, gammas)
        lowered = lower_to_cz(synthesize_qaoa(h, betas, gammas))
        slow = simulate_state(lowered)
        fidelity = abs(np.vdot(fast, slow)) ** 2
        assert fidelity > 1 - 1e-10, f"trial {trial}: fidelity {fidelity}"


def test_constant_term_only_changes_global_phase():
    h = ZPolynomial.from_terms(3, {(0, 1): 0.5, (): 2.0})
    h0 = ZPolynomial.from_terms(3, {(0, 1): 0.5})
    a = simulate_noiseless(h, [0.4], [0.9])
    b = simulate_noiseless(h0, [0.4], [0.9])
    assert abs(abs(np.vdot(a, b)) - 1.0) < 1e-12


def test_noiseless_argument_errors():
    h = build_labs(4)
    with pytest.raises(ValueError):
        simulate_noiseless(h, [0.1, 0.2], [0.3])
    with pytest.raises(ValueError):
        simulate_noiseless(h, [], [])
    with pytest.raises(ValueError):
        simulate_noiseless(h, [0.1], [0.3], max_qubits=3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 2))
def test_noiseless_norm_and_energy_bounds(seed, n, p):
    rng = np.random.default_rng(seed)
    h = _random_poly(n, rng)
    psi = simulate_noiseless(h, rng.uniform(-2, 2, p), rng.uniform(-2, 2, p))
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-10
    table = h.energy_table()
    val = expectation(psi, h)
    assert table.min() - 1e-9 <= val <= table.max() + 1e-9


# ---------------------------------------------------------------------------
# gate-level simulation
# ---------------------------------------------------------------------------

def test_gate_level_matches_dense_oracle():
    rng = np.random.default_rng(5)
    kinds = ["H", "X", "Y", "Z", "RX", "RZ", "RZZ", "CZ", "CX", "SWAP",
             "PHASE_GADGET"]
    for _ in range(15):
        n = int(rng.integers(2, 6))
        gates = []
        for _ in range(12):
            kind = kinds[rng.integers(len(kinds))]
            if kind == "PHASE_GADGET":
                size = int(rng.integers(1, min(4, n) + 1))
                qubits = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
            elif kind in {"RZZ", "CZ", "CX", "SWAP"}:
                qubits = tuple(rng.choice(n, size=2, replace=False).tolist())
            else:
                qubits = (int(rng.integers(n)),)
            angle = float(rng.uniform(-2, 2)) if kind in {"RX", "RZ", "RZZ",
                                                          "PHASE_GADGET"} else None
            gates.append(Gate(kind, qubits, angle))
        c = QaoaCircuit(n, tuple(gates), tuple(range(n)))
        got = simulate_state(c)
        want = circuit_unitary(c)[:, 0]
        assert np.max(np.abs(got - want)) < 1e-10


def test_apply_gate_rejects_unknown_kind():
    class Fake:
        kind = "T"
        qubits = (0,)
        angle = None

    with pytest.raises(ValueError):
        apply_gate(np.array([1.0, 0.0], dtype=complex), Fake(), 1)


def test_expectation_dimension_check():
    h = build_labs(4)
    with pytest.raises(ValueError):
        expectation(np.zeros(8, dtype=complex), h)


# ---------------------------------------------------------------------------
# sampling and SampleSet
# ---------------------------------------------------------------------------

def test_sample_delta_state():
    h = build_qubo_full(3, seed=2)
    psi = np.zeros(8, dtype=complex)
    psi[5] = 1.0                      # bits x0=1, x1=0, x2=1
    s = sample(psi, h, 40, seed=0)
    assert s.entries == (("101", 40),)
    assert s.shots == 40
    assert abs(s.energies[0] - h.energy("101")) < 1e-12
    assert abs(s.mean_energy() - h.energy("101")) < 1e-12


def test_sample_uniform_statistics_and_determinism():
    h = build_qubo_full(4, seed=3)
    psi = np.full(16, 0.25, dtype=complex)
    a = sample(psi, h, 16000, seed=7)
    b = sample(psi, h, 16000, seed=7)
    assert a == b
    assert sum(c for _, c in a.entries) == 16000
    # each cell expects 1000 with sd ~ 30.6; 6 sd guard
    for _, count in a.entries:
        assert abs(count - 1000) < 200


def test_sample_norm_check_and_bad_shots():
    h = build_labs(4)
    psi = np.full(16, 0.25, dtype=complex) * 1.01
    with pytest.raises(ValueError):
        sample(psi, h, 10, seed=0)
    with pytest.raises(ValueError):
        sample(np.full(16, 0.25, dtype=complex), h, 0, seed=0)


def test_sampleset_invariants():
    with pytest.raises(ValueError):
        SampleSet((("00", 0),), (1.0,), 0)
    with pytest.raises(ValueError):
        SampleSet((("00", 2), ("01", 3)), (1.0, 2.0), 4)
    with pytest.raises(ValueError):
        SampleSet((("00", 2),), (1.0, 2.0), 2)


def test_sampleset_merge():
    a = SampleSet((("00", 2), ("01", 3)), (1.0, -1.0), 5)
    b = SampleSet((("01", 1), ("11", 4)), (-1.0, 2.5), 5)
    m = a.merge(b)
    assert m.entries == (("00", 2), ("01", 4), ("11", 4))
    assert m.energies == (1.0, -1.0, 2.5)
    assert m.shots == 10
    bad = SampleSet((("01", 1),), (3.0,), 1)
    with pytest.raises(ValueError):
        a.merge(bad)


def test_sampleset_csv_round_trip(tmp_path):
    h = build_labs(5)
    psi = simulate_noiseless(h, [0.4], [0.2])
    s = sample(psi, h, 500, seed=3)
    path = tmp_path / "samples.csv"
    s.to_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == "bitstring,count,energy"
    assert SampleSet.from_csv(path) == s
    # byte-identical re-emission
    path2 = tmp_path / "again.csv"
    s.to_csv(path2)
    assert path.read_bytes() == path2.read_bytes()


# ---------------------------------------------------------------------------
# trajectory noise
# ---------------------------------------------------------------------------

def test_noise_spec_validation():
    NoiseSpec(0.0, 1)
    NoiseSpec(1.0, 3, seed=9)
    with pytest.raises(ValueError):
        NoiseSpec(-0.1, 1)
    with pytest.raises(ValueError):
        NoiseSpec(1.5, 1)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, 0)


def test_zero_noise_trajectory_equals_noiseless():
    h = build_labs(8)
    c = lower_to_cz(synthesize_qaoa(h, [0.5, 0.3], [0.2, 0.7]))
    rng = np.random.default_rng((0, 0))
    traj = trajectory_state(c, 0.0, rng)
    exact = simulate_state(c)
    assert np.max(np.abs(traj - exact)) < 1e-10


def test_simulate_noisy_deterministic_and_counts():
    h = build_labs(6)
    c = lower_to_cz(synthesize_qaoa(h, [0.4], [0.6]))
    noise = NoiseSpec(0.02, 50, seed=12)
    a = simulate_noisy(c, h, noise, shots_per_trajectory=4)
    b = simulate_noisy(c, h, noise, shots_per_trajectory=4)
    assert a == b
    assert a.shots == 200


def test_noisy_qubit_cap_and_bad_shots():
    c = QaoaCircuit(21, (), tuple(range(21)))
    h = ZPolynomial.from_terms(21, {(0,): 1.0})
    with pytest.raises(ValueError):
        simulate_noisy(c, h, NoiseSpec(0.0, 1))
    c4 = QaoaCircuit(4, (), tuple(range(4)))
    h4 = build_labs(4)
    with pytest.raises(ValueError):
        simulate_noisy(c4, h4, NoiseSpec(0.0, 1), shots_per_trajectory=0)


def test_measured_bitstrings_corrected_to_logical_order():
    # physical |001> (qubit 0 set); final permutation says logical i sits at
    # physical perm[i], so logical bits are (0, 0, 1)
    c = QaoaCircuit(3, (Gate("X", (0,)),), (1, 2, 0))
    h = ZPolynomial.from_terms(3, {(2,): 1.0})
    s = simulate_noisy(c, h, NoiseSpec(0.0, 5), shots_per_trajectory=2)
    assert s.entries == (("001", 10),)
    assert s.energies[0] == h.energy("001")


def test_line_circuit_sampling_matches_corrected_distribution():
    rng = np.random.default_rng(21)
    n, k = 4, 2
    mapping = tuple(rng.permutation(n).tolist())
    sched = build_schedule(n, k, mapping)
    full = ZPolynomial.from_terms(
        n, {(i, j): float(rng.normal()) for i in range(n) for j in range(i + 1, n)})
    h, _ = reachable_terms(full, mapping, k)
    c = lower_to_cz(synthesize_qaoa(h, [0.7], [0.9], topology="line", schedule=sched))
    probs = np.abs(permutation_corrected(simulate_state(c), c.final_permutation)) ** 2
    s = simulate_noisy(c, h, NoiseSpec(0.0, 1, seed=4), shots_per_trajectory=20000)
    empirical = np.zeros(2 ** n)
    for (text, count) in s.entries:
        idx = sum(int(b) << i for i, b in enumerate(text))
        empirical[idx] = count / s.shots
    assert np.abs(empirical - probs).sum() < 0.05


def test_trajectory_mean_matches_density_matrix():
    """Trajectory average of <H> against exact channel evolution (n=4)."""
    h = build_qubo_full(4, seed=8)
    c = lower_to_cz(synthesize_qaoa(h, [0.45], [0.75]))
    lam = 0.08
    n, dim = 4, 16

    def embedded_pauli(which: int, qubits) -> np.ndarray:
        a, b = which // 4, which % 4
        full = np.eye(dim, dtype=complex)
        for q, idx in zip(qubits, (a, b)):
            if idx:
                full = gate_unitary(Gate(["X", "Y", "Z"][idx - 1], (q,)), n) @ full
        return full

    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for g in c.gates:
        u = gate_unitary(g, n)
        rho = u @ rho @ u.conj().T
        if len(g.qubits) == 2:
            mixed = (1 - lam) * rho
            for which in range(16):
                if which == 0:
                    continue
                p = embedded_pauli(which, g.qubits)
                mixed += (lam / 15) * (p @ rho @ p.conj().T)
            rho = mixed
    exact = float(np.real(np.trace(rho @ np.diag(h.energy_table()))))

    trajectories = 800
    vals = np.empty(trajectories)
    for t in range(trajectories):
        rng = np.random.default_rng((3, t))
        vals[t] = expectation(trajectory_state(c, lam, rng), h)
    se = vals.std(ddof=1) / math.sqrt(trajectories)
    assert abs(vals.mean() - exact) < 3 * se


def test_full_depolarizing_gives_uniform_like_samples():
    h = build_labs(6)
    c = lower_to_cz(synthesize_qaoa(h, [0.5, 0.8], [0.9, 0.4]))
    s = simulate_noisy(c, h, NoiseSpec(1.0, 3000, seed=5))
    rng = np.random.default_rng(99)
    uniform_counts = np.bincount(rng.integers(64, size=3000), minlength=64)
    noisy_counts = np.zeros(64, dtype=int)
    for text, count in s.entries:
        idx = sum(int(b) << i for i, b in enumerate(text))
        noisy_counts[idx] = count
    table = np.vstack([noisy_counts, uniform_counts])
    _, pvalue, _, _ = stats.chi2_contingency(table)
    assert pvalue > 0.01
