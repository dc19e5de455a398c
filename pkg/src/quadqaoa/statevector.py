"""Exact statevector simulation with a diagonal fast path for QAOA,
trajectory-unraveled two-qubit depolarizing noise, and bitstring sampling.

State encoding is little-endian: amplitude index s holds the basis state with
x_i = (s >> i) & 1, matching the bit conventions of the polynomial module.
Rotation conventions match the circuit module: R(theta) = exp(-i theta/2 G).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuits import QaoaCircuit
from .ising import ZPolynomial, bits_to_text, index_to_bits

MAX_NOISELESS_QUBITS = 24
MAX_TRAJECTORY_QUBITS = 20

_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# the 15 non-identity two-qubit Paulis, as (op_on_first, op_on_second)
_PAULI1 = [None, _X, _Y, _Z]
TWO_QUBIT_PAULIS = [(_PAULI1[a], _PAULI1[b])
                    for a in range(4) for b in range(4) if (a, b) != (0, 0)]


# ---------------------------------------------------------------------------
# gate application primitives
# ---------------------------------------------------------------------------

def _apply_1q(psi: np.ndarray, op: np.ndarray, q: int) -> None:
    view = psi.reshape(-1, 2, 1 << q)
    top = view[:, 0, :].copy()
    bot = view[:, 1, :]
    view[:, 0, :] = op[0, 0] * top + op[0, 1] * bot
    view[:, 1, :] = op[1, 0] * top + op[1, 1] * bot


def _apply_2q(psi: np.ndarray, u4: np.ndarray, qa: int, qb: int, n: int) -> np.ndarray:
    # u4 basis index is 2*bit(qa) + bit(qb)
    t = psi.reshape((2,) * n)
    axa, axb = n - 1 - qa, n - 1 - qb
    u = u4.reshape(2, 2, 2, 2)
    t = np.tensordot(u, t, axes=([2, 3], [axa, axb]))
    t = np.moveaxis(t, [0, 1], [axa, axb])
    return np.ascontiguousarray(t).reshape(-1)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz_phases(theta: float) -> np.ndarray:
    return np.array([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def apply_gate(psi: np.ndarray, gate, n: int) -> np.ndarray:
    """Apply one IR gate in place where possible; returns the state array."""
    kind = gate.kind
    if kind == "H":
        _apply_1q(psi, _H, gate.qubits[0])
    elif kind == "X":
        _apply_1q(psi, _X, gate.qubits[0])
    elif kind == "Y":
        _apply_1q(psi, _Y, gate.qubits[0])
    elif kind == "Z":
        _apply_1q(psi, _Z, gate.qubits[0])
    elif kind == "RX":
        _apply_1q(psi, _rx(gate.angle), gate.qubits[0])
    elif kind == "RZ":
        q = gate.qubits[0]
        ph = _rz_phases(gate.angle)
        view = psi.reshape(-1, 2, 1 << q)
        view[:, 0, :] *= ph[0]
        view[:, 1, :] *= ph[1]
    elif kind in {"RZZ", "CZ", "PHASE_GADGET"}:
        idx = np.arange(psi.size)
        if kind == "CZ":
            a, b = gate.qubits
            mask = ((idx >> a) & (idx >> b) & 1).astype(bool)
            psi[mask] *= -1.0
        else:
            parity = np.zeros(psi.size, dtype=np.int64)
            for q in gate.qubits:
                parity ^= (idx >> q) & 1
            z = 1.0 - 2.0 * parity
            psi *= np.exp(-1j * gate.angle / 2 * z)
    elif kind == "CX":
        a, b = gate.qubits
        u = np.eye(4, dtype=complex)[[0, 1, 3, 2]]      # basis 2*bit(a)+bit(b)
        return _apply_2q(psi, u, a, b, n)
    elif kind == "SWAP":
        a, b = gate.qubits
        u = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
        return _apply_2q(psi, u, a, b, n)
    else:
        raise ValueError(f"cannot simulate gate kind {kind!r}")
    return psi


def simulate_state(c: QaoaCircuit) -> np.ndarray:
    """Gate-level exact simulation of a circuit from |0...0>."""
    if c.n > MAX_NOISELESS_QUBITS:
        raise ValueError(f"n={c.n} exceeds the {MAX_NOISELESS_QUBITS}-qubit cap")
    psi = np.zeros(1 << c.n, dtype=complex)
    psi[0] = 1.0
    for g in c.gates:
        psi = apply_gate(psi, g, c.n)
    return psi


# ---------------------------------------------------------------------------
# QAOA fast path
# ---------------------------------------------------------------------------

def evolve_diagonal(
    energies: np.ndarray,
    betas: Sequence[float],
    gammas: Sequence[float],
) -> np.ndarray:
    """QAOA evolution given a precomputed diagonal energy table: each layer
    multiplies exp(-i gamma E(x)) elementwise, then applies RX(2 beta) per
    qubit. Starts from the uniform superposition."""
    n = int(energies.size).bit_length() - 1
    if 1 << n != energies.size:
        raise ValueError("energy table length must be a power of two")
    betas = np.asarray(betas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if betas.shape != gammas.shape or betas.ndim != 1 or betas.size < 1:
        raise ValueError("betas and gammas must be equal-length non-empty vectors")
    psi = np.full(energies.size, 2.0 ** (-n / 2), dtype=complex)
    for beta, gamma in zip(betas, gammas):
        psi *= np.exp(-1j * gamma * energies)
        rx = _rx(2.0 * beta)
        for q in range(n):
            _apply_1q(psi, rx, q)
    return psi


def simulate_noiseless(
    h: ZPolynomial,
    betas: Sequence[float],
    gammas: Sequence[float],
    max_qubits: int = MAX_NOISELESS_QUBITS,
) -> np.ndarray:
    """QAOA state via the diagonal fast path with E(x) precomputed once."""
    if h.n > max_qubits:
        raise ValueError(f"n={h.n} exceeds the {max_qubits}-qubit cap")
    return evolve_diagonal(h.energy_table(), betas, gammas)


def expectation(state: np.ndarray, h: ZPolynomial) -> float:
    if state.size != 1 << h.n:
        raise ValueError("state dimension does not match the polynomial size")
    probs = np.abs(state) ** 2
    return float(probs @ h.energy_table())


# ---------------------------------------------------------------------------
# sample sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSet:
    """Aggregated measurement outcomes with energies under a fixed polynomial.

    Entries are sorted by bitstring text (x_0 first) for determinism.
    """

    entries: tuple[tuple[str, int], ...]
    energies: tuple[float, ...]
    shots: int

    def __post_init__(self) -> None:
        if len(self.entries) != len(self.energies):
            raise ValueError("entries and energies must align")
        total = 0
        for text, count in self.entries:
            if count < 1:
                raise ValueError("counts must be >= 1")
            total += count
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, shots say {self.shots}")

    @classmethod
    def from_counts(cls, counts: "Counter[int] | dict[int, int]",
                    h: ZPolynomial) -> "SampleSet":
        items = [(bits_to_text(index_to_bits(s, h.n)), int(c))
                 for s, c in counts.items() if c > 0]
        items.sort()
        energies = tuple(float(h.energy(t)) for t, _ in items)
        return cls(tuple(items), energies, sum(c for _, c in items))

    def mean_energy(self) -> float:
        return float(sum(e * c for (_, c), e in zip(self.entries, self.energies))
                     / self.shots)

    def min_energy(self) -> float:
        return float(min(self.energies))

    def counts_by_bitstring(self) -> dict[str, int]:
        return {t: c for t, c in self.entries}

    def merge(self, other: "SampleSet") -> "SampleSet":
        mine = dict(self.entries)
        energy_of = {t: e for (t, _), e in zip(self.entries, self.energies)}
        for (t, c), e in zip(other.entries, other.energies):
            if t in energy_of and abs(energy_of[t] - e) > 1e-9:
                raise ValueError(f"conflicting energies for {t}")
            energy_of[t] = e
            mine[t] = mine.get(t, 0) + c
        items = sorted(mine.items())
        return SampleSet(tuple(items), tuple(energy_of[t] for t, _ in items),
                         self.shots + other.shots)

    def to_csv(self, path: "str | Path") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bitstring", "count", "energy"])
            for (text, count), energy in zip(self.entries, self.energies):
                writer.writerow([text, count, f"{energy:.12g}"])

    @classmethod
    def from_csv(cls, path: "str | Path") -> "SampleSet":
        entries: list[tuple[str, int]] = []
        energies: list[float] = []
        with open(path, newline="") as fh:
            # tolerate leading provenance comments written by the CLI
            reader = csv.DictReader(
                line for line in fh if not line.startswith("#"))
            for row in reader:
                entries.append((row["bitstring"], int(row["count"])))
                energies.append(float(row["energy"]))
        order = sorted(range(len(entries)), key=lambda i: entries[i][0])
        return cls(tuple(entries[i] for i in order),
                   tuple(energies[i] for i in order),
                   sum(c for _, c in entries))


def sample(state: np.ndarray, h: ZPolynomial, shots: int, seed: int) -> SampleSet:
    """s i.i.d. computational-basis draws from |psi|^2."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = np.abs(state) ** 2
    norm = probs.sum()
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state norm deviates by {abs(norm - 1.0):.2e}")
    probs = probs / norm
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    nz = np.flatnonzero(counts)
    return SampleSet.from_counts({int(s): int(counts[s]) for s in nz}, h)


# ---------------------------------------------------------------------------
# trajectory noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Two-qubit depolarizing strength, trajectory count, and base seed.

    Channel convention: rho -> (1-lam) rho + (lam/15) sum over the 15
    non-identity two-qubit Paulis of P rho P; lam = 1 fully depolarizes the
    pair. Noise attaches to two-qubit gates only.
    """

    lam: float
    trajectories: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")


def trajectory_state(c: QaoaCircuit, lam: float, rng: np.random.Generator) -> np.ndarray:
    """One noise trajectory: after each two-qubit gate, with probability lam
    insert a uniformly chosen non-identity two-qubit Pauli."""
    psi = np.zeros(1 << c.n, dtype=complex)
    psi[0] = 1.0
    for g in c.gates:
        psi = apply_gate(psi, g, c.n)
        if len(g.qubits) == 2 and lam > 0.0:
            if rng.random() < lam:
                pa, pb = TWO_QUBIT_PAULIS[rng.integers(15)]
                if pa is not None:
                    _apply_1q(psi, pa, g.qubits[0])
                if pb is not None:
                    _apply_1q(psi, pb, g.qubits[1])
    return psi


def _correct_index(y: int, perm: Sequence[int]) -> int:
    x = 0
    for i, pos in enumerate(perm):
        x |= ((y >> pos) & 1) << i
    return x


def simulate_noisy(
    c: QaoaCircuit,
    h: ZPolynomial,
    noise: NoiseSpec,
    shots_per_trajectory: int = 1,
) -> SampleSet:
    """Trajectory-unraveled noisy sampling of a (lowered) circuit.

    Each trajectory draws its own RNG stream from (seed, trajectory index), so
    serial and parallel execution agree. Measured physical bitstrings are
    corrected to logical order through the circuit's final permutation.
    """
    if c.n > MAX_TRAJECTORY_QUBITS:
        raise ValueError(f"n={c.n} exceeds the {MAX_TRAJECTORY_QUBITS}-qubit cap")
    if shots_per_trajectory < 1:
        raise ValueError("shots_per_trajectory must be >= 1")
    identity_perm = tuple(c.final_permutation) == tuple(range(c.n))
    counter: Counter[int] = Counter()
    for t in range(noise.trajectories):
        rng = np.random.default_rng((noise.seed, t))
        psi = trajectory_state(c, noise.lam, rng)
        probs = np.abs(psi) ** 2
        probs /= probs.sum()
        if shots_per_trajectory == 1:
            drawn = [int(rng.choice(probs.size, p=probs))]
        else:
            counts = rng.multinomial(shots_per_trajectory, probs)
            drawn = []
            for s in np.flatnonzero(counts):
                drawn.extend([int(s)] * int(counts[s]))
        for y in drawn:
            counter[y if identity_perm else _correct_index(y, c.final_permutation)] += 1
    return SampleSet.from_counts(counter, h)
