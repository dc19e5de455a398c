"""Approximate circuit simulation with matrix-product states.

Sites follow the wire order of the circuit (site i = physical qubit i), so
only nearest-neighbor two-qubit gates are representable; circuits must be
line-synthesized with SWAPs already in place. The state is kept in mixed
canonical form: tensors left of the center are left-isometries, tensors right
of it are right-isometries, and the center tensor carries the norm. Every
two-qubit application contracts the pair, applies the gate, and restores MPS
form by SVD keeping min(chi, numerical rank at 1e-12) singular values; the
kept spectrum is renormalized and the discarded weight accumulates in
truncation_error.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .circuits import Gate, QaoaCircuit
from .ising import ZPolynomial
from .statevector import SampleSet

_DIAG_SINGLE = {"Z"}
_RANK_FLOOR = 1e-12


def _single_qubit_matrix(g: Gate) -> np.ndarray:
    if g.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if g.kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if g.kind == "Y":
        return np.array([[0, -1j], [1j, 0]])
    if g.kind == "Z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if g.kind == "RX":
        c, s = np.cos(g.angle / 2), np.sin(g.angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if g.kind == "RZ":
        return np.diag([np.exp(-1j * g.angle / 2), np.exp(1j * g.angle / 2)])
    if g.kind == "PHASE_GADGET":        # single-site gadget acts like RZ
        return np.diag([np.exp(-1j * g.angle / 2), np.exp(1j * g.angle / 2)])
    raise ValueError(f"not a single-qubit gate kind: {g.kind!r}")


def _two_qubit_tensor(g: Gate, left_site: int) -> np.ndarray:
    """Gate as a (2,2,2,2) tensor [out_left, out_right, in_left, in_right]."""
    a, b = g.qubits
    if g.kind in {"RZZ", "PHASE_GADGET"}:
        u = np.zeros((4, 4), dtype=complex)
        for sa in range(2):
            for sb in range(2):
                z = (1 - 2 * sa) * (1 - 2 * sb)
                u[2 * sa + sb, 2 * sa + sb] = np.exp(-1j * g.angle / 2 * z)
    elif g.kind == "CZ":
        u = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    elif g.kind == "SWAP":
        u = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    elif g.kind == "CX":
        u = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    else:
        raise ValueError(f"not a two-qubit gate kind: {g.kind!r}")
    t = u.reshape(2, 2, 2, 2)           # [out_a, out_b, in_a, in_b]
    if a != left_site:                  # gate listed (right, left): mirror legs
        t = t.transpose(1, 0, 3, 2)
    return t


class MpsState:
    """Mixed-canonical MPS over n sites with bond cap chi."""

    def __init__(self, n: int, chi: int,
                 final_permutation: "Sequence[int] | None" = None):
        if n < 1:
            raise ValueError("need at least one site")
        if chi < 1:
            raise ValueError("chi must be >= 1")
        self.n = n
        self.chi = chi
        self.tensors: list[np.ndarray] = []
        for _ in range(n):
            t = np.zeros((1, 2, 1), dtype=complex)
            t[0, 0, 0] = 1.0
            self.tensors.append(t)
        self.center = 0
        self.truncation_error = 0.0
        self.final_permutation = (tuple(final_permutation)
                                  if final_permutation is not None
                                  else tuple(range(n)))

    # -- canonical form -----------------------------------------------------

    def bond_dims(self) -> tuple[int, ...]:
        return tuple(self.tensors[i].shape[2] for i in range(self.n - 1))

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def _move_center_right(self) -> None:
        c = self.center
        dl, _, dr = self.tensors[c].shape
        q, r = np.linalg.qr(self.tensors[c].reshape(dl * 2, dr))
        self.tensors[c] = q.reshape(dl, 2, -1)
        nxt = self.tensors[c + 1]
        self.tensors[c + 1] = (r @ nxt.reshape(nxt.shape[0], -1)).reshape(
            -1, 2, nxt.shape[2])
        self.center = c + 1

    def _move_center_left(self) -> None:
        c = self.center
        dl, _, dr = self.tensors[c].shape
        q, r = np.linalg.qr(self.tensors[c].reshape(dl, 2 * dr).T)
        self.tensors[c] = q.T.reshape(-1, 2, dr)
        prev = self.tensors[c - 1]
        self.tensors[c - 1] = (prev.reshape(-1, prev.shape[2]) @ r.T).reshape(
            prev.shape[0], 2, -1)
        self.center = c - 1

    def move_center(self, site: int) -> None:
        while self.center < site:
            self._move_center_right()
        while self.center > site:
            self._move_center_left()

    # -- gate application ---------------------------------------------------

    def apply_single(self, g: Gate) -> None:
        op = _single_qubit_matrix(g)
        q = g.qubits[0]
        self.tensors[q] = np.einsum("st,atb->asb", op, self.tensors[q])

    def apply_pair(self, g: Gate) -> None:
        a, b = g.qubits
        i = min(a, b)
        if abs(a - b) != 1:
            raise ValueError(
                f"gate {g.kind} on qubits {g.qubits} is not nearest-neighbor; "
                "MPS simulation requires a line-synthesized circuit")
        if self.center < i:
            self.move_center(i)
        elif self.center > i + 1:
            self.move_center(i + 1)
        u = _two_qubit_tensor(g, i)
        theta = np.einsum("axb,byc->axyc", self.tensors[i], self.tensors[i + 1])
        theta = np.einsum("xyij,aijc->axyc", u, theta)
        dl, _, _, dr = theta.shape
        mat = theta.reshape(dl * 2, 2 * dr)
        uu, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, min(self.chi, int(np.count_nonzero(s > _RANK_FLOOR))))
        self.truncation_error += float((s[keep:] ** 2).sum())
        s_kept = s[:keep] / np.linalg.norm(s[:keep])
        self.tensors[i] = uu[:, :keep].reshape(dl, 2, keep)
        self.tensors[i + 1] = (s_kept[:, None] * vh[:keep]).reshape(keep, 2, dr)
        self.center = i + 1

    # -- dense readout (small n, tests and cross-checks) ---------------------

    def to_statevector(self, max_qubits: int = 16) -> np.ndarray:
        if self.n > max_qubits:
            raise ValueError(f"n={self.n} too large for dense readout")
        acc = self.tensors[0]                   # (1, 2, D)
        for t in self.tensors[1:]:
            acc = np.einsum("...ab,bsc->...asc", acc, t)
        acc = acc.reshape((2,) * self.n)        # axes are sites 0..n-1
        return np.ascontiguousarray(acc.transpose(range(self.n - 1, -1, -1))).reshape(-1)

    def copy(self) -> "MpsState":
        clone = MpsState(self.n, self.chi, self.final_permutation)
        clone.tensors = [t.copy() for t in self.tensors]
        clone.center = self.center
        clone.truncation_error = self.truncation_error
        return clone


def apply_circuit(c: QaoaCircuit, chi: int) -> MpsState:
    """Run a line-synthesized circuit from |0...0> at bond cap chi.

    Gates are applied moment by moment with each moment's gates sorted by
    position: gates in one moment act on disjoint qubits, so they commute and
    the reorder leaves the unitary unchanged while the canonical center moves
    in monotone sweeps instead of bouncing.
    """
    state = MpsState(c.n, chi, c.final_permutation)
    forward = True
    for moment in c.moments():
        ordered = sorted(moment, key=lambda g: min(g.qubits), reverse=not forward)
        for g in ordered:
            if len(g.qubits) == 1:
                state.apply_single(g)
            elif len(g.qubits) == 2:
                state.apply_pair(g)
            else:
                raise ValueError(
                    f"{g.kind} on {len(g.qubits)} qubits is not representable "
                    "on a line; lower or quadratize first")
        if any(len(g.qubits) == 2 for g in moment):
            forward = not forward        # serpentine: pick up where we stopped
    if abs(state.norm() - 1.0) > 1e-6:
        raise RuntimeError(f"state norm drifted to {state.norm():.9f}")
    return state


def z_string_expectation(state: MpsState, support: Sequence[int]) -> float:
    """<prod_{i in support} Z_i> by one left-to-right sweep.

    Support is given in logical variable order; sites are looked up through
    the state's final permutation. The norm accumulates in the same sweep, so
    the value is exact even away from perfect canonical form.
    """
    sites = {state.final_permutation[i] for i in support}
    if len(sites) != len(support):
        raise ValueError("support must not repeat variables")
    num = np.ones((1, 1), dtype=complex)
    den = np.ones((1, 1), dtype=complex)
    for i, t in enumerate(state.tensors):
        m0, m1 = t[:, 0, :], t[:, 1, :]
        den = m0.conj().T @ den @ m0 + m1.conj().T @ den @ m1
        sign = -1.0 if i in sites else 1.0
        num = m0.conj().T @ num @ m0 + sign * (m1.conj().T @ num @ m1)
    return float(np.real(num[0, 0] / den[0, 0]))


def energy(state: MpsState, h: ZPolynomial) -> float:
    """Sum of term expectations plus the constant. All Z-strings plus the norm
    channel ride one left-to-right sweep, batched across terms."""
    if h.n != state.n:
        raise ValueError("polynomial size does not match the state")
    total = h.constant
    supports = []
    coeffs = []
    for support, coeff in sorted(h.terms.items()):
        if not support:
            total += coeff
            continue
        supports.append({state.final_permutation[i] for i in support})
        coeffs.append(coeff)
    if not supports:
        return float(total)
    nterms = len(supports)
    signs = np.ones((state.n, nterms + 1))              # last row: norm channel
    for col, s in enumerate(supports):
        for i in s:
            signs[i, col] = -1.0
    left = np.ones((nterms + 1, 1, 1), dtype=complex)
    for i, t in enumerate(state.tensors):
        m0, m1 = t[:, 0, :], t[:, 1, :]
        even = m0.conj().T @ left @ m0
        odd = m1.conj().T @ left @ m1
        left = even + signs[i][:, None, None] * odd
    values = np.real(left[:-1, 0, 0] / left[-1, 0, 0])
    return float(total + np.dot(coeffs, values))


def sample(state: MpsState, h: ZPolynomial, shots: int, seed: int) -> SampleSet:
    """Sequential-conditional sampling: right-canonicalize a copy, then draw
    each site's bit from the exact conditional marginal, vectorized across
    shots. Bitstrings are corrected to logical order."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    work = state.copy()
    work.move_center(0)
    rng = np.random.default_rng(seed)
    v = np.ones((shots, 1), dtype=complex)
    bits = np.empty((shots, state.n), dtype=np.int64)
    for i, t in enumerate(work.tensors):
        c0 = v @ t[:, 0, :]
        c1 = v @ t[:, 1, :]
        p0 = np.einsum("ij,ij->i", c0.conj(), c0).real
        p1 = np.einsum("ij,ij->i", c1.conj(), c1).real
        take1 = rng.random(shots) < p1 / (p0 + p1)
        bits[:, i] = take1
        chosen = np.where(take1[:, None], c1, c0)
        norms = np.sqrt(np.where(take1, p1, p0))
        v = chosen / norms[:, None]
    perm = np.asarray(state.final_permutation)
    logical = bits[:, perm]
    weights = 1 << np.arange(state.n, dtype=np.int64)
    indices = logical @ weights
    counter = Counter(int(s) for s in indices)
    return SampleSet.from_counts(counter, h)
