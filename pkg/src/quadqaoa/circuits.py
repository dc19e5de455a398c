"""Gate-level circuit IR and QAOA synthesis.

Angle conventions (fixed once, shared with the simulators):
  RZ(theta)  = exp(-i theta/2 Z)
  RX(theta)  = exp(-i theta/2 X)
  RZZ(theta) = exp(-i theta/2 Z@Z)
  PHASE_GADGET(support, theta) = exp(-i theta/2 Z...Z)
so the cost evolution exp(-i gamma c Z...Z) of a term with coefficient c is a
gadget with angle 2*gamma*c, and the mixer layer is RX(2*beta) on every qubit.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ising import ZPolynomial
from .swapnet import SwapSchedule

SINGLE_QUBIT_KINDS = {"H", "RX", "RZ", "X", "Y", "Z"}
TWO_QUBIT_KINDS = {"RZZ", "SWAP", "CX", "CZ"}
ANGLED_KINDS = {"RX", "RZ", "RZZ", "PHASE_GADGET"}


@dataclass(frozen=True, slots=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.kind in SINGLE_QUBIT_KINDS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} takes exactly 1 qubit")
        elif self.kind in TWO_QUBIT_KINDS:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} takes 2 distinct qubits")
        elif self.kind == "PHASE_GADGET":
            if not 1 <= len(self.qubits) <= 4 or len(set(self.qubits)) != len(self.qubits):
                raise ValueError("PHASE_GADGET support size must be in [1, 4], distinct")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.kind in ANGLED_KINDS) != (self.angle is not None):
            raise ValueError(f"{self.kind} angle mismatch")


@dataclass(frozen=True)
class QaoaCircuit:
    """Ordered gate list with permutation tracking.

    ``final_permutation[logical] = physical``: where each logical qubit ends up
    after all SWAP layers; measurement outcomes must be permutation-corrected
    back to logical order.
    """

    n: int
    gates: tuple[Gate, ...]
    final_permutation: tuple[int, ...]
    p: int = 0
    k: int | None = None
    topology: str = "abstract"

    def moments(self) -> list[list[Gate]]:
        """Greedy as-soon-as-possible grouping into disjoint-support moments."""
        last = [-1] * self.n
        out: list[list[Gate]] = []
        for g in self.gates:
            m = 1 + max((last[q] for q in g.qubits), default=-1)
            while len(out) <= m:
                out.append([])
            out[m].append(g)
            for q in g.qubits:
                last[q] = m
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "k": self.k,
            "topology": self.topology,
            "final_permutation": list(self.final_permutation),
            "gates": [
                {"kind": g.kind, "qubits": list(g.qubits),
                 **({"angle": g.angle} if g.angle is not None else {})}
                for g in self.gates
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QaoaCircuit":
        gates = tuple(
            Gate(kind=g["kind"], qubits=tuple(g["qubits"]), angle=g.get("angle"))
            for g in d["gates"]
        )
        return cls(n=int(d["n"]), gates=gates,
                   final_permutation=tuple(d["final_permutation"]),
                   p=int(d.get("p", 0)), k=d.get("k"),
                   topology=d.get("topology", "abstract"))

    def to_text(self) -> str:
        """Flat listing, one gate per line, for diffing."""
        lines = []
        for g in self.gates:
            qubits = " ".join(str(q) for q in g.qubits)
            if g.angle is None:
                lines.append(f"{g.kind} {qubits}")
            else:
                lines.append(f"{g.kind} {qubits} {g.angle:.12g}")
        return "\n".join(lines) + "\n"


def save_circuit(c: QaoaCircuit, path: "str | Path") -> None:
    Path(path).write_text(json.dumps(c.to_dict(), indent=2) + "\n")


def load_circuit(path: "str | Path") -> QaoaCircuit:
    return QaoaCircuit.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------------
# synthesis
# ----------------------------------------------------------------------------

def _round_robin_round(i: int, j: int, n: int) -> int:
    """Round index of pair (i, j) in the circle-method tournament on n players
    (n rounded up to even). Pairs within one round are disjoint, so a complete
    QUBO schedules into n-1 depth-2 rounds."""
    m = n if n % 2 == 0 else n + 1
    if i == m - 1 or j == m - 1:
        return j if i == m - 1 else i
    # non-fixed players pair up in round r when i + j = 2r (mod m-1);
    # m/2 inverts 2 because 2 * (m/2) = m = 1 (mod m-1)
    return ((i + j) * (m // 2)) % (m - 1)


def _abstract_cost_layer(h: ZPolynomial, gamma: float) -> list[Gate]:
    """One cost evolution: a phase gadget per term, quadratic terms emitted as
    RZZ grouped by tournament rounds (keeps complete-QUBO depth at 2(n-1)),
    then higher-order gadgets greedily packed, then linear RZs."""
    gates: list[Gate] = []
    quad = sorted(t for t in h.terms if len(t) == 2)
    quad.sort(key=lambda t: (_round_robin_round(t[0], t[1], h.n), t))
    for tup in quad:
        gates.append(Gate("RZZ", tup, 2.0 * gamma * h.terms[tup]))
    higher = sorted(t for t in h.terms if len(t) >= 3)
    rounds: list[tuple[set[int], list[tuple[int, ...]]]] = []
    for tup in higher:
        for used, members in rounds:
            if used.isdisjoint(tup):
                used.update(tup)
                members.append(tup)
                break
        else:
            rounds.append((set(tup), [tup]))
    for _, members in rounds:
        for tup in members:
            gates.append(Gate("PHASE_GADGET", tup, 2.0 * gamma * h.terms[tup]))
    for tup in sorted(t for t in h.terms if len(t) == 1):
        gates.append(Gate("RZ", tup, 2.0 * gamma * h.terms[tup]))
    return gates


def _line_cost_layer(
    h: ZPolynomial,
    schedule: SwapSchedule,
    gamma: float,
    perm: list[int],
    forward: bool,
) -> list[Gate]:
    """One cost evolution on the line: RZZ at first adjacency in traversal
    order with interleaved SWAP layers. ``perm`` (logical -> physical) is
    updated in place. A backward pass traverses configurations k..0, undoing
    the permutation while applying the same retained terms."""
    k = schedule.k
    edges = {t for t in h.terms if len(t) == 2}
    adjacency = [schedule.adjacent_logical_pairs(t) for t in range(k + 1)]
    reach: set[tuple[int, int]] = set().union(*adjacency) if adjacency else set()
    missing = edges - reach
    if missing:
        raise ValueError(f"terms not reachable within k={k} layers: {sorted(missing)}")

    gates: list[Gate] = []
    # linear terms are diagonal and commute with everything; emit them first
    for tup in sorted(t for t in h.terms if len(t) == 1):
        gates.append(Gate("RZ", (perm[tup[0]],), 2.0 * gamma * h.terms[tup]))

    applied: set[tuple[int, int]] = set()

    def emit_rzz_at_config(t: int, next_swaps: frozenset[tuple[int, int]]) -> None:
        # pairs about to be swapped go last so each RZZ sits right before its
        # SWAP and the pair merges into one 3-gate block when lowered
        new = sorted((edges & adjacency[t]) - applied)
        pos_pairs = []
        for a, b in new:
            pa, pb = perm[a], perm[b]
            if abs(pa - pb) != 1:
                raise RuntimeError("schedule bookkeeping broke adjacency")
            lo, hi = min(pa, pb), max(pa, pb)
            pos_pairs.append(((lo, hi) in next_swaps, lo, hi, (a, b)))
        for _, lo, hi, pair in sorted(pos_pairs):
            gates.append(Gate("RZZ", (lo, hi), 2.0 * gamma * h.terms[pair]))
            applied.add(pair)

    def emit_swap_layer(t: int) -> None:
        layer = schedule.layers[t - 1]
        holder = [0] * schedule.n
        for logical, pos in enumerate(perm):
            holder[pos] = logical
        for q, qq in layer.swaps:
            gates.append(Gate("SWAP", (q, qq)))
            a, b = holder[q], holder[qq]
            perm[a], perm[b] = qq, q

    def swap_positions(t: int) -> frozenset[tuple[int, int]]:
        if not 1 <= t <= k:
            return frozenset()
        return frozenset(schedule.layers[t - 1].swaps)

    if forward:
        emit_rzz_at_config(0, swap_positions(1))
        for t in range(1, k + 1):
            emit_swap_layer(t)
            emit_rzz_at_config(t, swap_positions(t + 1))
    else:
        for t in range(k, 0, -1):
            emit_rzz_at_config(t, swap_positions(t))
            emit_swap_layer(t)
        emit_rzz_at_config(0, frozenset())
    if applied != edges:
        raise RuntimeError("line synthesis missed retained terms")
    return gates


def synthesize_qaoa(
    h: ZPolynomial,
    betas: Sequence[float],
    gammas: Sequence[float],
    topology: str = "abstract",
    schedule: SwapSchedule | None = None,
) -> QaoaCircuit:
    """Build the p-layer QAOA circuit |psi> = prod_q RX-mixer(2 beta_q) .
    cost(2 gamma_q) acting on |+>^n (initial H wall included).

    abstract topology emits one phase gadget per term. line topology needs a
    SwapSchedule and quadratic h; odd layers run the schedule forward, even
    layers backward, so H_C(k) is re-applied exactly while the permutation
    returns to the initial mapping every second layer.
    """
    betas = np.asarray(betas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if betas.shape != gammas.shape or betas.ndim != 1 or betas.size < 1:
        raise ValueError("betas and gammas must be equal-length non-empty vectors")
    p = betas.size
    gates: list[Gate] = [Gate("H", (q,)) for q in range(h.n)]

    if topology == "abstract":
        for q in range(p):
            gates += _abstract_cost_layer(h, gammas[q])
            gates += [Gate("RX", (i,), 2.0 * betas[q]) for i in range(h.n)]
        perm = tuple(range(h.n))
        return QaoaCircuit(h.n, tuple(gates), perm, p=p, topology="abstract")

    if topology == "line":
        if schedule is None:
            raise ValueError("line topology requires a SwapSchedule")
        if schedule.n != h.n:
            raise ValueError("schedule size mismatch")
        if h.degree() > 2:
            raise ValueError("line topology requires a quadratic polynomial")
        perm = list(schedule.mapping)
        for q in range(p):
            gates += _line_cost_layer(h, schedule, gammas[q], perm, forward=(q % 2 == 0))
            gates += [Gate("RX", (i,), 2.0 * betas[q]) for i in range(h.n)]
        return QaoaCircuit(h.n, tuple(gates), tuple(perm), p=p, k=schedule.k,
                           topology="line")

    raise ValueError(f"unknown topology {topology!r}")


# ----------------------------------------------------------------------------
# lowering
# ----------------------------------------------------------------------------

def _lower_gadget(g: Gate) -> list[Gate]:
    sup = g.qubits
    if len(sup) == 1:
        return [Gate("RZ", sup, g.angle)]
    ladder = [Gate("CX", (sup[i], sup[i + 1])) for i in range(len(sup) - 1)]
    return ladder + [Gate("RZ", (sup[-1],), g.angle)] + ladder[::-1]


DIAGONAL_KINDS = {"RZ", "RZZ", "CZ", "PHASE_GADGET", "Z"}


def lower_to_cz(c: QaoaCircuit) -> QaoaCircuit:
    """Lower to {CX, RZ, RX, H} with entangling-gate cancellation.

    RZZ costs 2 two-qubit gates, a 4-local gadget 6, a SWAP 3; a SWAP with an
    RZZ on the same pair merges into a single 3-gate block
    CX(a,b) RZ(b) CX(b,a) CX(a,b). The RZZ may sit a few gates away as long as
    everything in between either misses both qubits or is diagonal (diagonal
    gates commute, so the RZZ slides to the SWAP).
    """
    gates = list(c.gates)
    merged_into_swap: dict[int, int] = {}   # swap index -> rzz index
    consumed: set[int] = set()

    occ: dict[int, list[int]] = {}          # qubit -> gate indices, ascending
    for i, g in enumerate(gates):
        for q in g.qubits:
            occ.setdefault(q, []).append(i)

    def check(i: int, pair: frozenset[int]) -> tuple[bool, int | None]:
        """(keep walking, found index) at a gate touching the pair."""
        g = gates[i]
        if (g.kind == "RZZ" and frozenset(g.qubits) == pair
                and i not in consumed):
            return False, i
        return g.kind in DIAGONAL_KINDS, None

    def seek(idx: int, step: int, pair: frozenset[int]) -> int | None:
        # walk only gates touching either qubit, via occurrence lists
        a, b = sorted(pair)
        la, lb = occ[a], occ.get(b, [])
        if step < 0:
            ia = bisect_left(la, idx) - 1
            ib = bisect_left(lb, idx) - 1
            while ia >= 0 or ib >= 0:
                j = max(la[ia] if ia >= 0 else -1, lb[ib] if ib >= 0 else -1)
                if ia >= 0 and la[ia] == j:
                    ia -= 1
                if ib >= 0 and lb[ib] == j:
                    ib -= 1
                walk_on, found = check(j, pair)
                if found is not None:
                    return found
                if not walk_on:
                    return None
        else:
            na, nb = len(la), len(lb)
            ia = bisect_right(la, idx)
            ib = bisect_right(lb, idx)
            big = len(gates)
            while ia < na or ib < nb:
                j = min(la[ia] if ia < na else big, lb[ib] if ib < nb else big)
                if ia < na and la[ia] == j:
                    ia += 1
                if ib < nb and lb[ib] == j:
                    ib += 1
                walk_on, found = check(j, pair)
                if found is not None:
                    return found
                if not walk_on:
                    return None
        return None

    for idx, g in enumerate(gates):
        if g.kind != "SWAP":
            continue
        pair = frozenset(g.qubits)
        found = seek(idx, -1, pair)
        if found is None:
            found = seek(idx, +1, pair)
        if found is not None:
            merged_into_swap[idx] = found
            consumed.add(found)

    out: list[Gate] = []
    for idx, g in enumerate(gates):
        if idx in consumed:
            continue
        if g.kind in {"H", "RX", "RZ", "CX", "CZ", "X", "Y", "Z"}:
            out.append(g)
        elif g.kind == "RZZ":
            a, b = g.qubits
            out += [Gate("CX", (a, b)), Gate("RZ", (b,), g.angle), Gate("CX", (a, b))]
        elif g.kind == "PHASE_GADGET":
            out += _lower_gadget(g)
        elif g.kind == "SWAP":
            a, b = g.qubits
            if idx in merged_into_swap:
                theta = gates[merged_into_swap[idx]].angle
                out += [Gate("CX", (a, b)), Gate("RZ", (b,), theta),
                        Gate("CX", (b, a)), Gate("CX", (a, b))]
            else:
                out += [Gate("CX", (a, b)), Gate("CX", (b, a)), Gate("CX", (a, b))]
        else:
            raise ValueError(f"cannot lower gate kind {g.kind!r}")
    return QaoaCircuit(c.n, tuple(out), c.final_permutation, p=c.p, k=c.k,
                       topology=c.topology)


def depth_and_counts(c: QaoaCircuit) -> tuple[int, int]:
    """(two-qubit gate count, two-qubit depth): depth counts moments holding at
    least one two-qubit gate; single-qubit gates are ignored. Intended for
    lowered circuits."""
    count = 0
    depth_moments = set()
    last = [-1] * c.n
    for g in c.gates:
        m = 1 + max((last[q] for q in g.qubits), default=-1)
        for q in g.qubits:
            last[q] = m
        if len(g.qubits) == 2:
            count += 1
            depth_moments.add(m)
    return count, len(depth_moments)
