"""Line-topology SWAP schedules: odd-even transposition layers, reachable
term sets under truncation, initial-mapping optimization, and analytic
resource estimates.

A schedule acts on a line of n physical positions. Layers alternate between
even parity (first pair (0,1)) and odd parity (first pair (1,2)), starting
even. pi_t maps logical qubit -> physical position after t layers; every
unordered logical pair becomes physically adjacent at some configuration
t <= n-2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ising import ZPolynomial


# ----------------------------------------------------------------------------
# schedule construction
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SwapLayer:
    parity: str                                # "even" or "odd"
    swaps: tuple[tuple[int, int], ...]         # physical position pairs (q, q+1)


@dataclass(frozen=True)
class SwapSchedule:
    n: int
    k: int
    mapping: tuple[int, ...]                   # pi_0, logical -> physical
    layers: tuple[SwapLayer, ...]
    permutations: tuple[tuple[int, ...], ...]  # pi_0 .. pi_k

    def adjacent_logical_pairs(self, t: int) -> frozenset[tuple[int, int]]:
        """Logical pairs sitting on neighboring positions at configuration t."""
        pi = self.permutations[t]
        holder = [0] * self.n                  # holder[position] = logical
        for logical, pos in enumerate(pi):
            holder[pos] = logical
        return frozenset(
            (min(holder[q], holder[q + 1]), max(holder[q], holder[q + 1]))
            for q in range(self.n - 1)
        )

    def first_adjacency(self) -> dict[tuple[int, int], int]:
        """Earliest configuration index at which each pair is adjacent."""
        out: dict[tuple[int, int], int] = {}
        for t in range(self.k + 1):
            for pair in sorted(self.adjacent_logical_pairs(t)):
                out.setdefault(pair, t)
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "mapping": list(self.mapping),
            "layers": [
                {"parity": l.parity, "swaps": [list(s) for s in l.swaps]}
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SwapSchedule":
        sched = build_schedule(int(d["n"]), int(d["k"]),
                               mapping=tuple(int(x) for x in d["mapping"]))
        expected = [
            {"parity": l.parity, "swaps": [list(s) for s in l.swaps]}
            for l in sched.layers
        ]
        if expected != d["layers"]:
            raise ValueError("layer list does not match the odd-even schedule")
        return sched


@dataclass(frozen=True)
class ReachableSet:
    """Cumulative reachable pair sets: cumulative[t] = E_t."""

    cumulative: tuple[frozenset[tuple[int, int]], ...]

    def at(self, k: int) -> frozenset[tuple[int, int]]:
        return self.cumulative[k]


def _layer_swaps(n: int, t: int) -> SwapLayer:
    """Layer t (1-based) of the odd-even transposition network."""
    even = t % 2 == 1                          # layer 1 is even
    start = 0 if even else 1
    return SwapLayer(
        parity="even" if even else "odd",
        swaps=tuple((q, q + 1) for q in range(start, n - 1, 2)),
    )


def build_schedule(n: int, k: int, mapping: Sequence[int] | None = None) -> SwapSchedule:
    """k alternating SWAP layers starting even, with permutation tracking."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0 <= k <= max(n - 2, 0):
        raise ValueError(f"k must be in [0, n-2] = [0, {n - 2}], got {k}")
    pi = list(range(n)) if mapping is None else list(mapping)
    if sorted(pi) != list(range(n)):
        raise ValueError("mapping must be a permutation of range(n)")
    perms = [tuple(pi)]
    layers = []
    for t in range(1, k + 1):
        layer = _layer_swaps(n, t)
        holder = [0] * n
        for logical, pos in enumerate(pi):
            holder[pos] = logical
        for q, qq in layer.swaps:
            a, b = holder[q], holder[qq]
            pi[a], pi[b] = qq, q
        layers.append(layer)
        perms.append(tuple(pi))
    return SwapSchedule(n=n, k=k, mapping=perms[0], layers=tuple(layers),
                        permutations=tuple(perms))


def reachable_sets(schedule: SwapSchedule) -> ReachableSet:
    cumulative = []
    acc: set[tuple[int, int]] = set()
    for t in range(schedule.k + 1):
        acc |= schedule.adjacent_logical_pairs(t)
        cumulative.append(frozenset(acc))
    return ReachableSet(cumulative=tuple(cumulative))


def save_schedule(schedule: SwapSchedule, path: "str | Path") -> None:
    Path(path).write_text(json.dumps(schedule.to_dict(), indent=2) + "\n")


def load_schedule(path: "str | Path") -> SwapSchedule:
    return SwapSchedule.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------------
# truncated term sets
# ----------------------------------------------------------------------------

def reachable_terms(
    h: ZPolynomial,
    mapping: Sequence[int] | None,
    k: int,
) -> tuple[ZPolynomial, frozenset[tuple[int, int]]]:
    """Truncated Hamiltonian H_C(k): quadratic terms whose pair is adjacent at
    some configuration t <= k; linear terms and the constant always kept."""
    if h.degree() > 2:
        raise ValueError("reachable_terms requires a quadratic polynomial")
    schedule = build_schedule(h.n, k, mapping)
    ek = reachable_sets(schedule).at(k)
    kept = {t: w for t, w in h.terms.items() if len(t) == 1 or t in ek}
    return ZPolynomial.from_terms(h.n, kept, h.constant), ek


def covering_k(h: ZPolynomial, mapping: Sequence[int] | None = None) -> int:
    """Smallest k whose reachable set contains every quadratic term of h."""
    if h.degree() > 2:
        raise ValueError("covering_k requires a quadratic polynomial")
    edges = {t for t in h.terms if len(t) == 2}
    if not edges:
        return 0
    schedule = build_schedule(h.n, max(h.n - 2, 0), mapping)
    first = schedule.first_adjacency()
    return max(first[e] for e in edges)


# ----------------------------------------------------------------------------
# initial mapping optimization (simulated annealing)
# ----------------------------------------------------------------------------

def meeting_table(n: int) -> np.ndarray:
    """F[u, v] = first configuration t at which the tokens starting at
    positions u and v sit on neighboring positions, under the full odd-even
    network. Token trajectories do not depend on the mapping, so the table is
    a function of n alone; first_adjacency of a logical pair (a, b) under
    mapping pi is F[pi[a], pi[b]]."""
    pos = list(range(n))                       # pos[token] = position
    table = np.full((n, n), -1, dtype=int)
    holder = list(range(n))                    # holder[position] = token
    for t in range(max(n - 1, 1)):
        for q in range(n - 1):
            u, v = holder[q], holder[q + 1]
            if table[u, v] < 0:
                table[u, v] = table[v, u] = t
        if t == n - 2:
            break
        layer = _layer_swaps(n, t + 1)
        for q, qq in layer.swaps:
            holder[q], holder[qq] = holder[qq], holder[q]
    np.fill_diagonal(table, 0)
    return table


def optimize_mapping(
    h: ZPolynomial,
    budget: int = 20000,
    seed: int = 0,
    restarts: int = 4,
) -> tuple[int, ...]:
    """Search for an initial mapping minimizing the covering k, tie-broken by
    minimizing the total first-adjacency time summed over problem edges (the
    sum gives the annealer a gradient where the max alone is flat).

    Simulated annealing over permutations mixing transpositions, segment
    reversals, and guided relocations that drag one endpoint of a worst edge
    next to its partner. ``budget`` counts objective evaluations per restart,
    so results are deterministic for a given seed (restarts are merged by best
    objective, then lowest restart index; the first restart is seeded with a
    Fiedler-vector seriation). Falls back to the identity when h has no
    quadratic terms.
    """
    if h.degree() > 2:
        raise ValueError("optimize_mapping requires a quadratic polynomial")
    n = h.n
    edges = [t for t in h.terms if len(t) == 2]
    if not edges or n < 3:
        return tuple(range(n))

    table = meeting_table(n)
    earr = np.array(edges)
    ea, eb = earr[:, 0], earr[:, 1]

    def objective(pi: list[int]) -> tuple[int, int, int]:
        # covering k, then how many edges sit at that k, then total earliness:
        # shrinking the worst level step by step gives the annealer traction
        arr = np.asarray(pi)
        first = table[arr[ea], arr[eb]]
        worst = int(first.max())
        return worst, int((first == worst).sum()), int(first.sum())

    s_total = len(edges) * max(n - 2, 1) + 1

    def scalar_delta(a: tuple[int, int, int], b: tuple[int, int, int]) -> float:
        # acceptance-side weights: a k step costs as much as several stuck
        # edges, totals only nudge; best-so-far tracking stays lexicographic
        return ((a[0] - b[0]) * 8.0 + (a[1] - b[1])
                + (a[2] - b[2]) / s_total)

    def polish(pi: list[int], obj: tuple[int, int, int]) -> tuple[list[int], tuple[int, int, int]]:
        # strict-improvement sweeps over every transposition and every
        # position-segment reversal; deterministic, escapes single-move kinks
        for _ in range(50):
            improved = False
            for i in range(n - 1):
                for j in range(i + 1, n):
                    pi[i], pi[j] = pi[j], pi[i]
                    cand = objective(pi)
                    if cand < obj:
                        obj, improved = cand, True
                    else:
                        pi[i], pi[j] = pi[j], pi[i]
            holder = [0] * n
            for logical, pos in enumerate(pi):
                holder[pos] = logical
            for a in range(n - 1):
                for b in range(a + 1, n):
                    holder[a:b + 1] = holder[a:b + 1][::-1]
                    cand_pi = [0] * n
                    for pos, logical in enumerate(holder):
                        cand_pi[logical] = pos
                    cand = objective(cand_pi)
                    if cand < obj:
                        obj, improved = cand, True
                        pi = cand_pi
                    else:
                        holder[a:b + 1] = holder[a:b + 1][::-1]
            if not improved:
                break
        return pi, obj

    def spectral_order() -> list[int]:
        # Fiedler-vector seriation: exact on paths, a good seed elsewhere
        lap = np.zeros((n, n))
        for (a, b) in edges:
            w = abs(h.terms[(a, b)])
            lap[a, b] -= w
            lap[b, a] -= w
            lap[a, a] += w
            lap[b, b] += w
        vecs = np.linalg.eigh(lap)[1]
        ranks = np.argsort(np.argsort(vecs[:, 1], kind="stable"), kind="stable")
        return [int(r) for r in ranks]

    def relocate(pi: list[int], logical: int, target_pos: int) -> None:
        holder = [0] * n
        for l, pos in enumerate(pi):
            holder[pos] = l
        holder.remove(logical)
        holder.insert(target_pos, logical)
        for pos, l in enumerate(holder):
            pi[l] = pos

    best_obj: tuple[int, int, int] | None = None
    best_pi: list[int] | None = None
    cycles = 3                                 # reheats within one restart
    for r in range(restarts):
        rng = np.random.default_rng((seed, r))
        pi = spectral_order() if r == 0 else list(rng.permutation(n))
        cur_obj = objective(pi)
        loc_obj, loc_pi = cur_obj, list(pi)
        t0, t1 = 2.0, 0.02
        span = max(budget // cycles, 1)
        for step in range(budget):
            temp = t0 * (t1 / t0) ** ((step % span) / max(span - 1, 1))
            old = list(pi)
            u = rng.random()
            if u < 0.4:
                i, j = rng.choice(n, size=2, replace=False)
                pi[i], pi[j] = pi[j], pi[i]
            elif u < 0.7:
                # 2-opt: reverse the occupants of a position segment
                a, b = sorted(rng.choice(n, size=2, replace=False))
                holder = [0] * n
                for logical, pos in enumerate(pi):
                    holder[pos] = logical
                holder[a:b + 1] = holder[a:b + 1][::-1]
                for pos, logical in enumerate(holder):
                    pi[logical] = pos
            else:
                # drag one endpoint of a currently-worst edge beside the other
                arr = np.asarray(pi)
                first = table[arr[ea], arr[eb]]
                worst = np.flatnonzero(first == first.max())
                e = edges[int(rng.choice(worst))]
                a, b = (e[0], e[1]) if rng.random() < 0.5 else (e[1], e[0])
                shift = int(rng.integers(-2, 3))
                relocate(pi, a, min(n - 1, max(0, pi[b] + shift)))
            cand = objective(pi)
            delta = scalar_delta(cand, cur_obj)
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                cur_obj = cand
                if cand < loc_obj:
                    loc_obj, loc_pi = cand, list(pi)
            else:
                pi[:] = old
        loc_pi, loc_obj = polish(loc_pi, loc_obj)
        if best_obj is None or loc_obj < best_obj:
            best_obj, best_pi = loc_obj, loc_pi
    assert best_pi is not None
    return tuple(best_pi)


# ----------------------------------------------------------------------------
# resource estimates
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ResourceEstimate:
    """Two-qubit cost of one QAOA cost+mixer block on a given topology."""

    topology: str
    two_qubit_gate_count: int
    two_qubit_depth: int

    def sampling_rate(self, mean_gate_time: float) -> float:
        return estimate_sampling_rate(self.two_qubit_depth, mean_gate_time)


def estimate_sampling_rate(depth: float, mean_gate_time: float) -> float:
    """Samples per second for a circuit of given two-qubit depth: the
    shot time is depth times the mean two-qubit gate duration."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if mean_gate_time <= 0:
        raise ValueError("mean gate time must be positive")
    return 1.0 / (depth * mean_gate_time)


def estimate_resources(
    h: ZPolynomial,
    topology: str = "all-to-all",
    mapping: Sequence[int] | None = None,
    k: int | None = None,
    p: int = 1,
) -> ResourceEstimate:
    """Two-qubit gate count and depth for p QAOA layers of h.

    all-to-all: count is the ladder formula 2 * (#quadratic) + 6 * (#quartic)
    per layer (pre-cancellation); depth comes from greedy moment packing of a
    synthesized abstract circuit, which reproduces the 2(n-1)-per-layer
    formula on a fully connected QUBO.

    line: quadratic problems only; the truncated/complete SWAP-network circuit
    is synthesized (k defaults to the smallest covering k under the mapping)
    and counted after RZZ/SWAP cancellation.
    """
    from .circuits import depth_and_counts, lower_to_cz, synthesize_qaoa

    if h.degree() > 4:
        raise ValueError("estimates support degree <= 4 only")
    betas = np.full(p, 0.3)
    gammas = np.full(p, 0.2)
    if topology == "all-to-all":
        # 2(m-1) CX per m-local phase gadget: 2 per quadratic, 6 per quartic
        count = p * sum(2 * (len(t) - 1) for t in h.terms if len(t) >= 2)
        circuit = lower_to_cz(synthesize_qaoa(h, betas, gammas, topology="abstract"))
        _, depth = depth_and_counts(circuit)
        return ResourceEstimate("all-to-all", count, depth)
    if topology == "line":
        if h.degree() > 2:
            raise ValueError("line estimates need a quadratic polynomial "
                             "(no 4-local SWAP strategy)")
        kk = covering_k(h, mapping) if k is None else k
        schedule = build_schedule(h.n, kk, mapping)
        circuit = lower_to_cz(
            synthesize_qaoa(h, betas, gammas, topology="line", schedule=schedule))
        count, depth = depth_and_counts(circuit)
        return ResourceEstimate("line", count, depth)
    raise ValueError(f"unknown topology {topology!r}")
