"""Z-diagonal cost Hamiltonians: construction, exact evaluation, brute-force spectra.

Conventions used throughout the package
---------------------------------------
* Variables are bits ``x_i in {0, 1}``; spins are ``z_i = 1 - 2*x_i``.
* Qubit/variable indices are 0-based everywhere.
* An integer basis state ``s`` encodes ``x_i = (s >> i) & 1`` (bit i of the
  integer is variable i).
* A bitstring *text* is ``x_0 x_1 ... x_{n-1}`` read left to right, e.g.
  ``"0110"`` means x_0=0, x_1=1, x_2=1, x_3=0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# Coefficients with magnitude below this are dropped at construction so that
# term counts stay meaningful.
COEFF_EPS = 1e-12

# Hard cap for exhaustive enumeration (2^24 energies ~ 134 MB as float64).
BRUTE_FORCE_CAP = 24


# ----------------------------------------------------------------------------
# bit/spin conventions
# ----------------------------------------------------------------------------

def bits_to_text(bits: Sequence[int]) -> str:
    """Render a bit assignment as text, variable 0 first."""
    return "".join("1" if b else "0" for b in bits)


def text_to_bits(text: str) -> np.ndarray:
    if any(c not in "01" for c in text):
        raise ValueError(f"bitstring text must contain only 0/1, got {text!r}")
    return np.array([1 if c == "1" else 0 for c in text], dtype=np.int8)


def index_to_bits(state: int, n: int) -> np.ndarray:
    """Decode integer basis state: bit i of the integer is variable i."""
    return np.array([(state >> i) & 1 for i in range(n)], dtype=np.int8)


def bits_to_index(bits: Sequence[int]) -> int:
    return int(sum(1 << i for i, b in enumerate(bits) if b))


def _coerce_bits(x: "str | Sequence[int] | np.ndarray", n: int) -> np.ndarray:
    bits = text_to_bits(x) if isinstance(x, str) else np.asarray(x, dtype=np.int8)
    if bits.shape != (n,):
        raise ValueError(f"assignment has length {bits.shape}, expected ({n},)")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return bits


def _masked_parity(states: np.ndarray, mask: int) -> np.ndarray:
    """Parity of popcount(states & mask), as int8 in {0, 1}."""
    m = np.uint64(mask)
    return (np.bitwise_count(states & m) & np.uint64(1)).astype(np.int8)


# ----------------------------------------------------------------------------
# core type
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ZPolynomial:
    """Real-weighted polynomial over Pauli-Z variables.

    ``terms`` maps strictly-sorted index tuples to coefficients; ``constant``
    is an additive energy offset. Instances are treated as immutable after
    construction (safe for concurrent read-only use); build them through
    :meth:`from_terms`, which canonicalizes.
    """

    n: int
    terms: Mapping[tuple[int, ...], float]
    constant: float = 0.0

    @classmethod
    def from_terms(
        cls,
        n: int,
        terms: Mapping[Sequence[int], float] | Iterable[tuple[Sequence[int], float]],
        constant: float = 0.0,
    ) -> "ZPolynomial":
        """Canonicalize and build: sort tuples, fold Z_i^2 = I, merge duplicates,
        drop coefficients below ``COEFF_EPS``. Repeated indices within one tuple
        cancel pairwise; a fully-cancelled tuple folds into the constant."""
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[int, ...], float] = {}
        const = float(constant)
        for tup, w in items:
            w = float(w)
            counts: dict[int, int] = {}
            for q in tup:
                q = int(q)
                if not 0 <= q < n:
                    raise ValueError(f"index {q} out of range for n={n}")
                counts[q] = counts.get(q, 0) + 1
            reduced = tuple(sorted(q for q, c in counts.items() if c % 2 == 1))
            if reduced:
                merged[reduced] = merged.get(reduced, 0.0) + w
            else:
                const += w
        cleaned = {t: w for t, w in sorted(merged.items()) if abs(w) >= COEFF_EPS}
        return cls(n=n, terms=cleaned, constant=const)

    # -- structure ------------------------------------------------------

    def degree(self) -> int:
        return max((len(t) for t in self.terms), default=0)

    def term_count_by_degree(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for t in self.terms:
            out[len(t)] = out.get(len(t), 0) + 1
        return out

    def num_terms(self) -> int:
        return len(self.terms)

    # -- evaluation -----------------------------------------------------

    def energy(self, x: "str | Sequence[int] | np.ndarray") -> float:
        """Energy of one bit assignment: sum_T c_T prod_{i in T} z_i + constant."""
        bits = _coerce_bits(x, self.n)
        z = 1.0 - 2.0 * bits
        e = self.constant
        for tup, w in self.terms.items():
            e += w * float(np.prod(z[list(tup)]))
        return float(e)

    def energies(self, assignments: np.ndarray) -> np.ndarray:
        """Energies of a batch of assignments, shape (m, n) of 0/1."""
        X = np.asarray(assignments)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"batch must have shape (m, {self.n})")
        Z = 1.0 - 2.0 * X
        e = np.full(X.shape[0], self.constant, dtype=float)
        for tup, w in self.terms.items():
            e += w * np.prod(Z[:, list(tup)], axis=1)
        return e

    def energy_table(self) -> np.ndarray:
        """Exact energies for all 2^n basis states (state s has x_i = bit i of s)."""
        if self.n > BRUTE_FORCE_CAP:
            raise ValueError(f"n={self.n} exceeds enumeration cap {BRUTE_FORCE_CAP}")
        states = np.arange(1 << self.n, dtype=np.uint64)
        table = np.full(1 << self.n, self.constant, dtype=float)
        for tup, w in self.terms.items():
            mask = sum(1 << q for q in tup)
            table += w * (1.0 - 2.0 * _masked_parity(states, mask))
        return table

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "constant": self.constant,
            "terms": [{"q": list(t), "w": w} for t, w in sorted(self.terms.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ZPolynomial":
        return cls.from_terms(
            int(d["n"]),
            [(tuple(item["q"]), float(item["w"])) for item in d["terms"]],
            float(d.get("constant", 0.0)),
        )


def save_problem(h: ZPolynomial, path: "str | Path") -> None:
    Path(path).write_text(json.dumps(h.to_dict(), indent=2, sort_keys=True) + "\n")


def load_problem(path: "str | Path") -> ZPolynomial:
    return ZPolynomial.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Hypergraph:
    """Hypergraph view of the degree->=2 terms of a ZPolynomial.

    Hyperedge e carries the term's coefficient as its weight omega_e. The view
    is bijective with those terms: `to_terms` returns them unchanged.
    """

    n: int
    hyperedges: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def from_polynomial(cls, h: ZPolynomial) -> "Hypergraph":
        edges = tuple((t, w) for t, w in sorted(h.terms.items()) if len(t) >= 2)
        return cls(n=h.n, hyperedges=edges)

    def to_terms(self) -> dict[tuple[int, ...], float]:
        return {t: w for t, w in self.hyperedges}

    def pairs(self) -> dict[tuple[int, int], list[tuple[tuple[int, ...], float]]]:
        """Map each unordered variable pair to the hyperedges containing it."""
        out: dict[tuple[int, int], list[tuple[tuple[int, ...], float]]] = {}
        for e, w in self.hyperedges:
            for pair in combinations(e, 2):
                out.setdefault(pair, []).append((e, w))
        return out


@dataclass(frozen=True)
class Spectrum:
    """Exact extremes of a cost function over all assignments."""

    emin: float
    emax: float
    argmin: tuple[int, ...]          # integer basis states attaining emin
    exact: bool = True
    energies: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.emin > self.emax:
            raise ValueError("emin must not exceed emax")


def brute_force_spectrum(h: ZPolynomial, cap: int = BRUTE_FORCE_CAP,
                         keep_energies: bool = True) -> Spectrum:
    """Exhaustive spectrum for n <= cap. Deterministic; the energy table is
    retained by default for downstream ratio computations."""
    if h.n > cap:
        raise ValueError(f"n={h.n} exceeds brute-force cap {cap}")
    table = h.energy_table()
    emin = float(table.min())
    emax = float(table.max())
    argmin = tuple(int(s) for s in np.flatnonzero(table == emin))
    return Spectrum(emin=emin, emax=emax, argmin=argmin, exact=True,
                    energies=table if keep_energies else None)


def energy(h: ZPolynomial, x: "str | Sequence[int] | np.ndarray") -> float:
    """Free-function alias of :meth:`ZPolynomial.energy`."""
    return h.energy(x)


# ----------------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------------

def build_labs(n: int) -> ZPolynomial:
    """Low-autocorrelation binary sequence Hamiltonian.

    Quartic terms 2 Z_i Z_{i+t} Z_{i+k} Z_{i+k+t} over
    1 <= i <= n-3, 1 <= t <= floor((n-i-1)/2), t+1 <= k <= n-i-t, and
    quadratic terms Z_i Z_{i+2k} over 1 <= i <= n-2, 1 <= k <= floor((n-i)/2),
    converted to 0-based indices. No constant term; see
    :func:`sidelobe_offset` for the relation to the sidelobe energy.
    """
    if n < 4:
        raise ValueError(f"build_labs requires n >= 4, got {n}")
    terms: dict[tuple[int, ...], float] = {}
    for i in range(1, n - 2):
        for t in range(1, (n - i - 1) // 2 + 1):
            for k in range(t + 1, n - i - t + 1):
                tup = (i - 1, i + t - 1, i + k - 1, i + k + t - 1)
                terms[tup] = terms.get(tup, 0.0) + 2.0
    for i in range(1, n - 1):
        for k in range(1, (n - i) // 2 + 1):
            tup = (i - 1, i + 2 * k - 1)
            terms[tup] = terms.get(tup, 0.0) + 1.0
    return ZPolynomial.from_terms(n, terms)


def sidelobe_energy(z: Sequence[float]) -> float:
    """Sidelobe energy sum_{k=1}^{n-1} C_k(z)^2 with autocorrelations
    C_k = sum_i z_i z_{i+k}, for spins z in {-1,+1}^n."""
    zz = np.asarray(z, dtype=float)
    if zz.ndim != 1 or zz.size < 2:
        raise ValueError("need a spin sequence of length >= 2")
    if not np.all(np.abs(zz) == 1.0):
        raise ValueError("spins must be +1 or -1")
    n = zz.size
    total = 0.0
    for k in range(1, n):
        ck = float(np.dot(zz[: n - k], zz[k:]))
        total += ck * ck
    return total


def sidelobe_offset(n: int) -> float:
    """Constant n(n-1)/2 relating the sidelobe energy to the LABS Hamiltonian:

        sidelobe_energy(z(x)) = sidelobe_offset(n) + 2 * build_labs(n).energy(x)

    The offset collects the squared diagonal autocorrelation products; the
    factor 2 arises because every off-diagonal four-index product appears in
    exactly two autocorrelation shifts (t = b-a and k = c-a pairings).
    """
    return n * (n - 1) / 2.0


def build_h4_full(n: int, weight: float | None = None, seed: int = 0) -> ZPolynomial:
    """All C(n,4) quartic terms. Coefficients are the given constant weight, or
    i.i.d. uniform on [-1, 1] drawn from the seeded generator."""
    if n < 4:
        raise ValueError(f"build_h4_full requires n >= 4, got {n}")
    subsets = list(combinations(range(n), 4))
    if weight is not None:
        coeffs = np.full(len(subsets), float(weight))
    else:
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1.0, 1.0, size=len(subsets))
    return ZPolynomial.from_terms(n, zip(subsets, coeffs))


def build_qubo_full(n: int, weight: float | None = None, seed: int = 0,
                    include_linear: bool = False) -> ZPolynomial:
    """All C(n,2) quadratic terms, optionally with n linear terms."""
    if n < 2:
        raise ValueError(f"build_qubo_full requires n >= 2, got {n}")
    tuples: list[tuple[int, ...]] = list(combinations(range(n), 2))
    if include_linear:
        tuples += [(i,) for i in range(n)]
    if weight is not None:
        coeffs = np.full(len(tuples), float(weight))
    else:
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1.0, 1.0, size=len(tuples))
    return ZPolynomial.from_terms(n, zip(tuples, coeffs))


def _normalize_edges(edges: Iterable[Sequence]) -> list[tuple[int, int, float]]:
    out: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for e in edges:
        if len(e) == 2:
            i, j, w = int(e[0]), int(e[1]), 1.0
        elif len(e) == 3:
            i, j, w = int(e[0]), int(e[1]), float(e[2])
        else:
            raise ValueError(f"edge must be (i, j) or (i, j, w), got {e!r}")
        if i == j:
            raise ValueError(f"self-loop on node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        out.append((key[0], key[1], w))
    return out


def build_maxcut(edges: Iterable[Sequence], n: int | None = None) -> ZPolynomial:
    """Max-Cut Hamiltonian: coefficient w_e/4 on each edge term.

    Minimizing the energy maximizes the cut: with W = total edge weight, the
    cut value satisfies f(x) = sum_e w_e (1 - z_i z_j)/2 = W/2 - 2*energy(x);
    see :func:`cut_value`.
    """
    es = _normalize_edges(edges)
    if n is None:
        n = max(max(i, j) for i, j, _ in es) + 1 if es else 1
    for i, j, _ in es:
        if j >= n:
            raise ValueError(f"edge ({i},{j}) exceeds n={n}")
    return ZPolynomial.from_terms(n, {(i, j): w / 4.0 for i, j, w in es})


def cut_value(edges: Iterable[Sequence], x: "str | Sequence[int] | np.ndarray") -> float:
    """Weight of edges cut by the bipartition x (f of the Max-Cut objective)."""
    es = _normalize_edges(edges)
    bits = text_to_bits(x) if isinstance(x, str) else np.asarray(x, dtype=np.int8)
    for i, j, _ in es:
        if j >= bits.size:
            raise ValueError(f"edge ({i},{j}) out of range for {bits.size} nodes")
    return float(sum(w for i, j, w in es if bits[i] != bits[j]))


def rr3_graph(n: int, seed: int) -> list[tuple[int, int]]:
    """Random 3-regular graph edge list (3n/2 edges), deterministic per seed."""
    import networkx as nx

    if n <= 3 or n % 2 == 1:
        raise ValueError("3-regular graphs need even n >= 4")
    g = nx.random_regular_graph(3, n, seed=seed)
    return sorted((min(u, v), max(u, v)) for u, v in g.edges())
