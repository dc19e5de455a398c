"""Approximate quadratization of high-order Z-polynomials.

Two routes: a clique expansion with closed-form pair weights (each hyperedge
spreads its weight over the 2-subsets it covers), and a variational quadratic
template whose pair/linear coefficients are free parameters trained elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .ising import Hypergraph, ZPolynomial


def _alpha_weights(hyperedges: Sequence[tuple[tuple[int, ...], float]]) -> np.ndarray:
    """Normalized importance weights alpha_e = |w_e| / sum |w_e|.

    Absolute values keep the weighted mean defined for mixed-sign inputs; on
    all-positive weights this reduces to w_e / sum w_e.
    """
    mags = np.array([abs(w) for _, w in hyperedges])
    total = mags.sum()
    if total <= 0:
        raise ValueError("degenerate hypergraph: all hyperedge weights are zero")
    return mags / total


def clique_objective(source: Hypergraph,
                     pair_weights: Mapping[tuple[int, int], float]) -> float:
    """f_2 = sum_e alpha_e sum_{(i,j) in e} (w_ij - w_e)^2 for given pair weights."""
    alphas = _alpha_weights(source.hyperedges)
    total = 0.0
    for (e, w_e), a in zip(source.hyperedges, alphas):
        for pair in combinations(e, 2):
            d = pair_weights[pair] - w_e
            total += a * d * d
    return total


@dataclass(frozen=True)
class CliqueExpansion:
    """Result of the clique expansion: one weight per covered pair.

    ``edge_weights`` holds the closed-form minimizers; ``objective_value`` is
    f_2 evaluated at them. Linear terms and the constant of the source
    polynomial pass through untouched.
    """

    source: Hypergraph
    edge_weights: Mapping[tuple[int, int], float]
    objective_value: float
    linear_terms: Mapping[tuple[int, ...], float]
    constant: float

    def quadratic(self) -> ZPolynomial:
        terms: dict[tuple[int, ...], float] = dict(self.edge_weights)
        terms.update(self.linear_terms)
        return ZPolynomial.from_terms(self.source.n, terms, self.constant)

    def diagnostics(self) -> list[dict]:
        """Sidecar rows {"edge", "w", "I", "N"}: I flags a 2-node hyperedge on
        the pair, N counts hyperedges of size >= 3 containing it."""
        by_pair = self.source.pairs()
        rows = []
        for pair in sorted(self.edge_weights):
            edges = by_pair[pair]
            rows.append({
                "edge": list(pair),
                "w": float(self.edge_weights[pair]),
                "I": int(any(len(e) == 2 for e, _ in edges)),
                "N": sum(1 for e, _ in edges if len(e) >= 3),
            })
        return rows


def clique_expand(h: ZPolynomial) -> CliqueExpansion:
    """Quadratize by clique expansion.

    Every degree->=2 term is a hyperedge with weight w_e; each covered pair
    receives the importance-weighted mean of its hyperedges' weights,
    w_ij = sum_{e∋(i,j)} |w_e| w_e / sum_{e∋(i,j)} |w_e|, the exact minimizer
    of f_2 restricted to that pair (pairs decouple). Pairs covered by no
    hyperedge get no term.
    """
    source = Hypergraph.from_polynomial(h)
    if not source.hyperedges:
        raise ValueError("clique_expand needs at least one term of degree >= 2")
    weights: dict[tuple[int, int], float] = {}
    for pair, edges in sorted(source.pairs().items()):
        denom = sum(abs(w) for _, w in edges)
        if denom <= 0:
            raise ValueError(f"degenerate weights on pair {pair}: zero total magnitude")
        weights[pair] = sum(abs(w) * w for _, w in edges) / denom
    linear = {t: w for t, w in h.terms.items() if len(t) == 1}
    return CliqueExpansion(
        source=source,
        edge_weights=weights,
        objective_value=clique_objective(source, weights),
        linear_terms=linear,
        constant=h.constant,
    )


@dataclass(frozen=True)
class CliqueVerification:
    max_abs_deviation: float
    objective_value: float
    edges_checked: int


def verify_clique_weights(ce: CliqueExpansion) -> CliqueVerification:
    """Re-minimize f_2 edge by edge with a 1-D numeric optimizer and report the
    worst disagreement with the closed form. The restricted objective is a
    strictly convex quadratic, so the numeric route is an independent oracle.
    """
    alphas = _alpha_weights(ce.source.hyperedges)
    by_pair: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for (e, w_e), a in zip(ce.source.hyperedges, alphas):
        for pair in combinations(e, 2):
            by_pair.setdefault(pair, []).append((a, w_e))
    worst = 0.0
    for pair, contributions in by_pair.items():
        def restricted(w: float) -> float:
            return sum(a * (w - w_e) ** 2 for a, w_e in contributions)

        # Parabola-vertex step from three samples: exact for a quadratic
        # objective up to roundoff, using only function evaluations. A wide
        # step keeps the finite differences free of cancellation error.
        w0 = float(np.mean([w_e for _, w_e in contributions]))
        h = max(1.0, max(abs(w_e - w0) for _, w_e in contributions))
        f_minus, f_0, f_plus = restricted(w0 - h), restricted(w0), restricted(w0 + h)
        curvature = f_plus - 2.0 * f_0 + f_minus
        if curvature <= 0:
            raise ValueError(f"restricted objective on {pair} is not strictly convex")
        numeric = w0 - 0.5 * h * (f_plus - f_minus) / curvature
        worst = max(worst, abs(numeric - ce.edge_weights[pair]))
    return CliqueVerification(
        max_abs_deviation=worst,
        objective_value=ce.objective_value,
        edges_checked=len(by_pair),
    )


@dataclass(frozen=True)
class VariationalQuadratic:
    """Quadratic template with one parameter per unordered pair plus one per
    variable; materialize is linear in the parameter vector.

    Parameter layout: all pairs in lexicographic order, then the n linear
    coefficients.
    """

    n: int

    @property
    def pair_order(self) -> list[tuple[int, int]]:
        return list(combinations(range(self.n), 2))

    @property
    def num_parameters(self) -> int:
        return comb(self.n, 2) + self.n

    def materialize(self, theta: Sequence[float]) -> ZPolynomial:
        th = np.asarray(theta, dtype=float)
        if th.shape != (self.num_parameters,):
            raise ValueError(
                f"theta must have shape ({self.num_parameters},), got {th.shape}")
        npairs = comb(self.n, 2)
        terms: dict[tuple[int, ...], float] = {}
        for pair, w in zip(self.pair_order, th[:npairs]):
            terms[pair] = float(w)
        for i, w in enumerate(th[npairs:]):
            terms[(i,)] = float(w)
        return ZPolynomial.from_terms(self.n, terms)

    def theta_from_polynomial(self, h: ZPolynomial) -> np.ndarray:
        """Parameter vector reproducing a quadratic polynomial (absent terms
        map to zero). Used to seed joint training from a clique expansion."""
        if h.n != self.n or h.degree() > 2:
            raise ValueError("need a quadratic polynomial on the same n")
        npairs = comb(self.n, 2)
        theta = np.zeros(self.num_parameters)
        index = {pair: i for i, pair in enumerate(self.pair_order)}
        for tup, w in h.terms.items():
            if len(tup) == 2:
                theta[index[tup]] = w
            else:
                theta[npairs + tup[0]] = w
        return theta


def variational_template(n: int) -> VariationalQuadratic:
    if n < 2:
        raise ValueError(f"variational_template requires n >= 2, got {n}")
    return VariationalQuadratic(n=n)
