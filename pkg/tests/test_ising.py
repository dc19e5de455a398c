from __future__ import annotations

import json
from collections import Counter
from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadqaoa.ising import (
    ZPolynomial,
    Hypergraph,
    brute_force_spectrum,
    build_h4_full,
    build_labs,
    build_maxcut,
    build_qubo_full,
    cut_value,
    energy,
    load_problem,
    rr3_graph,
    save_problem,
    sidelobe_energy,
    sidelobe_offset,
    text_to_bits,
)


# ---------------------------------------------------------------------------
# oracles (independent of the implementation)
# ---------------------------------------------------------------------------

def _labs_terms_by_autocorrelation_expansion(n: int):
    """Expand sum_k C_k(z)^2 into monomials over distinct spin indices.

    Returns (coefficient map, constant). This is the defining route for the
    LABS Hamiltonian and is deliberately different from the index-range sums
    the builder uses.
    """
    coeff: Counter = Counter()
    const = 0.0
    for k in range(1, n):
        pairs = [(i, i + k) for i in range(n - k)]
        for a, b in pairs:
            for c, d in pairs:
                counts = Counter((a, b, c, d))
                reduced = tuple(sorted(q for q, m in counts.items() if m % 2))
                if reduced:
                    coeff[reduced] += 1.0
                else:
                    const += 1.0
    return coeff, const


def _random_polynomial(rng: np.random.Generator, n: int, nterms: int,
                       degrees=(1, 2, 3, 4)) -> ZPolynomial:
    terms = {}
    for _ in range(nterms):
        d = int(rng.choice(degrees))
        tup = tuple(sorted(rng.choice(n, size=d, replace=False).tolist()))
        terms[tup] = float(rng.uniform(-2, 2))
    return ZPolynomial.from_terms(n, terms, constant=float(rng.uniform(-1, 1)))


# ---------------------------------------------------------------------------
# LABS builder
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,quartic,quadratic", [(12, 95, 30), (16, 252, 56)])
def test_labs_term_counts(n, quartic, quadratic):
    h = build_labs(n)
    by_deg = h.term_count_by_degree()
    assert by_deg.get(4, 0) == quartic
    assert by_deg.get(2, 0) == quadratic
    assert set(by_deg) <= {2, 4}
    assert h.constant == 0.0


def test_labs_n4_exact_terms():
    h = build_labs(4)
    assert h.terms == {(0, 1, 2, 3): 2.0, (0, 2): 1.0, (1, 3): 1.0}


@pytest.mark.parametrize("n", range(4, 15))
def test_labs_matches_autocorrelation_expansion(n):
    # Positions must match the expansion of sum_k C_k^2 exactly, and the
    # expansion's coefficients are twice the Hamiltonian's with the
    # constant n(n-1)/2 dropped.
    h = build_labs(n)
    coeff, const = _labs_terms_by_autocorrelation_expansion(n)
    assert const == n * (n - 1) / 2
    assert set(coeff) == set(h.terms)
    for tup, w in h.terms.items():
        assert coeff[tup] == 2.0 * w


def test_labs_rejects_small_n():
    with pytest.raises(ValueError):
        build_labs(3)


# ---------------------------------------------------------------------------
# sidelobe energy
# ---------------------------------------------------------------------------

def test_sidelobe_all_ones():
    assert sidelobe_energy([1, 1, 1, 1]) == 14.0  # C_1=3, C_2=2, C_3=1


def test_sidelobe_global_flip():
    rng = np.random.default_rng(5)
    z = rng.choice([-1.0, 1.0], size=11)
    assert sidelobe_energy(z) == sidelobe_energy(-z)


def test_sidelobe_rejects_bad_input():
    with pytest.raises(ValueError):
        sidelobe_energy([1.0])
    with pytest.raises(ValueError):
        sidelobe_energy([1.0, 0.5, -1.0])


@pytest.mark.parametrize("n", [4, 7, 10, 12])
def test_sidelobe_equals_offset_plus_twice_energy(n):
    # sidelobe(z(x)) = n(n-1)/2 + 2*H(x): every off-diagonal product in the
    # expansion of sum C_k^2 appears in exactly two shifts.
    h = build_labs(n)
    rng = np.random.default_rng(n)
    for _ in range(40):
        x = rng.integers(0, 2, size=n)
        z = 1 - 2 * x
        assert sidelobe_energy(z) == pytest.approx(
            sidelobe_offset(n) + 2.0 * h.energy(x), abs=1e-9
        )


def test_labs12_spectrum_and_sidelobe_minimum():
    h = build_labs(12)
    spec = brute_force_spectrum(h)
    assert spec.emin == -28.0
    assert spec.emax == 220.0
    # minimum sidelobe energy over all 2^12 sequences, via the offset relation
    assert sidelobe_offset(12) + 2.0 * spec.emin == 10.0
    zmin = 1 - 2 * np.array([(spec.argmin[0] >> i) & 1 for i in range(12)])
    assert sidelobe_energy(zmin) == 10.0


# ---------------------------------------------------------------------------
# other builders
# ---------------------------------------------------------------------------

def test_h4_full_counts():
    assert build_h4_full(16).num_terms() == 1820
    assert build_h4_full(4).num_terms() == 1
    h8 = build_h4_full(8, weight=1.0)
    assert h8.num_terms() == 70
    assert all(w == 1.0 for w in h8.terms.values())
    with pytest.raises(ValueError):
        build_h4_full(3)


def test_h4_full_seeded_and_bounded():
    a = build_h4_full(7, seed=3)
    b = build_h4_full(7, seed=3)
    c = build_h4_full(7, seed=4)
    assert a == b
    assert a != c
    assert all(-1.0 <= w <= 1.0 for w in a.terms.values())


def test_qubo_full_counts():
    assert build_qubo_full(16, weight=1.0).num_terms() == 120
    assert build_qubo_full(2, weight=1.0).num_terms() == 1
    assert build_qubo_full(5, weight=1.0).num_terms() == 10
    withlin = build_qubo_full(5, weight=1.0, include_linear=True)
    assert withlin.term_count_by_degree() == {2: 10, 1: 5}


def test_maxcut_triangle():
    h = build_maxcut([(0, 1), (1, 2), (0, 2)])
    assert h.terms == {(0, 1): 0.25, (1, 2): 0.25, (0, 2): 0.25}
    spec = brute_force_spectrum(h)
    assert spec.emin == -0.25
    assert spec.emax == 0.75
    # best cut value is 2, e.g. x = 011 (node 0 alone)
    assert cut_value([(0, 1), (1, 2), (0, 2)], "011") == 2.0
    # f(x) = W/2 - 2 E(x)
    for s in range(8):
        x = [(s >> i) & 1 for i in range(3)]
        f = cut_value([(0, 1), (1, 2), (0, 2)], x)
        assert f == pytest.approx(1.5 - 2.0 * h.energy(x))


def test_maxcut_single_edge_and_errors():
    h = build_maxcut([(0, 1)])
    spec = brute_force_spectrum(h)
    assert spec.emin == -0.25
    assert sorted(spec.argmin) == [1, 2]  # "10" and "01"
    with pytest.raises(ValueError):
        build_maxcut([(0, 0)])
    with pytest.raises(ValueError):
        build_maxcut([(0, 1), (1, 0)])


def test_rr3_graph_edge_count():
    edges = rr3_graph(40, seed=7)
    assert len(edges) == 60
    deg = Counter()
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    assert all(d == 3 for d in deg.values())
    assert rr3_graph(40, seed=7) == edges  # deterministic


# ---------------------------------------------------------------------------
# energy evaluation and spectra
# ---------------------------------------------------------------------------

def test_energy_all_plus_is_coefficient_sum():
    rng = np.random.default_rng(0)
    h = _random_polynomial(rng, 9, 25)
    total = sum(h.terms.values()) + h.constant
    assert h.energy([0] * 9) == pytest.approx(total)


def test_quartic_term_hamming_weights():
    h = ZPolynomial.from_terms(4, {(0, 1, 2, 3): 1.0})
    for s in range(16):
        x = [(s >> i) & 1 for i in range(4)]
        expected = -1.0 if sum(x) % 2 else 1.0
        assert h.energy(x) == expected


def test_energy_length_mismatch():
    h = build_labs(6)
    with pytest.raises(ValueError):
        h.energy([0, 1, 0])
    with pytest.raises(ValueError):
        energy(h, "01")


def test_single_zz_spectrum():
    h = ZPolynomial.from_terms(2, {(0, 1): 1.0})
    spec = brute_force_spectrum(h)
    assert (spec.emin, spec.emax) == (-1.0, 1.0)
    assert len(spec.argmin) == 2


def test_spectrum_bounds_random_assignments():
    rng = np.random.default_rng(42)
    h = _random_polynomial(rng, 10, 30)
    spec = brute_force_spectrum(h)
    X = rng.integers(0, 2, size=(1000, 10))
    es = h.energies(X)
    assert np.all(es >= spec.emin - 1e-12)
    assert np.all(es <= spec.emax + 1e-12)


def test_energy_table_matches_scalar_energy():
    rng = np.random.default_rng(1)
    h = _random_polynomial(rng, 8, 20)
    table = h.energy_table()
    for s in rng.integers(0, 256, size=32):
        x = [(int(s) >> i) & 1 for i in range(8)]
        assert table[s] == pytest.approx(h.energy(x))


def test_brute_force_cap():
    h = ZPolynomial.from_terms(30, {(0, 1): 1.0})
    with pytest.raises(ValueError):
        brute_force_spectrum(h)


# ---------------------------------------------------------------------------
# canonicalization, views, serialization
# ---------------------------------------------------------------------------

def test_canonicalization_folds_and_merges():
    h = ZPolynomial.from_terms(
        4, [((2, 0), 1.0), ((0, 2), 2.0), ((1, 1), 5.0), ((3, 1, 3, 1), 7.0),
            ((0, 1), 1e-15)]
    )
    # (1,1) folds to constant, (3,1,3,1) folds entirely, tiny coeff dropped
    assert h.terms == {(0, 2): 3.0}
    assert h.constant == 12.0


def test_canonicalization_rejects_bad_indices():
    with pytest.raises(ValueError):
        ZPolynomial.from_terms(3, {(0, 3): 1.0})
    with pytest.raises(ValueError):
        ZPolynomial.from_terms(0, {})


@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_even_degree_flip_symmetry(n, seed):
    rng = np.random.default_rng(seed)
    h = _random_polynomial(rng, n, 6, degrees=(2,) if n < 4 else (2, 4))
    x = rng.integers(0, 2, size=n)
    assert h.energy(x) == pytest.approx(h.energy(1 - x))


def test_hypergraph_view_bijective():
    rng = np.random.default_rng(2)
    h = _random_polynomial(rng, 8, 15)
    g = Hypergraph.from_polynomial(h)
    expected = {t: w for t, w in h.terms.items() if len(t) >= 2}
    assert g.to_terms() == expected
    assert all(len(e) >= 2 for e, _ in g.hyperedges)


def test_problem_json_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    h = _random_polynomial(rng, 11, 40)
    path = tmp_path / "problem.json"
    save_problem(h, path)
    h2 = load_problem(path)
    assert h2 == h
    # schema shape
    d = json.loads(path.read_text())
    assert set(d) == {"n", "constant", "terms"}
    assert all(set(item) == {"q", "w"} for item in d["terms"])
    assert all(item["q"] == sorted(item["q"]) for item in d["terms"])


def test_text_bits_roundtrip():
    bits = text_to_bits("0110")
    assert bits.tolist() == [0, 1, 1, 0]
    with pytest.raises(ValueError):
        text_to_bits("01a0")
