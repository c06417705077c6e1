import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypersindy.library import LibrarySpec, build_library, evaluate_library, monomial, term_index, term_names


@pytest.mark.parametrize(
    "n, d, const, count",
    [(3, 3, False, 19), (3, 3, True, 20), (2, 3, True, 10), (10, 3, True, 286)],
)
def test_library_sizes(n, d, const, count):
    spec = LibrarySpec(n, d, const)
    assert len(build_library(spec)) == spec.term_count == count


def test_graded_lex_evaluation():
    row = evaluate_library(LibrarySpec(2, 2, True), [2.0, 3.0])
    np.testing.assert_array_equal(row, [[1, 2, 3, 4, 6, 9]])
    assert term_names(LibrarySpec(2, 2, True)) == ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]


def test_zero_state_rows():
    np.testing.assert_array_equal(evaluate_library(LibrarySpec(3, 3, True), np.zeros(3))[0], [1] + [0] * 19)
    assert not evaluate_library(LibrarySpec(3, 3, False), np.zeros(3)).any()


def test_identical_states_give_identical_rows():
    rows = evaluate_library(LibrarySpec(3, 3), np.tile([0.3, -1.2, 2.0], (7, 1)))
    assert (rows == rows[0]).all()


def test_term_index_examples():
    assert term_index(LibrarySpec(3, 3, True), (0, 0, 0)) == 0
    assert term_index(LibrarySpec(3, 3, False), (0, 1, 0)) == 1
    assert monomial(LibrarySpec(3, 3, False), 0, 2) == 5
    with pytest.raises(LookupError):
        term_index(LibrarySpec(3, 3, False), (0, 0, 0))


def test_invalid_specs():
    with pytest.raises(ValueError):
        LibrarySpec(0, 3)
    with pytest.raises(ValueError):
        LibrarySpec(2, 0)
    with pytest.raises(ValueError):
        evaluate_library(LibrarySpec(2, 2), np.zeros((4, 3)))


specs = st.builds(LibrarySpec, st.integers(1, 12), st.integers(1, 4), st.booleans())


@settings(max_examples=80, deadline=None)
@given(spec=specs)
def test_count_formula_matches_enumeration(spec):
    n, d = spec.state_dim, spec.max_degree
    # monomials of degree <= d are multisets of size d over the n variables plus a "1" filler
    brute = sum(1 for _ in itertools.combinations_with_replacement(range(n + 1), d))
    if not spec.include_constant:
        brute -= 1
    assert spec.term_count == brute == comb(n + d, d) - (0 if spec.include_constant else 1)
    assert len(build_library(spec)) == brute


@settings(max_examples=60, deadline=None)
@given(spec=specs)
def test_ordering_and_round_trip(spec):
    terms = build_library(spec)
    keys = [(sum(t.exponents), tuple(-e for e in t.exponents)) for t in terms]
    assert keys == sorted(keys)
    assert ((0,) * spec.state_dim in [t.exponents for t in terms]) == spec.include_constant
    for k, t in enumerate(terms):
        assert term_index(spec, t.exponents) == k


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 4),
    d=st.integers(1, 3),
    data=st.data(),
)
def test_columns_are_products_of_powers(n, d, data):
    spec = LibrarySpec(n, d, True)
    x = data.draw(arrays(np.float64, (3, n), elements=st.floats(-3, 3)))
    theta = evaluate_library(spec, x)
    for k, t in enumerate(build_library(spec)):
        expected = np.prod([x[:, i] ** e for i, e in enumerate(t.exponents)], axis=0)
        np.testing.assert_allclose(theta[:, k], expected, rtol=1e-12, atol=1e-12)
