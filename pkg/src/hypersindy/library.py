"""Polynomial candidate-function library.

Terms are ordered by total degree, and within a degree by descending
lexicographic order of the exponent vector, which is the order
``itertools.combinations_with_replacement`` yields variable indices in. For
two states and degree two this gives ``1, x1, x2, x1^2, x1*x2, x2^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np


@dataclass(frozen=True)
class LibrarySpec:
    state_dim: int
    max_degree: int = 3
    include_constant: bool = True

    def __post_init__(self):
        if self.state_dim < 1 or self.max_degree < 1:
            raise ValueError(f"invalid library spec: n={self.state_dim}, d={self.max_degree}")

    @property
    def term_count(self) -> int:
        return comb(self.state_dim + self.max_degree, self.max_degree) - (0 if self.include_constant else 1)


@dataclass(frozen=True)
class Term:
    exponents: tuple[int, ...]
    variables: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.variables)

    @property
    def display(self) -> str:
        if not self.variables:
            return "1"
        parts = []
        for i, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        return "*".join(parts)


@lru_cache(maxsize=64)
def build_library(spec: LibrarySpec) -> tuple[Term, ...]:
    terms = []
    first = 0 if spec.include_constant else 1
    for degree in range(first, spec.max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(spec.state_dim), degree):
            exps = [0] * spec.state_dim
            for i in combo:
                exps[i] += 1
            terms.append(Term(tuple(exps), combo))
    return tuple(terms)


@lru_cache(maxsize=64)
def _index_map(spec: LibrarySpec) -> dict[tuple[int, ...], int]:
    return {t.exponents: k for k, t in enumerate(build_library(spec))}


def term_index(spec: LibrarySpec, exponents) -> int:
    key = tuple(int(e) for e in exponents)
    try:
        return _index_map(spec)[key]
    except KeyError:
        raise LookupError(f"no term with exponents {key} in library {spec}") from None


def monomial(spec: LibrarySpec, *variables: int) -> int:
    """Index of the product of the given zero-based state variables; no arguments is the constant."""
    exps = [0] * spec.state_dim
    for v in variables:
        exps[v] += 1
    return term_index(spec, exps)


def term_names(spec: LibrarySpec) -> list[str]:
    return [t.display for t in build_library(spec)]


@lru_cache(maxsize=64)
def _variable_table(spec: LibrarySpec) -> np.ndarray:
    # (l, d) variable indices padded with n, which points at an appended column of ones
    terms = build_library(spec)
    table = np.full((len(terms), spec.max_degree), spec.state_dim, dtype=np.intp)
    for j, t in enumerate(terms):
        table[j, : t.degree] = t.variables
    table.setflags(write=False)
    return table


def evaluate_library(spec: LibrarySpec, states) -> np.ndarray:
    """Library matrix of shape ``(b, l)``; a 1-D state gives a single row."""
    x = np.asarray(states, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.state_dim:
        raise ValueError(f"states of shape {x.shape} do not match library state_dim={spec.state_dim}")
    padded = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    return padded[:, _variable_table(spec)].prod(axis=2)
