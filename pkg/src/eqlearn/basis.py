"""Monomial basis sets spanning the finite-dimensional space of decision
functions.

A decision function maps an observed feature vector x in R^{n_x} to a
decision vector; it is parameterized as a linear combination of fixed
continuous basis functions. Only monomial bases ship, but everything
downstream consumes the generic `BasisSet` container, so other continuous
families can be added by constructing a `BasisSet`-like object with its own
evaluation rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BasisSet",
    "make_polynomial_basis",
    "evaluate_basis",
    "evaluate_basis_batch",
    "evaluate_decision",
]


@dataclass(frozen=True)
class BasisSet:
    """Ordered family of monomials over R^{n_x}.

    exponents[l] is the multi-index of the l-th monomial; the basis size d
    equals len(exponents). Immutable, safe to share across workers.
    """

    n_x: int
    exponents: tuple[tuple[int, ...], ...]
    max_degree: int | None = None  # set by the degree-capped constructor

    def __post_init__(self) -> None:
        if self.n_x < 1:
            raise ValueError(f"n_x must be >= 1, got {self.n_x}")
        for e in self.exponents:
            if len(e) != self.n_x:
                raise ValueError(f"multi-index {e} has length != n_x={self.n_x}")
            if any(p < 0 for p in e):
                raise ValueError(f"multi-index {e} has a negative exponent")
        if len(set(self.exponents)) != len(self.exponents):
            raise ValueError("multi-indices must be distinct")

    @property
    def d(self) -> int:
        return len(self.exponents)

    def exponent_array(self) -> np.ndarray:
        return np.array(self.exponents, dtype=np.int64).reshape(self.d, self.n_x)

    def metadata(self) -> dict:
        """Serializable record: embedded in run-metadata output."""
        return {
            "n_x": self.n_x,
            "max_degree": self.max_degree,
            "d": self.d,
            "exponents": [list(e) for e in self.exponents],
        }


def make_polynomial_basis(n_x: int, max_degree: int) -> BasisSet:
    """All monomial multi-indices of total degree <= max_degree.

    Ordering is graded lexicographic: ascending total degree, ties broken so
    that higher powers of earlier coordinates come first. The constant
    monomial is always index 0. The count is C(n_x + p, p).
    """
    if n_x < 1:
        raise ValueError(f"n_x must be >= 1, got {n_x}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")

    def gen(prefix: tuple[int, ...], remaining: int, budget: int):
        if remaining == 0:
            yield prefix
            return
        for p in range(budget + 1):
            yield from gen(prefix + (p,), remaining - 1, budget - p)

    exps = [e for e in gen((), n_x, max_degree)]
    exps.sort(key=lambda e: (sum(e), tuple(-p for p in e)))
    basis = BasisSet(n_x=n_x, exponents=tuple(exps), max_degree=max_degree)
    assert basis.d == math.comb(n_x + max_degree, max_degree)
    return basis


def evaluate_basis(basis: BasisSet, x: np.ndarray) -> np.ndarray:
    """Vector of all monomials evaluated at a single point x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (basis.n_x,):
        raise ValueError(f"x has shape {x.shape}, expected ({basis.n_x},)")
    return evaluate_basis_batch(basis, x[None, :])[0]


def evaluate_basis_batch(basis: BasisSet, X: np.ndarray) -> np.ndarray:
    """Monomial design matrix: row k holds the basis evaluated at X[k].

    Loops over the d monomials (d is small) with vectorized powers over the
    sample axis, so no (n, d, n_x) intermediate is materialized.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != basis.n_x:
        raise ValueError(f"X has shape {X.shape}, expected (n, {basis.n_x})")
    n = X.shape[0]
    out = np.empty((n, basis.d), dtype=np.float64)
    for l, e in enumerate(basis.exponents):
        col = np.ones(n, dtype=np.float64)
        for j, p in enumerate(e):
            if p == 1:
                col = col * X[:, j]
            elif p > 1:
                col = col * X[:, j] ** p
        out[:, l] = col
    return out


def evaluate_decision(basis: BasisSet, A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Decision value A @ phi(x) for a coefficient matrix A in R^{m x d}."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != basis.d:
        raise ValueError(f"A has shape {A.shape}, expected (m, {basis.d})")
    return A @ evaluate_basis(basis, x)
