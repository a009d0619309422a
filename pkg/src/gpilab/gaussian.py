"""Exact mixed even moments of centered Gaussian vectors.

The production path is the covariance-weighted recursion

    E[X_i * f(X)] = sum_j sigma_ij * E[d f / d x_j],

memoized on the residual exponent vector; on the exact backend every
result is an explicit rational.  A brute-force perfect-matching
enumerator is kept alongside as an independent oracle for tests (it
enumerates all (N-1)!! pairings, so it is capped at total degree 12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    DivergentMomentError,
    ResourceLimitError,
    StructuralError,
    UnsupportedExponentError,
)
from .matrixcore import CovarianceMatrix, MultiIndex, Partition, Scalar

#: total degree cap for the memoized recursion
MAX_RECURSION_DEGREE = 24
#: total degree cap for the enumeration oracle ((N-1)!! pairings)
MAX_ENUMERATION_DEGREE = 12


@dataclass(frozen=True)
class WickResult:
    """Moment value plus the number of perfect matchings enumerated."""

    moment: Scalar
    pairing_count: int


def _as_backend_scalar(value, backend: str) -> Scalar:
    if backend == "exact":
        return Fraction(value)
    return float(value)


def _check_exponents(sigma: CovarianceMatrix, n: MultiIndex) -> MultiIndex:
    n = MultiIndex.coerce(n)
    if n.d != sigma.d:
        raise StructuralError(f"exponent vector has d={n.d}, matrix d={sigma.d}")
    return n


def wick_moment(sigma: CovarianceMatrix, n) -> Scalar:
    """E[prod_j X_j^{n_j}] for X ~ N_d(0, Sigma).

    Zero when the total degree is odd; otherwise the sum over perfect
    matchings of covariance products, evaluated by recursion with
    memoization keyed on the residual exponent vector.  The cache lives
    on the matrix instance, so repeated queries against the same Sigma
    share subproblems.
    """
    n = _check_exponents(sigma, n)
    if n.total > MAX_RECURSION_DEGREE:
        raise ResourceLimitError(
            f"total degree {n.total} exceeds cap {MAX_RECURSION_DEGREE}"
        )
    if n.total % 2 == 1:
        return _as_backend_scalar(0, sigma.backend)
    entries = sigma.entries
    cache = sigma._moment_cache
    d = sigma.d

    def rec(m: tuple) -> Scalar:
        known = cache.get(m)
        if known is not None:
            return known
        i = next((k for k in range(d) if m[k] > 0), None)
        if i is None:
            return 1
        mm = list(m)
        mm[i] -= 1
        acc = 0
        for j in range(d):
            c = mm[j]
            if c == 0:
                continue
            s = entries[i][j]
            if s == 0:
                continue
            mm[j] -= 1
            acc += s * c * rec(tuple(mm))
            mm[j] += 1
        cache[m] = acc
        return acc

    return _as_backend_scalar(rec(n.exponents), sigma.backend)


def _pairings(items: list):
    """Yield all pairings of the given items (order-insensitive)."""
    if not items:
        yield []
        return
    first = items[0]
    rest = items[1:]
    for k, partner in enumerate(rest):
        for tail in _pairings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + tail


def wick_moment_enumerated(sigma: CovarianceMatrix, n) -> WickResult:
    """Brute-force oracle: expand the degree-N product into the multiset
    {1 x n_1, ..., d x n_d} and sum covariance products over every
    perfect matching.  Exponential; capped at total degree 12."""
    n = _check_exponents(sigma, n)
    total = n.total
    if total > MAX_ENUMERATION_DEGREE:
        raise ResourceLimitError(
            f"enumeration oracle capped at degree {MAX_ENUMERATION_DEGREE}"
        )
    if total % 2 == 1:
        return WickResult(_as_backend_scalar(0, sigma.backend), 0)
    items = [j for j in range(n.d) for _ in range(n[j])]
    entries = sigma.entries
    acc = 0
    count = 0
    for pairing in _pairings(items):
        term = 1
        for a, b in pairing:
            term *= entries[a][b]
        acc += term
        count += 1
    return WickResult(_as_backend_scalar(acc, sigma.backend), count)


def _require_even(n: MultiIndex) -> None:
    if any(e % 2 for e in n):
        raise UnsupportedExponentError(
            f"exact Gaussian gaps need even exponents, got {n.exponents}; "
            "odd absolute moments are Monte Carlo territory (mclab)"
        )


def _block_moment(sigma: CovarianceMatrix, n: MultiIndex, indices) -> Scalar:
    if not indices:
        return _as_backend_scalar(1, sigma.backend)
    return wick_moment(sigma.principal_submatrix(indices), n.restrict(indices))


def gaussian_gpi_gap(sigma: CovarianceMatrix, n, partition: Partition) -> Scalar:
    """Two-block product-inequality gap at even exponents:

        E[prod_j X_j^{n_j}] - E[prod_{j in I} X_j^{n_j}] * E[prod_{j in I^c} X_j^{n_j}].

    Negative values are reported as-is; they witness failures of the
    two-block inequality.
    """
    n = _check_exponents(sigma, n)
    _require_even(n)
    if partition.d != sigma.d:
        raise StructuralError(f"partition has d={partition.d}, matrix d={sigma.d}")
    joint = wick_moment(sigma, n)
    lhs_block = _block_moment(sigma, n, partition.indices)
    rhs_block = _block_moment(sigma, n, partition.complement_indices)
    return joint - lhs_block * rhs_block


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def univariate_even_moment(variance: Scalar, exponent: int) -> Scalar:
    """E[X^{2m}] = (2m-1)!! * variance^m for X ~ N(0, variance)."""
    if exponent % 2:
        return 0 * variance
    m = exponent // 2
    return _double_factorial(exponent - 1) * variance**m


def gaussian_weak_gpi_gap(sigma: CovarianceMatrix, n) -> Scalar:
    """Full-factorization gap at even exponents:

        E[prod_j X_j^{n_j}] - prod_j E[X_j^{n_j}].
    """
    n = _check_exponents(sigma, n)
    _require_even(n)
    joint = wick_moment(sigma, n)
    prod = _as_backend_scalar(1, sigma.backend)
    for j in range(sigma.d):
        prod *= univariate_even_moment(sigma.entries[j][j], n[j])
    return joint - prod


def abs_moment_univariate(variance, p) -> float:
    """E|X|^p for X ~ N(0, variance), valid for any real p > -1:

        variance^{p/2} * 2^{p/2} * Gamma((p+1)/2) / Gamma(1/2).
    """
    variance = float(variance)
    p = float(p)
    if variance <= 0:
        raise StructuralError(f"variance must be positive, got {variance}")
    if p <= -1:
        raise DivergentMomentError(
            f"E|X|^p diverges for p <= -1 (got p={p})"
        )
    return (
        variance ** (p / 2.0)
        * 2.0 ** (p / 2.0)
        * math.gamma((p + 1.0) / 2.0)
        / math.sqrt(math.pi)
    )
