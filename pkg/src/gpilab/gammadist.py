"""Moments of the multivariate gamma family defined through the
moment-generating function det(I - Sigma T)^{-alpha}, T = diag(t).

The engine expands

    det(I - Sigma T)^{-alpha} = exp(alpha * sum_{n>=1} tr[(Sigma T)^n] / n)

as a truncated multivariate power series and reads moments off the
coefficients:

    E[prod_j X_j^{n_j}] = (prod_j n_j!) * [t^n] exp(alpha * trace series).

All algebra runs on exact rationals when Sigma is rational, so gap signs
are certified rather than estimated.  Formal moments are returned even
for shape parameters where no distribution is known to exist; a warning
is attached instead of refusing (the coefficient identity is algebraic).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    DistributionExistenceWarning,
    ResourceLimitError,
    StructuralError,
)
from .matrixcore import (
    CovarianceMatrix,
    MultiIndex,
    Partition,
    Scalar,
    scalar_to_str,
)
from .series import TruncatedSeries, iter_multi_indices

#: total degree cap shared with the Gaussian engine
MAX_TOTAL_DEGREE = 24


def _coerce_alpha(alpha) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, int):
        return Fraction(alpha)
    if isinstance(alpha, str):
        return Fraction(alpha)
    if isinstance(alpha, float):
        return Fraction(repr(alpha))
    raise StructuralError(f"cannot read shape parameter from {alpha!r}")


@dataclass(frozen=True)
class GammaParams:
    """Shape alpha (2*alpha is the degree-of-freedom count) and matrix
    parameter Sigma."""

    alpha: Fraction
    sigma: CovarianceMatrix

    def __post_init__(self):
        object.__setattr__(self, "alpha", _coerce_alpha(self.alpha))
        if self.alpha <= 0:
            raise StructuralError(f"shape must be positive, got {self.alpha}")
        if not isinstance(self.sigma, CovarianceMatrix):
            raise StructuralError("sigma must be a CovarianceMatrix")

    @property
    def d(self) -> int:
        return self.sigma.d

    @property
    def existence_guaranteed(self) -> bool:
        """True when 2*alpha is a positive integer (squared-Gaussian
        construction) or exceeds floor((d-1)/2) (known general range)."""
        two_alpha = 2 * self.alpha
        if two_alpha.denominator == 1:
            return True
        return two_alpha > (self.d - 1) // 2

    def existence_note(self) -> str | None:
        if self.existence_guaranteed:
            return None
        return (
            f"shape 2*alpha={2 * self.alpha} is non-integer and <= "
            f"{(self.d - 1) // 2}; moments are formal coefficients of the "
            "generating function, existence of a matching distribution is open"
        )

    def restrict(self, indices) -> "GammaParams":
        return GammaParams(self.alpha, self.sigma.principal_submatrix(indices))


def _warn_existence(params: GammaParams, warn: bool) -> None:
    if warn:
        note = params.existence_note()
        if note:
            warnings.warn(note, DistributionExistenceWarning, stacklevel=3)


def trace_power_series(sigma: CovarianceMatrix, caps, n_max: int,
                       total_cap: int | None = None) -> TruncatedSeries:
    """sum_{n=1}^{n_max} tr[(Sigma T)^n] / n as a truncated series.

    Computed by iterating M <- M * (Sigma T) on a matrix whose entries
    are sparse coefficient maps; multiplying by (Sigma T) only shifts
    keys by one variable, so each step is cheap.  The coefficient of
    t_{i1}...t_{in} aggregates the cyclic products
    sigma_{i1 i2} sigma_{i2 i3} ... sigma_{in i1}.
    """
    caps = MultiIndex.coerce(caps)
    if caps.d != sigma.d:
        raise StructuralError(f"caps arity {caps.d} does not match d={sigma.d}")
    if n_max > caps.total:
        raise StructuralError(
            f"n_max={n_max} exceeds the sum of caps {caps.total}; extra powers "
            "would be annihilated by truncation"
        )
    d = sigma.d
    capst = caps.exponents
    entries = sigma.entries
    budget = caps.total if total_cap is None else min(total_cap, caps.total)

    # (Sigma T)_{ij} = sigma_ij * t_j
    def shift_fits(key, j):
        if key[j] + 1 > capst[j]:
            return None
        if sum(key) + 1 > budget:
            return None
        return key[:j] + (key[j] + 1,) + key[j + 1:]

    zero = (0,) * d

    def times_base(mat):
        out = [[{} for _ in range(d)] for _ in range(d)]
        for i in range(d):
            row = mat[i]
            for j in range(d):
                acc = out[i][j]
                for k in range(d):
                    s = entries[k][j]
                    if s == 0:
                        continue
                    cell = row[k]
                    if not cell:
                        continue
                    for key, val in cell.items():
                        nk = shift_fits(key, j)
                        if nk is None:
                            continue
                        acc[nk] = acc.get(nk, 0) + val * s
        return out

    # power-1 matrix: entry (i, j) holds sigma_ij * t_j
    cur = [[{} for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            if entries[i][j] != 0:
                nk = shift_fits(zero, j)
                if nk is not None:
                    cur[i][j] = {nk: entries[i][j]}

    acc: dict = {}
    for power in range(1, n_max + 1):
        if power > 1:
            cur = times_base(cur)
        inv = Fraction(1, power)
        alive = False
        for i in range(d):
            cell = cur[i][i]
            for key, val in cell.items():
                acc[key] = acc.get(key, 0) + inv * val
            if any(cur[i][j] for j in range(d)):
                alive = True
        if not alive:
            break
    return TruncatedSeries(capst, acc, total_cap)


def _normalize(value, backend: str) -> Scalar:
    if backend == "exact":
        return Fraction(value)
    return float(value)


def gamma_moment(params: GammaParams, n, warn: bool = True) -> Scalar:
    """E[prod_j X_j^{n_j}] for the gamma family with parameters
    (alpha, Sigma), by coefficient extraction from the exponential of the
    trace series with caps set exactly to n (monomials not dividing t^n
    cannot influence the target coefficient)."""
    n = MultiIndex.coerce(n)
    if n.d != params.d:
        raise StructuralError(f"exponent arity {n.d} does not match d={params.d}")
    if n.total > MAX_TOTAL_DEGREE:
        raise ResourceLimitError(
            f"total degree {n.total} exceeds cap {MAX_TOTAL_DEGREE}"
        )
    _warn_existence(params, warn)
    backend = params.sigma.backend
    if n.total == 0:
        return _normalize(1, backend)
    tps = trace_power_series(params.sigma, n, n.total)
    expanded = tps.scale(params.alpha).exp()
    coeff = expanded.coefficient(n.exponents)
    fact = 1
    for e in n:
        fact *= math.factorial(e)
    return _normalize(coeff * fact, backend)


def gamma_moment_table(params: GammaParams, total_degree: int,
                       warn: bool = True) -> dict:
    """All moments with total degree <= total_degree from one series
    expansion, keyed by exponent tuple.  Much cheaper than per-index
    extraction when sweeping every exponent vector."""
    if total_degree > MAX_TOTAL_DEGREE:
        raise ResourceLimitError(
            f"total degree {total_degree} exceeds cap {MAX_TOTAL_DEGREE}"
        )
    _warn_existence(params, warn)
    d = params.d
    backend = params.sigma.backend
    caps = MultiIndex((total_degree,) * d)
    tps = trace_power_series(params.sigma, caps, total_degree,
                             total_cap=total_degree)
    expanded = tps.scale(params.alpha).exp()
    table = {}
    for key in iter_multi_indices(caps.exponents, total_degree):
        fact = 1
        for e in key:
            fact *= math.factorial(e)
        table[key] = _normalize(expanded.coefficient(key) * fact, backend)
    return table


def pochhammer(alpha: Fraction, k: int):
    """Rising factorial alpha (alpha+1) ... (alpha+k-1)."""
    out = Fraction(1)
    for i in range(k):
        out *= alpha + i
    return out


def gamma_univariate_moment(alpha, variance, k: int) -> Scalar:
    """E[X^k] for the one-dimensional member: variance^k * rising
    factorial of alpha."""
    return pochhammer(_coerce_alpha(alpha), k) * variance**k


@dataclass(frozen=True)
class GPIGapReport:
    """Outcome of a two-block gamma product-inequality evaluation.

    ``certified_nonnegative`` is claimed only on the exact backend, where
    gap == lhs - rhs holds with zero rounding.
    """

    alpha: Fraction
    sigma: CovarianceMatrix
    n: MultiIndex
    partition: Partition
    lhs: Scalar
    rhs: Scalar
    gap: Scalar
    certified_nonnegative: bool
    warnings: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "alpha": scalar_to_str(self.alpha),
            "sigma": self.sigma.to_json_dict(),
            "n": list(self.n.exponents),
            "partition": [i + 1 for i in self.partition.indices],
            "lhs": scalar_to_str(self.lhs),
            "rhs": scalar_to_str(self.rhs),
            "gap": scalar_to_str(self.gap),
            "gap_float": float(self.gap),
            "certified_nonnegative": self.certified_nonnegative,
            "warnings": list(self.warnings),
        }


def gamma_gpi_gap(params: GammaParams, n, partition: Partition,
                  warn: bool = True) -> GPIGapReport:
    """Two-block gap E[prod X^n] - E[prod_I X^n] * E[prod_{I^c} X^n].

    Marginal blocks use the principal submatrix on the block (marginals
    of the family stay in the family with the corresponding block of
    Sigma).  Negative gaps are reported, never clamped.
    """
    n = MultiIndex.coerce(n)
    if partition.d != params.d:
        raise StructuralError(
            f"partition has d={partition.d}, parameters d={params.d}"
        )
    _warn_existence(params, warn)
    notes = []
    note = params.existence_note()
    if note:
        notes.append(note)

    def block(indices):
        if not indices:
            return _normalize(1, params.sigma.backend)
        return gamma_moment(params.restrict(indices), n.restrict(indices),
                            warn=False)

    lhs = gamma_moment(params, n, warn=False)
    rhs = block(partition.indices) * block(partition.complement_indices)
    gap = lhs - rhs
    certified = params.sigma.backend == "exact" and gap >= 0
    return GPIGapReport(
        alpha=params.alpha,
        sigma=params.sigma,
        n=n,
        partition=partition,
        lhs=lhs,
        rhs=rhs,
        gap=gap,
        certified_nonnegative=certified,
        warnings=tuple(notes),
    )


def gamma_weak_gpi_gap(params: GammaParams, n, warn: bool = True) -> Scalar:
    """Full-factorization gap E[prod X^n] - prod_j E[X_j^{n_j}]."""
    n = MultiIndex.coerce(n)
    _warn_existence(params, warn)
    joint = gamma_moment(params, n, warn=False)
    prod = _normalize(1, params.sigma.backend)
    for j in range(params.d):
        prod *= gamma_univariate_moment(params.alpha, params.sigma.entries[j][j],
                                        n[j])
    return joint - prod


def gamma_sum_moment(components, n, warn: bool = True) -> Scalar:
    """Moment of Z_j = sum_i Y_{ij} for independent gamma vectors
    Y_i ~ (alpha_i, Sigma_i): the generating functions multiply, so the
    trace series add with their shape weights."""
    components = [c if isinstance(c, GammaParams) else GammaParams(*c)
                  for c in components]
    if not components:
        raise StructuralError("need at least one component")
    d = components[0].d
    if any(c.d != d for c in components):
        raise StructuralError("components must share dimension")
    n = MultiIndex.coerce(n)
    if n.d != d:
        raise StructuralError(f"exponent arity {n.d} does not match d={d}")
    if n.total > MAX_TOTAL_DEGREE:
        raise ResourceLimitError(
            f"total degree {n.total} exceeds cap {MAX_TOTAL_DEGREE}"
        )
    for c in components:
        _warn_existence(c, warn)
    backend = ("float" if any(c.sigma.backend == "float" for c in components)
               else "exact")
    if n.total == 0:
        return _normalize(1, backend)
    combined = TruncatedSeries.zero(n.exponents)
    for c in components:
        combined = combined + trace_power_series(c.sigma, n, n.total).scale(c.alpha)
    expanded = combined.exp()
    fact = 1
    for e in n:
        fact *= math.factorial(e)
    return _normalize(expanded.coefficient(n.exponents) * fact, backend)
