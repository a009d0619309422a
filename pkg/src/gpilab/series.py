"""Truncated multivariate formal power series.

A series lives in variables t_1, ..., t_d with a per-variable degree cap
and an optional total-degree cap; monomials beyond the caps are discarded
by every operation, so a cap-respecting computation is exact for all the
coefficients it keeps.  Coefficients may be exact rationals or floats;
absent keys mean zero.

Two independent exponential algorithms are provided.  The production
path is the derivative recurrence (for each target monomial, assemble
k_i * e_k from the convolution of a' and e along one variable with a
nonzero exponent); the power-sum fallback sums a^m / m! until the powers
vanish under truncation.  Both must produce identical coefficients, and
the tests cross-check them.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator

from .errors import ContractError, StructuralError


def iter_multi_indices(caps, total_cap: int | None = None) -> Iterator[tuple]:
    """All exponent tuples k with 0 <= k <= caps componentwise and
    sum(k) <= total_cap, in no particular order."""
    caps = tuple(int(c) for c in caps)
    budget = sum(caps) if total_cap is None else min(total_cap, sum(caps))

    def gen(prefix, pos, remaining):
        if pos == len(caps):
            yield prefix
            return
        for e in range(min(caps[pos], remaining) + 1):
            yield from gen(prefix + (e,), pos + 1, remaining - e)

    return gen((), 0, budget)


class TruncatedSeries:
    """Sparse truncated power series: dict from exponent tuple to coefficient."""

    __slots__ = ("d", "caps", "total_cap", "coeffs")

    def __init__(self, caps, coeffs=None, total_cap: int | None = None):
        caps = tuple(int(c) for c in caps)
        if any(c < 0 for c in caps):
            raise StructuralError(f"caps must be nonnegative: {caps}")
        object.__setattr__(self, "d", len(caps))
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "total_cap", total_cap)
        clean = {}
        for key, val in (coeffs or {}).items():
            key = tuple(int(e) for e in key)
            if len(key) != self.d:
                raise StructuralError(f"key {key} has wrong arity for d={self.d}")
            if not self._fits(key):
                raise StructuralError(f"key {key} exceeds caps {caps}/{total_cap}")
            if val != 0:
                clean[key] = val
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedSeries is immutable")

    def _fits(self, key) -> bool:
        if any(k > c for k, c in zip(key, self.caps)):
            return False
        return self.total_cap is None or sum(key) <= self.total_cap

    def _compatible(self, other: "TruncatedSeries") -> None:
        if (
            not isinstance(other, TruncatedSeries)
            or self.caps != other.caps
            or self.total_cap != other.total_cap
        ):
            raise StructuralError("series operands must share caps")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, caps, total_cap=None) -> "TruncatedSeries":
        return cls(caps, {}, total_cap)

    @classmethod
    def constant(cls, value, caps, total_cap=None) -> "TruncatedSeries":
        d = len(tuple(caps))
        return cls(caps, {(0,) * d: value}, total_cap)

    @classmethod
    def monomial(cls, key, value, caps, total_cap=None) -> "TruncatedSeries":
        return cls(caps, {tuple(key): value}, total_cap)

    # -- queries -----------------------------------------------------------

    def coefficient(self, key):
        return self.coeffs.get(tuple(key), 0)

    def constant_term(self):
        return self.coeffs.get((0,) * self.d, 0)

    def __eq__(self, other):
        return (
            isinstance(other, TruncatedSeries)
            and self.caps == other.caps
            and self.total_cap == other.total_cap
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.caps, self.total_cap, frozenset(self.coeffs.items())))

    def __repr__(self):
        terms = sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        inner = ", ".join(f"{k}: {v}" for k, v in terms[:8])
        if len(terms) > 8:
            inner += f", ... ({len(terms)} terms)"
        return f"TruncatedSeries(caps={self.caps}, {{{inner}}})"

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        self._compatible(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return TruncatedSeries(self.caps, out, self.total_cap)

    def __sub__(self, other):
        self._compatible(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) - v
        return TruncatedSeries(self.caps, out, self.total_cap)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "TruncatedSeries":
        return TruncatedSeries(
            self.caps, {k: c * v for k, v in self.coeffs.items()}, self.total_cap
        )

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self.scale(other)
        self._compatible(other)
        a, b = self.coeffs, other.coeffs
        if len(a) > len(b):
            a, b = b, a
        caps, total_cap = self.caps, self.total_cap
        out: dict = {}
        for ka, va in a.items():
            for kb, vb in b.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                if any(x > c for x, c in zip(k, caps)):
                    continue
                if total_cap is not None and sum(k) > total_cap:
                    continue
                out[k] = out.get(k, 0) + va * vb
        return TruncatedSeries(caps, out, total_cap)

    __rmul__ = __mul__

    # -- exponential ---------------------------------------------------------

    def exp(self) -> "TruncatedSeries":
        """exp of a series with zero constant term, by the derivative
        recurrence: for each key k (graded order) pick the first variable
        i with k_i > 0 and assemble

            k_i * e_k = sum_{0 < j <= k, j_i > 0} j_i * a_j * e_{k-j}.
        """
        if self.constant_term() != 0:
            raise ContractError("series_exp requires a zero constant term")
        zero = (0,) * self.d
        e = {zero: 1}
        a_items = list(self.coeffs.items())
        keys = sorted(iter_multi_indices(self.caps, self.total_cap),
                      key=lambda k: (sum(k), k))
        for k in keys:
            if k == zero:
                continue
            i = next(idx for idx in range(self.d) if k[idx] > 0)
            acc = 0
            for j, aj in a_items:
                ji = j[i]
                if ji == 0:
                    continue
                r = tuple(x - y for x, y in zip(k, j))
                if any(x < 0 for x in r):
                    continue
                ev = e.get(r)
                if ev is None:
                    continue
                acc += ji * aj * ev
            if acc != 0:
                # ints stay exact: promote to Fraction before dividing
                e[k] = acc / k[i] if isinstance(acc, float) else Fraction(acc) / k[i]
        return TruncatedSeries(self.caps, e, self.total_cap)

    def exp_power_sum(self) -> "TruncatedSeries":
        """Fallback exponential: sum a^m / m! until a^m is annihilated by
        truncation.  Used to cross-check :meth:`exp`."""
        if self.constant_term() != 0:
            raise ContractError("series_exp requires a zero constant term")
        budget = sum(self.caps) if self.total_cap is None else self.total_cap
        result = TruncatedSeries.constant(1, self.caps, self.total_cap)
        term = TruncatedSeries.constant(1, self.caps, self.total_cap)
        m = 0
        while term.coeffs and m <= budget:
            m += 1
            term = (term * self).scale(Fraction(1, m))
            result = result + term
        return result


# module-level aliases matching the operation names used elsewhere

def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a + b


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a * b


def series_exp(a: TruncatedSeries, method: str = "recurrence") -> TruncatedSeries:
    if method == "recurrence":
        return a.exp()
    if method == "power-sum":
        return a.exp_power_sum()
    raise ContractError(f"unknown exp method {method!r}")
