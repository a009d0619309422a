"""Small-dimension symmetric matrix arithmetic with dual scalar backends.

Everything downstream (moment engines, structure checks, the scanner)
works with the types defined here.  Two backends are supported:

* ``"exact"``  -- entries are :class:`fractions.Fraction`; arithmetic is
  closed under +, -, *, / with no rounding.  This is the default whenever
  the input can be read as rational numbers.
* ``"float"``  -- entries are Python floats; every comparison against
  zero uses a relative tolerance (default ``1e-10``).

Matrices are immutable after construction and all operations are pure
functions, so instances can be shared freely between workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    PsdViolationError,
    ResourceLimitError,
    SingularMatrixError,
    StructuralError,
)

Scalar = Union[Fraction, float, int]

#: Relative tolerance used for zero-comparisons on the float backend.
DEFAULT_FLOAT_TOL = 1e-10

#: Hard cap on matrix dimension; moment extraction is exponential in d.
MAX_DIMENSION = 12


# ---------------------------------------------------------------------------
# scalar helpers


def parse_scalar(value, backend: str = "exact") -> Scalar:
    """Read one scalar from JSON-ish input.

    Accepts ints, floats, and strings.  Strings may be decimal ("0.4",
    "-3e-2") or rational ("2/5"); both parse exactly.  Floats are read
    through their shortest round-tripping decimal representation, so the
    JSON number 0.4 becomes the rational 2/5, not the binary expansion.
    """
    if isinstance(value, bool):
        raise StructuralError(f"expected a number, got {value!r}")
    if backend == "float":
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            return float(Fraction(value))
        raise StructuralError(f"cannot parse scalar from {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise StructuralError(f"cannot parse scalar from {value!r}")


def scalar_to_str(x: Scalar) -> str:
    """Render a scalar for JSON output: "p/q" for rationals, repr for floats."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def scalar_to_float(x: Scalar) -> float:
    return float(x)


def rationalize(x: float, max_denominator: int = 10**12) -> Fraction:
    """Nearest rational with bounded denominator, for exact re-checks of
    float-mode results."""
    return Fraction(x).limit_denominator(max_denominator)


def fraction_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None when the
    root is irrational."""
    if x < 0:
        return None
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector (n_1, ..., n_d) of nonnegative integers."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise StructuralError(f"multi-index must be nonnegative: {exps}")
        if any(e != orig for e, orig in zip(exps, self.exponents)):
            raise StructuralError(f"multi-index must be integral: {self.exponents}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def coerce(cls, n) -> "MultiIndex":
        if isinstance(n, MultiIndex):
            return n
        return cls(tuple(n))

    @property
    def d(self) -> int:
        return len(self.exponents)

    @property
    def total(self) -> int:
        return sum(self.exponents)

    def restrict(self, indices: Sequence[int]) -> "MultiIndex":
        return MultiIndex(tuple(self.exponents[i] for i in indices))

    def __iter__(self):
        return iter(self.exponents)

    def __getitem__(self, i):
        return self.exponents[i]


@dataclass(frozen=True)
class SignMatrix:
    """Diagonal matrix with entries in {+1, -1}, stored as the sign vector."""

    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (1, -1) for s in signs):
            raise StructuralError(f"signs must be +-1: {signs}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def identity(cls, d: int) -> "SignMatrix":
        return cls((1,) * d)

    @property
    def d(self) -> int:
        return len(self.signs)

    def __iter__(self):
        return iter(self.signs)

    def __getitem__(self, i):
        return self.signs[i]


@dataclass(frozen=True)
class Partition:
    """A split of {0, ..., d-1} into a subset and its complement.

    The subset is stored as a bitmask; indices are 0-based.  The two-block
    product inequalities compare the joint moment against the product over
    ``indices`` and ``complement_indices``.
    """

    d: int
    mask: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.d):
            raise StructuralError(
                f"partition mask {self.mask:#x} out of range for d={self.d}"
            )

    @classmethod
    def from_indices(cls, d: int, indices: Iterable[int]) -> "Partition":
        mask = 0
        for i in indices:
            if not 0 <= i < d:
                raise StructuralError(f"partition index {i} out of range for d={d}")
            mask |= 1 << i
        return cls(d, mask)

    @classmethod
    def from_one_based(cls, d: int, indices: Iterable[int]) -> "Partition":
        return cls.from_indices(d, [i - 1 for i in indices])

    @classmethod
    def nontrivial(cls, d: int) -> list["Partition"]:
        """All splits with both blocks nonempty, up to complement symmetry
        (the block containing index 0 is taken as the subset)."""
        out = []
        full = (1 << d) - 1
        for mask in range(1, full, 2):  # odd masks contain index 0
            out.append(cls(d, mask))
        return out

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.d) if self.mask >> i & 1)

    @property
    def complement_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.d) if not self.mask >> i & 1)

    def complement(self) -> "Partition":
        return Partition(self.d, ((1 << self.d) - 1) ^ self.mask)


class CovarianceMatrix:
    """Symmetric positive-semidefinite d x d matrix with immutable entries.

    Parameters
    ----------
    entries : sequence of sequences
        Scalars accepted by :func:`parse_scalar`.
    backend : {"exact", "float"}, optional
        Defaults to "exact" unless some entry is a float.
    tol : float, optional
        Relative zero tolerance for the float backend.
    require_psd : bool
        When True (default) construction fails on a non-PSD matrix.  The
        scanner screens raw candidate grids with ``require_psd=False``
        followed by :func:`check_psd`.
    """

    __slots__ = ("d", "entries", "backend", "tol", "_moment_cache")

    def __init__(self, entries, backend: str | None = None, tol: float | None = None,
                 require_psd: bool = True):
        rows = [list(r) for r in entries]
        d = len(rows)
        if d < 1:
            raise StructuralError("matrix must have dimension >= 1")
        if d > MAX_DIMENSION:
            raise ResourceLimitError(f"dimension {d} exceeds cap {MAX_DIMENSION}")
        if any(len(r) != d for r in rows):
            raise StructuralError("matrix is not square")

        if backend is None:
            has_float = any(isinstance(x, float) for r in rows for x in r)
            backend = "float" if has_float else "exact"
        if backend not in ("exact", "float"):
            raise StructuralError(f"unknown backend {backend!r}")

        parsed = tuple(
            tuple(parse_scalar(x, backend) for x in r) for r in rows
        )
        tol = DEFAULT_FLOAT_TOL if tol is None else float(tol)

        scale = max((abs(x) for r in parsed for x in r), default=0)
        for i in range(d):
            for j in range(i + 1, d):
                diff = abs(parsed[i][j] - parsed[j][i])
                if backend == "exact":
                    if diff != 0:
                        raise StructuralError(f"asymmetric at ({i},{j})")
                elif diff > tol * max(scale, 1.0):
                    raise StructuralError(f"asymmetric at ({i},{j})")
        for i in range(d):
            if parsed[i][i] < 0 and not (
                backend == "float" and parsed[i][i] >= -tol * max(scale, 1.0)
            ):
                raise PsdViolationError(f"negative diagonal entry at index {i}")

        object.__setattr__(self, "d", d)
        object.__setattr__(self, "entries", parsed)
        object.__setattr__(self, "backend", backend)
        object.__setattr__(self, "tol", tol)
        object.__setattr__(self, "_moment_cache", {})

        if require_psd:
            result = check_psd(self)
            if not result.is_psd:
                raise PsdViolationError(
                    f"matrix is not positive semidefinite (witness {result.witness})"
                )

    def __setattr__(self, name, value):
        raise AttributeError("CovarianceMatrix is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, CovarianceMatrix)
            and self.backend == other.backend
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash((self.backend, self.entries))

    def __repr__(self):
        return f"CovarianceMatrix(d={self.d}, backend={self.backend!r})"

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @classmethod
    def identity(cls, d: int, backend: str = "exact") -> "CovarianceMatrix":
        one = Fraction(1) if backend == "exact" else 1.0
        zero = Fraction(0) if backend == "exact" else 0.0
        return cls(
            [[one if i == j else zero for j in range(d)] for i in range(d)],
            backend=backend,
        )

    @classmethod
    def diagonal(cls, values, backend: str | None = None) -> "CovarianceMatrix":
        vals = list(values)
        d = len(vals)
        return cls(
            [[vals[i] if i == j else 0 for j in range(d)] for i in range(d)],
            backend=backend,
        )

    def principal_submatrix(self, indices: Sequence[int]) -> "CovarianceMatrix":
        idx = list(indices)
        return CovarianceMatrix(
            [[self.entries[i][j] for j in idx] for i in idx],
            backend=self.backend,
            tol=self.tol,
            require_psd=False,  # principal submatrices of PSD matrices are PSD
        )

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.entries], dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "entries": [[scalar_to_str(x) for x in r] for r in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict, backend: str | None = None,
                       tol: float | None = None) -> "CovarianceMatrix":
        if not isinstance(obj, dict) or "entries" not in obj:
            raise StructuralError('matrix JSON must be {"d": int, "entries": [[...]]}')
        entries = obj["entries"]
        if "d" in obj and len(entries) != obj["d"]:
            raise StructuralError(
                f'declared dimension d={obj["d"]} does not match {len(entries)} rows'
            )
        return cls(entries, backend=backend, tol=tol)

    @classmethod
    def from_json(cls, text: str, backend: str | None = None) -> "CovarianceMatrix":
        return cls.from_json_dict(json.loads(text), backend=backend)


# ---------------------------------------------------------------------------
# eigenvalues (float backend): cyclic Jacobi, self-contained and plenty for d<=12


def jacobi_eigh(matrix, tol: float = 1e-14, max_sweeps: int = 60):
    """Eigenvalues and eigenvectors of a small symmetric matrix by cyclic
    Jacobi rotations.

    Returns ``(values, vectors)`` with ``vectors[:, k]`` the unit
    eigenvector for ``values[k]``; values are sorted ascending.
    """
    a = np.array(matrix, dtype=float)
    d = a.shape[0]
    if a.shape != (d, d):
        raise StructuralError("jacobi_eigh expects a square matrix")
    v = np.eye(d)
    scale = max(np.max(np.abs(a)), 1.0)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(d) for j in range(i + 1, d)))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(vals)
    return vals[order], v[:, order]


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class PsdCheck:
    """Outcome of a positive-semidefiniteness test.

    ``witness`` is a direction v with v' M v < 0 when the test fails.
    """

    is_psd: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.is_psd


def _as_rows(matrix) -> tuple[list[list[Scalar]], str, float]:
    """Accept a CovarianceMatrix or raw nested sequence; return rows,
    backend, tol."""
    if isinstance(matrix, CovarianceMatrix):
        return [list(r) for r in matrix.entries], matrix.backend, matrix.tol
    rows = [list(r) for r in matrix]
    d = len(rows)
    if d == 0 or any(len(r) != d for r in rows):
        raise StructuralError("matrix is not square")
    has_float = any(isinstance(x, float) for r in rows for x in r)
    backend = "float" if has_float else "exact"
    parsed = [[parse_scalar(x, backend) for x in r] for r in rows]
    scale = max((abs(x) for r in parsed for x in r), default=0)
    for i in range(d):
        for j in range(i + 1, d):
            diff = abs(parsed[i][j] - parsed[j][i])
            if backend == "exact" and diff != 0:
                raise StructuralError(f"asymmetric at ({i},{j})")
            if backend == "float" and diff > DEFAULT_FLOAT_TOL * max(scale, 1.0):
                raise StructuralError(f"asymmetric at ({i},{j})")
    return parsed, backend, DEFAULT_FLOAT_TOL


def check_psd(matrix) -> PsdCheck:
    """Decide positive semidefiniteness, with a witness on failure.

    Exact backend: symmetric Gaussian elimination on positive pivots
    (every Schur complement of a PSD matrix is PSD); the witness is lifted
    back through the eliminations.  Float backend: Jacobi eigenvalues with
    relative tolerance.
    """
    rows, backend, tol = _as_rows(matrix)
    d = len(rows)

    if backend == "float":
        vals, vecs = jacobi_eigh(rows)
        scale = max(np.max(np.abs(vals)), 1.0)
        if vals[0] >= -tol * scale:
            return PsdCheck(True)
        return PsdCheck(False, tuple(float(x) for x in vecs[:, 0]))

    active = list(range(d))
    a = [[Fraction(x) for x in r] for r in rows]
    # eliminations[k] = (pivot position in `active` at step k, pivot value,
    # column under the pivot) -- used to lift witnesses back to R^d.
    eliminations = []

    def lift(w: list[Fraction], members: list[int]) -> tuple:
        # w is a witness on the current submatrix `members`; walk the
        # eliminations backwards, prepending the pivot coordinate.
        vec = {m: x for m, x in zip(members, w)}
        for piv_idx, piv_val, col in reversed(eliminations):
            bw = sum(col[m] * vec.get(m, Fraction(0)) for m in vec)
            vec[piv_idx] = -bw / piv_val
        out = [Fraction(0)] * d
        for k, x in vec.items():
            out[k] = x
        return tuple(out)

    sub = {(i, j): a[i][j] for i in active for j in active}
    members = active[:]
    while members:
        # any strictly negative diagonal: e_i is a witness
        for i in members:
            if sub[(i, i)] < 0:
                return PsdCheck(False, lift(
                    [Fraction(1) if m == i else Fraction(0) for m in members],
                    members,
                ))
        # zero diagonal with nonzero row entry: 2x2 submatrix is indefinite
        for i in members:
            if sub[(i, i)] == 0:
                for j in members:
                    if j != i and sub[(i, j)] != 0:
                        t = -(sub[(j, j)] + 1) / (2 * sub[(i, j)])
                        w = [Fraction(0)] * len(members)
                        w[members.index(i)] = t
                        w[members.index(j)] = Fraction(1)
                        return PsdCheck(False, lift(w, members))
        pivot = next((i for i in members if sub[(i, i)] > 0), None)
        if pivot is None:
            return PsdCheck(True)  # all-zero remainder
        pv = sub[(pivot, pivot)]
        col = {m: sub[(m, pivot)] for m in members if m != pivot}
        eliminations.append((pivot, pv, col))
        members = [m for m in members if m != pivot]
        for i in members:
            for j in members:
                sub[(i, j)] = sub[(i, j)] - col[i] * col[j] / pv
    return PsdCheck(True)


def inverse(matrix: CovarianceMatrix) -> CovarianceMatrix:
    """Matrix inverse by Gauss-Jordan elimination.

    Exact backend: Sigma * inverse(Sigma) equals the identity with zero
    residual.  Raises :class:`SingularMatrixError` naming the failing
    pivot column when the matrix is not invertible.
    """
    d = matrix.d
    backend = matrix.backend
    a = [list(r) for r in matrix.entries]
    one = Fraction(1) if backend == "exact" else 1.0
    zero = Fraction(0) if backend == "exact" else 0.0
    inv = [[one if i == j else zero for j in range(d)] for i in range(d)]
    scale = max((abs(x) for r in a for x in r), default=0)
    pivot_floor = 0 if backend == "exact" else matrix.tol * max(float(scale), 1.0)

    for col in range(d):
        pivot_row = max(range(col, d), key=lambda r: abs(a[r][col]))
        if abs(a[pivot_row][col]) <= pivot_floor:
            raise SingularMatrixError(f"singular matrix: no usable pivot in column {col}")
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
            inv[col], inv[pivot_row] = inv[pivot_row], inv[col]
        pv = a[col][col]
        a[col] = [x / pv for x in a[col]]
        inv[col] = [x / pv for x in inv[col]]
        for r in range(d):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
                inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]

    if backend == "float":
        # inverse of symmetric PD input drifts slightly; resymmetrize
        inv = [
            [(inv[i][j] + inv[j][i]) / 2 for j in range(d)] for i in range(d)
        ]
    return CovarianceMatrix(inv, backend=backend, tol=matrix.tol, require_psd=False)


def conjugate_by_sign(matrix: CovarianceMatrix, signs: SignMatrix) -> CovarianceMatrix:
    """Entrywise similarity (S Sigma S)_{ij} = s_i s_j sigma_{ij}."""
    if signs.d != matrix.d:
        raise StructuralError(f"sign vector has d={signs.d}, matrix d={matrix.d}")
    s = signs.signs
    return CovarianceMatrix(
        [
            [s[i] * s[j] * matrix.entries[i][j] for j in range(matrix.d)]
            for i in range(matrix.d)
        ],
        backend=matrix.backend,
        tol=matrix.tol,
        require_psd=False,  # congruence by an orthogonal matrix preserves PSD
    )
