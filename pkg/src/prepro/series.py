"""Truncated power series with exact rational (matrix) coefficients."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from gmpy2 import mpq

from .graph import DynkinClass, adjacency, classify, star


def _mat(M) -> tuple[tuple, ...]:
    return tuple(tuple(mpq(x) for x in r) for r in M)


def _mul(A, B):
    n, m, k = len(A), len(B[0]) if B else 0, len(B)
    return tuple(tuple(sum((A[i][l] * B[l][j] for l in range(k)), mpq(0)) for j in range(m)) for i in range(n))


def _add(A, B):
    return tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(A, B))


def _scale(c, A):
    return tuple(tuple(c * a for a in r) for r in A)


def _eye(n):
    return tuple(tuple(mpq(1) if i == j else mpq(0) for j in range(n)) for i in range(n))


def _zero(n):
    return tuple(tuple(mpq(0) for _ in range(n)) for _ in range(n))


@dataclass(frozen=True)
class MatrixSeries:
    """``sum_{n<=N} C(n) t^n`` with square coefficient matrices."""

    coeffs: tuple

    @classmethod
    def from_int_blocks(cls, blocks: Sequence) -> "MatrixSeries":
        return cls(tuple(_mat(b) for b in blocks))

    @classmethod
    def polynomial(cls, terms: dict[int, Sequence], size: int, N: int) -> "MatrixSeries":
        return cls(tuple(_mat(terms[n]) if n in terms else _zero(size) for n in range(N + 1)))

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    @property
    def size(self) -> int:
        return len(self.coeffs[0])

    def __getitem__(self, n: int):
        return self.coeffs[n]

    def entry(self, i: int, j: int) -> list:
        return [C[i][j] for C in self.coeffs]

    def truncate(self, N: int) -> "MatrixSeries":
        return MatrixSeries(self.coeffs[: N + 1])

    def __mul__(self, other: "MatrixSeries") -> "MatrixSeries":
        N = min(self.N, other.N)
        out = []
        for n in range(N + 1):
            acc = _zero(self.size)
            for k in range(n + 1):
                acc = _add(acc, _mul(self.coeffs[k], other.coeffs[n - k]))
            out.append(acc)
        return MatrixSeries(tuple(out))

    def __add__(self, other: "MatrixSeries") -> "MatrixSeries":
        return MatrixSeries(tuple(_add(a, b) for a, b in zip(self.coeffs, other.coeffs)))

    def evaluate_at_one(self):
        """Sum of all entries of all coefficients."""
        return sum((x for C in self.coeffs for r in C for x in r), mpq(0))

    def total_by_degree(self) -> list:
        return [sum((x for r in C for x in r), mpq(0)) for C in self.coeffs]

    def is_identity(self) -> bool:
        return self.coeffs[0] == _eye(self.size) and all(C == _zero(self.size) for C in self.coeffs[1:])

    def to_json(self) -> list[dict]:
        return [{"degree": n, "matrix": [[_fmt(x) for x in r] for r in C]} for n, C in enumerate(self.coeffs)]

    def to_csv(self, labels: Sequence[str] | None = None) -> str:
        labels = list(labels) if labels else [str(i) for i in range(self.size)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["degree", "i", "j", "value"])
        for n, C in enumerate(self.coeffs):
            for i, r in enumerate(C):
                for j, x in enumerate(r):
                    w.writerow([n, labels[i], labels[j], _fmt(x)])
        return buf.getvalue()


def _fmt(x) -> str:
    x = mpq(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def one_minus_At_plus_t2(A, N: int) -> MatrixSeries:
    n = len(A)
    terms = {0: _eye(n), 1: _scale(mpq(-1), _mat(A))}
    if N >= 2:
        terms[2] = _eye(n)
    return MatrixSeries.polynomial(terms, n, N)


def invert_one_minus(A, N: int) -> MatrixSeries:
    """``(1 - A t + t^2)^{-1}`` via ``C(n) = A C(n-1) - C(n-2)``."""
    A = _mat(A)
    n = len(A)
    C = [_eye(n)]
    if N >= 1:
        C.append(A)
    for k in range(2, N + 1):
        C.append(_add(_mul(A, C[k - 1]), _scale(mpq(-1), C[k - 2])))
    return MatrixSeries(tuple(C))


def permutation_matrix(perm: Sequence[int]):
    n = len(perm)
    return tuple(tuple(mpq(1) if perm[i] == j else mpq(0) for j in range(n)) for i in range(n))


def closed_hilbert(c: DynkinClass, A, N: int) -> MatrixSeries:
    """``(1 + P t^h)(1 - A t + t^2)^{-1}`` for ADET, else the bare inverse."""
    S = invert_one_minus(A, N)
    if c.kind != "finite":
        return S
    n = len(A)
    factor = MatrixSeries.polynomial({0: _eye(n), c.coxeter: permutation_matrix(c.involution)}, n, N)
    return factor * S


@dataclass(frozen=True)
class Comparison:
    equal: bool
    mismatch: tuple[int, int, int] | None = None  # (i, j, n)
    values: tuple | None = None  # (empirical, closed) at the mismatch

    def to_json(self) -> dict:
        out = {"verdict": "EQUAL" if self.equal else "MISMATCH"}
        if self.mismatch:
            out["mismatch"] = {"i": self.mismatch[0], "j": self.mismatch[1], "n": self.mismatch[2]}
            out["values"] = [_fmt(v) for v in self.values]
        return out


def compare_series(empirical: MatrixSeries, closed: MatrixSeries) -> Comparison:
    if empirical.N != closed.N or empirical.size != closed.size:
        raise ValueError(
            f"series shapes differ: {empirical.size}x{empirical.size} to t^{empirical.N} "
            f"vs {closed.size}x{closed.size} to t^{closed.N}"
        )
    for n, (E, C) in enumerate(zip(empirical.coeffs, closed.coeffs)):
        for i in range(empirical.size):
            for j in range(empirical.size):
                if E[i][j] != C[i][j]:
                    return Comparison(False, (i, j, n), (E[i][j], C[i][j]))
    return Comparison(True)


def dim_formula(c: DynkinClass) -> mpq:
    if c.kind != "finite":
        raise ValueError("dimension formula needs an ADET graph")
    return mpq(c.coxeter * (c.coxeter + 1) * c.rank, 6)


def koszul_criterion(empirical: MatrixSeries, A, N: int) -> bool:
    """True iff ``H (1 - A t + t^2) = 1`` up to degree N."""
    return (empirical.truncate(N) * one_minus_At_plus_t2(A, N)).is_identity()


# ---------------------------------------------------------------------------
# scalar series (lists of mpq, index = degree)


def poly_mul(a: Sequence, b: Sequence, N: int) -> list:
    out = [mpq(0)] * (N + 1)
    for i, x in enumerate(a[: N + 1]):
        if x:
            for j, y in enumerate(b[: N + 1 - i]):
                out[i + j] += x * y
    return out


def series_inverse(a: Sequence, N: int) -> list:
    a = [mpq(x) for x in a] + [mpq(0)] * (N + 1)
    if not a[0]:
        raise ZeroDivisionError("constant term is zero")
    out = [1 / a[0]]
    for n in range(1, N + 1):
        out.append(-sum((a[k] * out[n - k] for k in range(1, n + 1)), mpq(0)) / a[0])
    return out


def _poly(terms: dict[int, int], N: int) -> list:
    out = [mpq(0)] * (N + 1)
    for k, v in terms.items():
        if 0 <= k <= N:
            out[k] += v
    return out


def lusztig_tits_central(p: Sequence[int], N: int) -> list:
    """Central coefficient of ``(1 - A t + t^2)^{-1}`` for the star with rays ``p``.

    Each ray contributes ``t (t^{p-1} - t^{1-p}) / (t^p - t^{-p})``; after
    multiplying top and bottom by ``t^p`` this is
    ``(t^2 - t^{2p}) / (1 - t^{2p})``, a power series.
    """
    if not p or any(x < 1 for x in p):
        raise ValueError("ray lengths must be >= 1")
    M = N + 2
    D = _poly({0: 1, 2: 1}, M)
    for s in p:
        num = _poly({2: 1, 2 * s: -1}, M)
        term = poly_mul(num, series_inverse(_poly({0: 1, 2 * s: -1}, M), M), M)
        D = [d - t for d, t in zip(D, term)]
    return series_inverse(D, N)


def spherical_closed(p: Sequence[int], N: int, cls: DynkinClass | None = None) -> list:
    """Hilbert series of the star's central corner, in the grading where each
    ray generator has degree 1."""
    if cls is None:
        cls = classify(star(p)[0])
    M = N + 1
    D = _poly({0: 1, 1: 1}, M)
    for s in p:
        num = _poly({1: 1, s: -1}, M)
        term = poly_mul(num, series_inverse(_poly({0: 1, s: -1}, M), M), M)
        D = [d - t for d, t in zip(D, term)]
    S = series_inverse(D, N)
    if cls.kind == "finite" and cls.family in ("D", "E"):
        if cls.coxeter % 2:
            raise ValueError("odd Coxeter number for a D/E star")
        S = poly_mul(S, _poly({0: 1, cls.coxeter // 2: 1}, N), N)
    elif cls.kind == "finite" and cls.family == "A":
        # the centre of a chain need not be fixed by P; use the matrix series
        g, centre = star(p)
        i = g.index[centre]
        H = closed_hilbert(cls, adjacency(g), 2 * N)
        S = [H[2 * n][i][i] for n in range(N + 1)]
    return S


def kleinian_dim(a: int, b: int, c: int) -> mpq:
    s = mpq(1, a) + mpq(1, b) + mpq(1, c) - 1
    if s <= 0:
        raise ValueError("not a finite Kleinian type")
    return 2 / s


def format_poly(coeffs: Sequence, var: str = "t") -> str:
    parts = []
    for n, c in enumerate(coeffs):
        if not c:
            continue
        c = mpq(c)
        mono = "" if n == 0 else (var if n == 1 else f"{var}^{n}")
        if n == 0:
            body = _fmt(abs(c))
        elif abs(c) == 1:
            body = mono
        else:
            body = f"{_fmt(abs(c))}{mono}"
        parts.append(("-" if c < 0 else "+", body))
    if not parts:
        return "0"
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += sign + body
    return s
