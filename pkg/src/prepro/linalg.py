"""Exact linear algebra: sparse incremental row echelon forms and small dense
matrices over Q (gmpy2 ``mpq``) or a prime field."""

from __future__ import annotations

from typing import Callable, Hashable, Iterable

from gmpy2 import mpq

Vec = dict  # column -> nonzero coefficient


def axpy(y: Vec, a, x: Vec) -> None:
    """In place ``y += a * x`` dropping zeros."""
    for col, c in x.items():
        v = y.get(col)
        v = a * c if v is None else v + a * c
        if v:
            y[col] = v
        else:
            y.pop(col, None)


class Echelon:
    """Incrementally maintained reduced row echelon form of sparse vectors.

    Each stored row has coefficient 1 at its pivot and 0 at every other
    pivot.  The pivot of a new row is its largest column under ``key``.
    With ``track=True`` every row remembers which inserted vectors (by tag)
    it is a combination of, so that :meth:`express` can solve linear systems.
    """

    def __init__(self, key: Callable | None = None, track: bool = False):
        self.key = key
        self.track = track
        self.rows: dict[Hashable, Vec] = {}
        self.combos: dict[Hashable, Vec] = {}

    def __len__(self) -> int:
        return len(self.rows)

    rank = property(__len__)

    def _reduce(self, vec: Vec, combo: Vec | None):
        for col in [c for c in vec if c in self.rows]:
            coef = vec.get(col)
            if not coef:
                continue
            axpy(vec, -coef, self.rows[col])
            if combo is not None:
                axpy(combo, -coef, self.combos[col])
        return vec

    def reduce(self, vec: Vec) -> Vec:
        """Normal form of ``vec`` modulo the row space (no pivot columns left)."""
        return self._reduce(dict(vec), None)

    def add(self, vec: Vec, tag: Hashable = None) -> bool:
        """Insert a vector; return True when it enlarged the row space."""
        vec = dict(vec)
        combo = None
        if self.track:
            combo = {tag: 1}
        self._reduce(vec, combo)
        if not vec:
            return False
        pivot = max(vec, key=self.key) if self.key else max(vec)
        inv = 1 / vec[pivot]
        vec = {c: v * inv for c, v in vec.items()}
        if combo is not None:
            combo = {t: v * inv for t, v in combo.items()}
        for p, row in self.rows.items():
            coef = row.get(pivot)
            if coef:
                axpy(row, -coef, vec)
                if combo is not None:
                    axpy(self.combos[p], -coef, combo)
        self.rows[pivot] = vec
        if combo is not None:
            self.combos[pivot] = combo
        return True

    def extend(self, vecs: Iterable[Vec]) -> None:
        for v in vecs:
            self.add(v)

    def contains(self, vec: Vec) -> bool:
        return not self.reduce(vec)

    def express(self, vec: Vec) -> Vec | None:
        """Coefficients (by tag) writing ``vec`` as a combination of inserted
        vectors, or None when ``vec`` is outside the row space."""
        if not self.track:
            raise RuntimeError("express() needs track=True")
        rest = dict(vec)
        out: Vec = {}
        for col in [c for c in rest if c in self.rows]:
            coef = rest.get(col)
            if not coef:
                continue
            axpy(rest, -coef, self.rows[col])
            axpy(out, coef, self.combos[col])
        if rest:
            return None
        return out

    @property
    def pivots(self) -> list:
        return sorted(self.rows, key=self.key)


def rank_of(vecs: Iterable[Vec], key: Callable | None = None) -> int:
    e = Echelon(key=key)
    e.extend(vecs)
    return e.rank


# ---------------------------------------------------------------------------
# dense matrices: tuples of tuples of field elements


def zeros(m: int, n: int, zero=mpq(0)):
    return tuple(tuple(zero for _ in range(n)) for _ in range(m))


def identity(n: int, one=mpq(1), zero=mpq(0)):
    return tuple(tuple(one if i == j else zero for j in range(n)) for i in range(n))


def shape(M) -> tuple[int, int]:
    if not M:
        return (0, 0)
    return (len(M), len(M[0]))


def matmul(A, B, ncols: int | None = None):
    """Product of dense matrices; ``ncols`` fixes the width when the inner
    dimension is zero and B therefore has no rows to read it from."""
    if not A:
        return ()
    if not B or not B[0]:
        n = ncols if ncols is not None else (len(B[0]) if B else 0)
        return tuple(tuple(mpq(0) for _ in range(n)) for _ in A)
    Bt = tuple(zip(*B))
    return tuple(tuple(sum((a * b for a, b in zip(row, col)), mpq(0)) for col in Bt) for row in A)


def matadd(A, B):
    return tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(A, B))


def matsub(A, B):
    return tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(A, B))


def matscale(c, A):
    return tuple(tuple(c * a for a in r) for r in A)


def trace(A):
    return sum((A[i][i] for i in range(len(A))), mpq(0))


def transpose(A):
    return tuple(zip(*A)) if A else ()


def is_zero_matrix(A) -> bool:
    return all(not a for r in A for a in r)


def inverse(A):
    """Gauss-Jordan inverse over Q; raises ValueError when singular."""
    n = len(A)
    M = [list(map(mpq, r)) + [mpq(1) if i == j else mpq(0) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c]), None)
        if piv is None:
            raise ValueError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c]:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return tuple(tuple(r[n:]) for r in M)


def rank(A) -> int:
    return rank_of({j: v for j, v in enumerate(r) if v} for r in A)


def leading_minors_positive(M) -> bool:
    """Sylvester's criterion for a symmetric matrix, in exact arithmetic.

    Gaussian elimination without pivoting: every leading principal minor is
    positive iff each successive pivot is positive.
    """
    n = len(M)
    W = [list(map(mpq, r)) for r in M]
    for k in range(n):
        if W[k][k] <= 0:
            return False
        for r in range(k + 1, n):
            f = W[r][k] / W[k][k]
            if f:
                for c in range(k, n):
                    W[r][c] -= f * W[k][c]
    return True


def nullspace(M) -> list[tuple]:
    """Basis of the right kernel of a dense rational matrix."""
    if not M:
        return []
    n = len(M[0])
    e = Echelon(key=lambda c: -c)  # pivot = leftmost column
    for r in M:
        e.add({j: mpq(v) for j, v in enumerate(r) if v})
    free = [j for j in range(n) if j not in e.rows]
    basis = []
    for f in free:
        v = [mpq(0)] * n
        v[f] = mpq(1)
        for p, row in e.rows.items():
            v[p] = -row.get(f, mpq(0))
        basis.append(tuple(v))
    return basis
