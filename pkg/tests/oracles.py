"""Brute-force reference computations, independent of the package's
reduction engine and echelon code."""

from fractions import Fraction
from itertools import product


def rank(rows, modulus=None):
    """Rank of a list of sparse rows ({column: value}) by plain elimination."""
    pivots: dict = {}
    r = 0
    for row in rows:
        row = {k: Fraction(v) for k, v in row.items() if v}
        if modulus:
            row = {k: v % modulus for k, v in row.items() if v % modulus}
        while row:
            col = min(row)
            if col not in pivots:
                pivots[col] = row
                r += 1
                break
            prow = pivots[col]
            f = row[col] / prow[col] if not modulus else row[col] * pow(int(prow[col]), -1, modulus)
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if modulus:
                    nv %= modulus
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
    return r


class Quiver:
    """Arrows as (name, tail, head); paths as tuples written left to right,
    with the rightmost arrow traversed first."""

    def __init__(self, n_vertices, arrows):
        self.n = n_vertices
        self.arrows = list(arrows)

    def paths(self, d):
        if d == 0:
            return [("e", v) for v in range(self.n)]
        out = []
        for word in product(range(len(self.arrows)), repeat=d):
            if all(self.arrows[word[k + 1]][2] == self.arrows[word[k]][1] for k in range(d - 1)):
                out.append(word)
        return out

    def ends(self, p):
        if p[0] == "e":
            return p[1], p[1]
        return self.arrows[p[0]][2], self.arrows[p[-1]][1]  # (target, source)

    def mul(self, f, g):
        out: dict = {}
        for p, a in f.items():
            for q, b in g.items():
                pt, ps = self.ends(p)
                qt, qs = self.ends(q)
                if ps != qt:
                    continue
                if p[0] == "e":
                    r = q
                elif q[0] == "e":
                    r = p
                else:
                    r = p + q
                out[r] = out.get(r, 0) + a * b
        return {k: v for k, v in out.items() if v}

    def quotient_dims(self, relators, N, modulus=None):
        """dims of kQ/(relators) by spanning u r v for all paths u, v."""
        dims = []
        for n in range(N + 1):
            rows = []
            for r, d in relators:
                for a in range(n - d + 1):
                    for u in self.paths(a):
                        for v in self.paths(n - d - a):
                            x = self.mul(self.mul({u: 1}, r), {v: 1})
                            if x:
                                rows.append({_col(k): c for k, c in x.items()})
            dims.append(len(self.paths(n)) - rank(rows, modulus))
        return dims

    def in_ideal(self, f, relators, n):
        rows = []
        for r, d in relators:
            for a in range(n - d + 1):
                for u in self.paths(a):
                    for v in self.paths(n - d - a):
                        x = self.mul(self.mul({u: 1}, r), {v: 1})
                        if x:
                            rows.append({_col(k): c for k, c in x.items()})
        base = rank(rows)
        return rank(rows + [{_col(k): c for k, c in f.items()}]) == base


def _col(p):
    return (len(p), p) if p[0] != "e" else (0, (p[1],))


def double_quiver(n_vertices, edges):
    """Arrows a and a* for each (tail, head) edge; returns the quiver and the
    preprojective relators (a a* - a* a summed at each vertex)."""
    arrows = []
    for k, (t, h) in enumerate(edges):
        arrows.append((f"a{k}", t, h))
        arrows.append((f"a{k}*", h, t))
    Q = Quiver(n_vertices, arrows)
    theta: dict = {}
    for k in range(len(edges)):
        a, s = 2 * k, 2 * k + 1
        theta[(a, s)] = theta.get((a, s), 0) + 1
        theta[(s, a)] = theta.get((s, a), 0) - 1
    rels = []
    for v in range(n_vertices):
        part = {p: c for p, c in theta.items() if Q.ends(p)[0] == v}
        if part:
            rels.append((part, 2))
    return Q, rels


def free_algebra(gens):
    return Quiver(1, [(g, 0, 0) for g in gens])


def word(Q, text):
    names = [a[0] for a in Q.arrows]
    return tuple(names.index(ch) for ch in text)
