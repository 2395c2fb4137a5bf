"""Graded and filtered quotients of path algebras.

The graded engine works degree by degree.  With ``I`` the two-sided ideal
generated by homogeneous relators of positive degree,

    I(n) = V * I(n-1) + sum_r r * Path(n - deg r),

so ``Pi(n)`` is the quotient of ``V (x) Pi(n-1)`` (columns ``s.m`` with ``s``
a step and ``m`` a normal word of degree ``n-1``) by the images of
``r * w`` for ``w`` normal of degree ``n - deg r``.  Normal words are the
non-pivot columns of a reduced echelon form whose pivots are the largest
columns under :func:`path_key`; every suffix of a normal word is normal.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .fields import QQ, field_from_tag
from .graph import DynkinClass, bad_primes, classify, extending_vertices
from .linalg import Echelon, axpy
from .pathalg import Carrier, Element, Path, enumerate_paths, path_key, relator, theta

DEFAULT_COLUMN_CAP = 250_000
CACHE_SCHEMA = 1


class ResourceCapError(RuntimeError):
    pass


class DegreeError(ValueError):
    pass


def vertex_relators(carrier: Carrier, lam: Sequence | None = None, field=QQ) -> list[Element]:
    """The nonzero blocks ``e_i (theta - lambda) e_i``."""
    r = relator(carrier, lam, field)
    out = []
    for i in range(len(carrier.vertices)):
        b = r.block(i, i)
        if b:
            out.append(b)
    return out


def _homogeneous_degree(r: Element) -> int:
    ds = r.degrees()
    if len(ds) != 1:
        raise ValueError(f"relator {r} is not homogeneous")
    (d,) = ds
    if d < 1:
        raise ValueError("relators must have positive degree")
    return d


class GradedQuotient:
    """Normal-word bases and reduction tables of ``kQ / (relators)`` up to
    degree ``N``."""

    def __init__(self, carrier: Carrier, relators: Sequence[Element], N: int, field=QQ, cap: int = DEFAULT_COLUMN_CAP):
        if N < 0:
            raise ValueError("N must be >= 0")
        self.carrier = carrier
        self.field = field
        self.relators = list(relators)
        self.cap = cap
        self._by_degree: dict[int, list[Element]] = {}
        for r in self.relators:
            if r.carrier is not carrier:
                raise ValueError("relator lives over another carrier")
            self._by_degree.setdefault(_homogeneous_degree(r), []).append(r)
        self.basis: list[list[Path]] = [sorted((carrier.trivial(v) for v in range(len(carrier.vertices))), key=path_key)]
        # tables[n][column] = normal form, stored for pivot columns only
        self.tables: list[dict[Path, dict]] = [{}]
        self.ranks: list[int] = [0]
        self.N = 0
        self._normal: list[set] = [set(self.basis[0])]
        self.extend(N)

    # -- construction ----------------------------------------------------------

    def extend(self, N: int) -> "GradedQuotient":
        while self.N < N:
            self._build_degree(self.N + 1)
            self.N += 1
        return self

    def _columns(self, n: int) -> list[Path]:
        c = self.carrier
        cols = []
        for m in self.basis[n - 1]:
            for k in c.steps_from[m.target]:
                cols.append(Path(c.steps[k].head, m.source, (k,) + m.steps))
        if len(cols) > self.cap:
            raise ResourceCapError(
                f"degree {n} needs {len(cols)} columns, above the cap of {self.cap}; raise the cap or lower N"
            )
        return cols

    def _build_degree(self, n: int) -> None:
        cols = self._columns(n)
        ech = Echelon(key=path_key)
        for d, rels in sorted(self._by_degree.items()):
            if d > n:
                continue
            for r in rels:
                for w in self.basis[n - d]:
                    row = self._relator_times(r, w, n)
                    if row:
                        ech.add(row)
        pivots = ech.rows
        table = {}
        for p, row in pivots.items():
            nf = {}
            for col, v in row.items():
                if col != p:
                    nf[col] = -v
            table[p] = nf
        self.basis.append(sorted((c for c in cols if c not in pivots), key=path_key))
        self._normal.append(set(self.basis[n]))
        self.tables.append(table)
        self.ranks.append(ech.rank)

    def _relator_times(self, r: Element, w: Path, n: int) -> dict:
        """Image of ``r * w`` in the column space of degree ``n``."""
        out: dict = {}
        for p, c in r.terms.items():
            if p.source != w.target:
                continue
            s, rest = p.steps[0], p.steps[1:]
            tail = Path(self.carrier.steps[s].tail, w.source, rest + w.steps) if rest else w
            for m, d in self._reduce_path(tail).items():
                col = Path(p.target, m.source, (s,) + m.steps)
                v = out.get(col)
                v = c * d if v is None else v + c * d
                if v:
                    out[col] = v
                else:
                    out.pop(col)
        return out

    # -- reduction -------------------------------------------------------------

    def _reduce_path(self, p: Path) -> dict:
        n = p.degree
        if n > self.N:
            raise DegreeError(f"degree {n} exceeds N={self.N}; extend quotient")
        one = self.field.one
        if n == 0:
            return {p: one}
        c = self.carrier
        # fold in traversal order: rightmost step first
        k = p.steps[-1]
        cur = self._lookup(1, Path(c.steps[k].head, p.source, (k,)), one)
        for d in range(2, n + 1):
            k = p.steps[n - d]
            nxt: dict = {}
            for m, v in cur.items():
                axpy(nxt, v, self._lookup(d, Path(c.steps[k].head, m.source, (k,) + m.steps), one))
            cur = nxt
            if not cur:
                break
        return cur

    def _lookup(self, d: int, col: Path, one) -> dict:
        nf = self.tables[d].get(col)
        if nf is None:
            return {col: one}
        return nf

    def reduce_path(self, p: Path) -> dict:
        if p.degree > self.N:
            raise DegreeError(f"degree {p.degree} exceeds N={self.N}; extend quotient")
        return dict(self._reduce_path(p))

    def reduce(self, f: Element) -> Element:
        """Normal form of ``f``."""
        if f.carrier is not self.carrier:
            raise ValueError("element lives over another carrier")
        out: dict = {}
        for p, c in f.terms.items():
            if p.degree > self.N:
                raise DegreeError(f"degree {p.degree} exceeds N={self.N}; extend quotient")
            axpy(out, c, self._reduce_path(p))
        return Element._raw(self.carrier, out, self.field)

    def multiply(self, f: Element, g: Element) -> Element:
        return self.reduce(self.reduce(f) * self.reduce(g))

    def is_normal(self, p: Path) -> bool:
        return p.degree <= self.N and p in self._normal[p.degree]

    # -- dimensions --------------------------------------------------------------

    def dims(self) -> list[int]:
        return [len(b) for b in self.basis]

    def total_dim(self) -> int:
        return sum(self.dims())

    def block_dims(self, n: int) -> list[list[int]]:
        k = len(self.carrier.vertices)
        M = [[0] * k for _ in range(k)]
        for p in self.basis[n]:
            M[p.target][p.source] += 1
        return M

    def hilbert_empirical(self):
        from .series import MatrixSeries

        return MatrixSeries.from_int_blocks([self.block_dims(n) for n in range(self.N + 1)])

    def corner(self, i) -> "Corner":
        i = self.carrier.vertex(i)
        return Corner(self, i, [[p for p in b if p.target == i and p.source == i] for b in self.basis])

    # -- trace space --------------------------------------------------------------

    def _commutator_rows(self, n: int, full: bool = False) -> Iterable[dict]:
        """Spanning set of ``[Pi, Pi](n)`` as reduced vectors.

        The algebra is generated by the ``e_i`` and the steps, and
        ``[ab, c] = [a, bc] + [b, ca]``, so commutators with generators span
        the commutator space.  ``full=True`` uses every pair of basis words
        instead (an oracle for small cases).
        """
        c = self.carrier
        one = self.field.one
        if full:
            pairs = [(u, v) for d in range(n + 1) for u in self.basis[d] for v in self.basis[n - d]]
        else:
            gens = [Path(s.head, s.tail, (k,)) for k, s in enumerate(c.steps)]
            pairs = [(g, v) for g in gens for v in self.basis[n - 1]] if n >= 1 else []
            pairs += [(e, v) for e in self.basis[0] for v in self.basis[n]]
        for u, v in pairs:
            vec: dict = {}
            if v.target == u.source:
                axpy(vec, one, self._reduce_path(Path(u.target, v.source, u.steps + v.steps)))
            if u.target == v.source:
                axpy(vec, -one, self._reduce_path(Path(v.target, u.source, v.steps + u.steps)))
            if vec:
                yield vec

    def commutator_echelon(self, n: int, full: bool = False) -> Echelon:
        if n > self.N:
            raise DegreeError(f"degree {n} exceeds N={self.N}; extend quotient")
        e = Echelon(key=path_key)
        for vec in self._commutator_rows(n, full):
            e.add(vec)
        return e

    def trace_space_dims(self, N: int | None = None, full: bool = False) -> list[int]:
        N = self.N if N is None else N
        return [len(self.basis[n]) - self.commutator_echelon(n, full).rank for n in range(N + 1)]


@dataclass
class Corner:
    quotient: GradedQuotient
    vertex: int
    basis: list[list[Path]]

    def dims(self) -> list[int]:
        return [len(b) for b in self.basis]

    def regraded_dims(self, step: int = 2) -> list[int]:
        """Dims with degree divided by ``step`` (odd degrees must vanish)."""
        d = self.dims()
        if any(d[n] for n in range(len(d)) if n % step):
            raise ValueError(f"corner has elements in degrees not divisible by {step}")
        return d[::step]

    def multiply(self, f: Element, g: Element) -> Element:
        return self.quotient.multiply(f, g)


# ---------------------------------------------------------------------------
# builders


def build_graded(graph_or_carrier, mode: str = "graph", field=QQ, N: int = 8, cap: int = DEFAULT_COLUMN_CAP,
                 cache_dir: str | os.PathLike | None = None) -> GradedQuotient:
    """``Pi^0`` of a graph (``mode="graph"``) or of its double quiver."""
    carrier = Carrier.of(graph_or_carrier, mode)
    if cache_dir is not None and carrier.graph is not None:
        cached = load_cached(carrier, field, N, cache_dir)
        if cached is not None:
            return cached
    q = GradedQuotient(carrier, vertex_relators(carrier, None, field), N, field, cap)
    if cache_dir is not None and carrier.graph is not None:
        store_cached(q, cache_dir)
    return q


def span_oracle_dims(carrier: Carrier, N: int, field=QQ) -> list[int]:
    """Dims of ``Pi^0(n)`` from the literal span of ``u theta v`` over all
    paths ``u, v``.  Exponential; for cross-checks on small carriers."""
    th = theta(carrier, field)
    one = field.one
    dims = []
    for n in range(N + 1):
        paths = enumerate_paths(carrier, n)
        e = Echelon(key=path_key)
        if n >= 2:
            for a in range(n - 1):
                for u in enumerate_paths(carrier, a):
                    for v in enumerate_paths(carrier, n - 2 - a):
                        x = Element.of_path(carrier, u, one, field) * th * Element.of_path(carrier, v, one, field)
                        if x:
                            e.add(x.terms)
        dims.append(len(paths) - e.rank)
    return dims


# ---------------------------------------------------------------------------
# trace-space theorems


@dataclass
class HH0Report:
    verdict: str  # PASS | FAIL | REPORT-ONLY
    dims: list[int]
    degrees: tuple[int, int]
    witness: tuple[int, str] | None = None
    warning: str | None = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "trace_dims": self.dims,
            "degrees": list(self.degrees),
            "witness": list(self.witness) if self.witness else None,
            "warning": self.warning,
        }


def _witness(q: GradedQuotient, n: int, e: Echelon) -> str:
    for p in q.basis[n]:
        if p not in e.rows:
            return q.carrier.format_path(p)
    return ""  # pragma: no cover


def verify_hh0_finite(q: GradedQuotient, cls: DynkinClass | None = None) -> HH0Report:
    """Check ``Pi = [Pi, Pi] + B`` degreewise for ``1 <= n <= h-2``."""
    if cls is None:
        cls = classify(q.carrier.graph, "double" if q.carrier.mode == "double" else "graph")
    if cls.kind != "finite" or cls.family not in ("A", "D", "E"):
        raise ValueError("verify_hh0_finite needs a finite ADE graph")
    top = cls.coxeter - 2
    q.extend(top)
    warning = None
    p = q.field.characteristic
    if p and p in bad_primes(cls):
        warning = f"characteristic {p} is bad for {cls.name}; the theorem gives no guarantee"
    dims = []
    witness = None
    for n in range(1, top + 1):
        e = q.commutator_echelon(n)
        d = len(q.basis[n]) - e.rank
        dims.append(d)
        if d and witness is None:
            witness = (n, _witness(q, n, e))
    if warning:
        return HH0Report("REPORT-ONLY", dims, (1, top), witness, warning)
    return HH0Report("FAIL" if witness else "PASS", dims, (1, top), witness)


def verify_hh0_affine(q: GradedQuotient, i0, N: int) -> HH0Report:
    """Check ``Pi(n) = [Pi, Pi](n) + Pi_{i0 i0}(n)`` for ``1 <= n <= N``."""
    c = q.carrier
    g = c.graph
    mode = "double" if c.mode == "double" else "graph"
    i0 = c.vertex(i0)
    if g is None or c.vertices[i0] not in extending_vertices(g, mode):
        raise ValueError(f"vertex {c.vertices[i0]!r} is not an extending vertex")
    q.extend(N)
    one = q.field.one
    dims = []
    witness = None
    for n in range(1, N + 1):
        e = q.commutator_echelon(n)
        for p in q.basis[n]:
            if p.target == i0 and p.source == i0:
                e.add({p: one})
        d = len(q.basis[n]) - e.rank
        dims.append(d)
        if d and witness is None:
            witness = (n, _witness(q, n, e))
    return HH0Report("FAIL" if witness else "PASS", dims, (1, N), witness)


def top_degree_permutation(q: GradedQuotient, h: int) -> tuple[int, ...] | None:
    """Read a vertex permutation off the blocks of ``Pi(h-2)``; None when the
    nonzero blocks do not form a permutation."""
    q.extend(h - 2)
    M = q.block_dims(h - 2)
    perm = []
    for row in M:
        hits = [j for j, v in enumerate(row) if v]
        if len(hits) != 1 or row[hits[0]] != 1:
            return None
        perm.append(hits[0])
    return tuple(perm) if sorted(perm) == list(range(len(perm))) else None


# ---------------------------------------------------------------------------
# filtered quotient for lambda != 0


class StabilizationError(RuntimeError):
    pass


@dataclass
class FilteredQuotient:
    carrier: Carrier
    field: object
    lam: tuple
    N: int
    delta: int
    dims: list[int]  # dim Pi^lambda_{<= n}
    history: dict = dc_field(default_factory=dict)

    @property
    def total_dim(self) -> int:
        return self.dims[-1]

    def to_json(self) -> dict:
        return {
            "lambda": [str(x) for x in self.lam],
            "N": self.N,
            "delta": self.delta,
            "filtered_dims": self.dims,
            "history": {str(k): v for k, v in sorted(self.history.items())},
        }


def filtered_dims(carrier: Carrier, lam: Sequence, N: int, delta: int, field=QQ, cap: int = DEFAULT_COLUMN_CAP) -> list[int]:
    """``dim Pi^lambda_{<=n}`` for ``n <= N`` computed from relator products of
    total degree at most ``N + delta``."""
    D = N + delta
    rels = vertex_relators(carrier, lam, field)
    paths = [enumerate_paths(carrier, d) for d in range(D + 1)]
    if sum(map(len, paths)) > cap:
        raise ResourceCapError(f"{sum(map(len, paths))} paths up to degree {D}, above the cap of {cap}")
    e = Echelon(key=path_key)
    one = field.one
    for r in rels:
        i = next(iter(r.terms)).target
        for a in range(D - 1):
            for u in paths[a]:
                if u.source != i:
                    continue
                ur = Element.of_path(carrier, u, one, field) * r
                for b in range(D - 1 - a):
                    for v in paths[b]:
                        if v.target != i:
                            continue
                        x = ur * Element.of_path(carrier, v, one, field)
                        if x:
                            e.add(x.terms)
    low = [0] * (D + 1)
    for p in e.rows:
        low[p.degree] += 1
    out = []
    acc_paths = acc_rows = 0
    for n in range(N + 1):
        acc_paths += len(paths[n])
        acc_rows += low[n]
        out.append(acc_paths - acc_rows)
    return out


def build_filtered(graph_or_carrier, lam: Sequence, mode: str = "double", field=QQ, N: int | None = None,
                   delta_max: int = 8, cap: int = DEFAULT_COLUMN_CAP) -> FilteredQuotient:
    """Filtered dims of ``Pi^lambda``, certified by stability under
    ``delta -> delta + 2``."""
    carrier = Carrier.of(graph_or_carrier, mode)
    lam = tuple(field(x) for x in lam)
    if len(lam) != len(carrier.vertices):
        raise ValueError(f"lambda has length {len(lam)}, expected {len(carrier.vertices)}")
    if not any(lam):
        raise ValueError("build_filtered needs lambda != 0; use build_graded")
    if N is None:
        N = 4
    history = {}
    prev = None
    for delta in range(0, delta_max + 1, 2):
        dims = filtered_dims(carrier, lam, N, delta, field, cap)
        history[delta] = dims
        if prev is not None and dims == prev:
            return FilteredQuotient(carrier, field, lam, N, delta - 2, dims, history)
        prev = dims
    raise StabilizationError(f"filtered dims did not stabilize by delta={delta_max}; increase delta_max")


# ---------------------------------------------------------------------------
# finitely presented graded algebras


@dataclass
class Presentation:
    generators: tuple[str, ...]
    relators: tuple[str, ...]  # element literals over the free carrier
    field: object = QQ

    def __post_init__(self):
        self.carrier = Carrier.free(self.generators)
        self.relator_elements = [Element.parse(self.carrier, r, self.field) for r in self.relators]
        for r in self.relator_elements:
            if len(r.degrees()) != 1:
                raise ValueError(f"relator {r} is not homogeneous")

    def element(self, text: str) -> Element:
        return Element.parse(self.carrier, text, self.field)

    def word(self, letters: str | Sequence[str]) -> Element:
        """Monomial from a written-order letter sequence."""
        letters = list(letters)
        if not letters:
            return Element.unit(self.carrier, self.field)
        return Element.of_path(self.carrier, self.carrier.path(letters), 1, self.field)


def presentation_quotient(p: Presentation, N: int, cap: int = DEFAULT_COLUMN_CAP) -> GradedQuotient:
    return GradedQuotient(p.carrier, [r for r in p.relator_elements if r], N, p.field, cap)


def star_presentation(p: Sequence[int], field=QQ) -> Presentation:
    """``<x_r | x_r^{p_r}, sum_r x_r>``."""
    gens = tuple(f"x{r}" for r in range(1, len(p) + 1))
    rels = tuple(".".join([g] * k) for g, k in zip(gens, p)) + (" + ".join(gens),)
    return Presentation(gens, rels, field)


def kleinian_presentation(a: int, b: int, c: int, field=QQ) -> Presentation:
    """``<x, y, z | x^a, y^b, z^c, x + y + z>``."""
    gens = ("x", "y", "z")
    rels = (".".join("x" * a), ".".join("y" * b), ".".join("z" * c), "x + y + z")
    return Presentation(gens, rels, field)


def verify_identity(f: Element, q: GradedQuotient) -> bool:
    return not q.reduce(f)


# ---------------------------------------------------------------------------
# cache


def cache_key(carrier: Carrier, field, N: int) -> str:
    if carrier.graph is None:
        raise ValueError("only graph carriers are cached")
    blob = json.dumps(
        {"graph": carrier.graph.canonical_json(), "mode": carrier.mode, "field": field.tag, "N": N},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def _cache_file(carrier, field, N, cache_dir) -> FsPath:
    return FsPath(cache_dir) / f"{cache_key(carrier, field, N)}.json"


def store_cached(q: GradedQuotient, cache_dir) -> FsPath:
    c = q.carrier
    fmt = c.format_path
    data = {
        "schema": CACHE_SCHEMA,
        "key": cache_key(c, q.field, q.N),
        "mode": c.mode,
        "field": q.field.tag,
        "N": q.N,
        "degree_dims": q.dims(),
        "bases": [[fmt(p) for p in b] for b in q.basis],
        "tables": [
            {fmt(col): {fmt(m): str(v) for m, v in sorted(nf.items(), key=lambda kv: path_key(kv[0]))}
             for col, nf in sorted(t.items(), key=lambda kv: path_key(kv[0]))}
            for t in q.tables
        ],
        "ranks": q.ranks,
    }
    d = FsPath(cache_dir)
    d.mkdir(parents=True, exist_ok=True)
    target = _cache_file(c, q.field, q.N, d)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, sort_keys=True)
    os.replace(tmp, target)
    return target


def load_cached(carrier: Carrier, field, N: int, cache_dir) -> GradedQuotient | None:
    f = _cache_file(carrier, field, N, cache_dir)
    if not f.exists():
        return None
    try:
        data = json.loads(f.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if data.get("schema") != CACHE_SCHEMA or data.get("key") != cache_key(carrier, field, N):
        return None
    fld = field_from_tag(data["field"])
    parse = carrier.parse_path
    q = GradedQuotient.__new__(GradedQuotient)
    q.carrier = carrier
    q.field = fld
    q.relators = vertex_relators(carrier, None, fld)
    q.cap = DEFAULT_COLUMN_CAP
    q._by_degree = {2: q.relators} if q.relators else {}
    q.basis = [[parse(s) for s in b] for b in data["bases"]]
    q._normal = [set(b) for b in q.basis]
    q.tables = [{parse(k): {parse(m): fld(v) for m, v in nf.items()} for k, nf in t.items()} for t in data["tables"]]
    q.ranks = list(data["ranks"])
    q.N = data["N"]
    return q
