"""Free path algebras over a graph or a double quiver.

Composition convention: ``f * g`` is "f after g", i.e. ``g`` is traversed
first.  Paths are stored in written order, so the rightmost step of
``Path.steps`` is traversed first and representations satisfy
``x(f * g) = x(f) x(g)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

from .fields import QQ
from .graph import DoubleQuiver, Graph, Quiver


class Step(NamedTuple):
    id: str
    tail: int
    head: int


class Path(NamedTuple):
    target: int
    source: int
    steps: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.steps)

    @property
    def is_cycle(self) -> bool:
        return self.target == self.source


def path_key(p: Path):
    """Deterministic order: degree, then the step sequence."""
    return (len(p.steps), p.steps, p.target, p.source)


@dataclass(frozen=True, eq=False)
class Carrier:
    """Vertices and degree-one steps of a path algebra.

    ``mode`` is ``"graph"`` (an edge gives a step each way, a self-loop a
    single step), ``"double"`` (arrows ``a`` and ``a*``) or ``"free"`` (loops
    at a single vertex, used for finitely presented algebras).
    """

    vertices: tuple[str, ...]
    steps: tuple[Step, ...]
    mode: str
    reverse: tuple[int, ...]
    original: tuple[bool, ...]
    graph: Graph | None = None

    def __post_init__(self):
        object.__setattr__(self, "_step_index", {s.id: k for k, s in enumerate(self.steps)})
        object.__setattr__(self, "_vertex_index", {v: k for k, v in enumerate(self.vertices)})
        out: list[list[int]] = [[] for _ in self.vertices]
        into: list[list[int]] = [[] for _ in self.vertices]
        for k, s in enumerate(self.steps):
            out[s.tail].append(k)
            into[s.head].append(k)
        object.__setattr__(self, "steps_from", tuple(tuple(x) for x in out))
        object.__setattr__(self, "steps_into", tuple(tuple(x) for x in into))

    # -- constructors ------------------------------------------------------

    @classmethod
    def of(cls, obj, mode: str = "graph") -> "Carrier":
        if isinstance(obj, Carrier):
            return obj
        if isinstance(obj, DoubleQuiver):
            return cls.double(obj)
        if isinstance(obj, Quiver):
            obj = obj.graph
        if mode == "double":
            return cls.double(DoubleQuiver.of(obj))
        if mode != "graph":
            raise ValueError(f"unknown mode {mode!r}")
        return cls.from_graph(obj)

    @classmethod
    def from_graph(cls, g: Graph) -> "Carrier":
        idx = g.index
        raw = []
        for (a, b), eid in zip(g.edges, g.edge_ids):
            if a == b:
                raw.append((eid, idx[a], idx[b], eid, True))
            else:
                raw.append((eid, idx[a], idx[b], eid + "*", True))
                raw.append((eid + "*", idx[b], idx[a], eid, False))
        return cls._build(g.vertices, raw, "graph", g)

    @classmethod
    def double(cls, dq: DoubleQuiver) -> "Carrier":
        idx = {v: k for k, v in enumerate(dq.vertices)}
        raw = []
        for aid, t, h in dq.quiver.arrows:
            raw.append((aid, idx[t], idx[h], aid + "*", True))
            raw.append((aid + "*", idx[h], idx[t], aid, False))
        return cls._build(dq.vertices, raw, "double", dq.graph)

    @classmethod
    def free(cls, generators: Sequence[str], vertex: str = "*") -> "Carrier":
        raw = [(g, 0, 0, g, True) for g in generators]
        return cls._build((vertex,), raw, "free", None)

    @classmethod
    def _build(cls, vertices, raw, mode, graph):
        raw = sorted(raw, key=lambda r: r[0])
        pos = {r[0]: k for k, r in enumerate(raw)}
        steps = tuple(Step(r[0], r[1], r[2]) for r in raw)
        return cls(
            tuple(vertices),
            steps,
            mode,
            tuple(pos[r[3]] for r in raw),
            tuple(r[4] for r in raw),
            graph,
        )

    # -- lookups -----------------------------------------------------------

    def vertex(self, name) -> int:
        if isinstance(name, int):
            return name
        try:
            return self._vertex_index[str(name)]
        except KeyError:
            raise KeyError(f"unknown vertex {name!r}") from None

    def step(self, sid: str) -> int:
        try:
            return self._step_index[sid]
        except KeyError:
            raise KeyError(f"unknown arrow {sid!r}") from None

    def trivial(self, v) -> Path:
        v = self.vertex(v)
        return Path(v, v, ())

    def path(self, steps: Sequence[int | str]) -> Path:
        """Path from a written-order step list (rightmost traversed first)."""
        ks = tuple(self.step(s) if isinstance(s, str) else s for s in steps)
        if not ks:
            raise ValueError("use trivial() for paths of length zero")
        for left, right in zip(ks, ks[1:]):
            if self.steps[right].head != self.steps[left].tail:
                raise ValueError("steps are not composable")
        return Path(self.steps[ks[0]].head, self.steps[ks[-1]].tail, ks)

    def adjacency(self) -> list[list[int]]:
        n = len(self.vertices)
        A = [[0] * n for _ in range(n)]
        for s in self.steps:
            A[s.head][s.tail] += 1
        return A

    # -- path literals -----------------------------------------------------

    def format_path(self, p: Path) -> str:
        if not p.steps:
            return f"e:{self.vertices[p.target]}"
        return ".".join(self.steps[k].id for k in p.steps)

    def parse_path(self, text: str) -> Path:
        text = text.strip()
        if text.startswith("e:"):
            return self.trivial(text[2:])
        return self.path(text.split("."))

    def __repr__(self):
        return f"Carrier({self.mode}, {len(self.vertices)} vertices, {len(self.steps)} steps)"


def concat_paths(f: Path, g: Path) -> Path | None:
    """``f`` after ``g``; None when ``g`` does not end where ``f`` starts."""
    if g.target != f.source:
        return None
    return Path(f.target, g.source, f.steps + g.steps)


_SPLIT = re.compile(r"\s+([+-])\s+")
_COEF = re.compile(r"^([0-9]+(?:/[0-9]+)?)\s*\*\s*(\S+)$")


class Element:
    """Finite linear combination of paths with coefficients in a field."""

    __slots__ = ("carrier", "field", "terms")

    def __init__(self, carrier: Carrier, terms: dict | None = None, field=QQ):
        self.carrier = carrier
        self.field = field
        clean = {}
        for p, c in (terms or {}).items():
            c = field(c) if not _is_field_elem(c, field) else c
            if c:
                clean[p] = c
        self.terms = clean

    @classmethod
    def _raw(cls, carrier, terms, field):
        e = cls.__new__(cls)
        e.carrier, e.field, e.terms = carrier, field, terms
        return e

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, carrier, field=QQ) -> "Element":
        return cls._raw(carrier, {}, field)

    @classmethod
    def of_path(cls, carrier, p: Path, coef=1, field=QQ) -> "Element":
        return cls(carrier, {p: coef}, field)

    @classmethod
    def unit(cls, carrier, field=QQ) -> "Element":
        return cls(carrier, {carrier.trivial(v): 1 for v in range(len(carrier.vertices))}, field)

    @classmethod
    def vertex_scalars(cls, carrier, lam: Sequence, field=QQ) -> "Element":
        """``sum_i lam_i e_i``."""
        if len(lam) != len(carrier.vertices):
            raise ValueError(f"lambda has length {len(lam)}, expected {len(carrier.vertices)}")
        return cls(carrier, {carrier.trivial(i): c for i, c in enumerate(lam)}, field)

    @classmethod
    def parse(cls, carrier, text: str, field=QQ) -> "Element":
        """Parse ``"3/2*a1.a2 - 1*e:v"``."""
        terms: dict = {}
        s = text.strip()
        if s in ("", "0"):
            return cls.zero(carrier, field)
        lead = "+"
        if s[0] in "+-":
            lead, s = s[0], s[1:].strip()
        parts = _SPLIT.split(s)
        signs = [lead] + parts[1::2]
        for sign, term in zip(signs, parts[0::2]):
            m = _COEF.match(term.strip())
            coef, word = (m.group(1), m.group(2)) if m else ("1", term.strip())
            if not word or " " in word:
                raise ValueError(f"cannot parse term {term!r}")
            c = field(coef)
            if sign == "-":
                c = -c
            p = carrier.parse_path(word)
            terms[p] = terms.get(p, field.zero) + c
        return cls(carrier, terms, field)

    # -- arithmetic -----------------------------------------------------------

    def _check(self, other: "Element"):
        if not isinstance(other, Element):
            raise TypeError(f"expected an Element, got {type(other).__name__}")
        if other.carrier is not self.carrier or other.field != self.field:
            raise ValueError("elements live over different carriers or fields")

    def __add__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        self._check(other)
        t = dict(self.terms)
        for p, c in other.terms.items():
            v = t.get(p)
            v = c if v is None else v + c
            if v:
                t[p] = v
            else:
                t.pop(p, None)
        return Element._raw(self.carrier, t, self.field)

    def __neg__(self):
        return Element._raw(self.carrier, {p: -c for p, c in self.terms.items()}, self.field)

    def __sub__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "Element":
        c = self.field(c) if not _is_field_elem(c, self.field) else c
        if not c:
            return Element.zero(self.carrier, self.field)
        return Element._raw(self.carrier, {p: c * v for p, v in self.terms.items()}, self.field)

    def __mul__(self, other):
        if isinstance(other, Element):
            return concat(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, Element):  # pragma: no cover
            return concat(other, self)
        return self.scale(other)

    def __pow__(self, k: int):
        out = Element.unit(self.carrier, self.field)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.carrier is other.carrier and self.terms == other.terms

    def __hash__(self):  # pragma: no cover - elements are not meant as keys
        raise TypeError("Element is unhashable")

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[Path, object]]:
        return iter(sorted(self.terms.items(), key=lambda kv: path_key(kv[0])))

    # -- structure ------------------------------------------------------------

    def degrees(self) -> set[int]:
        return {p.degree for p in self.terms}

    def degree(self) -> int:
        return max(self.degrees(), default=-1)

    def homogeneous(self, n: int) -> "Element":
        return Element._raw(self.carrier, {p: c for p, c in self.terms.items() if p.degree == n}, self.field)

    def block(self, i: int, j: int) -> "Element":
        """``e_i * self * e_j``."""
        return Element._raw(
            self.carrier, {p: c for p, c in self.terms.items() if p.target == i and p.source == j}, self.field
        )

    def blocks(self) -> set[tuple[int, int]]:
        return {(p.target, p.source) for p in self.terms}

    def coefficient(self, p: Path):
        return self.terms.get(p, self.field.zero)

    def format(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for p, c in self:
            s = str(c)
            neg = s.startswith("-")
            s = s.lstrip("-")
            body = f"{s}*{self.carrier.format_path(p)}"
            parts.append(("- " if neg else "+ ") + body)
        out = " ".join(parts)
        return out[2:] if out.startswith("+ ") else "-" + out[1:]

    __str__ = format

    def __repr__(self):
        return f"Element({self.format()})"


def _is_field_elem(c, field) -> bool:
    return type(c) is type(field.zero)


def concat(f: Element, g: Element) -> Element:
    f._check(g)
    out: dict = {}
    by_target: dict[int, list] = {}
    for q, d in g.terms.items():
        by_target.setdefault(q.target, []).append((q, d))
    for p, c in f.terms.items():
        for q, d in by_target.get(p.source, ()):
            r = Path(p.target, q.source, p.steps + q.steps)
            v = out.get(r)
            v = c * d if v is None else v + c * d
            if v:
                out[r] = v
            else:
                out.pop(r)
    return Element._raw(f.carrier, out, f.field)


def theta(carrier: Carrier, field=QQ) -> Element:
    """Sum of out-and-back paths (graph mode) or of ``a a* - a* a`` (double mode)."""
    t: dict[Path, object] = {}
    one = field.one
    for k, s in enumerate(carrier.steps):
        r = carrier.reverse[k]
        if carrier.mode == "graph":
            if r == k:
                # self-loop: a single term, the loop traversed twice
                p = Path(s.tail, s.tail, (k, k))
                t[p] = t.get(p, field.zero) + one
            else:
                # out along s, back along its reverse: a cycle at tail(s)
                p = Path(s.tail, s.tail, (r, k))
                t[p] = t.get(p, field.zero) + one
        elif carrier.mode == "double":
            if carrier.original[k]:
                # a a* is a cycle at head(a); a* a a cycle at tail(a)
                p1 = Path(s.head, s.head, (k, r))
                p2 = Path(s.tail, s.tail, (r, k))
                t[p1] = t.get(p1, field.zero) + one
                t[p2] = t.get(p2, field.zero) - one
        else:
            raise ValueError("theta is defined for graph and double carriers only")
    return Element(carrier, t, field)


def theta_omega(carrier: Carrier, field=QQ) -> Element:
    if carrier.mode != "double":
        raise ValueError("theta_omega needs a double-quiver carrier")
    return theta(carrier, field)


def relator(carrier: Carrier, lam: Sequence | None = None, field=QQ) -> Element:
    """``theta - lambda``."""
    th = theta(carrier, field)
    if lam is None:
        return th
    return th - Element.vertex_scalars(carrier, lam, field)


def lusztig_product(f: Element, g: Element, lam: Sequence, theta_elem: Element | None = None) -> Element:
    """``f o g = f * (theta - lambda) * g``."""
    f._check(g)
    c = f.carrier
    if len(lam) != len(c.vertices):
        raise ValueError(f"lambda has length {len(lam)}, expected {len(c.vertices)}")
    th = theta_elem if theta_elem is not None else theta(c, f.field)
    mid = th - Element.vertex_scalars(c, lam, f.field)
    return f * mid * g


def enumerate_paths(carrier: Carrier, n: int, endpoints: tuple | None = None) -> list[Path]:
    """All paths of degree ``n``, optionally restricted to target ``i`` and
    source ``j`` when ``endpoints = (i, j)``; sorted by :func:`path_key`."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    tgt = src = None
    if endpoints is not None:
        tgt, src = carrier.vertex(endpoints[0]), carrier.vertex(endpoints[1])
    starts = range(len(carrier.vertices)) if src is None else (src,)
    layer = [Path(v, v, ()) for v in starts]
    for _ in range(n):
        layer = [
            Path(carrier.steps[k].head, p.source, (k,) + p.steps)
            for p in layer
            for k in carrier.steps_from[p.target]
        ]
    if tgt is not None:
        layer = [p for p in layer if p.target == tgt]
    return sorted(layer, key=path_key)


def iter_paths_upto(carrier: Carrier, n: int) -> Iterable[Path]:
    for d in range(n + 1):
        yield from enumerate_paths(carrier, d)


def rotations(p: Path, carrier: Carrier) -> list[Path]:
    """All cyclic rotations of a cycle (as paths with their new base points)."""
    if not p.is_cycle:
        raise ValueError("rotations need a cycle")
    if not p.steps:
        return [p]
    out = []
    n = len(p.steps)
    for k in range(n):
        st = p.steps[k:] + p.steps[:k]
        out.append(Path(carrier.steps[st[0]].head, carrier.steps[st[-1]].tail, st))
    return out


def cyclic_class(p: Path, carrier: Carrier) -> Path:
    """Canonical representative of the cyclic class of a cycle."""
    return min(rotations(p, carrier), key=path_key)


def cyclic_reduce(f: Element) -> Element:
    """Project onto cyclic classes: non-cycles vanish, cycles are replaced by
    their canonical rotation."""
    out: dict = {}
    for p, c in f.terms.items():
        if not p.is_cycle:
            continue
        q = cyclic_class(p, f.carrier)
        v = out.get(q)
        v = c if v is None else v + c
        if v:
            out[q] = v
        else:
            out.pop(q)
    return Element._raw(f.carrier, out, f.field)
