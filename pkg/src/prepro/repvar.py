"""Framed representations of a double quiver: moment map, the map
``f -> q x(f) p``, trace decompositions and Poisson brackets.

Matrices are numpy object arrays holding exact ``mpq`` entries; numpy is only
used for shape bookkeeping and products, never for floating point.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from gmpy2 import mpq

from .fields import QQ
from .graph import DoubleQuiver, Graph, Quiver
from .linalg import Echelon, axpy, inverse
from .pathalg import Carrier, Element, Path, cyclic_class, cyclic_reduce, enumerate_paths, lusztig_product, path_key, theta


class FiberError(ValueError):
    pass


def zeros(r: int, c: int) -> np.ndarray:
    M = np.empty((r, c), dtype=object)
    M.fill(mpq(0))
    return M


def eye(n: int) -> np.ndarray:
    M = zeros(n, n)
    for i in range(n):
        M[i, i] = mpq(1)
    return M


def as_matrix(rows, r: int, c: int) -> np.ndarray:
    M = zeros(r, c)
    if r and c:
        data = [[mpq(v) for v in row] for row in rows]
        if len(data) != r or any(len(row) != c for row in data):
            raise ValueError(f"expected a {r}x{c} matrix")
        for i in range(r):
            for j in range(c):
                M[i, j] = data[i][j]
    return M


def mat_inverse(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    if n == 0:
        return zeros(0, 0)
    inv = inverse(tuple(tuple(r) for r in M))
    return as_matrix(inv, n, n)


def _fmt(v) -> str:
    v = mpq(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _rows(M: np.ndarray) -> list:
    return [[_fmt(v) for v in row] for row in M]


def _trace(M: np.ndarray):
    return sum((M[i, i] for i in range(M.shape[0])), mpq(0))


def double_carrier(obj) -> Carrier:
    c = Carrier.of(obj, "double")
    if c.mode != "double":
        raise ValueError("representation spaces need a double-quiver carrier")
    return c


class RepPoint:
    """A point ``(x, p, q)`` with ``x(a): V_tail -> V_head``, ``p_i: D_i -> V_i``
    and ``q_i: V_i -> D_i``."""

    def __init__(self, carrier: Carrier, dimV: Sequence[int], dimD: Sequence[int], x: dict, p: Sequence, q: Sequence):
        self.carrier = double_carrier(carrier)
        n = len(self.carrier.vertices)
        self.dimV = tuple(int(d) for d in dimV)
        self.dimD = tuple(int(d) for d in dimD)
        if len(self.dimV) != n or len(self.dimD) != n:
            raise ValueError(f"dimension vectors need length {n}")
        if any(d < 0 for d in self.dimV + self.dimD):
            raise ValueError("dimensions must be >= 0")
        self.x = {}
        for k, s in enumerate(self.carrier.steps):
            M = x[k]
            if M.shape != (self.dimV[s.head], self.dimV[s.tail]):
                raise ValueError(f"x({s.id}) has shape {M.shape}")
            self.x[k] = M
        self.p = tuple(p)
        self.q = tuple(q)
        for i in range(n):
            if self.p[i].shape != (self.dimV[i], self.dimD[i]) or self.q[i].shape != (self.dimD[i], self.dimV[i]):
                raise ValueError(f"framing maps at vertex {self.carrier.vertices[i]} have wrong shapes")
        self._cache: dict = {}

    # -- evaluation ------------------------------------------------------------

    def x_path(self, p: Path) -> np.ndarray:
        M = self._cache.get(p)
        if M is not None:
            return M
        if not p.steps:
            M = eye(self.dimV[p.target])
        else:
            M = self.x[p.steps[0]]
            for k in p.steps[1:]:
                M = M @ self.x[k]
        self._cache[p] = M
        return M

    def x_block(self, f: Element, i: int, j: int) -> np.ndarray:
        M = zeros(self.dimV[i], self.dimV[j])
        for p, c in f.terms.items():
            if p.target == i and p.source == j:
                M = M + c * self.x_path(p)
        return M

    def x_trace(self, f: Element):
        """``Tr x(f)``; only cycles contribute."""
        total = mpq(0)
        for p, c in f.terms.items():
            if p.is_cycle:
                total += c * _trace(self.x_path(p))
        return total

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for d in self.dimD:
            out.append(acc)
            acc += d
        return out

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        c = self.carrier
        return {
            "graph": c.graph.to_json() if c.graph is not None else None,
            "vertices": list(c.vertices),
            "dimV": list(self.dimV),
            "dimD": list(self.dimD),
            "x": {c.steps[k].id: _rows(M) for k, M in sorted(self.x.items())},
            "p": {c.vertices[i]: _rows(M) for i, M in enumerate(self.p)},
            "q": {c.vertices[i]: _rows(M) for i, M in enumerate(self.q)},
        }

    @classmethod
    def from_json(cls, data: dict, carrier: Carrier | None = None) -> "RepPoint":
        if carrier is None:
            carrier = double_carrier(Graph.from_json(data["graph"]))
        dimV, dimD = data["dimV"], data["dimD"]
        x = {}
        for k, s in enumerate(carrier.steps):
            x[k] = as_matrix(data["x"][s.id], dimV[s.head], dimV[s.tail])
        p = [as_matrix(data["p"][v], dimV[i], dimD[i]) for i, v in enumerate(carrier.vertices)]
        q = [as_matrix(data["q"][v], dimD[i], dimV[i]) for i, v in enumerate(carrier.vertices)]
        return cls(carrier, dimV, dimD, x, p, q)

    def __eq__(self, other):
        if not isinstance(other, RepPoint):
            return NotImplemented
        return self.to_json() == other.to_json()


def zero_point(carrier, dimV, dimD) -> RepPoint:
    c = double_carrier(carrier)
    if len(dimV) != len(c.vertices) or len(dimD) != len(c.vertices):
        raise ValueError(f"dimension vectors need length {len(c.vertices)}")
    x = {k: zeros(dimV[s.head], dimV[s.tail]) for k, s in enumerate(c.steps)}
    p = [zeros(dimV[i], dimD[i]) for i in range(len(c.vertices))]
    q = [zeros(dimD[i], dimV[i]) for i in range(len(c.vertices))]
    return RepPoint(c, dimV, dimD, x, p, q)


# ---------------------------------------------------------------------------
# moment map and sampling


def moment(r: RepPoint) -> list[np.ndarray]:
    """``mu_i = sum_{head a = i} x(a)x(a*) - sum_{tail a = i} x(a*)x(a) - p_i q_i``."""
    c = r.carrier
    mu = [zeros(d, d) - r.p[i] @ r.q[i] for i, d in enumerate(r.dimV)]
    for k, s in enumerate(c.steps):
        if not c.original[k]:
            continue
        ks = c.reverse[k]
        mu[s.head] = mu[s.head] + r.x[k] @ r.x[ks]
        mu[s.tail] = mu[s.tail] - r.x[ks] @ r.x[k]
    return mu


def on_fiber(r: RepPoint, lam: Sequence) -> bool:
    lam = [mpq(v) for v in lam]
    return all(np.array_equal(m, lam[i] * eye(r.dimV[i])) for i, m in enumerate(moment(r)))


def _random_matrix(rng: random.Random, r: int, c: int, lo: int = -3, hi: int = 3) -> np.ndarray:
    return as_matrix([[rng.randint(lo, hi) for _ in range(c)] for _ in range(r)], r, c)


def _left_inverse(Q: np.ndarray) -> np.ndarray | None:
    """``L`` with ``L Q = 1`` supported on the first invertible set of rows of
    ``Q`` (greedy), or None when ``Q`` is not injective."""
    d, v = Q.shape
    rows: list[int] = []
    ech = Echelon()
    for s in range(d):
        if ech.add({j: Q[s, j] for j in range(v) if Q[s, j]}):
            rows.append(s)
        if len(rows) == v:
            break
    if len(rows) < v:
        return None
    inv = mat_inverse(Q[rows, :])
    L = zeros(v, d)
    for k, s in enumerate(rows):
        L[:, s] = inv[:, k]
    return L


def sample_moment_fiber(carrier, dimV, dimD, lam, seed: int, max_tries: int = 1000) -> RepPoint:
    """Random point of ``mu^{-1}(lambda)``: random ``x``, random injective
    ``q``, then ``p_i = M_i L_i`` with ``M_i = x(theta)_i - lambda_i`` and
    ``L_i`` a left inverse of ``q_i``."""
    c = double_carrier(carrier)
    n = len(c.vertices)
    if len(dimV) != n or len(dimD) != n or len(lam) != n:
        raise ValueError(f"dimension vectors and lambda need length {n}")
    if any(dv > dd for dv, dd in zip(dimV, dimD)):
        raise ValueError("sampler requires dimD >= dimV")
    rng = random.Random(seed)
    lam = [mpq(v) for v in lam]
    x = {k: _random_matrix(rng, dimV[s.head], dimV[s.tail]) for k, s in enumerate(c.steps)}
    q = []
    lefts = []
    for i in range(n):
        for _ in range(max_tries):
            Q = _random_matrix(rng, dimD[i], dimV[i])
            L = _left_inverse(Q)
            if L is not None:
                break
        else:  # pragma: no cover - astronomically unlikely
            raise RuntimeError("could not draw an injective q")
        q.append(Q)
        lefts.append(L)
    partial = RepPoint(c, dimV, dimD, x, [zeros(dimV[i], dimD[i]) for i in range(n)], q)
    th = theta(c)
    p = []
    for i in range(n):
        M = partial.x_block(th, i, i) - lam[i] * eye(dimV[i])
        p.append(M @ lefts[i] if dimV[i] else zeros(0, dimD[i]))
    return RepPoint(c, dimV, dimD, x, p, q)


# ---------------------------------------------------------------------------
# the map f -> q x(f) p


def lusztig_map(r: RepPoint, f: Element) -> np.ndarray:
    """``sum_paths c q_i x(path) p_j`` as a block matrix on ``D = sum D_i``."""
    off = r.offsets()
    total = sum(r.dimD)
    out = zeros(total, total)
    for p, c in f.terms.items():
        i, j = p.target, p.source
        if not r.dimD[i] or not r.dimD[j]:
            continue
        block = r.q[i] @ r.x_path(p) @ r.p[j]
        out[off[i]: off[i] + r.dimD[i], off[j]: off[j] + r.dimD[j]] += c * block
    return out


def lvalue_block(r: RepPoint, f: Element, i: int, j: int) -> np.ndarray:
    off = r.offsets()
    M = lusztig_map(r, f)
    return M[off[i]: off[i] + r.dimD[i], off[j]: off[j] + r.dimD[j]]


def check_hom(r: RepPoint, lam, f: Element, g: Element) -> bool:
    if not on_fiber(r, lam):
        raise FiberError("point not on the fiber")
    lhs = lusztig_map(r, f) @ lusztig_map(r, g)
    rhs = lusztig_map(r, lusztig_product(f, g, [mpq(v) for v in lam]))
    return bool(np.array_equal(lhs, rhs))


def gl_action(r: RepPoint, g: Sequence[np.ndarray]) -> RepPoint:
    c = r.carrier
    ginv = []
    for i, gi in enumerate(g):
        if gi.shape != (r.dimV[i], r.dimV[i]):
            raise ValueError(f"g at vertex {c.vertices[i]} has shape {gi.shape}")
        try:
            ginv.append(mat_inverse(gi))
        except ValueError:
            raise ValueError(f"g at vertex {c.vertices[i]} is singular") from None
    x = {k: g[s.head] @ r.x[k] @ ginv[s.tail] for k, s in enumerate(c.steps)}
    p = [g[i] @ r.p[i] for i in range(len(g))]
    q = [r.q[i] @ ginv[i] for i in range(len(g))]
    return RepPoint(c, r.dimV, r.dimD, x, p, q)


def random_gl(dimV: Sequence[int], rng: random.Random) -> list[np.ndarray]:
    out = []
    for d in dimV:
        while True:
            M = _random_matrix(rng, d, d)
            try:
                mat_inverse(M)
            except ValueError:
                continue
            out.append(M)
            break
    return out


def random_path(carrier: Carrier, length: int, rng: random.Random, start: int | None = None) -> Path:
    """Random walk of the given length (trivial path when 0)."""
    v = rng.randrange(len(carrier.vertices)) if start is None else start
    p = Path(v, v, ())
    for _ in range(length):
        out = carrier.steps_from[p.target]
        if not out:
            break
        k = rng.choice(out)
        p = Path(carrier.steps[k].head, p.source, (k,) + p.steps)
    return p


def random_cycle(carrier: Carrier, max_len: int, rng: random.Random) -> Path:
    """Uniform choice among all cycles of a random length ``<= max_len``."""
    while True:
        n = rng.randint(0, max_len)
        cycles = [p for p in enumerate_paths(carrier, n) if p.is_cycle]
        if cycles:
            return rng.choice(cycles)


# ---------------------------------------------------------------------------
# trace decomposition


class DecompositionError(ArithmeticError):
    pass


@dataclass
class TraceDecomposition:
    f_prime: Element
    constant: dict  # vertex index -> coefficient a_i, so that c = sum a_i dimV_i

    def c(self, dimV: Sequence[int]):
        return sum((a * dimV[i] for i, a in self.constant.items()), mpq(0))

    def to_json(self) -> dict:
        c = self.f_prime.carrier
        return {
            "f_prime": self.f_prime.format(),
            "constant": {c.vertices[i]: _fmt(a) for i, a in sorted(self.constant.items())},
        }


def _cycles_at(carrier: Carrier, i: int, n: int) -> list[Path]:
    return enumerate_paths(carrier, n, (i, i)) if n >= 0 else []


def trace_decompose(f, carrier: Carrier, lam: Sequence) -> TraceDecomposition:
    """Write ``Tr x(f) = Tr(q x(f') p) + c`` on ``mu^{-1}(lambda)``.

    Degree by degree from the top, the cyclic class of the homogeneous part
    is expressed as a combination of cyclic classes of ``theta_i w``; each
    ``theta_i w`` contributes ``w`` to ``f'`` and ``lambda_i w`` to the
    remainder (because ``x(theta)_i = lambda_i + p_i q_i`` on the fiber).
    Degree-0 leftovers give ``c``.
    """
    c = double_carrier(carrier)
    if isinstance(f, Path):
        f = Element.of_path(c, f)
    if any(not p.is_cycle for p in f.terms):
        raise ValueError("trace_decompose needs a combination of cycles")
    lam = [mpq(v) for v in lam]
    th = theta(c)
    blocks = {i: th.block(i, i) for i in range(len(c.vertices))}
    rest = cyclic_reduce(f)
    f_prime = Element.zero(c)
    for n in range(max(rest.degree(), 0), 0, -1):
        part = rest.homogeneous(n)
        if not part:
            continue
        rest = rest - part
        ech = Echelon(key=path_key, track=True)
        for i, t in blocks.items():
            if not t:
                continue
            for w in _cycles_at(c, i, n - 2):
                vec = cyclic_reduce(t * Element.of_path(c, w))
                if vec:
                    ech.add(vec.terms, (i, w))
        coef = ech.express(part.terms)
        if coef is None:
            raise DecompositionError(
                f"degree-{n} part is not a combination of relator classes modulo commutators"
            )
        for (i, w), a in coef.items():
            f_prime = f_prime + Element.of_path(c, w, a)
            if lam[i]:
                rest = rest + Element.of_path(c, w, a * lam[i])
        rest = cyclic_reduce(rest)
    constant = {}
    for p, a in rest.terms.items():
        if p.degree != 0:  # pragma: no cover - loop above clears positive degrees
            raise DecompositionError("leftover positive-degree terms")
        constant[p.target] = constant.get(p.target, mpq(0)) + a
    return TraceDecomposition(f_prime, {i: a for i, a in constant.items() if a})


# ---------------------------------------------------------------------------
# brackets on paths


def _cut(p: Path, k: int, carrier: Carrier) -> Path:
    """Remove step ``k`` of the cycle ``p``: the open path from the head of the
    removed step around to its tail."""
    st = p.steps
    rest = st[k + 1:] + st[:k]
    removed = carrier.steps[st[k]]
    return Path(removed.tail, removed.head, rest)


def _pa_necklace(f: Path, g: Path, k: int, carrier: Carrier) -> dict:
    """Cyclic gluings for cutting step ``k`` in ``f`` and its reverse in ``g``."""
    out: dict = {}
    ks = carrier.reverse[k]
    for u in (i for i, s in enumerate(f.steps) if s == k):
        r1 = _cut(f, u, carrier)
        for v in (j for j, s in enumerate(g.steps) if s == ks):
            r2 = _cut(g, v, carrier)
            glued = cyclic_class(Path(r1.target, r2.source, r1.steps + r2.steps), carrier)
            out[glued] = out.get(glued, 0) + 1
    return out


def necklace_bracket(f, g, carrier: Carrier | None = None) -> Element:
    """Necklace bracket of two cycles (paths, or combinations of cycles
    extended bilinearly); the result is in canonical cyclic form."""
    if isinstance(f, Path) or isinstance(g, Path):
        if carrier is None:
            raise ValueError("pass the carrier when bracketing bare paths")
        f = Element.of_path(carrier, f) if isinstance(f, Path) else f
        g = Element.of_path(carrier, g) if isinstance(g, Path) else g
    f._check(g)
    c = f.carrier
    out = Element.zero(c, f.field)
    for p, a in f.terms.items():
        for q, b in g.terms.items():
            out = out + _necklace_paths(p, q, c).scale(a * b)
    return out


def _necklace_paths(f: Path, g: Path, c: Carrier) -> Element:
    if not f.is_cycle or not g.is_cycle:
        raise ValueError("the necklace bracket is defined on cycles")
    terms: dict = {}
    for k in range(len(c.steps)):
        if not c.original[k]:
            continue
        for p, n in _pa_necklace(f, g, k, c).items():
            terms[p] = terms.get(p, 0) + n
        for p, n in _pa_necklace(g, f, k, c).items():
            terms[p] = terms.get(p, 0) - n
    # concatenation terms f.g - g.f vanish on cyclic classes
    return Element(c, terms)


def lusztig_bracket(f: Element, g: Element, lam: Sequence) -> Element:
    """Bracket on the Lusztig algebra: ``sum_a (P_a(f, g) - P_a(g, f)) + f g - g f``
    where ``P_a`` cuts ``a`` out of ``f = f_L a f_R`` and ``a*`` out of
    ``g = g_L a* g_R`` and returns ``(f_L g_R) o (g_L f_R)``."""
    c = f.carrier
    lam = [mpq(v) for v in lam]
    th = theta(c)
    out = f * g - g * f
    for p, a in f.terms.items():
        for q, b in g.terms.items():
            out = out + (_pa_lusztig(p, q, c, lam, th) - _pa_lusztig(q, p, c, lam, th)).scale(a * b)
    return out


def _pa_lusztig(f: Path, g: Path, c: Carrier, lam, th) -> Element:
    out = Element.zero(c)
    for u, k in enumerate(f.steps):
        if not c.original[k]:
            continue
        ks = c.reverse[k]
        s = c.steps[k]
        fL = Path(f.target, s.head, f.steps[:u])
        fR = Path(s.tail, f.source, f.steps[u + 1:])
        for v, m in enumerate(g.steps):
            if m != ks:
                continue
            gL = Path(g.target, s.tail, g.steps[:v])
            gR = Path(s.head, g.source, g.steps[v + 1:])
            left = Element.of_path(c, Path(fL.target, gR.source, fL.steps + gR.steps))
            right = Element.of_path(c, Path(gL.target, fR.source, gL.steps + fR.steps))
            out = out + lusztig_product(left, right, lam, th)
    return out


# ---------------------------------------------------------------------------
# framing: p_i and q_i as an arrow D_i -> V_i and its reverse

_FRAMED: dict = {}


def framed_carrier(c: Carrier) -> Carrier:
    """Double of the quiver with an extra vertex ``D:i`` and an arrow ``p_i``
    from it to ``i`` for every vertex; ``p_i*`` plays the role of ``q_i``."""
    fc = _FRAMED.get(id(c))
    if fc is not None and fc[0] is c:
        return fc[1]
    arrows = tuple((s.id, c.vertices[s.tail], c.vertices[s.head]) for k, s in enumerate(c.steps) if c.original[k])
    arrows += tuple((_p_id(c, i), f"D:{v}", v) for i, v in enumerate(c.vertices))
    vertices = c.vertices + tuple(f"D:{v}" for v in c.vertices)
    out = Carrier.double(DoubleQuiver(Quiver(vertices, arrows)))
    _FRAMED[id(c)] = (c, out)
    return out


def _p_id(c: Carrier, i: int) -> str:
    prefix = "p_"
    while any(s.id.startswith(prefix) for s in c.steps):
        prefix = "_" + prefix
    return f"{prefix}{i}"


def frame(f: Element) -> Element:
    """``q f p`` as a combination of cycles at the framing vertices."""
    c = f.carrier
    fc = framed_carrier(c)
    ids = {k: fc.step(s.id) for k, s in enumerate(c.steps)}
    terms = {}
    for p, a in f.terms.items():
        if not p.is_cycle:
            raise ValueError("frame needs cycles")
        i = p.target
        steps = (fc.step(_p_id(c, i) + "*"),) + tuple(ids[k] for k in p.steps) + (fc.step(_p_id(c, i)),)
        terms[fc.path(steps)] = a
    return Element(fc, terms)


def unframe(h: Element, c: Carrier, lam: Sequence) -> TraceDecomposition:
    """Rewrite ``Tr x(h)`` for a combination ``h`` of framed cycles as
    ``Tr q x(f') p + c`` on the fiber.

    A cycle reading ``q w_1 p q w_2 ... q w_k p`` has trace
    ``Tr q x(w_1 o ... o w_k) p`` because ``p_i q_i = x(theta)_i - lambda_i``
    there; cycles avoiding the framing go through :func:`trace_decompose`.
    """
    fc = h.carrier
    lam = [mpq(v) for v in lam]
    back = {fc.step(s.id): k for k, s in enumerate(c.steps)}
    is_q = {fc.step(_p_id(c, i) + "*") for i in range(len(c.vertices))}
    f_prime = Element.zero(c)
    inner = Element.zero(c)
    for p, a in h.terms.items():
        if not p.is_cycle:
            raise ValueError("unframe needs cycles")
        qs = [n for n, k in enumerate(p.steps) if k in is_q]
        if not qs:
            if p.target >= len(c.vertices):
                raise ValueError("trivial cycle at a framing vertex")
            # framed and original vertices share indices
            w = c.path([back[k] for k in p.steps]) if p.steps else c.trivial(p.target)
            inner = inner + Element.of_path(c, w, a)
            continue
        st = p.steps[qs[0]:] + p.steps[:qs[0]]
        # split at each q: segments q w p
        cuts = [n for n, k in enumerate(st) if k in is_q] + [len(st)]
        total = None
        for lo, hi in zip(cuts, cuts[1:]):
            seg = st[lo + 1: hi - 1]  # drop the q at lo and the p at hi - 1
            w = c.path([back[k] for k in seg]) if seg else c.trivial(fc.steps[st[lo]].tail)
            we = Element.of_path(c, w)
            total = we if total is None else lusztig_product(total, we, lam)
        f_prime = f_prime + total.scale(a)
    dec = trace_decompose(inner, c, lam) if inner else TraceDecomposition(Element.zero(c), {})
    return TraceDecomposition(f_prime + dec.f_prime, dec.constant)


# ---------------------------------------------------------------------------
# polynomial functions on N_{D,V}


Letter = tuple  # ("x", step) | ("p", vertex) | ("q", vertex)


@dataclass(frozen=True)
class Factor:
    word: tuple  # letters in written order
    entry: tuple | None  # (s, t) or None for the trace

    def spaces(self, carrier: Carrier) -> tuple[tuple[str, int], tuple[str, int]]:
        """(target space, source space) of the word, e.g. (("V", i), ("D", j))."""
        return _letter_target(self.word[0], carrier), _letter_source(self.word[-1], carrier)


def _letter_source(l: Letter, c: Carrier):
    kind, k = l
    if kind == "x":
        return ("V", c.steps[k].tail)
    return ("D", k) if kind == "p" else ("V", k)


def _letter_target(l: Letter, c: Carrier):
    kind, k = l
    if kind == "x":
        return ("V", c.steps[k].head)
    return ("V", k) if kind == "p" else ("D", k)


def _letter_matrix(r: RepPoint, l: Letter) -> np.ndarray:
    kind, k = l
    if kind == "x":
        return r.x[k]
    return r.p[k] if kind == "p" else r.q[k]


def _space_dim(r: RepPoint, sp) -> int:
    return r.dimV[sp[1]] if sp[0] == "V" else r.dimD[sp[1]]


def _chain(r: RepPoint, letters: Sequence[Letter], sp) -> np.ndarray:
    if not letters:
        n = _space_dim(r, sp)
        return eye(n)
    M = _letter_matrix(r, letters[0])
    for l in letters[1:]:
        M = M @ _letter_matrix(r, l)
    return M


class EntryFunction:
    """Polynomial in the coordinates of ``(x, p, q)``: a sum of
    ``coef * prod(factor)``, each factor a matrix entry or a trace of a
    word in the letters."""

    def __init__(self, carrier: Carrier, terms: Iterable[tuple] = ()):
        self.carrier = carrier
        self.terms = [(mpq(c), tuple(fs)) for c, fs in terms]
        for _, fs in self.terms:
            for fac in fs:
                self._validate(fac)

    def _validate(self, fac: Factor):
        c = self.carrier
        if not fac.word:
            raise ValueError("factor words must be nonempty")
        for left, right in zip(fac.word, fac.word[1:]):
            if _letter_source(left, c) != _letter_target(right, c):
                raise ValueError(f"letters {left} and {right} do not compose")
        if fac.entry is None:
            tgt, src = fac.spaces(c)
            if tgt != src:
                raise ValueError("trace of a non-square word")

    # -- constructors ------------------------------------------------------------

    @classmethod
    def entry(cls, carrier, word: Sequence[Letter], s: int, t: int, coef=1) -> "EntryFunction":
        return cls(carrier, [(coef, (Factor(tuple(word), (s, t)),))])

    @classmethod
    def trace(cls, carrier, word: Sequence[Letter], coef=1) -> "EntryFunction":
        return cls(carrier, [(coef, (Factor(tuple(word), None),))])

    @classmethod
    def lusztig_entry(cls, carrier, f: Path, s: int | None = None, t: int | None = None) -> "EntryFunction":
        """``(q_i x(f) p_j)_{st}``, or its trace when ``s`` is None."""
        word = (("q", f.target),) + tuple(("x", k) for k in f.steps) + (("p", f.source),)
        return cls.trace(carrier, word) if s is None else cls.entry(carrier, word, s, t)

    @classmethod
    def lusztig_trace(cls, f: Element) -> "EntryFunction":
        """``Tr q x(f) p`` for a combination of cycles."""
        c = f.carrier
        terms = []
        for p, a in f.terms.items():
            if not p.is_cycle:
                raise ValueError("trace needs cycles")
            word = (("q", p.target),) + tuple(("x", k) for k in p.steps) + (("p", p.source),)
            terms.append((a, (Factor(word, None),)))
        return cls(c, terms)

    # -- algebra -------------------------------------------------------------------

    def __add__(self, other: "EntryFunction") -> "EntryFunction":
        return EntryFunction(self.carrier, self.terms + other.terms)

    def __sub__(self, other: "EntryFunction") -> "EntryFunction":
        return self + other.scale(-1)

    def scale(self, c) -> "EntryFunction":
        return EntryFunction(self.carrier, [(c * a, fs) for a, fs in self.terms])

    def __mul__(self, other: "EntryFunction") -> "EntryFunction":
        return EntryFunction(self.carrier, [(a * b, fa + fb) for a, fa in self.terms for b, fb in other.terms])

    def degree(self) -> int:
        return max((sum(len(f.word) for f in fs) for _, fs in self.terms), default=0)

    def letters(self) -> set:
        return {l for _, fs in self.terms for f in fs for l in f.word}

    # -- evaluation ----------------------------------------------------------------

    def _factor_value(self, r: RepPoint, fac: Factor):
        M = _chain(r, fac.word, None)
        if fac.entry is None:
            return _trace(M)
        s, t = fac.entry
        if s >= M.shape[0] or t >= M.shape[1]:
            raise IndexError(f"entry {fac.entry} outside a {M.shape} matrix")
        return M[s, t]

    def __call__(self, r: RepPoint):
        total = mpq(0)
        for a, fs in self.terms:
            v = a
            for fac in fs:
                v = v * self._factor_value(r, fac)
                if not v:
                    break
            total += v
        return total

    def gradient(self, r: RepPoint, letter: Letter) -> np.ndarray:
        """Matrix of partial derivatives ``dF / dX_{uv}`` for ``X`` the matrix
        of ``letter``, by splitting every word at every occurrence."""
        X = _letter_matrix(r, letter)
        G = zeros(*X.shape)
        for a, fs in self.terms:
            values = [self._factor_value(r, fac) for fac in fs]
            for n, fac in enumerate(fs):
                others = a
                for m, v in enumerate(values):
                    if m != n:
                        others = others * v
                if not others:
                    continue
                for pos, l in enumerate(fac.word):
                    if l != letter:
                        continue
                    left = fac.word[:pos]
                    right = fac.word[pos + 1:]
                    tgt = _letter_target(l, self.carrier)
                    src = _letter_source(l, self.carrier)
                    ML = _chain(r, left, tgt)
                    MR = _chain(r, right, src)
                    if fac.entry is None:
                        # d Tr(ML X MR) / dX_uv = (MR ML)_vu
                        G = G + others * (MR @ ML).T
                    else:
                        s, t = fac.entry
                        G = G + others * np.outer(ML[s, :], MR[:, t])
        return G


def _pair_trace(A: np.ndarray, B: np.ndarray):
    """``sum_{s,t} A_st B_ts``."""
    return sum((A[s, t] * B[t, s] for s in range(A.shape[0]) for t in range(A.shape[1])), mpq(0))


def bivector_bracket(F: EntryFunction, G: EntryFunction, r: RepPoint):
    """Poisson bracket for ``sum_i Tr(dp_i ^ dq_i) + sum_a Tr(dx(a) ^ dx(a*))``."""
    c = r.carrier
    total = mpq(0)
    for i in range(len(c.vertices)):
        P, Q = ("p", i), ("q", i)
        total += _pair_trace(F.gradient(r, P), G.gradient(r, Q)) - _pair_trace(G.gradient(r, P), F.gradient(r, Q))
    for k in range(len(c.steps)):
        if not c.original[k]:
            continue
        A, B = ("x", k), ("x", c.reverse[k])
        total += _pair_trace(F.gradient(r, A), G.gradient(r, B)) - _pair_trace(G.gradient(r, A), F.gradient(r, B))
    return total


def _with_entry(r: RepPoint, letter: Letter, u: int, v: int, value) -> RepPoint:
    kind, k = letter
    x = dict(r.x)
    p, q = list(r.p), list(r.q)
    target = {"x": x, "p": p, "q": q}[kind]
    M = target[k].copy()
    M[u, v] = value
    target[k] = M
    return RepPoint(r.carrier, r.dimV, r.dimD, x, p, q)


def finite_difference(F: EntryFunction, r: RepPoint, letter: Letter, u: int, v: int):
    """Exact ``dF/dX_uv`` from values on the line ``X_uv + t``, ``t = 0..d``:
    the restriction is a polynomial of degree at most ``d = deg F``, so the
    derivative at 0 of its interpolant is exact."""
    d = max(F.degree(), 1)
    base = _letter_matrix(r, letter)[u, v]
    nodes = list(range(d + 1))
    vals = [F(_with_entry(r, letter, u, v, base + t)) for t in nodes]
    total = mpq(0)
    for k, tk in enumerate(nodes):
        # derivative at 0 of the Lagrange basis polynomial L_k
        others = [tj for j, tj in enumerate(nodes) if j != k]
        denom = mpq(1)
        for tj in others:
            denom *= tk - tj
        deriv = mpq(0)
        for drop in range(len(others)):
            term = mpq(1)
            for j, tj in enumerate(others):
                if j != drop:
                    term *= -tj
            deriv += term
        total += vals[k] * deriv / denom
    return total


def random_entry_function(r: RepPoint, rng: random.Random, max_factors: int = 2, max_len: int = 4,
                          max_terms: int = 2) -> EntryFunction:
    """Random polynomial built from words on the framed double quiver."""
    c = r.carrier
    terms = []
    for _ in range(rng.randint(1, max_terms)):
        facs = []
        for _ in range(rng.randint(1, max_factors)):
            facs.append(_random_factor(r, rng, max_len))
        terms.append((rng.randint(-3, 3) or 1, tuple(facs)))
    return EntryFunction(c, terms)


def _letters_into(r: RepPoint, sp) -> list[Letter]:
    c = r.carrier
    kind, i = sp
    if kind == "D":
        return [("q", i)]
    out = [("x", k) for k in c.steps_into[i]]
    out.append(("p", i))
    return out


def _random_factor(r: RepPoint, rng: random.Random, max_len: int) -> Factor:
    c = r.carrier
    n = len(c.vertices)
    while True:
        sp = (rng.choice("VD"), rng.randrange(n))
        if _space_dim(r, sp) == 0:
            continue
        word = []
        cur = sp
        for _ in range(rng.randint(1, max_len)):
            # extend to the right: choose a letter whose target is the current source
            choices = [l for l in _letters_into(r, cur) if _space_dim(r, _letter_source(l, c))]
            if not choices:
                break
            l = rng.choice(choices)
            word.append(l)
            cur = _letter_source(l, c)
        if not word:
            continue
        tgt, src = sp, cur
        if tgt == src and rng.random() < 0.4:
            return Factor(tuple(word), None)
        return Factor(tuple(word), (rng.randrange(_space_dim(r, tgt)), rng.randrange(_space_dim(r, src))))


# ---------------------------------------------------------------------------
# comparison of the two bracket routes


@dataclass
class BracketReport:
    f: str
    g: str
    points: int
    residuals: dict  # route -> {"+1": [...], "-1": [...]}
    epsilon: dict  # route -> +1 | -1 | 0 (either sign fits) | None (no sign fits)

    @property
    def match(self) -> bool:
        return all(e is not None for e in self.epsilon.values())

    def to_json(self) -> dict:
        return {
            "f": self.f,
            "g": self.g,
            "points": self.points,
            "epsilon": self.epsilon,
            "max_residual": {
                route: {s: _fmt(max((abs(x) for x in v), default=0)) for s, v in res.items()}
                for route, res in self.residuals.items()
            },
            "verdict": "MATCH" if self.match else "MISMATCH",
        }


def compare_brackets(f: Element, g: Element, points: Sequence[RepPoint], lam: Sequence) -> BracketReport:
    """Compare the bivector bracket of ``Tr q x(f) p`` and ``Tr q x(g) p``
    with two path-level formulas, on fiber points:

    * ``lusztig``: ``Tr q x({f, g}) p`` for the bracket on the Lusztig algebra;
    * ``necklace``: the necklace bracket of ``q f p`` and ``q g p`` on the
      framed double quiver, read back through :func:`unframe`.
    """
    c = f.carrier
    lam = [mpq(v) for v in lam]
    F = EntryFunction.lusztig_trace(f)
    G = EntryFunction.lusztig_trace(g)
    lb = lusztig_bracket(f, g, lam)
    dec = unframe(necklace_bracket(frame(f), frame(g)), c, lam)
    residuals = {"lusztig": {"+1": [], "-1": []}, "necklace": {"+1": [], "-1": []}}
    for r in points:
        if not on_fiber(r, lam):
            raise FiberError("point not on the fiber")
        lhs = bivector_bracket(F, G, r)
        lus = _trace(lusztig_map(r, lb))
        nec = _trace(lusztig_map(r, dec.f_prime)) + dec.c(r.dimV)
        for route, val in (("lusztig", lus), ("necklace", nec)):
            residuals[route]["+1"].append(lhs - val)
            residuals[route]["-1"].append(lhs + val)
    eps = {}
    for route, res in residuals.items():
        plus = all(not x for x in res["+1"])
        minus = all(not x for x in res["-1"])
        # 0: the bracket vanishes on every point, so both signs fit
        eps[route] = 0 if plus and minus else (1 if plus else (-1 if minus else None))
    return BracketReport(f.format(), g.format(), len(points), residuals, eps)


def ensemble(carrier, dimV, dimD, lam, seed: int, size: int) -> list[RepPoint]:
    return [sample_moment_fiber(carrier, dimV, dimD, lam, seed * 100_003 + k) for k in range(size)]


def dumps_point(r: RepPoint) -> str:
    return json.dumps(r.to_json(), sort_keys=True)
