"""Graphs, quivers and double quivers; Dynkin (ADET / affine) classification
and the Coxeter data attached to it."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from .linalg import leading_minors_positive, nullspace

MODES = ("graph", "double")


class NotConnectedError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Finite graph; self-loops are edges ``(v, v)``.

    Each edge is stored as an ordered pair; the order is only used when the
    graph is turned into a quiver (it is the default orientation).
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    edge_ids: tuple[str, ...] = ()

    def __post_init__(self):
        vs = tuple(str(v) for v in self.vertices)
        object.__setattr__(self, "vertices", vs)
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        if len(set(vs)) != len(vs):
            raise ValueError("vertex ids must be unique")
        known = set(vs)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) uses an undeclared vertex")
        if not self.edge_ids:
            # default ids follow the canonical edge order, so that they only
            # depend on the canonical serialization
            order = sorted(range(len(self.edges)), key=lambda k: tuple(sorted(self.edges[k])))
            ids = [""] * len(self.edges)
            for n, k in enumerate(order, 1):
                ids[k] = f"e{n}"
            object.__setattr__(self, "edge_ids", tuple(ids))
        if len(self.edge_ids) != len(self.edges) or len(set(self.edge_ids)) != len(self.edge_ids):
            raise ValueError("edge ids must be unique, one per edge")
        for eid in self.edge_ids:
            if not eid or eid.endswith("*") or any(ch in eid for ch in " .+-:/"):
                raise ValueError(f"bad edge id {eid!r}")

    @property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def __len__(self):
        return len(self.vertices)

    def neighbours(self, v: str) -> list[str]:
        out = []
        for a, b in self.edges:
            if a == v and b != v:
                out.append(b)
            elif b == v and a != v:
                out.append(a)
        return out

    def loops(self, v: str) -> int:
        return sum(1 for a, b in self.edges if a == b == v)

    def is_connected(self) -> bool:
        if not self.vertices:
            return False
        seen = {self.vertices[0]}
        todo = deque(seen)
        while todo:
            v = todo.popleft()
            for w in self.neighbours(v):
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == len(self.vertices)

    def remove_vertex(self, v: str) -> "Graph":
        keep = [(e, eid) for e, eid in zip(self.edges, self.edge_ids) if v not in e]
        return Graph(
            tuple(w for w in self.vertices if w != v),
            tuple(e for e, _ in keep),
            tuple(eid for _, eid in keep),
        )

    def relabel(self, mapping: dict[str, str]) -> "Graph":
        return Graph(
            tuple(mapping[v] for v in self.vertices),
            tuple((mapping[a], mapping[b]) for a, b in self.edges),
            self.edge_ids,
        )

    # -- JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "arrows": [
                {"id": eid, "tail": a, "head": b} for (a, b), eid in zip(self.edges, self.edge_ids)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Graph":
        if not isinstance(data, dict) or "vertices" not in data or "edges" not in data:
            raise ValueError('graph JSON needs "vertices" and "edges"')
        vertices = tuple(str(v) for v in data["vertices"])
        edges = []
        for e in data["edges"]:
            if not isinstance(e, (list, tuple)) or len(e) != 2:
                raise ValueError(f"bad edge {e!r}")
            edges.append((str(e[0]), str(e[1])))
        arrows = data.get("arrows")
        if arrows is None:
            return cls(vertices, tuple(edges))
        if Counter(tuple(sorted(e)) for e in edges) != Counter(
            tuple(sorted((str(a["tail"]), str(a["head"])))) for a in arrows
        ):
            raise ValueError("arrows must orient exactly the listed edges")
        return cls(
            vertices,
            tuple((str(a["tail"]), str(a["head"])) for a in arrows),
            tuple(str(a["id"]) for a in arrows),
        )

    def canonical_json(self) -> str:
        data = {
            "vertices": sorted(self.vertices),
            "edges": sorted(sorted(e) for e in self.edges),
            "arrows": sorted(
                ({"id": eid, "tail": a, "head": b} for (a, b), eid in zip(self.edges, self.edge_ids)),
                key=lambda d: d["id"],
            ),
        }
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


@dataclass(frozen=True)
class Quiver:
    vertices: tuple[str, ...]
    arrows: tuple[tuple[str, str, str], ...]  # (id, tail, head)

    def __post_init__(self):
        ids = [a[0] for a in self.arrows]
        if len(set(ids)) != len(ids):
            raise ValueError("arrow ids must be unique")

    @classmethod
    def from_graph(cls, g: Graph) -> "Quiver":
        return cls(g.vertices, tuple((eid, a, b) for (a, b), eid in zip(g.edges, g.edge_ids)))

    @property
    def graph(self) -> Graph:
        return Graph(self.vertices, tuple((t, h) for _, t, h in self.arrows), tuple(a[0] for a in self.arrows))


@dataclass(frozen=True)
class DoubleQuiver:
    """The double of a quiver: every arrow ``a`` gets a reverse ``a*``."""

    quiver: Quiver

    @classmethod
    def of(cls, g: Graph | Quiver) -> "DoubleQuiver":
        return cls(g if isinstance(g, Quiver) else Quiver.from_graph(g))

    @property
    def vertices(self):
        return self.quiver.vertices

    @property
    def graph(self) -> Graph:
        return self.quiver.graph

    @property
    def arrows(self) -> tuple[tuple[str, str, str], ...]:
        out = []
        for aid, t, h in self.quiver.arrows:
            out.append((aid, t, h))
            out.append((aid + "*", h, t))
        return tuple(out)

    @staticmethod
    def star(aid: str) -> str:
        return aid[:-1] if aid.endswith("*") else aid + "*"


# ---------------------------------------------------------------------------
# adjacency and classification


def _graph_and_mode(obj, mode: str) -> tuple[Graph, str]:
    if isinstance(obj, DoubleQuiver):
        return obj.graph, "double"
    if isinstance(obj, Quiver):
        return obj.graph, mode
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    return obj, mode


def adjacency(obj, mode: str = "graph") -> list[list[int]]:
    """Symmetric adjacency matrix.  A self-loop adds 1 to its diagonal entry in
    graph mode and 2 in double-quiver mode."""
    g, mode = _graph_and_mode(obj, mode)
    idx = g.index
    n = len(g)
    A = [[0] * n for _ in range(n)]
    for a, b in g.edges:
        i, j = idx[a], idx[b]
        if i == j:
            A[i][i] += 1 if mode == "graph" else 2
        else:
            A[i][j] += 1
            A[j][i] += 1
    return A


@dataclass(frozen=True)
class DynkinClass:
    kind: str  # "finite" | "affine" | "other"
    family: str | None = None
    rank: int | None = None
    coxeter: int | None = None
    involution: tuple[int, ...] | None = None  # vertex index permutation
    mode: str = "graph"
    vertices: tuple[str, ...] = field(default=(), repr=False)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def name(self) -> str:
        if self.kind == "other":
            return "Other"
        hat = "^" if self.kind == "affine" else ""
        return f"{self.family}{hat}{self.rank}"

    def __str__(self):
        if self.kind == "finite":
            return f"FiniteADET({self.family}, {self.rank})"
        if self.kind == "affine":
            return f"Affine({self.family}, {self.rank})"
        return "Other"


def _degree_no_loops(g: Graph) -> dict[str, int]:
    d = {v: 0 for v in g.vertices}
    for a, b in g.edges:
        if a != b:
            d[a] += 1
            d[b] += 1
    return d


def _walk_arm(g: Graph, start: str, came_from: str) -> list[str]:
    arm = [start]
    prev, cur = came_from, start
    while True:
        nxt = [w for w in g.neighbours(cur) if w != prev]
        if len(nxt) != 1 or len(g.neighbours(cur)) > 2:
            return arm
        prev, cur = cur, nxt[0]
        arm.append(cur)


def chain_order(g: Graph) -> list[str]:
    """Vertices of a path-shaped graph from one end to the other.  When a
    self-loop sits at an end, that end comes last."""
    if len(g) == 1:
        return [g.vertices[0]]
    deg = _degree_no_loops(g)
    ends = [v for v in g.vertices if deg[v] == 1]
    ends.sort(key=lambda v: (g.loops(v), g.index[v]))
    start = ends[0]
    return [start] + _walk_arm(g, g.neighbours(start)[0], start)


def arms(g: Graph, center: str) -> list[list[str]]:
    return [_walk_arm(g, w, center) for w in g.neighbours(center)]


def _is_cycle(g: Graph, deg: dict) -> bool:
    return len(g) >= 3 and all(d == 2 for d in deg.values()) and all(a != b for a, b in g.edges)


def classify(obj, mode: str = "graph") -> DynkinClass:
    """ADET / affine / other classification by exact positive-definiteness of
    ``2 - A`` followed by a shape match."""
    g, mode = _graph_and_mode(obj, mode)
    if not g.is_connected():
        raise NotConnectedError("graph not connected")
    A = adjacency(g, mode)
    n = len(g)
    C = [[(2 if i == j else 0) - A[i][j] for j in range(n)] for i in range(n)]
    if leading_minors_positive(C):
        return _finite_shape(g, mode)
    ker = nullspace(C)
    if len(ker) == 1:
        v = ker[0]
        if all(x > 0 for x in v) or all(x < 0 for x in v):
            fam = _affine_family(g, A, mode)
            return DynkinClass("affine", fam, n - 1, mode=mode, vertices=g.vertices)
    return DynkinClass("other", mode=mode, vertices=g.vertices)


def _finite_shape(g: Graph, mode: str) -> DynkinClass:
    n = len(g)
    idx = g.index
    deg = _degree_no_loops(g)
    perm = list(range(n))
    has_loop = any(a == b for a, b in g.edges)
    if has_loop:
        return DynkinClass("finite", "T", n, 2 * n + 1, tuple(perm), mode, g.vertices)
    branch = [v for v in g.vertices if deg[v] >= 3]
    if not branch:
        order = chain_order(g)
        for k, v in enumerate(order):
            perm[idx[v]] = idx[order[n - 1 - k]]
        return DynkinClass("finite", "A", n, n + 1, tuple(perm), mode, g.vertices)
    (c,) = branch
    arm_list = sorted(arms(g, c), key=len)
    lengths = tuple(len(a) for a in arm_list)
    if lengths[:2] == (1, 1):
        # D_n: the two short arms are swapped when n is odd
        if n % 2 == 1:
            a, b = arm_list[0][0], arm_list[1][0]
            perm[idx[a]], perm[idx[b]] = idx[b], idx[a]
        return DynkinClass("finite", "D", n, 2 * n - 2, tuple(perm), mode, g.vertices)
    family = {(1, 2, 2): 6, (1, 2, 3): 7, (1, 2, 4): 8}.get(lengths)
    if family is None:  # pragma: no cover - excluded by positive definiteness
        raise AssertionError(f"unexpected finite shape {lengths}")
    if family == 6:
        for u, w in zip(arm_list[1], arm_list[2]):
            perm[idx[u]], perm[idx[w]] = idx[w], idx[u]
    h = {6: 12, 7: 18, 8: 30}[family]
    return DynkinClass("finite", "E", n, h, tuple(perm), mode, g.vertices)


def _affine_family(g: Graph, A, mode: str) -> str:
    n = len(g)
    deg = _degree_no_loops(g)
    if n == 1:
        return "A"  # A^0: a vertex with adjacency 2
    if any(a == b for a, b in g.edges):
        return "L"  # graph-mode loop shapes (no ADE counterpart)
    if n == 2:
        return "A"  # double edge
    if _is_cycle(g, deg):
        return "A"
    branch = [v for v in g.vertices if deg[v] >= 3]
    if len(branch) == 2 or (len(branch) == 1 and deg[branch[0]] == 4):
        return "D"
    (c,) = branch
    lengths = tuple(sorted(len(a) for a in arms(g, c)))
    return {(2, 2, 2): "E", (1, 3, 3): "E", (1, 2, 5): "E"}[lengths]


# ---------------------------------------------------------------------------


_BAD = {"A": set(), "D": {2}, "E6": {2, 3}, "E7": {2, 3}, "E8": {2, 3, 5}}


def bad_primes(c: DynkinClass) -> set[int]:
    if c.kind not in ("finite", "affine") or c.family not in ("A", "D", "E"):
        raise ValueError("bad primes undefined")
    if c.family == "E":
        # an affine E_n has rank n as well
        return set(_BAD[f"E{c.rank}"])
    return set(_BAD[c.family])


def involution_p(c: DynkinClass) -> tuple[int, ...]:
    if c.kind != "finite":
        raise ValueError("involution P is only defined for ADET graphs")
    return c.involution


def coxeter_number(c: DynkinClass) -> int:
    if c.kind != "finite":
        raise ValueError("Coxeter number is only defined for ADET graphs")
    return c.coxeter


def null_root(g: Graph, mode: str = "graph") -> dict[str, int]:
    """Minimal positive integer vector in the kernel of ``2 - A`` (affine only)."""
    c = classify(g, mode)
    if c.kind != "affine":
        raise ValueError("null root needs an affine graph")
    A = adjacency(g, mode)
    n = len(g)
    (v,) = nullspace([[(2 if i == j else 0) - A[i][j] for j in range(n)] for i in range(n)])
    lo = min(abs(x) for x in v)
    return {w: int(abs(x) / lo) for w, x in zip(g.vertices, v)}


def extending_vertices(g: Graph, mode: str = "graph") -> list[str]:
    """Vertices with null-root coefficient 1.

    Deleting such a vertex leaves the finite Dynkin graph of the same type.
    A bare deletion test would also accept e.g. the ends of the long arms of
    E8^ (leaving A8 or D8), which is not what is wanted.
    """
    c = classify(g, mode)
    if c.kind != "affine" or c.family not in ("A", "D", "E"):
        raise ValueError("extending vertices need an affine ADE graph")
    delta = null_root(g, mode)
    return [v for v in g.vertices if delta[v] == 1]


# ---------------------------------------------------------------------------
# numerics


def frobenius_perron(A, tol: float = 1e-12, max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Perron root and eigenvector (max entry 1) by power iteration on ``A + 1``.

    The shift keeps the iteration from oscillating on bipartite graphs.
    """
    M = np.asarray(A, dtype=float)
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    reach = (np.eye(n) + (M > 0)).astype(float)
    if not (np.linalg.matrix_power(reach, max(n - 1, 1)) > 0).all():
        raise NotConnectedError("graph not connected")
    B = M + np.eye(n)
    r = np.ones(n)
    lam = 0.0
    for _ in range(max_iter):
        w = B @ r
        r = w / w.max()
        lam = float(r @ (M @ r) / (r @ r))
        if np.abs(M @ r - lam * r).max() < tol:
            break
    return lam, r


def modulation_defect(g: Graph, mode: str = "graph") -> float:
    """Largest deviation of ``sum_j A_ij r_j / r_i`` from the Perron root, for
    the modulation built from the Perron eigenvector."""
    A = np.asarray(adjacency(g, mode), dtype=float)
    lam, r = frobenius_perron(A)
    return float(np.abs((A @ r) / r - lam).max())


# ---------------------------------------------------------------------------
# constructors


def chain(n: int, loop: bool = False) -> Graph:
    vs = tuple(str(k) for k in range(1, n + 1))
    edges = [(vs[k], vs[k + 1]) for k in range(n - 1)]
    if loop:
        edges.append((vs[-1], vs[-1]))
    return Graph(vs, tuple(edges))


def star(p: Sequence[int]) -> tuple[Graph, str]:
    """Star with rays of the given lengths; a ray of length ``p`` carries
    ``p - 1`` vertices besides the centre ``"c"``."""
    p = list(p)
    if not p:
        raise ValueError("star needs at least one ray")
    if any(x < 1 for x in p):
        raise ValueError("ray lengths must be >= 1")
    vs = ["c"]
    edges = []
    for r, length in enumerate(p, 1):
        prev = "c"
        for k in range(1, length):
            v = f"r{r}_{k}"
            vs.append(v)
            edges.append((prev, v))
            prev = v
    return Graph(tuple(vs), tuple(edges)), "c"


def dynkin(family: str, n: int) -> Graph:
    family = family.upper()
    if family == "A":
        return chain(n)
    if family == "T":
        return chain(n, loop=True)
    if family == "D":
        if n < 4:
            raise ValueError("D_n needs n >= 4")
        vs = tuple(str(k) for k in range(1, n + 1))
        edges = [(vs[k], vs[k + 1]) for k in range(n - 2)] + [(vs[n - 3], vs[n - 1])]
        return Graph(vs, tuple(edges))
    if family == "E":
        if n not in (6, 7, 8):
            raise ValueError("E_n needs n in 6, 7, 8")
        vs = tuple(str(k) for k in range(1, n + 1))
        line = ["1", "3"] + [str(k) for k in range(4, n + 1)]
        edges = [(line[k], line[k + 1]) for k in range(len(line) - 1)] + [("2", "4")]
        return Graph(vs, tuple(edges))
    raise ValueError(f"unknown family {family!r}")


def affine(family: str, n: int) -> Graph:
    family = family.upper()
    if family == "A":
        if n == 0:
            return Graph(("0",), (("0", "0"), ("0", "0")))
        if n == 1:
            return Graph(("0", "1"), (("0", "1"), ("0", "1")))
        vs = tuple(str(k) for k in range(n + 1))
        return Graph(vs, tuple((vs[k], vs[(k + 1) % (n + 1)]) for k in range(n + 1)))
    if family == "D":
        g = dynkin("D", n)
        return Graph(("0",) + g.vertices, g.edges + (("0", "2"),))
    if family == "E":
        rays = {6: (3, 3, 3), 7: (2, 4, 4), 8: (2, 3, 6)}[n]
        return star(rays)[0]
    raise ValueError(f"unknown affine family {family!r}")


def fold_a2n(n: int) -> tuple[Graph, dict[str, str]]:
    """Fold ``A_{2n}`` onto ``T_n``: vertex ``k`` and ``2n+1-k`` both go to
    ``min(k, 2n+1-k)``; the middle edge becomes the self-loop."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = chain(n, loop=True)
    vmap = {str(k): str(min(k, 2 * n + 1 - k)) for k in range(1, 2 * n + 1)}
    return t, vmap


def parse_type(name: str) -> Graph:
    """``"E8"``, ``"D4hat"``, ``"T3"``, ``"A2hat"`` ... -> graph."""
    s = name.strip()
    hat = s.lower().endswith("hat")
    if hat:
        s = s[:-3]
    fam, rank = s[0].upper(), s[1:]
    if not rank.isdigit():
        raise ValueError(f"cannot parse Dynkin type {name!r}")
    return affine(fam, int(rank)) if hat else dynkin(fam, int(rank))


def coxeter_from_eigenvalue(lam: float) -> float:
    """Solve ``lam = 2 cos(pi / h)`` for ``h``."""
    return math.pi / math.acos(lam / 2)


