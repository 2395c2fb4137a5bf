"""``prepro`` command line interface.

Exit codes: 0 verified, 1 verification failed, 2 input error, 3 resource cap,
4 domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from . import graph as gc
from . import quotient as qt
from . import repvar as rv
from . import series as se
from .fields import QQ, field_from_tag
from .pathalg import Carrier, Element

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP, EXIT_DOMAIN = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


class DomainError(Exception):
    pass


@dataclass
class RunConfig:
    graph: str | None
    mode: str
    field: object
    N: int | None
    seed: int
    cache_dir: str | None
    fmt: str
    cap: int = qt.DEFAULT_COLUMN_CAP


# ---------------------------------------------------------------------------
# input


def load_graph(source: str) -> gc.Graph:
    """A graph JSON file, or a type name such as ``E8`` or ``D4hat``."""
    path = FsPath(source)
    if path.exists():
        try:
            text = path.read_text()
        except OSError as e:
            raise InputError(f"{source}: {e.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
        try:
            return gc.Graph.from_json(data)
        except (ValueError, KeyError, TypeError) as e:
            raise InputError(f"{source}: {e}") from None
    try:
        return gc.parse_type(source)
    except (ValueError, KeyError, IndexError):
        raise InputError(f"{source}: no such file and not a Dynkin type name") from None


def parse_vector(text: str, field=QQ, name: str = "vector") -> list:
    try:
        return [field(x) for x in text.split(",")]
    except (ValueError, TypeError, ZeroDivisionError):
        raise InputError(f"cannot parse {name} {text!r}") from None


def parse_ints(text: str, name: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse {name} {text!r}") from None
    if any(x < 0 for x in out):
        raise InputError(f"{name} entries must be >= 0")
    return out


def _cache_dir(args) -> str | None:
    if getattr(args, "no_cache", False):
        return None
    return args.cache_dir or os.environ.get("PREPRO_CACHE_DIR") or ".prepro-cache"


def _config(args) -> RunConfig:
    try:
        field = field_from_tag(args.field)
    except ValueError as e:
        raise InputError(str(e)) from None
    if args.N is not None and args.N < 0:
        raise InputError("max degree must be >= 0")
    if args.cap < 1:
        raise InputError("--cap must be >= 1")
    return RunConfig(getattr(args, "graph", None), args.mode, field, args.N, args.seed, _cache_dir(args), args.format,
                     args.cap)


def _default_N(c: gc.DynkinClass) -> int:
    return c.coxeter if c.kind == "finite" else 8


# ---------------------------------------------------------------------------
# output


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in obj:
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for n, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{n}.")
    else:
        yield prefix.rstrip("."), obj


def emit(report: dict, fmt: str, out=None, csv_text: str | None = None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        if csv_text is not None:
            out.write(csv_text)
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(report):
            w.writerow([k, json.dumps(v) if isinstance(v, list) else v])
        out.write(buf.getvalue())
    else:
        for k, v in _flatten(report):
            out.write(f"{k}: {' '.join(map(str, v)) if isinstance(v, list) else v}\n")


def _series_dims(S: se.MatrixSeries) -> list[str]:
    return [se._fmt(x) for x in S.total_by_degree()]


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    cfg = _config(args)
    g = load_graph(cfg.graph)
    c = gc.classify(g, cfg.mode)
    rep = {"graph": cfg.graph, "mode": cfg.mode, "class": str(c), "name": c.name}
    if c.kind == "finite":
        lam, _ = gc.frobenius_perron(gc.adjacency(g, cfg.mode))
        rep["coxeter_number"] = c.coxeter
        rep["involution_P"] = {g.vertices[i]: g.vertices[j] for i, j in enumerate(c.involution)}
        rep["perron_root"] = round(lam, 12)
        rep["coxeter_from_eigenvalue"] = round(gc.coxeter_from_eigenvalue(lam), 9)
    if c.kind in ("finite", "affine") and c.family in ("A", "D", "E"):
        rep["bad_primes"] = sorted(gc.bad_primes(c))
    if c.kind == "affine" and c.family in ("A", "D", "E"):
        rep["extending_vertices"] = gc.extending_vertices(g, cfg.mode)
    emit(rep, cfg.fmt)
    return EXIT_OK


def _build(g, cfg: RunConfig, N: int) -> qt.GradedQuotient:
    return qt.build_graded(g, cfg.mode, cfg.field, N, cap=cfg.cap, cache_dir=cfg.cache_dir)


def cmd_hilbert(args) -> int:
    cfg = _config(args)
    g = load_graph(cfg.graph)
    c = gc.classify(g, cfg.mode)
    N = cfg.N if cfg.N is not None else _default_N(c)
    A = gc.adjacency(g, cfg.mode)
    q = _build(g, cfg, N)
    emp = q.hilbert_empirical()
    closed = se.closed_hilbert(c, A, N)
    rep = {"graph": cfg.graph, "mode": cfg.mode, "field": cfg.field.tag, "class": str(c), "N": N,
           "empirical_dims": q.dims()}
    code = EXIT_OK
    csv_text = emp.to_csv(g.vertices)
    if args.closed or args.compare:
        rep["closed_dims"] = _series_dims(closed)
    if args.series:
        rep["empirical"] = emp.to_json()
        if args.closed or args.compare:
            rep["closed"] = closed.to_json()
    if args.compare:
        cmp = se.compare_series(emp, closed)
        rep["compare"] = cmp.to_json()
        code = EXIT_OK if cmp.equal else EXIT_FAIL
    if args.koszul:
        k = se.koszul_criterion(emp, A, N)
        rep["koszul"] = k
        if not args.compare:
            code = EXIT_OK if k else EXIT_FAIL
    emit(rep, cfg.fmt, csv_text=csv_text)
    return code


def cmd_dim(args) -> int:
    cfg = _config(args)
    g = load_graph(cfg.graph)
    c = gc.classify(g, cfg.mode)
    if c.kind != "finite":
        raise DomainError(f"{c} is not of ADET type; Pi^0 is infinite-dimensional")
    N = cfg.N if cfg.N is not None else c.coxeter
    q = _build(g, cfg, N)
    formula = se.dim_formula(c)
    rep = {"graph": cfg.graph, "class": str(c), "dims": q.dims(), "total": q.total_dim(),
           "formula": se._fmt(formula), "verdict": "EQUAL" if q.total_dim() == formula else "MISMATCH"}
    emit(rep, cfg.fmt)
    return EXIT_OK if q.total_dim() == formula else EXIT_FAIL


def cmd_hh0(args) -> int:
    cfg = _config(args)
    g = load_graph(cfg.graph)
    c = gc.classify(g, cfg.mode)
    if c.kind == "affine":
        if args.i0 is None:
            raise InputError("affine graphs need --i0 <extending vertex>")
        if args.i0 not in g.vertices:
            raise InputError(f"unknown vertex {args.i0!r}")
        N = cfg.N if cfg.N is not None else 6
        q = _build(g, cfg, N)
        try:
            r = qt.verify_hh0_affine(q, args.i0, N)
        except ValueError as e:
            raise DomainError(str(e)) from None
    elif c.kind == "finite" and c.family in ("A", "D", "E"):
        q = _build(g, cfg, c.coxeter)
        r = qt.verify_hh0_finite(q, c)
    else:
        raise DomainError(f"{c}: hh0 needs a finite or affine ADE graph")
    rep = {"graph": cfg.graph, "class": str(c), "field": cfg.field.tag, **r.to_json()}
    emit(rep, cfg.fmt)
    return EXIT_FAIL if r.verdict == "FAIL" else EXIT_OK


def cmd_star(args) -> int:
    cfg = _config(args)
    p = args.rays
    if any(x < 1 for x in p):
        raise InputError("ray lengths must be >= 1")
    if args.kleinian:
        if len(p) != 3:
            raise InputError("--kleinian needs exactly three ray lengths")
        try:
            k = se.kleinian_dim(*p)
        except ValueError as e:
            raise DomainError(str(e)) from None
    g, centre = gc.star(p)
    c = gc.classify(g)
    if c.kind != "finite":
        if args.kleinian:  # pragma: no cover - kleinian_dim already refused
            raise DomainError("not a finite Kleinian type")
        raise DomainError(f"star {p} is {c}; only finite stars have finite corners")
    Nx = cfg.N if cfg.N is not None else c.coxeter // 2 + 1
    q = qt.build_graded(g, "graph", cfg.field, 2 * Nx, cap=cfg.cap, cache_dir=cfg.cache_dir)
    corner = q.corner(centre).regraded_dims()
    pres = qt.presentation_quotient(qt.star_presentation(p, cfg.field), Nx, cfg.cap).dims()
    closed = [int(x) for x in se.spherical_closed(p, Nx, c)]
    ok = corner == pres == closed
    rep = {"rays": p, "class": str(c), "N": Nx, "corner_dims": corner, "presentation_dims": pres,
           "closed_dims": closed, "series": se.format_poly(closed), "total": sum(closed)}
    if args.kleinian:
        kq = qt.presentation_quotient(qt.kleinian_presentation(*p, cfg.field), Nx, cfg.cap).total_dim()
        rep["kleinian_formula"] = se._fmt(k)
        rep["kleinian_presentation"] = kq
        ok = ok and kq == k
    rep["verdict"] = "EQUAL" if ok else "MISMATCH"
    emit(rep, cfg.fmt)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_deform(args) -> int:
    cfg = _config(args)
    g = load_graph(cfg.graph)
    lam = parse_vector(args.lam, cfg.field, "lambda")
    if len(lam) != len(g.vertices):
        raise InputError(f"lambda needs {len(g.vertices)} entries")
    N = cfg.N if cfg.N is not None else 4
    try:
        f = qt.build_filtered(g, lam, cfg.mode, cfg.field, N, args.delta_max, cfg.cap)
    except qt.StabilizationError as e:
        raise DomainError(str(e)) from None
    except ValueError as e:
        raise InputError(str(e)) from None
    rep = {"graph": cfg.graph, "mode": cfg.mode, **f.to_json(), "total_dim": f.total_dim,
           "zero_algebra": f.total_dim == 0}
    emit(rep, cfg.fmt)
    return EXIT_OK


def _repvar_setup(args, cfg):
    g = load_graph(cfg.graph)
    c = Carrier.of(g, "double")
    n = len(g.vertices)
    dimV = parse_ints(args.dimV, "dimV")
    dimD = parse_ints(args.dimD, "dimD") if args.dimD else [d + 1 for d in dimV]
    lam = parse_vector(args.lam, QQ, "lambda") if args.lam else [QQ.zero] * n
    for name, v in (("dimV", dimV), ("dimD", dimD), ("lambda", lam)):
        if len(v) != n:
            raise InputError(f"{name} needs {n} entries")
    if any(a > b for a, b in zip(dimV, dimD)):
        raise DomainError("sampler requires dimD >= dimV")
    return g, c, dimV, dimD, lam


def cmd_repvar(args) -> int:
    cfg = _config(args)
    if cfg.field != QQ:
        raise InputError("repvar works over Q only")
    g, c, dimV, dimD, lam = _repvar_setup(args, cfg)
    pts = rv.ensemble(c, dimV, dimD, lam, cfg.seed, args.points)
    rng = random.Random(cfg.seed)
    base = {"graph": cfg.graph, "dimV": dimV, "dimD": dimD, "lambda": [se._fmt(x) for x in lam],
            "seed": cfg.seed, "points": args.points}
    sub = args.sub
    if sub == "sample":
        mus = [all(np.array_equal(m, lam[i] * rv.eye(dimV[i])) for i, m in enumerate(rv.moment(r))) for r in pts]
        rep = {**base, "on_fiber": all(mus), "point": pts[0].to_json()}
        emit(rep, cfg.fmt)
        return EXIT_OK if all(mus) else EXIT_FAIL
    if sub == "check-hom":
        bad = 0
        for r in pts:
            for _ in range(args.pairs):
                f = Element.of_path(c, rv.random_path(c, rng.randint(0, args.max_len), rng))
                h = Element.of_path(c, rv.random_path(c, rng.randint(0, args.max_len), rng))
                if not rv.check_hom(r, lam, f, h):
                    bad += 1
        rep = {**base, "pairs_per_point": args.pairs, "failures": bad, "verdict": "PASS" if not bad else "FAIL"}
        emit(rep, cfg.fmt)
        return EXIT_OK if not bad else EXIT_FAIL
    if sub == "trace":
        cycles = [c.parse_path(args.cycle)] if args.cycle else [rv.random_cycle(c, args.max_len, rng) for _ in range(args.cycles)]
        results = []
        bad = 0
        for cyc in cycles:
            if not cyc.is_cycle:
                raise InputError(f"{args.cycle!r} is not a cycle")
            try:
                d = rv.trace_decompose(cyc, c, lam)
            except rv.DecompositionError as e:
                raise DomainError(str(e)) from None
            ok = all(r.x_trace(Element.of_path(c, cyc)) == rv._trace(rv.lusztig_map(r, d.f_prime)) + d.c(r.dimV)
                     for r in pts)
            bad += not ok
            results.append({"cycle": c.format_path(cyc), **d.to_json(), "holds": ok})
        rep = {**base, "decompositions": results, "verdict": "PASS" if not bad else "FAIL"}
        emit(rep, cfg.fmt)
        return EXIT_OK if not bad else EXIT_FAIL
    if sub == "brackets":
        if args.f and args.g:
            f, h = Element.parse(c, args.f), Element.parse(c, args.g)
        else:
            f = Element.of_path(c, rv.random_cycle(c, 2, rng))
            h = Element.of_path(c, rv.random_cycle(c, 2, rng))
        try:
            rep = rv.compare_brackets(f, h, pts, lam).to_json()
        except ValueError as e:
            raise InputError(str(e)) from None
        emit({**base, **rep}, cfg.fmt)
        return EXIT_OK if rep["verdict"] == "MATCH" else EXIT_FAIL
    raise InputError(f"unknown repvar subcommand {sub!r}")  # pragma: no cover


# ---------------------------------------------------------------------------


def _common(mode: str = "graph") -> argparse.ArgumentParser:
    # a fresh parent per subcommand: parents share action objects, so
    # per-command defaults would otherwise leak across subcommands
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=gc.MODES, default=mode, help="adjacency convention / theta variant")
    common.add_argument("--field", default="Q", help="Q or Fp:<prime>")
    common.add_argument("-N", type=int, default=None, help="max degree (default h for ADET, else 8)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--cache-dir", default=None, help="basis cache (default $PREPRO_CACHE_DIR or .prepro-cache)")
    common.add_argument("--no-cache", action="store_true")
    common.add_argument("--cap", type=int, default=qt.DEFAULT_COLUMN_CAP, help="max columns per degree")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    return common


def build_parser() -> argparse.ArgumentParser:

    ap = argparse.ArgumentParser(prog="prepro", description="Preprojective algebra computations.")
    sp = ap.add_subparsers(dest="cmd", required=True)

    p = sp.add_parser("classify", parents=[_common()], help="Dynkin class, h, P, bad primes")
    p.add_argument("graph")
    p.set_defaults(fn=cmd_classify)

    p = sp.add_parser("hilbert", parents=[_common()], help="Hilbert series, empirical vs closed")
    p.add_argument("graph")
    p.add_argument("--compare", action="store_true")
    p.add_argument("--closed", action="store_true")
    p.add_argument("--koszul", action="store_true")
    p.add_argument("--series", action="store_true", help="include the full matrix series")
    p.set_defaults(fn=cmd_hilbert)

    p = sp.add_parser("dim", parents=[_common()], help="total dimension vs h(h+1)r/6")
    p.add_argument("graph")
    p.set_defaults(fn=cmd_dim)

    p = sp.add_parser("hh0", parents=[_common()], help="trace space checks")
    p.add_argument("graph")
    p.add_argument("--i0", default=None, help="extending vertex (affine graphs)")
    p.set_defaults(fn=cmd_hh0)

    p = sp.add_parser("star", parents=[_common()], help="star graphs and their central corners")
    p.add_argument("rays", type=int, nargs="+")
    p.add_argument("--kleinian", action="store_true")
    p.set_defaults(fn=cmd_star)

    p = sp.add_parser("deform", parents=[_common("double")], help="filtered dims of Pi^lambda")
    p.add_argument("graph")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--delta-max", type=int, default=8)
    p.set_defaults(fn=cmd_deform)

    p = sp.add_parser("repvar", parents=[_common()], help="quiver-variety checks")
    p.add_argument("sub", choices=("sample", "check-hom", "trace", "brackets"))
    p.add_argument("graph")
    p.add_argument("--dimV", required=True)
    p.add_argument("--dimD", default=None, help="default dimV + 1")
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--cycles", type=int, default=5)
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--cycle", default=None, help="path literal of a cycle")
    p.add_argument("--f", default=None, help="element literal")
    p.add_argument("--g", default=None, help="element literal")
    p.set_defaults(fn=cmd_repvar)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except qt.ResourceCapError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (DomainError, gc.NotConnectedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except rv.FiberError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
