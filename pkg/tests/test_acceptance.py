"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary.  Run directly (``python3 tests/test_acceptance.py``)
for the same lines without pytest; ``--write-golden`` regenerates the
bracket golden file.
"""

import json
import random
import sys
import time
from pathlib import Path

import numpy as np
from gmpy2 import mpq

from prepro.fields import QQ, PrimeField
from prepro.graph import adjacency, affine, chain, classify, dynkin, extending_vertices, star
from prepro.pathalg import Element
from prepro.quotient import (
    build_filtered,
    build_graded,
    kleinian_presentation,
    presentation_quotient,
    star_presentation,
    top_degree_permutation,
    verify_hh0_affine,
    verify_hh0_finite,
    verify_identity,
)
from prepro.repvar import (
    bivector_bracket,
    check_hom,
    compare_brackets,
    double_carrier,
    ensemble,
    finite_difference,
    gl_action,
    lusztig_map,
    on_fiber,
    random_cycle,
    random_entry_function,
    random_gl,
    random_path,
    sample_moment_fiber,
    trace_decompose,
)
from prepro.series import (
    closed_hilbert,
    compare_series,
    dim_formula,
    kleinian_dim,
    koszul_criterion,
    spherical_closed,
)

GOLDEN = Path(__file__).parent / "golden" / "brackets.json"

ADET = (
    [dynkin("A", n) for n in range(1, 9)]
    + [dynkin("D", n) for n in range(4, 9)]
    + [dynkin("E", n) for n in (6, 7, 8)]
    + [chain(n, loop=True) for n in range(1, 5)]
)


# -- criteria --------------------------------------------------------------------------


def criterion_1():
    bad = []
    for g in ADET:
        c = classify(g)
        q = build_graded(g, N=c.coxeter)
        if not compare_series(q.hilbert_empirical(), closed_hilbert(c, adjacency(g), c.coxeter)).equal:
            bad.append(c.name)
        elif top_degree_permutation(q, c.coxeter) != c.involution:
            bad.append(c.name + " (P)")
    return not bad, f"{len(ADET)} ADET graphs, H(t) exact up to t^h" + (f"; mismatches {bad}" if bad else "")


def criterion_2():
    graphs = [
        (affine("A", 2), "graph"),
        (affine("A", 3), "graph"),
        (affine("D", 4), "graph"),
        (affine("A", 1), "graph"),
        (chain(1, loop=True), "double"),
    ]
    bad = []
    for g, mode in graphs:
        c = classify(g, mode)
        A = adjacency(g, mode)
        emp = build_graded(g, mode, N=8).hilbert_empirical()
        if c.kind == "finite" or not compare_series(emp, closed_hilbert(c, A, 8)).equal:
            bad.append(c.name)
        elif not koszul_criterion(emp, A, 8):
            bad.append(c.name + " (koszul)")
    return not bad, "affine/double graphs equal (1-At+t^2)^-1 to t^8, koszul" + (f"; failing {bad}" if bad else "")


def criterion_3():
    bad = []
    totals = {}
    for g in ADET:
        c = classify(g)
        total = build_graded(g, N=c.coxeter).total_dim()
        totals[c.name] = total
        if total != dim_formula(c):
            bad.append(c.name)
    for n in (1, 2, 3):
        if totals[f"A{2 * n}"] != 2 * totals[f"T{n}"]:
            bad.append(f"fold A{2 * n}/T{n}")
    ok = not bad and totals["E8"] == 1240
    return ok, f"h(h+1)r/6 exact, E8 = {totals['E8']}, folding n<=3" + (f"; failing {bad}" if bad else "")


E8_PRINTED = [1, 2, 3, 4, 5, 6, 6, 6, 6, 6, 5, 4, 3, 2, 1]


def criterion_4():
    bad = []
    for p in [(2, 2, 2), (2, 2, 3), (2, 3, 3), (2, 3, 4), (2, 3, 5)]:
        g, centre = star(p)
        c = classify(g)
        Nx = c.coxeter // 2 + 1
        corner = build_graded(g, N=2 * Nx).corner(centre).regraded_dims()
        pres = presentation_quotient(star_presentation(p), Nx).dims()
        closed = [int(x) for x in spherical_closed(p, Nx, c)]
        if not corner == pres == closed:
            bad.append(p)
        if p == (2, 3, 5) and (closed[:15] != E8_PRINTED or any(closed[15:])):
            bad.append("E8 polynomial")
    for abc, expected in [((2, 2, 2), 4), ((3, 3, 2), 12), ((4, 3, 2), 24), ((5, 3, 2), 60)]:
        pres = presentation_quotient(kleinian_presentation(*abc), 16).total_dim()
        if not kleinian_dim(*abc) == pres == expected:
            bad.append(abc)
    return not bad, "corner = presentation = closed; E8 polynomial; Kleinian 4/12/24/60" + (
        f"; failing {bad}" if bad else ""
    )


def _word_identities():
    out = []

    def alt(k, a, b):
        return ".".join(a if i % 2 == 0 else b for i in range(k))

    for n in (4, 5, 6, 7, 8):
        P = kleinian_presentation(n - 2, 2, 2)
        q = presentation_quotient(P, n + 2)
        for k in range(1, n + 2):
            lhs = P.element("y + z") ** k
            rhs = P.element(f"{alt(k, 'y', 'z')} + {alt(k, 'z', 'y')}")
            out.append((f"D{n} k={k}", verify_identity(lhs - rhs, q)))

    def words(P, *ws):
        return P.element(" + ".join(".".join(w) for w in ws))

    P = kleinian_presentation(3, 3, 2)
    q = presentation_quotient(P, 8)
    out.append(("E6 (y+z)^3", verify_identity(words(P, "yyz", "yzy", "zyy", "zyz"), q)))
    P = kleinian_presentation(4, 3, 2)
    q = presentation_quotient(P, 10)
    out.append(("E7 (y+z)^4", verify_identity(words(P, "yyzy", "yzyy", "yzyz", "zyyz", "zyzy"), q)))
    out.append(("E7 zyzyzyy", verify_identity(words(P, "zyzyzyy"), q)))
    out.append(("E7 FSS", verify_identity(words(P, "zyyzyzyy", "zyzyyzyy"), q)))
    out.append(("E7 SSS", verify_identity(words(P, "zyyzyyzyy"), q)))
    return out


def criterion_5():
    bad = []
    ade = [dynkin("A", n) for n in range(1, 7)] + [dynkin("D", n) for n in (4, 5, 6)] + [dynkin("E", 6)]
    for g in ade:
        if verify_hh0_finite(build_graded(g, N=2)).verdict != "PASS":
            bad.append(classify(g).name)
    for p in (2, 3):
        for g in (dynkin("A", 3), dynkin("A", 4)):
            if verify_hh0_finite(build_graded(g, field=PrimeField(p), N=2)).verdict != "PASS":
                bad.append(f"{classify(g).name}/F{p}")
    for g in (affine("A", 2), affine("D", 4)):
        for v in extending_vertices(g):
            if verify_hh0_affine(build_graded(g, N=6), v, 6).verdict != "PASS":
                bad.append(f"{classify(g).name}@{v}")
    ids = _word_identities()
    bad += [name for name, ok in ids if not ok]
    return not bad, f"finite ADE r<=6 over Q, A3/A4 over F2/F3, affine to degree 6, {len(ids)} word identities" + (
        f"; failing {bad}" if bad else ""
    )


def criterion_6():
    zero = build_filtered(dynkin("A", 2), [1, 1], N=4, delta_max=6)
    other = build_filtered(dynkin("A", 2), [1, -1], N=4, delta_max=6)
    ok = zero.total_dim == 0 and zero.delta <= 6 and other.total_dim > 0 and other.delta <= 6
    return ok, f"lambda=(1,1): dim {zero.total_dim} at delta {zero.delta}; lambda=(1,-1): dim {other.total_dim}"


GENERIC = [3, -2, 5, 7]


def criterion_7(points=100, pairs=100, cycles=25):
    bad = []
    counts = {"points": 0, "pairs": 0, "cycles": 0}
    for name, g in (("A2", dynkin("A", 2)), ("A3", dynkin("A", 3)), ("D4", dynkin("D", 4))):
        c = double_carrier(g)
        n = len(c.vertices)
        for lam in ([0] * n, GENERIC[:n]):
            rng = random.Random(f"{name}{lam}")
            pts = []
            for k in range(points):
                dimV = [rng.randint(1, 2) for _ in range(n)]
                r = sample_moment_fiber(c, dimV, [d + 1 for d in dimV], lam, seed=k)
                counts["points"] += 1
                if not on_fiber(r, lam):
                    bad.append(f"{name} fiber")
                    continue
                pts.append(r)
                s = gl_action(r, random_gl(dimV, rng))
                for _ in range(pairs):
                    f = Element.of_path(c, random_path(c, rng.randint(0, 4), rng))
                    h = Element.of_path(c, random_path(c, rng.randint(0, 4), rng))
                    counts["pairs"] += 1
                    if not check_hom(r, lam, f, h):
                        bad.append(f"{name} hom")
                    if not np.array_equal(lusztig_map(r, f), lusztig_map(s, f)):
                        bad.append(f"{name} gl")
            for _ in range(cycles):
                p = random_cycle(c, 6, rng)
                dec = trace_decompose(p, c, lam)
                f = Element.of_path(c, p)
                counts["cycles"] += 1
                for r in pts:
                    if r.x_trace(f) != np.trace(lusztig_map(r, dec.f_prime)) + dec.c(r.dimV):
                        bad.append(f"{name} trace")
                        break
    detail = f"{counts['points']} fiber points, {counts['pairs']} hom/gl pairs, {counts['cycles']} trace cycles"
    return not bad, detail + (f"; failing {sorted(set(bad))}" if bad else "")


def bracket_run():
    """Bracket comparisons recorded in the golden file.

    Traces of cycles Poisson-commute on A_2, so the A_2 runs fit either sign;
    the A_3 and affine A_1 runs have nonzero brackets and pin the sign.
    """
    cases = [
        ("A2", dynkin("A", 2), [[0, 0], [1, -1], [3, -2]], [[1, 1], [2, 1]],
         [("e1*.e1", "e1.e1*"), ("e1*.e1", "e1*.e1.e1*.e1"), ("e1.e1*.e1.e1*", "e1*.e1 + 2*e:1"),
          ("e:1", "e1*.e1.e1*.e1")]),
        ("A3", dynkin("A", 3), [[0, 0, 0], [1, -1, 2]], [[1, 2, 1]],
         [("e1.e1*", "e1.e1*.e2*.e2"), ("e2*.e2", "e2*.e2.e1.e1*"), ("e:2", "e1.e1*.e2*.e2")]),
        ("A1hat", affine("A", 1), [[0, 0], [2, -2]], [[1, 1]],
         [("e1.e1*", "e1.e2*"), ("e1*.e2", "e2*.e1.e1*.e1"), ("e:1", "e2.e1*")]),
    ]
    runs = []
    for name, g, lams, dims, pairs in cases:
        c = double_carrier(g)
        for lam in lams:
            pts = []
            for k, dimV in enumerate(dims):
                pts += ensemble(c, dimV, [d + 1 for d in dimV], lam, seed=k + 1, size=20 // len(dims))
            for f, h in pairs:
                rep = compare_brackets(Element.parse(c, f), Element.parse(c, h), pts, lam)
                runs.append({"carrier": name, "lambda": lam, **rep.to_json()})
    return runs


def _global_epsilon(runs):
    """The single sign fitting every run on both routes, or None."""
    signs = {e for run in runs for e in run["epsilon"].values()}
    if None in signs:
        return None
    pinned = signs - {0}
    return pinned.pop() if len(pinned) == 1 else None


def criterion_8(pairs=50):
    bad = []
    c = double_carrier(dynkin("A", 2))
    rng = random.Random(2024)
    for k in range(pairs):
        lam = [rng.randint(-3, 3), rng.randint(-3, 3)]
        r = sample_moment_fiber(c, [1, 2], [2, 3], lam, seed=k)
        F, G, H = (random_entry_function(r, rng) for _ in range(3))
        if bivector_bracket(F, G, r) != -bivector_bracket(G, F, r):
            bad.append(f"antisymmetry {k}")
        lhs = bivector_bracket(F, G * H, r)
        if lhs != bivector_bracket(F, G, r) * H(r) + G(r) * bivector_bracket(F, H, r):
            bad.append(f"leibniz {k}")
        for letter in sorted(F.letters()):
            D = F.gradient(r, letter)
            u, v = rng.randrange(D.shape[0]), rng.randrange(D.shape[1])
            if D[u, v] != finite_difference(F, r, letter, u, v):
                bad.append(f"derivative {k}")
    runs = bracket_run()
    eps = _global_epsilon(runs)
    residual_zero = eps is not None and all(
        run["max_residual"][route][f"{eps:+d}"] == "0" for run in runs for route in run["max_residual"]
    )
    a2 = [run for run in runs if run["carrier"] == "A2"]
    golden = json.loads(GOLDEN.read_text()) if GOLDEN.exists() else None
    if not residual_zero:
        bad.append("no single global sign")
    if not a2 or any(run["verdict"] != "MATCH" for run in a2):
        bad.append("A2 comparison")
    if golden is None or golden["epsilon"] != eps or golden["runs"] != runs:
        bad.append("golden mismatch")
    return not bad, (
        f"{pairs} entry-function triples exact; A2 residual 0 on both routes; "
        f"epsilon = {eps} pinned on A3 and affine A1"
    ) + (f"; failing {bad}" if bad else "")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


# -- pytest entry points ------------------------------------------------------------------


def _run(number, acceptance):
    ok, detail = CRITERIA[number - 1]()
    acceptance(number, ok, detail)
    assert ok, detail


def test_criterion_1_hilbert_finite(acceptance):
    _run(1, acceptance)


def test_criterion_2_hilbert_non_adet(acceptance):
    _run(2, acceptance)


def test_criterion_3_dimension_formula(acceptance):
    _run(3, acceptance)


def test_criterion_4_star_suite(acceptance):
    _run(4, acceptance)


def test_criterion_5_trace_space(acceptance):
    _run(5, acceptance)


def test_criterion_6_deformed_vanishing(acceptance):
    _run(6, acceptance)


def test_criterion_7_quiver_varieties(acceptance):
    _run(7, acceptance)


def test_criterion_8_poisson(acceptance):
    _run(8, acceptance)


if __name__ == "__main__":
    if "--write-golden" in sys.argv:
        runs = bracket_run()
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_text(json.dumps({"epsilon": _global_epsilon(runs), "runs": runs}, indent=2) + "\n")
        print(f"wrote {GOLDEN}")
    failed = 0
    for k, fn in enumerate(CRITERIA, 1):
        t = time.time()
        ok, detail = fn()
        failed += not ok
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail} ({time.time() - t:.1f}s)")
    sys.exit(1 if failed else 0)
