import json
import random

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from prepro.graph import affine, chain, dynkin
from prepro.pathalg import Carrier, Element, cyclic_reduce, enumerate_paths, theta_omega
from prepro.repvar import (
    EntryFunction,
    Factor,
    FiberError,
    RepPoint,
    bivector_bracket,
    check_hom,
    compare_brackets,
    double_carrier,
    dumps_point,
    ensemble,
    finite_difference,
    frame,
    framed_carrier,
    gl_action,
    lusztig_bracket,
    lusztig_map,
    moment,
    necklace_bracket,
    on_fiber,
    random_cycle,
    random_entry_function,
    random_gl,
    random_path,
    sample_moment_fiber,
    trace_decompose,
    unframe,
    zero_point,
)

A2 = double_carrier(dynkin("A", 2))
D4 = double_carrier(dynkin("D", 4))


def test_sample_on_fiber():
    for lam in ([0, 0], [2, -1]):
        r = sample_moment_fiber(A2, [1, 2], [2, 3], lam, seed=3)
        assert on_fiber(r, lam)
        mu = moment(r)
        assert mu[1][0, 1] == 0 and mu[1][0, 0] == mpq(lam[1])


def test_sampler_errors():
    with pytest.raises(ValueError, match="dimD >= dimV"):
        sample_moment_fiber(A2, [2, 1], [1, 1], [0, 0], seed=0)
    with pytest.raises(ValueError, match="length"):
        sample_moment_fiber(A2, [1], [1], [0], seed=0)


def test_sampler_deterministic():
    a = sample_moment_fiber(D4, [1, 2, 1, 1], [2, 3, 2, 2], [1, 2, 3, 4], seed=11)
    b = sample_moment_fiber(D4, [1, 2, 1, 1], [2, 3, 2, 2], [1, 2, 3, 4], seed=11)
    assert dumps_point(a) == dumps_point(b)


def test_point_json_roundtrip():
    r = sample_moment_fiber(D4, [1, 2, 1, 1], [2, 3, 2, 2], [0, 0, 0, 0], seed=5)
    back = RepPoint.from_json(json.loads(dumps_point(r)))
    assert back == r


def test_zero_point_and_shape_checks():
    z = zero_point(A2, [1, 1], [1, 1])
    assert on_fiber(z, [0, 0]) and not on_fiber(z, [1, 0])
    with pytest.raises(ValueError, match="length"):
        zero_point(A2, [1], [1])


def test_check_hom_off_fiber():
    z = zero_point(A2, [1, 1], [1, 1])
    f = Element.parse(A2, "e1")
    with pytest.raises(FiberError, match="point not on the fiber"):
        check_hom(z, [1, 1], f, f)


def test_check_hom_small():
    lam = [1, -2]
    r = sample_moment_fiber(A2, [2, 1], [3, 2], lam, seed=1)
    rng = random.Random(0)
    for _ in range(20):
        f = Element.of_path(A2, random_path(A2, rng.randint(0, 4), rng))
        g = Element.of_path(A2, random_path(A2, rng.randint(0, 4), rng))
        assert check_hom(r, lam, f, g)


def test_gl_invariance():
    rng = random.Random(4)
    r = sample_moment_fiber(D4, [1, 2, 1, 1], [2, 3, 2, 2], [1, 0, 2, 0], seed=2)
    g = random_gl(r.dimV, rng)
    s = gl_action(r, g)
    assert on_fiber(s, [1, 0, 2, 0])
    for n in range(5):
        for p in enumerate_paths(D4, n)[:10]:
            f = Element.of_path(D4, p)
            assert np.array_equal(lusztig_map(r, f), lusztig_map(s, f))
            if p.is_cycle:
                assert r.x_trace(f) == s.x_trace(f)


def test_gl_rejects_singular():
    r = zero_point(A2, [1, 1], [1, 1])
    bad = [np.array([[mpq(0)]], dtype=object), np.array([[mpq(1)]], dtype=object)]
    with pytest.raises(ValueError, match="singular"):
        gl_action(r, bad)


@pytest.mark.parametrize("carrier", [A2, D4, double_carrier(dynkin("A", 3))])
def test_trace_decompose_identity(carrier):
    rng = random.Random(8)
    n = len(carrier.vertices)
    dimV = [rng.randint(1, 2) for _ in range(n)]
    lam = [rng.randint(-3, 3) for _ in range(n)]
    r = sample_moment_fiber(carrier, dimV, [d + 1 for d in dimV], lam, seed=9)
    for _ in range(10):
        p = random_cycle(carrier, 6, rng)
        dec = trace_decompose(p, carrier, lam)
        f = Element.of_path(carrier, p)
        assert r.x_trace(f) == np.trace(lusztig_map(r, dec.f_prime)) + dec.c(dimV)


def test_trace_decompose_trivial_and_errors():
    dec = trace_decompose(A2.trivial(0), A2, [0, 0])
    assert dec.constant == {0: 1} and not dec.f_prime
    assert dec.c([3, 5]) == 3
    with pytest.raises(ValueError, match="cycles"):
        trace_decompose(A2.parse_path("e1"), A2, [0, 0])
    js = trace_decompose(A2.parse_path("e1*.e1"), A2, [1, 0]).to_json()
    assert set(js) == {"f_prime", "constant"}


def test_trace_decompose_theta_cycle():
    # a* a = -theta_1, so Tr x(a* a) = -Tr(q_1 p_1) - lambda_1 dim V_1
    dec = trace_decompose(A2.parse_path("e1*.e1"), A2, [5, 0])
    assert dec.f_prime == Element.of_path(A2, A2.trivial(0), -1)
    assert dec.constant == {0: -5}


# -- necklace bracket ---------------------------------------------------------------

def test_necklace_loop_generators():
    c = double_carrier(chain(1, loop=True))
    # graph with a self-loop doubles to one arrow and its star
    x, xs = c.parse_path("e1"), c.parse_path("e1*")
    nb = necklace_bracket(x, xs, c)
    assert nb == Element.of_path(c, c.trivial(0))
    assert necklace_bracket(xs, x, c) == -nb


def test_necklace_rejects_open_paths():
    with pytest.raises(ValueError, match="cycles"):
        necklace_bracket(A2.parse_path("e1"), A2.parse_path("e1*"), A2)
    with pytest.raises(ValueError, match="carrier"):
        necklace_bracket(A2.parse_path("e1"), A2.parse_path("e1*"))


LOOP2 = double_carrier(affine("A", 1))
_CYCLES = [p for n in range(1, 5) for p in enumerate_paths(LOOP2, n) if p.is_cycle]


def _cyc_elements():
    return st.dictionaries(st.sampled_from(_CYCLES), st.integers(-2, 2).map(mpq), min_size=1, max_size=2).map(
        lambda d: Element(LOOP2, d)
    )


@settings(max_examples=25)
@given(_cyc_elements(), _cyc_elements())
def test_necklace_antisymmetric(f, g):
    assert necklace_bracket(f, g) == -necklace_bracket(g, f)


@settings(max_examples=15)
@given(_cyc_elements(), _cyc_elements(), _cyc_elements())
def test_necklace_jacobi(f, g, h):
    nb = necklace_bracket
    total = nb(f, nb(g, h)) + nb(g, nb(h, f)) + nb(h, nb(f, g))
    assert not cyclic_reduce(total)


@settings(max_examples=25)
@given(_cyc_elements(), _cyc_elements())
def test_necklace_invariant_under_rotation(f, g):
    assert necklace_bracket(f, g) == necklace_bracket(cyclic_reduce(f), cyclic_reduce(g))


def test_lusztig_bracket_generators():
    a, b = Element.parse(A2, "e1"), Element.parse(A2, "e1*")
    assert lusztig_bracket(a, b, [0, 0]) == theta_omega(A2)


# -- polynomial functions and the bivector --------------------------------------------

def _point(seed=0):
    return sample_moment_fiber(A2, [1, 2], [2, 3], [1, -1], seed)


def test_entry_function_validation():
    with pytest.raises(ValueError, match="compose"):
        EntryFunction.entry(A2, [("p", 0), ("p", 0)], 0, 0)
    with pytest.raises(ValueError, match="non-square"):
        EntryFunction.trace(A2, [("x", 0)])
    with pytest.raises(ValueError):
        EntryFunction(A2, [(1, (Factor((), None),))])


def test_entry_function_evaluation():
    r = _point()
    F = EntryFunction.entry(A2, [("x", 0)], 1, 0)
    assert F(r) == r.x[0][1, 0]
    T = EntryFunction.trace(A2, [("q", 0), ("p", 0)])
    assert T(r) == np.trace(r.q[0] @ r.p[0])
    f = Element.parse(A2, "e1*.e1")
    assert EntryFunction.lusztig_trace(f)(r) == np.trace(lusztig_map(r, f))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_gradient_matches_finite_difference(seed):
    rng = random.Random(seed)
    r = _point(seed % 7)
    F = random_entry_function(r, rng)
    for letter in sorted(F.letters()):
        G = F.gradient(r, letter)
        u, v = rng.randrange(G.shape[0]), rng.randrange(G.shape[1])
        assert G[u, v] == finite_difference(F, r, letter, u, v)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_bivector_antisymmetric_and_leibniz(seed):
    rng = random.Random(seed)
    r = _point(seed % 5)
    F, G, H = (random_entry_function(r, rng) for _ in range(3))
    assert bivector_bracket(F, G, r) == -bivector_bracket(G, F, r)
    assert bivector_bracket(F, G * H, r) == bivector_bracket(F, G, r) * H(r) + G(r) * bivector_bracket(F, H, r)


def test_bivector_canonical_pairs():
    r = _point()
    P = EntryFunction.entry(A2, [("p", 0)], 0, 0)
    Q = EntryFunction.entry(A2, [("q", 0)], 0, 0)
    assert bivector_bracket(P, Q, r) == 1
    X = EntryFunction.entry(A2, [("x", 0)], 0, 0)
    Xs = EntryFunction.entry(A2, [("x", 1)], 0, 0)
    assert bivector_bracket(X, Xs, r) == 1


def test_compare_brackets_vanishing_on_a2():
    # cycles on A_2 Poisson-commute, so either sign fits (reported as 0)
    pts = ensemble(A2, [1, 1], [2, 2], [1, -1], seed=1, size=3)
    f = Element.parse(A2, "e1*.e1")
    g = Element.parse(A2, "e1.e1*")
    rep = compare_brackets(f, g, pts, [1, -1])
    assert rep.match and rep.epsilon == {"lusztig": 0, "necklace": 0}
    assert rep.to_json()["verdict"] == "MATCH"


def test_compare_brackets_pins_sign_on_a3():
    c = double_carrier(dynkin("A", 3))
    lam = [1, -1, 2]
    pts = ensemble(c, [1, 2, 1], [2, 3, 2], lam, seed=1, size=4)
    rep = compare_brackets(Element.parse(c, "e1.e1*"), Element.parse(c, "e1.e1*.e2*.e2"), pts, lam)
    assert rep.epsilon == {"lusztig": 1, "necklace": 1}
    assert any(rep.residuals["lusztig"]["-1"])


_LOOP2_SMALL = [p for n in range(0, 4) for p in enumerate_paths(LOOP2, n) if p.is_cycle]


@settings(max_examples=20)
@given(st.sampled_from(_LOOP2_SMALL), st.sampled_from(_LOOP2_SMALL), st.integers(-2, 2))
def test_bracket_routes_agree(f, g, l):
    lam = [l, -l]
    pts = ensemble(LOOP2, [1, 1], [2, 2], lam, seed=3, size=2)
    rep = compare_brackets(Element.of_path(LOOP2, f), Element.of_path(LOOP2, g), pts, lam)
    assert rep.epsilon["lusztig"] == rep.epsilon["necklace"] in (0, 1)


def test_frame_unframe_roundtrip():
    c = double_carrier(dynkin("A", 3))
    for p in [q for n in range(0, 5) for q in enumerate_paths(c, n) if q.is_cycle]:
        f = Element.of_path(c, p)
        dec = unframe(frame(f), c, [1, 2, 3])
        assert dec.f_prime == f and not dec.constant


def test_unframe_uses_the_fiber_relation():
    # q p q p reads as q (theta - lambda) p on the fiber
    lam = [2, -1]
    r = sample_moment_fiber(A2, [1, 2], [2, 3], lam, seed=6)
    fc = framed_carrier(A2)
    one = frame(Element.of_path(A2, A2.trivial(0)))
    (path, _), = one.terms.items()
    twice = Element(fc, {fc.path(path.steps + path.steps): mpq(1)})
    dec = unframe(twice, A2, lam)
    M = r.q[0] @ r.p[0]
    assert np.trace(M @ M) == np.trace(lusztig_map(r, dec.f_prime)) + dec.c(r.dimV)


def test_framed_ids_avoid_collisions():
    from prepro.graph import Graph

    g = Graph(("a", "b"), (("a", "b"),), ("p_0",))
    c = double_carrier(g)
    fc = framed_carrier(c)
    assert len(fc.steps) == 2 + 4 and framed_carrier(c) is fc
    f = Element.of_path(c, c.parse_path("p_0*.p_0"))
    assert unframe(frame(f), c, [0, 0]).f_prime == f


def test_compare_brackets_rejects_off_fiber():
    z = zero_point(A2, [1, 1], [1, 1])
    f = Element.parse(A2, "e1*.e1")
    with pytest.raises(FiberError):
        compare_brackets(f, f, [z], [1, 1])
