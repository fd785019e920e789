from __future__ import annotations

from functools import cache
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from nestcalc.finmodel import (
    Atom, EqRel, Env, FinRel, InL, InR, Model, Pair, UnionFind, Unit, arrow_env,
    enumerate_nat, equality_env, graph_env, probe_set, same_family, value_of_term,
)
from nestcalc.rewrite import enumerate_values, probe_type
from nestcalc.subst import SubstBinding, subst_type, substitute_free
from nestcalc.syntax import Var, make_abs, parse_term, parse_type
from helpers import program


@cache
def prog():
    return program("ptree.nc", "list.nc", "bush.nc", "grose.nc")


def ty(src: str):
    return parse_type(src, prog().aliases)


def size(src: str, n: int, depth: int) -> int:
    return Model(depth=depth).carrier(ty(src), Env({"a": probe_set(n)})).size()


# Types whose stage truncation coincides with bounding the nesting of in.
@pytest.mark.parametrize("src", ["List a", "PTree a", "ListADT a", "Tree a a", "Nats",
                                 "a * a + 1", "1 + a * (a + 1)"])
@pytest.mark.parametrize("depth", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_carrier_size_against_value_enumeration(src, depth, n):
    t = ty(src)
    closed = substitute_free(t, {"a": probe_type(n)})
    assert size(src, n, depth) == len(enumerate_values(closed, depth, 10**6))


def ptree_count(x: int, k: int) -> int:
    # Stage k of PTree at an x-element set: x + x^2 + x^4 + ... (k terms).
    return sum(x ** (2 ** j) for j in range(k))


def bush_count(x: int, k: int) -> int:
    return 0 if k == 0 else 1 + x * bush_count(bush_count(x, k - 1), k - 1)


def forest_count(x: int, k: int, depth: int) -> int:
    if k == 0:
        return 0
    return 1 + x * ptree_count(forest_count(x, k - 1, depth), depth)


@pytest.mark.parametrize("depth", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_truly_nested_stage_counts(depth, n):
    assert size("Bush a", n, depth) == bush_count(n, depth)
    if depth <= 2 or n <= 2:
        assert size("Forest a", n, depth) == forest_count(n, depth, depth)


def test_list_at_two_elements_depth_three():
    c = Model(depth=3).carrier(ty("List a"), Env({"a": probe_set(2)}))
    assert c.size() == 7


FUNCTORIAL = ["List a", "PTree a", "Bush a", "a * a + 1", "Forest a"]


def depth_for(src: str) -> int:
    return 2 if src == "Forest a" else 3


def functions(n: int, m: int) -> st.SearchStrategy[tuple[int, ...]]:
    return st.tuples(*[st.integers(0, m - 1)] * n) if m else st.just(()) if n == 0 else st.nothing()


def sizes_and_maps():
    def build(nm):
        n, m, k = nm
        return st.tuples(st.just(nm), functions(n, m), functions(m, k))
    triples = st.tuples(st.integers(0, 2), st.integers(1, 2), st.integers(1, 2))
    return triples.flatmap(build)


def arrow(table):
    return lambda x: Atom(table[x.tag])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FUNCTORIAL), sizes_and_maps())
def test_functor_laws(src, data):
    (n, m, k), f, g = data
    model = Model(depth=depth_for(src))
    t = ty(src)
    sa, sb, sc = probe_set(n), probe_set(m), probe_set(k)
    base = Env({"a": sa})
    ident = arrow_env(base, {})
    act_f = arrow_env(base, {"a": (sa, sb, arrow(f))})
    act_g = arrow_env(Env({"a": sb}), {"a": (sb, sc, arrow(g))})
    gf = tuple(g[i] for i in f)
    act_gf = arrow_env(base, {"a": (sa, sc, arrow(gf))})
    target = model.carrier(t, Env({"a": sb}))
    for v in model.carrier(t, base).elements():
        assert model.act(t, ident, v) == v
        fv = model.act(t, act_f, v)
        assert target.contains(fv)
        assert model.act(t, act_g, fv) == model.act(t, act_gf, v)


@pytest.mark.parametrize("src", FUNCTORIAL + ["Tree a a", "Nat[x](x, x * a)"])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_identity_extension(src, n):
    model = Model(depth=min(2, depth_for(src)), probe_sizes=(0, 1, 2), enumerate_nat=True)
    env = Env({"a": probe_set(n)})
    r = model.rel(ty(src), equality_env(env))
    assert r.pairs() == EqRel(model.carrier(ty(src), env)).pairs()


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FUNCTORIAL[:4]), st.integers(0, 2).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(1, 2).flatmap(
        lambda m: st.tuples(st.just(m), functions(n, m))))))
def test_graph_lemma(src, data):
    n, (m, f) = data
    model = Model(depth=3)
    t = ty(src)
    sa, sb = probe_set(n), probe_set(m)
    env = Env({"a": sa})
    r = model.rel(t, graph_env(env, {"a": (sa, sb, arrow(f))}))
    aenv = arrow_env(env, {"a": (sa, sb, arrow(f))})
    want = {(v, model.act(t, aenv, v)) for v in model.carrier(t, env).elements()}
    assert r.pairs() == want


@pytest.mark.parametrize("h", ["List a", "a + c * a", "PTree (a * c)"])
@pytest.mark.parametrize("f", ["c + 1", "c * c", "Bool"])
def test_first_order_substitution_coherence(h, f):
    model = Model(depth=2)
    env = Env({"c": probe_set(2)})
    fc = model.carrier(ty(f), env)
    lhs = model.carrier(substitute_free(ty(h), {"a": ty(f)}), env)
    rhs = model.carrier(ty(h), env.bind(a=fc))
    assert lhs.elements() == rhs.elements()


@pytest.mark.parametrize("h", ["g c + g (c * c)", "List (g c)", "g (g c)"])
@pytest.mark.parametrize("f", ["1 + x", "x * x", "x + c"])
def test_second_order_substitution_coherence(h, f):
    model = Model(depth=3)
    env = Env({"c": probe_set(2)})
    body = make_abs(["x"], ty(f))
    lhs = model.carrier(subst_type(ty(h), SubstBinding("g", 1, ("x",), ty(f))), env)
    rhs = model.carrier(ty(h), env.bind(g=model.functor(body.body, env, 1)))
    assert lhs.elements() == rhs.elements()


def test_empty_and_unit_and_sums():
    model = Model()
    assert model.carrier(ty("0"), Env()).size() == 0
    assert model.carrier(ty("1"), Env()).elements() == [Unit()]
    bools = model.carrier(ty("Bool"), Env()).elements()
    assert bools == [InL(Unit()), InR(Unit())]
    pairs = model.carrier(ty("a * a"), Env({"a": probe_set(2)})).elements()
    assert pairs == [Pair(Atom(i), Atom(j)) for i, j in product(range(2), repeat=2)]


def test_nat_enumeration_bottom_and_identity():
    model = Model(probe_sizes=(0, 1, 2))
    assert enumerate_nat(model, ty("Nat[x](1, x)"), Env(), (0, 1, 2)) == []
    model = Model(probe_sizes=(1, 2))
    fams = enumerate_nat(model, ty("Nat[x](x, x)"), Env(), (1, 2))
    assert len(fams) == 1
    ident = model.eval(parse_term("L[x] y. y"))
    assert same_family(model, fams[0], ident, ty("Nat[x](x, x)"), Env())


def test_nat_enumeration_swap_and_projections():
    model = Model(probe_sizes=(0, 1, 2))
    nat = ty("Nat[x](x * x, x * x)")
    # Parametric families on pairs: the four maps built from the projections.
    assert len(enumerate_nat(model, nat, Env(), (0, 1, 2))) == 4


def test_closed_terms_denote_canonical_values():
    p = prog()
    model = Model(depth=4, globals=p.terms)
    demo = value_of_term(model, Var("ptree_demo"))
    assert demo == value_of_term(model, Var("ptree_expected"))
    assert demo != value_of_term(model, Var("ptree_in"))


def test_lan_example_sizes():
    gp = program("seq.nc")
    model = Model(globals=gp.terms)
    lan = parse_type("(Lan[][1] 1) a")
    assert model.carrier(lan, Env({"a": probe_set(1)})).size() == 1
    r = model.rel(lan, Env({"a": FinRel(probe_set(1), probe_set(0), ())}))
    assert (r.dom.size(), r.cod.size(), len(r.pairs())) == (0, 0, 0)


def test_union_find_against_closure():
    edges = [(0, 1), (2, 3), (1, 3), (5, 6)]
    uf = UnionFind()
    for x in range(8):
        uf.add(x)
    for a, b in edges:
        uf.union(a, b)
    reach = {x: {x} for x in range(8)}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            merged = reach[a] | reach[b]
            for x in merged:
                if reach[x] != merged:
                    reach[x] = merged
                    changed = True
    for x, y in product(range(8), repeat=2):
        assert (uf.find(x) == uf.find(y)) == (y in reach[x])
    canon = uf.canonical(lambda v: v)
    assert canon[3] == 0 and canon[6] == 5 and canon[7] == 7
