"""Hypothesis strategies for types of the calculus."""

from __future__ import annotations

from hypothesis import strategies as st

from nestcalc.syntax import (
    BVar, Binder, Mu, Nat, One, Prod, Sum, Type, VarApp, Zero,
)

GAMMA = {"c": 0, "d": 0, "h": 1}
PHI = {"a": 0, "b": 0}


def _var(ref, arity: int, sub) -> st.SearchStrategy[Type]:
    if arity == 0:
        return st.just(VarApp(ref))
    return st.tuples(*[sub] * arity).map(lambda args: VarApp(ref, args))


def types(visible: dict = PHI, group: tuple[int, ...] = (), depth: int = 3,
          scoped: bool = True) -> st.SearchStrategy[Type]:
    """Well-kinded types under ``GAMMA; visible`` plus the innermost binder
    ``group`` (arities).  With ``scoped=False`` binders of enclosing groups
    stay visible, which is only meaningful for syntax-level tests."""
    return _types(dict(visible), [tuple(group)], depth, scoped)


def _types(visible: dict, groups: list[tuple[int, ...]], depth: int,
           scoped: bool) -> st.SearchStrategy[Type]:
    leaves: list[st.SearchStrategy[Type]] = [st.just(Zero()), st.just(One())]
    leaves += [st.just(VarApp(n)) for n, k in {**GAMMA, **visible}.items() if k == 0]
    leaves += [st.just(VarApp(BVar(0, i))) for i, k in enumerate(groups[-1]) if k == 0]
    base = st.one_of(leaves)
    if depth <= 0:
        return base
    sub = _types(visible, groups, depth - 1, scoped)
    options = [base,
               st.builds(Sum, sub, sub),
               st.builds(Prod, sub, sub)]
    options += [_var(n, k, sub) for n, k in {**GAMMA, **visible}.items() if k]
    reach = range(len(groups)) if not scoped else range(1)
    for d in reach:
        for i, k in enumerate(groups[-1 - d]):
            if k:
                options.append(_var(BVar(d, i), k, sub))
    inner_visible = visible if not scoped else {}
    inner_groups = groups if not scoped else []

    def nat(n: int) -> st.SearchStrategy[Type]:
        inner = _types(inner_visible, inner_groups + [(0,) * n], depth - 1, scoped)
        binders = tuple(Binder(f"v{i}") for i in range(n))
        return st.builds(lambda s, t: Nat(binders, s, t), inner, inner)

    def mu(n: int) -> st.SearchStrategy[Type]:
        body = _types(inner_visible, inner_groups + [(n,) + (0,) * n], depth - 1, scoped)
        params = tuple(Binder(f"p{i}") for i in range(n))
        args = st.tuples(*[sub] * n)
        return st.builds(lambda b, xs: Mu(Binder("f", n), params, b, xs), body, args)

    options += [st.integers(0, 2).flatmap(nat), st.integers(0, 2).flatmap(mu)]
    return st.one_of(options)
