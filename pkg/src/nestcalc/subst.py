"""Type and term substitution.

Second-order substitution ``H[phi :=_alphas F]`` follows the clause-by-clause
definition: Nat-types are left alone, mu-types are entered only through their
outer arguments, and Lan-types through their body and arguments.  Because
binders are locally nameless and replacements are locally closed, none of
these operations can capture.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .syntax import (
    Abs, BVar, Lan, Mu, MuAbs, Nat, Prod, Sum, Term, Type, Var, VarApp, Zero, One,
    free_type_vars, fresh as fresh_name, instantiate, make_abs, map_term, map_type,
    open_lan, mk_lan, shift,
)


class SubstError(ValueError):
    pass


@dataclass(frozen=True)
class SubstBinding:
    """``target :=_along replacement`` with ``len(along)`` equal to the arity."""

    target: str
    arity: int
    along: tuple[str, ...]
    replacement: Type

    def __post_init__(self) -> None:
        if len(self.along) != self.arity:
            raise SubstError(
                f"binding for {self.target}^{self.arity} lists {len(self.along)} along-variable(s)")

    def as_abs(self) -> Abs:
        return make_abs(list(self.along), self.replacement)


def _as_abs(r: Union[Type, Abs]) -> Abs:
    return r if isinstance(r, Abs) else Abs((), r)


def substitute_free(t: Type, bindings: Mapping[str, Union[Type, Abs]], depth: int = 0) -> Type:
    """Simultaneous substitution for free names, entering every binder.

    Each replacement is locally closed.  A name bound to an ``Abs`` is
    replaced at each occurrence by the abstraction instantiated at the
    occurrence's (already substituted) arguments.
    """
    if not bindings:
        return t

    def on_var(v: VarApp, d: int) -> Type:
        if isinstance(v.ref, str) and v.ref in bindings:
            r = bindings[v.ref]
            if isinstance(r, Abs):
                if len(r.binders) != len(v.args):
                    raise SubstError(f"{v.ref} has arity {len(v.args)} but its replacement "
                                     f"abstracts {len(r.binders)} variable(s)")
                return instantiate(shift(r.body, d, 1), list(v.args))
            if v.args:
                raise SubstError(f"{v.ref} is applied to arguments but replaced by a type")
            return shift(r, d)
        return v

    return map_type(t, on_var, depth)


def subst_type(h: Type, b: SubstBinding) -> Type:
    """Second-order substitution ``h[target :=_along replacement]``."""
    repl = b.as_abs()

    def go(t: Type) -> Type:
        match t:
            case Zero() | One():
                return t
            case Sum(l, r):
                return Sum(go(l), go(r))
            case Prod(l, r):
                return Prod(go(l), go(r))
            case Nat():
                return t
            case VarApp(ref, args):
                new_args = tuple(go(a) for a in args)
                if ref == b.target:
                    if len(args) != b.arity:
                        raise SubstError(f"{b.target} occurs with {len(args)} argument(s), "
                                         f"binding has arity {b.arity}")
                    return instantiate(repl.body, list(new_args))
                return VarApp(ref, new_args)
            case Mu(fix, ps, body, args):
                return Mu(fix, ps, body, tuple(go(a) for a in args))
            case Lan(bs, along, body, args):
                names, ks, f = open_lan(t)
                if b.target in names:
                    raise SubstError("substitution target clashes with a Lan binder")
                return mk_lan(names, ks, go(f), tuple(go(a) for a in args))
        raise TypeError(f"not a type: {t!r}")

    return go(h)


def subst_type_first_order(h: Type, bindings: Iterable[tuple[str, Type]]) -> Type:
    """Sequential substitution ``h[a1 := F1][a2 := F2]...`` for arity-0 names."""
    for name, repl in bindings:
        for node_name, k in _occurrence_arities(h, name):
            if k != 0:
                raise SubstError(f"first-order substitution for {name}, which has arity {k}")
        h = substitute_free(h, {name: repl})
    return h


def _occurrence_arities(h: Type, name: str) -> list[tuple[str, int]]:
    from .syntax import iter_types
    return [(name, n.arity) for n, _ in iter_types(h)
            if isinstance(n, VarApp) and n.ref == name]


def replace_var(h: Type, old: tuple[str, int], new: tuple[str, int]) -> Type:
    """Textual replacement ``h[old :== new]`` of a variable name."""
    (o, ok), (n, nk) = old, new
    if ok != nk:
        raise SubstError(f"cannot replace {o}^{ok} by {n}^{nk}: arities differ")
    if n != o and n in free_type_vars(h):
        raise SubstError(f"{n} is not fresh")

    def on_var(v: VarApp, d: int) -> Type:
        if v.ref == o:
            if len(v.args) != ok:
                raise SubstError(f"{o} occurs with arity {len(v.args)}")
            return VarApp(n, v.args)
        return v

    return map_type(h, on_var)


def subst_term(t: Term, var: str, s: Term) -> Term:
    """``t[var := s]`` for a free term variable; ``s`` is locally closed."""
    return map_term(t, on_var=lambda v, d: s if v.ref == var else v)


def subst_term_types(t: Term, bindings: Mapping[str, Union[Type, Abs]]) -> Term:
    """Substitute free type names throughout every type embedded in ``t``."""
    return map_term(t, on_type=lambda x, d: substitute_free(x, bindings, d))


def unroll(mu: MuAbs, args: Iterable[Type]) -> Type:
    """``H[fix := (mu fix. \\params. H)][params := args]``: the source of ``in``
    at the given arguments."""
    from .syntax import open_mu
    args = list(args)
    f, params, h = open_mu(mu)
    betas = [fresh_name(p) for p in params]
    applied = mu.apply(VarApp(b) for b in betas)
    out = subst_type(h, SubstBinding(f, mu.fix.arity, tuple(betas), applied))
    out = subst_type_first_order(out, [(a, VarApp(b)) for a, b in zip(params, betas)])
    return substitute_free(out, dict(zip(betas, args)))
