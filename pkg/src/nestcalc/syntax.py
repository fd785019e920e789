"""Abstract syntax, surface parser and pretty-printer for types and terms.

Bound variables are locally nameless.  A type binder group (the binders of
``Nat``, of ``mu`` together with its fixpoint variable, of ``Lan``, of an
``L``-term, ...) is referenced by ``BVar(depth, index)`` where ``depth``
counts the groups crossed between the occurrence and its binder.  Term
variables bound by ``L`` and ``case`` are plain de Bruijn integers.  Binder
names are kept only as printing hints and never take part in equality, so
alpha-equivalence is structural equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple, Union


# ---------------------------------------------------------------------------
# Types


class BVar(NamedTuple):
    depth: int
    index: int


@dataclass(frozen=True)
class Binder:
    name: str = field(compare=False)
    arity: int = 0


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Sum:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class Prod:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class VarApp:
    """A type variable applied to as many arguments as its arity."""

    ref: Union[str, BVar]
    args: tuple["Type", ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class Nat:
    binders: tuple[Binder, ...]
    source: "Type"
    target: "Type"


@dataclass(frozen=True)
class Mu:
    """``(mu fix. \\params. body) args``; body binds the group [fix, *params]."""

    fix: Binder
    params: tuple[Binder, ...]
    body: "Type"
    args: tuple["Type", ...]

    @property
    def abstraction(self) -> "MuAbs":
        return MuAbs(self.fix, self.params, self.body)


@dataclass(frozen=True)
class Lan:
    """``(Lan[binders][along] body) args``; along and body bind the group."""

    binders: tuple[Binder, ...]
    along: tuple["Type", ...]
    body: "Type"
    args: tuple["Type", ...]


Type = Union[Zero, One, Sum, Prod, VarApp, Nat, Mu, Lan]

ZERO = Zero()
ONE = One()


@dataclass(frozen=True)
class MuAbs:
    """An unapplied fixpoint ``mu fix. \\params. body`` as used by in/fold."""

    fix: Binder
    params: tuple[Binder, ...]
    body: Type

    def apply(self, args: Iterable[Type]) -> Mu:
        return Mu(self.fix, self.params, self.body, tuple(args))


@dataclass(frozen=True)
class Abs:
    """A type abstracted over a group of binders (``\\b1, b2. body``)."""

    binders: tuple[Binder, ...]
    body: Type


def tvar(name: str, *args: Type) -> VarApp:
    return VarApp(name, tuple(args))


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    ref: Union[str, int]


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Absurd:
    annotation: Type
    body: "Term"


@dataclass(frozen=True)
class Inl:
    body: "Term"


@dataclass(frozen=True)
class Inr:
    body: "Term"


@dataclass(frozen=True)
class Case:
    scrutinee: "Term"
    left_name: str = field(compare=False)
    left: "Term" = None  # type: ignore[assignment]
    right_name: str = field(compare=False, default="y")
    right: "Term" = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Pair:
    first: "Term"
    second: "Term"


@dataclass(frozen=True)
class Proj1:
    body: "Term"


@dataclass(frozen=True)
class Proj2:
    body: "Term"


@dataclass(frozen=True)
class Lam:
    """``L[binders] var. body``.

    ``ann`` is the Nat-type the term was checked at; it is filled in by the
    typechecker or an explicit ascription and ignored by equality.
    """

    binders: tuple[Binder, ...]
    var: str = field(compare=False)
    body: "Term" = None  # type: ignore[assignment]
    ann: Union[Nat, None] = field(compare=False, default=None)


@dataclass(frozen=True)
class App:
    head: "Term"
    typeargs: tuple[Union[Type, Abs], ...]
    arg: "Term"


@dataclass(frozen=True)
class Map:
    """``map`` over ``body`` (binding [*phis, *gammas]) with one source and
    one target abstraction (binding [*betas_j, *gammas]) per mapped variable."""

    phis: tuple[Binder, ...]
    gammas: tuple[Binder, ...]
    body: Type
    sources: tuple[Abs, ...]
    targets: tuple[Abs, ...]


@dataclass(frozen=True)
class In:
    mu: MuAbs


@dataclass(frozen=True)
class Fold:
    mu: MuAbs
    target: Abs


@dataclass(frozen=True)
class KanIntro:
    """``kan`` with types under the group [*phis, *alphas]."""

    phis: tuple[Binder, ...]
    alphas: tuple[Binder, ...]
    along: tuple[Type, ...]
    body: Type


@dataclass(frozen=True)
class KanElim:
    """``cokan`` with types under the group [*phis, *alphas, *betas]."""

    phis: tuple[Binder, ...]
    alphas: tuple[Binder, ...]
    betas: tuple[Binder, ...]
    target: Type
    along: tuple[Type, ...]
    source: Type
    body: "Term"


@dataclass(frozen=True)
class Ann:
    term: "Term"
    type: Type


Term = Union[Var, Top, Absurd, Inl, Inr, Case, Pair, Proj1, Proj2, Lam, App,
             Map, In, Fold, KanIntro, KanElim, Ann]

UNIT = Top()


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class TypeDecl:
    name: str
    gamma: tuple[Binder, ...]
    phi: tuple[Binder, ...]
    body: Type
    gadt: bool = False
    line: int = 0
    col: int = 0

    @property
    def params(self) -> tuple[Binder, ...]:
        return self.gamma + self.phi


@dataclass(frozen=True)
class TermDecl:
    name: str
    type: Type
    term: Term
    gadt: bool = False
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Pragma:
    gadt: bool
    line: int = 0
    col: int = 0


Decl = Union[TypeDecl, TermDecl, Pragma]


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int,
                 expected: Iterable[str] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = sorted(set(expected))
        where = f"{line}:{col}: {message}"
        if self.expected:
            where += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(where)


# ---------------------------------------------------------------------------
# Generic traversal and binder plumbing


def map_type(t: Type, on_var: Callable[[VarApp, int], Type], depth: int = 0) -> Type:
    """Rebuild ``t`` bottom-up, calling ``on_var(node, depth)`` at every
    variable application after its arguments have been rebuilt."""
    match t:
        case Zero() | One():
            return t
        case Sum(l, r):
            return Sum(map_type(l, on_var, depth), map_type(r, on_var, depth))
        case Prod(l, r):
            return Prod(map_type(l, on_var, depth), map_type(r, on_var, depth))
        case VarApp(ref, args):
            return on_var(VarApp(ref, tuple(map_type(a, on_var, depth) for a in args)), depth)
        case Nat(bs, s, g):
            return Nat(bs, map_type(s, on_var, depth + 1), map_type(g, on_var, depth + 1))
        case Mu(fix, ps, body, args):
            return Mu(fix, ps, map_type(body, on_var, depth + 1),
                      tuple(map_type(a, on_var, depth) for a in args))
        case Lan(bs, along, body, args):
            return Lan(bs, tuple(map_type(k, on_var, depth + 1) for k in along),
                       map_type(body, on_var, depth + 1),
                       tuple(map_type(a, on_var, depth) for a in args))
    raise TypeError(f"not a type: {t!r}")


def iter_types(t: Type, depth: int = 0) -> Iterator[tuple[Type, int]]:
    """Yield every subtree with the number of binder groups above it."""
    yield t, depth
    match t:
        case Sum(l, r) | Prod(l, r):
            yield from iter_types(l, depth)
            yield from iter_types(r, depth)
        case VarApp(_, args):
            for a in args:
                yield from iter_types(a, depth)
        case Nat(_, s, g):
            yield from iter_types(s, depth + 1)
            yield from iter_types(g, depth + 1)
        case Mu(_, _, body, args):
            yield from iter_types(body, depth + 1)
            for a in args:
                yield from iter_types(a, depth)
        case Lan(_, along, body, args):
            for k in along:
                yield from iter_types(k, depth + 1)
            yield from iter_types(body, depth + 1)
            for a in args:
                yield from iter_types(a, depth)


def loose_groups(t: Type) -> int:
    """One more than the outermost enclosing binder group that ``t`` refers
    to, or 0 when ``t`` has no escaping bound reference.  Cached per node."""
    cached = t.__dict__.get("_loose")
    if cached is not None:
        return cached
    match t:
        case Zero() | One():
            out = 0
        case Sum(l, r) | Prod(l, r):
            out = max(loose_groups(l), loose_groups(r))
        case VarApp(ref, args):
            out = ref.depth + 1 if isinstance(ref, BVar) else 0
            out = max([out, *(loose_groups(a) for a in args)])
        case Nat(_, src, tgt):
            out = max(loose_groups(src), loose_groups(tgt)) - 1
        case Mu(_, _, body, args):
            out = max([loose_groups(body) - 1, *(loose_groups(a) for a in args)])
        case Lan(_, along, body, args):
            out = max([loose_groups(body) - 1, *(loose_groups(k) - 1 for k in along),
                       *(loose_groups(a) for a in args)])
        case _:
            raise TypeError(f"not a type: {t!r}")
    out = max(out, 0)
    object.__setattr__(t, "_loose", out)
    return out


def free_names(t: Type) -> frozenset[str]:
    """Names of the free type variables of ``t``.  Cached per node."""
    cached = t.__dict__.get("_free")
    if cached is not None:
        return cached
    match t:
        case Zero() | One():
            out = frozenset()
        case Sum(l, r) | Prod(l, r):
            out = free_names(l) | free_names(r)
        case VarApp(ref, args):
            out = frozenset([ref] if isinstance(ref, str) else []).union(
                *(free_names(a) for a in args))
        case Nat(_, src, tgt):
            out = free_names(src) | free_names(tgt)
        case Mu(_, _, body, args):
            out = free_names(body).union(*(free_names(a) for a in args))
        case Lan(_, along, body, args):
            out = free_names(body).union(*(free_names(k) for k in along),
                                         *(free_names(a) for a in args))
        case _:
            raise TypeError(f"not a type: {t!r}")
    object.__setattr__(t, "_free", out)
    return out


def shift(t: Type, by: int, cutoff: int = 0) -> Type:
    """Add ``by`` to the depth of every bound reference escaping ``t``."""
    if by == 0 or loose_groups(t) <= cutoff:
        return t

    def on_var(v: VarApp, d: int) -> Type:
        if isinstance(v.ref, BVar) and v.ref.depth >= d:
            return VarApp(BVar(v.ref.depth + by, v.ref.index), v.args)
        return v

    return map_type(t, on_var, cutoff)


def instantiate(t: Type, repls: list[Union[Type, Abs]], depth: int = 0) -> Type:
    """Remove the binder group at ``depth``, replacing its variables.

    ``repls`` live in the context outside the group.  An occurrence with
    arguments is replaced by its ``Abs`` instantiated at those arguments
    (second-order substitution at a bound variable).
    """
    if loose_groups(t) <= depth:
        return t

    def on_var(v: VarApp, d: int) -> Type:
        if not isinstance(v.ref, BVar):
            return v
        if v.ref.depth == d:
            r = repls[v.ref.index]
            if isinstance(r, Abs):
                if len(v.args) != len(r.binders):
                    raise ValueError("arity mismatch while instantiating a binder")
                return instantiate(shift(r.body, d, 1), list(v.args))
            if v.args:
                raise ValueError("arity mismatch while instantiating a binder")
            return shift(r, d)
        if v.ref.depth > d:
            return VarApp(BVar(v.ref.depth - 1, v.ref.index), v.args)
        return v

    return map_type(t, on_var, depth)


def open_type(t: Type, names: Iterable[str], binders: Iterable[Binder] = ()) -> Type:
    """Open the outermost binder group of ``t`` with free names."""
    if loose_groups(t) == 0:
        return t
    names = list(names)

    def on_var(v: VarApp, d: int) -> Type:
        if isinstance(v.ref, BVar) and v.ref.depth == d:
            return VarApp(names[v.ref.index], v.args)
        return v

    return map_type(t, on_var, 0)


def close_type(t: Type, names: Iterable[str], depth: int = 0) -> Type:
    """Abstract free ``names`` into the binder group at ``depth``."""
    index = {n: i for i, n in enumerate(names)}
    if not index or free_names(t).isdisjoint(index):
        return t

    def on_var(v: VarApp, d: int) -> Type:
        if isinstance(v.ref, str) and v.ref in index:
            return VarApp(BVar(d, index[v.ref]), v.args)
        return v

    return map_type(t, on_var, depth)


def free_type_vars(t: Type) -> dict[str, int]:
    """Free type variable names with their arities, in first-occurrence order."""
    out: dict[str, int] = {}
    for node, _ in iter_types(t):
        if isinstance(node, VarApp) and isinstance(node.ref, str):
            out.setdefault(node.ref, node.arity)
    return out


def free_type_occurrences(t: Type) -> list[tuple[str, int]]:
    return [(n.ref, n.arity) for n, _ in iter_types(t)
            if isinstance(n, VarApp) and isinstance(n.ref, str)]


def is_locally_closed(t: Type) -> bool:
    return all(not (isinstance(n, VarApp) and isinstance(n.ref, BVar) and n.ref.depth >= d)
               for n, d in iter_types(t))


_fresh_counter = [0]


def fresh(hint: str = "v") -> str:
    """A globally fresh name; ``#`` cannot appear in surface identifiers."""
    _fresh_counter[0] += 1
    return f"{hint.split('#')[0]}#{_fresh_counter[0]}"


def fresh_names(binders: Iterable[Binder]) -> list[str]:
    return [fresh(b.name) for b in binders]


def open_abs(a: Abs) -> tuple[list[str], Type]:
    names = fresh_names(a.binders)
    return names, open_type(a.body, names)


def make_abs(names: list[str], body: Type, arities: Iterable[int] | None = None) -> Abs:
    ar = list(arities) if arities is not None else [0] * len(names)
    return Abs(tuple(Binder(n, k) for n, k in zip(names, ar)), close_type(body, names))


def mk_nat(binders: Iterable[tuple[str, int]] | Iterable[str], source: Type, target: Type) -> Nat:
    bs = [(b, 0) if isinstance(b, str) else b for b in binders]
    names = [n for n, _ in bs]
    return Nat(tuple(Binder(n, k) for n, k in bs),
               close_type(source, names), close_type(target, names))


def open_nat(n: Nat) -> tuple[list[str], Type, Type]:
    names = fresh_names(n.binders)
    return names, open_type(n.source, names), open_type(n.target, names)


def mk_mu(fix: str, params: list[str], body: Type, args: Iterable[Type]) -> Mu:
    return Mu(Binder(fix, len(params)), tuple(Binder(p) for p in params),
              close_type(body, [fix, *params]), tuple(args))


def open_mu(m: Mu | MuAbs) -> tuple[str, list[str], Type]:
    fix = fresh(m.fix.name)
    params = fresh_names(m.params)
    return fix, params, open_type(m.body, [fix, *params])


def mk_lan(binders: list[str], along: Iterable[Type], body: Type, args: Iterable[Type]) -> Lan:
    return Lan(tuple(Binder(b) for b in binders),
               tuple(close_type(k, binders) for k in along),
               close_type(body, binders), tuple(args))


def open_lan(l: Lan) -> tuple[list[str], list[Type], Type]:
    names = fresh_names(l.binders)
    return names, [open_type(k, names) for k in l.along], open_type(l.body, names)


# Term-level traversal.  ``on_type(t, depth)`` sees every embedded type with
# the number of term-level type binder groups (L-terms) above it; ``on_var``
# sees every variable with the number of term binders above it.


@dataclass(frozen=True)
class TermInfo:
    """Occurrence summary of a term: escaping term-variable levels and type
    binder groups (as in ``loose_groups``), and free names of each sort."""

    loose_vars: int
    loose_types: int
    free_vars: frozenset[str]
    free_types: frozenset[str]


def _type_info(a: Union[Type, Abs], extra: int = 0) -> tuple[int, frozenset[str]]:
    if isinstance(a, Abs):
        a, extra = a.body, extra + 1
    return max(loose_groups(a) - extra, 0), free_names(a)


def term_info(t: Term) -> TermInfo:
    """Cached per node; lets traversals skip subterms they cannot change."""
    cached = t.__dict__.get("_info")
    if cached is not None:
        return cached
    lv, lt, fv, ft = 0, 0, set(), set()

    def sub(x: Term, vars_bound: int = 0, types_bound: int = 0) -> None:
        nonlocal lv, lt
        i = term_info(x)
        lv = max(lv, i.loose_vars - vars_bound)
        lt = max(lt, i.loose_types - types_bound)
        fv.update(i.free_vars)
        ft.update(i.free_types)

    def typ(a: Union[Type, Abs, None], extra: int = 0) -> None:
        nonlocal lt
        if a is not None:
            level, names = _type_info(a, extra)
            lt = max(lt, level)
            ft.update(names)

    match t:
        case Var(ref):
            if isinstance(ref, int):
                lv = ref + 1
            else:
                fv.add(ref)
        case Top():
            pass
        case Absurd(a, b):
            typ(a)
            sub(b)
        case Inl(b) | Inr(b) | Proj1(b) | Proj2(b):
            sub(b)
        case Case(sc, _, l, _, r):
            sub(sc)
            sub(l, 1)
            sub(r, 1)
        case Pair(a, b):
            sub(a)
            sub(b)
        case Lam(_, _, body, ann):
            sub(body, 1, 1)
            typ(ann)
        case App(h, ks, arg):
            sub(h)
            sub(arg)
            for k in ks:
                typ(k)
        case Map(_, _, body, srcs, tgts):
            typ(body, 1)
            for a in srcs + tgts:
                typ(a)
        case In(mu):
            typ(mu.body, 1)
        case Fold(mu, target):
            typ(mu.body, 1)
            typ(target)
        case KanIntro(_, _, along, body):
            for k in (*along, body):
                typ(k, 1)
        case KanElim(_, _, _, g, along, f, body):
            for k in (g, *along, f):
                typ(k, 1)
            sub(body)
        case Ann(b, a):
            sub(b)
            typ(a)
        case _:
            raise TypeError(f"not a term: {t!r}")
    out = TermInfo(lv, lt, frozenset(fv), frozenset(ft))
    object.__setattr__(t, "_info", out)
    return out


def map_term(t: Term,
             on_type: Callable[[Type, int], Type] | None = None,
             on_var: Callable[[Var, int], Term] | None = None,
             tdepth: int = 0, vdepth: int = 0,
             skip: Callable[[Term, int, int], bool] | None = None) -> Term:
    """``skip(t, td, vd)`` returning true leaves the subterm ``t`` as is."""
    ty = on_type or (lambda x, d: x)
    va = on_var or (lambda x, d: x)

    def ab(a: Union[Type, Abs], d: int) -> Union[Type, Abs]:
        return Abs(a.binders, ty(a.body, d + 1)) if isinstance(a, Abs) else ty(a, d)

    def go(t: Term, td: int, vd: int) -> Term:
        if skip is not None and skip(t, td, vd):
            return t
        match t:
            case Var():
                return va(t, vd)
            case Top():
                return t
            case Absurd(a, b):
                return Absurd(ty(a, td), go(b, td, vd))
            case Inl(b):
                return Inl(go(b, td, vd))
            case Inr(b):
                return Inr(go(b, td, vd))
            case Case(s, ln, l, rn, r):
                return Case(go(s, td, vd), ln, go(l, td, vd + 1), rn, go(r, td, vd + 1))
            case Pair(a, b):
                return Pair(go(a, td, vd), go(b, td, vd))
            case Proj1(b):
                return Proj1(go(b, td, vd))
            case Proj2(b):
                return Proj2(go(b, td, vd))
            case Lam(bs, x, body, ann):
                return Lam(bs, x, go(body, td + 1, vd + 1),
                           ty(ann, td) if ann is not None else None)  # type: ignore[arg-type]
            case App(h, ks, s):
                return App(go(h, td, vd), tuple(ab(k, td) for k in ks), go(s, td, vd))
            case Map(phis, gammas, body, srcs, tgts):
                return Map(phis, gammas, ty(body, td + 1),
                           tuple(ab(a, td) for a in srcs), tuple(ab(a, td) for a in tgts))
            case In(mu):
                return In(MuAbs(mu.fix, mu.params, ty(mu.body, td + 1)))
            case Fold(mu, target):
                return Fold(MuAbs(mu.fix, mu.params, ty(mu.body, td + 1)), ab(target, td))  # type: ignore[arg-type]
            case KanIntro(phis, alphas, along, body):
                return KanIntro(phis, alphas, tuple(ty(k, td + 1) for k in along), ty(body, td + 1))
            case KanElim(phis, alphas, betas, g, along, f, body):
                return KanElim(phis, alphas, betas, ty(g, td + 1),
                               tuple(ty(k, td + 1) for k in along), ty(f, td + 1),
                               go(body, td, vd))
            case Ann(b, a):
                return Ann(go(b, td, vd), ty(a, td))
        raise TypeError(f"not a term: {t!r}")

    return go(t, tdepth, vdepth)


def _no_loose_types(t: Term, td: int, vd: int) -> bool:
    return term_info(t).loose_types <= td


def open_term_types(t: Term, names: list[str]) -> Term:
    """Open the type group of an L-body with free names."""
    def on_type(x: Type, d: int) -> Type:
        if loose_groups(x) <= d:
            return x

        def on_var(v: VarApp, dd: int) -> Type:
            if isinstance(v.ref, BVar) and v.ref.depth == dd:
                return VarApp(names[v.ref.index], v.args)
            return v
        return map_type(x, on_var, d)
    return map_term(t, on_type=on_type, skip=_no_loose_types)


def instantiate_term_types(t: Term, repls: list[Union[Type, Abs]]) -> Term:
    return map_term(t, on_type=lambda x, d: instantiate(x, repls, d), skip=_no_loose_types)


def close_term_types(t: Term, names: list[str]) -> Term:
    if not names:
        return t
    return map_term(t, on_type=lambda x, d: close_type(x, names, d),
                    skip=lambda x, td, vd: term_info(x).free_types.isdisjoint(names))


def open_term_var(t: Term, value: Term) -> Term:
    """Replace de Bruijn variable 0 of a binder body by a closed term."""
    def on_var(v: Var, d: int) -> Term:
        if v.ref == d:
            return value
        return v
    return map_term(t, on_var=on_var, skip=lambda x, td, vd: term_info(x).loose_vars <= vd)


def close_term_var(t: Term, name: str) -> Term:
    def on_var(v: Var, d: int) -> Term:
        return Var(d) if v.ref == name else v
    return map_term(t, on_var=on_var, skip=lambda x, td, vd: name not in term_info(x).free_vars)


def iter_terms(t: Term) -> Iterator[Term]:
    yield t
    match t:
        case Absurd(_, b) | Inl(b) | Inr(b) | Proj1(b) | Proj2(b) | Ann(b, _):
            yield from iter_terms(b)
        case Case(s, _, l, _, r):
            yield from iter_terms(s)
            yield from iter_terms(l)
            yield from iter_terms(r)
        case Pair(a, b):
            yield from iter_terms(a)
            yield from iter_terms(b)
        case Lam(_, _, body, _):
            yield from iter_terms(body)
        case App(h, _, s):
            yield from iter_terms(h)
            yield from iter_terms(s)
        case KanElim(body=b):
            yield from iter_terms(b)


def free_term_vars(t: Term) -> set[str]:
    return {x.ref for x in iter_terms(t) if isinstance(x, Var) and isinstance(x.ref, str)}


def compose(s: Term, t: Term, binders: tuple[Binder, ...]) -> Lam:
    """``s o t = L[binders] x. s[binders] (t[binders] x)``."""
    ks = tuple(VarApp(BVar(0, i)) for i in range(len(binders)))
    return Lam(binders, "x", App(s, ks, App(t, ks, Var(0))))


def alpha_eq(x: Union[Type, Term], y: Union[Type, Term]) -> bool:
    """Binder names are printing hints only, so structural equality suffices."""
    return x == y


# ---------------------------------------------------------------------------
# Validation of arity invariants


class ArityError(ValueError):
    pass


def validate_type(t: Type, scopes: tuple[tuple[Binder, ...], ...] = (),
                  free: dict[str, int] | None = None) -> dict[str, int]:
    """Check the arity invariants; returns arities of free names."""
    free = {} if free is None else free

    def go(t: Type, scopes: tuple[tuple[Binder, ...], ...]) -> None:
        match t:
            case Zero() | One():
                pass
            case Sum(l, r) | Prod(l, r):
                go(l, scopes)
                go(r, scopes)
            case VarApp(ref, args):
                if isinstance(ref, BVar):
                    if ref.depth >= len(scopes) or ref.index >= len(scopes[-1 - ref.depth]):
                        raise ArityError(f"dangling bound variable {ref}")
                    want = scopes[-1 - ref.depth][ref.index].arity
                    name = scopes[-1 - ref.depth][ref.index].name
                else:
                    want = free.setdefault(ref, len(args))
                    name = ref
                if want != len(args):
                    raise ArityError(
                        f"variable {name} has arity {want} but is applied to {len(args)} argument(s)")
                for a in args:
                    go(a, scopes)
            case Nat(bs, s, g):
                go(s, scopes + (bs,))
                go(g, scopes + (bs,))
            case Mu(fix, ps, body, args):
                if fix.arity != len(ps) or len(args) != len(ps):
                    raise ArityError(
                        f"mu-type over {fix.name} has {len(ps)} parameter(s) "
                        f"and {len(args)} argument(s)")
                go(body, scopes + ((fix, *ps),))
                for a in args:
                    go(a, scopes)
            case Lan(bs, along, body, args):
                if len(along) != len(args):
                    raise ArityError("Lan-type needs one argument per along-type")
                if any(b.arity for b in bs):
                    raise ArityError("Lan binders must have arity 0")
                for k in along:
                    go(k, scopes + (bs,))
                go(body, scopes + (bs,))
                for a in args:
                    go(a, scopes)
            case _:
                raise TypeError(f"not a type: {t!r}")

    go(t, scopes)
    return free


def validate_term(t: Term, free: dict[str, int] | None = None) -> dict[str, int]:
    free = {} if free is None else free

    def ab(a: Union[Type, Abs], scopes) -> None:
        if isinstance(a, Abs):
            validate_type(a.body, scopes + (a.binders,), free)
        else:
            validate_type(a, scopes, free)

    def go(t: Term, scopes: tuple[tuple[Binder, ...], ...]) -> None:
        match t:
            case Lam(bs, _, body, ann):
                if ann is not None:
                    validate_type(ann, scopes, free)
                go(body, scopes + (bs,))
            case App(h, ks, s):
                for k in ks:
                    ab(k, scopes)
                go(h, scopes)
                go(s, scopes)
            case Map(phis, gammas, body, srcs, tgts):
                if not (len(srcs) == len(tgts) == len(phis)):
                    raise ArityError("map needs one source and one target per mapped variable")
                validate_type(body, scopes + (phis + gammas,), free)
                for p, a, b in zip(phis, srcs, tgts):
                    for x in (a, b):
                        if len(x.binders) != p.arity + len(gammas):
                            raise ArityError(
                                f"map argument for {p.name} must bind {p.arity} variable(s)")
                        ab(x, scopes)
            case In(mu):
                validate_type(mu.apply(VarApp(f"%{i}") for i in range(len(mu.params))), scopes, dict(free))
            case Fold(mu, target):
                validate_type(mu.apply(VarApp(f"%{i}") for i in range(len(mu.params))), scopes, dict(free))
                if len(target.binders) != len(mu.params):
                    raise ArityError("fold target must bind one variable per mu parameter")
                ab(target, scopes)
            case KanIntro(phis, alphas, along, body):
                for x in (*along, body):
                    validate_type(x, scopes + (phis + alphas,), free)
            case KanElim(phis, alphas, betas, g, along, f, body):
                if len(betas) != len(along):
                    raise ArityError("cokan needs one result variable per along-type")
                for x in (g, *along, f):
                    validate_type(x, scopes + (phis + alphas + betas,), free)
                go(body, scopes)
            case Absurd(a, b):
                validate_type(a, scopes, free)
                go(b, scopes)
            case Ann(b, a):
                validate_type(a, scopes, free)
                go(b, scopes)
            case Case(s, _, l, _, r):
                go(s, scopes)
                go(l, scopes)
                go(r, scopes)
            case Pair(a, b):
                go(a, scopes)
                go(b, scopes)
            case Inl(b) | Inr(b) | Proj1(b) | Proj2(b):
                go(b, scopes)
            case Var() | Top():
                pass
            case _:
                raise TypeError(f"not a term: {t!r}")

    go(t, ())
    return free


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "Nat", "mu", "Lan", "L", "unit", "absurd", "inl", "inr", "case", "of",
    "fst", "snd", "map", "in", "fold", "kan", "cokan", "type", "term", "pragma",
}
DECL_KEYWORDS = {"type", "term", "pragma"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<arrow>->)
  | (?P<num>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()\[\]{},;.\\+*^=:])
""", re.VERBOSE)


class Token(NamedTuple):
    kind: str   # "ident", "num", "kw", "sym", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ident", "num", "sym", "arrow"):
            s = m.group()
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            elif kind == "arrow":
                kind = "sym"
            tokens.append(Token(kind, s, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser


@dataclass
class _Alias:
    decl: TypeDecl


class Parser:
    def __init__(self, text: str, aliases: dict[str, TypeDecl] | None = None,
                 globals_: set[str] | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.aliases: dict[str, TypeDecl] = dict(aliases or {})
        self.globals: set[str] = set(globals_ or ())
        self.gadt = False
        # Type names bound by enclosing binders shadow aliases.
        self.bound: list[set[str]] = []

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, expected: Iterable[str] = ()) -> ParseError:
        return ParseError(msg, self.tok.line, self.tok.col, expected)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "kw") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"unexpected {found!r}", [text])
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise self.error(f"unexpected {found!r}", ["identifier"])
        s = self.tok.text
        self.i += 1
        return s

    def number(self) -> int:
        if self.tok.kind != "num":
            raise self.error(f"unexpected {self.tok.text!r}", ["number"])
        n = int(self.tok.text)
        self.i += 1
        return n

    def is_bound(self, name: str) -> bool:
        return any(name in s for s in self.bound)

    # -- declarations

    def parse_file(self) -> list[Decl]:
        decls: list[Decl] = []
        seen: set[str] = set()
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept("pragma"):
                word = self.ident()
                if word != "gadt":
                    raise ParseError(f"unknown pragma {word!r}", start.line, start.col, ["gadt"])
                mode = self.ident()
                if mode not in ("on", "off"):
                    raise self.error(f"unknown pragma value {mode!r}", ["on", "off"])
                self.gadt = mode == "on"
                decls.append(Pragma(self.gadt, start.line, start.col))
                continue
            if self.accept("type"):
                d = self.type_decl(start)
                self.aliases[d.name] = d
            elif self.accept("term"):
                d = self.term_decl(start)
                self.globals.add(d.name)
            else:
                raise self.error(f"unexpected {self.tok.text!r}", DECL_KEYWORDS)
            if d.name in seen:
                raise ParseError(f"duplicate declaration {d.name!r}", start.line, start.col)
            seen.add(d.name)
            decls.append(d)
        return decls

    def binder(self) -> tuple[str, int]:
        name = self.ident()
        arity = self.number() if self.accept("^") else 0
        return name, arity

    def binder_list(self, stop: tuple[str, ...] = ("]",)) -> list[tuple[str, int]]:
        out: list[tuple[str, int]] = []
        if any(self.at(s) for s in stop):
            return out
        out.append(self.binder())
        while self.accept(","):
            out.append(self.binder())
        names = [n for n, _ in out]
        if len(set(names)) != len(names):
            raise self.error("repeated binder name")
        return out

    def type_decl(self, start: Token) -> TypeDecl:
        name = self.ident()
        gamma: list[tuple[str, int]] = []
        phi: list[tuple[str, int]] = []
        while not self.at("="):
            if self.accept("{"):
                gamma.extend(self.binder_list(("}",)))
                self.expect("}")
            else:
                phi.append(self.binder())
        self.expect("=")
        names = [n for n, _ in gamma + phi]
        if len(set(names)) != len(names):
            raise ParseError("repeated parameter name", start.line, start.col)
        self.bound.append(set(names))
        body = self.type_()
        self.bound.pop()
        try:
            free = validate_type(body)
        except ArityError as e:
            raise ParseError(str(e), start.line, start.col) from None
        for n, k in gamma + phi:
            if n in free and free[n] != k:
                raise ParseError(f"parameter {n} declared with arity {k} but used with arity {free[n]}",
                                 start.line, start.col)
        return TypeDecl(name, tuple(Binder(n, k) for n, k in gamma),
                        tuple(Binder(n, k) for n, k in phi), body, self.gadt,
                        start.line, start.col)

    def term_decl(self, start: Token) -> TermDecl:
        name = self.ident()
        self.expect(":")
        ty = self.type_()
        self.expect("=")
        self.globals.add(name)  # permits self-reference to be reported by the checker
        # Free variables of the ascription form the non-functorial context.
        self.bound.append(set(free_type_vars(ty)))
        tm = self.term()
        self.bound.pop()
        if self.tok.kind != "eof" and not (self.tok.kind == "kw" and self.tok.text in DECL_KEYWORDS):
            raise self.error(f"unexpected {self.tok.text!r}", ["type", "term", "pragma", "end of input"])
        try:
            free = validate_type(ty)
            validate_term(tm, dict(free))
        except ArityError as e:
            raise ParseError(str(e), start.line, start.col) from None
        return TermDecl(name, ty, tm, self.gadt, start.line, start.col)

    # -- types

    def type_(self) -> Type:
        t = self.prod_type()
        while self.accept("+"):
            t = Sum(t, self.prod_type())
        return t

    def prod_type(self) -> Type:
        t = self.app_type()
        while self.accept("*"):
            t = Prod(t, self.app_type())
        return t

    def starts_atom(self) -> bool:
        t = self.tok
        return (t.kind == "num" and t.text in ("0", "1")) or t.kind == "ident" \
            or (t.kind == "sym" and t.text == "(") or (t.kind == "kw" and t.text == "Nat")

    def app_type(self) -> Type:
        t = self.tok
        if t.kind == "ident":
            name = self.ident()
            declared = self.number() if self.accept("^") else None
            args: list[Type] = []
            while self.starts_atom():
                args.append(self.atom_type())
            if declared is not None and declared != len(args):
                raise ParseError(f"variable {name} declared with arity {declared} "
                                 f"but applied to {len(args)} argument(s)", t.line, t.col)
            return self.apply_name(name, args, t)
        if self.at("("):
            head = self.paren_type(allow_abs=False)
            if isinstance(head, (Mu, Lan)) and not head.args:
                args = []
                while self.starts_atom():
                    args.append(self.atom_type())
                return self.apply_binder_form(head, args, t)
            return head
        return self.atom_type()

    def apply_binder_form(self, head: Type, args: list[Type], t: Token) -> Type:
        if not args:
            return head  # unapplied; only legal in the in/fold slots
        if isinstance(head, Mu):
            if len(args) != head.fix.arity:
                raise ParseError(f"mu-type with {head.fix.arity} parameter(s) applied to "
                                 f"{len(args)} argument(s)", t.line, t.col)
            return Mu(head.fix, head.params, head.body, tuple(args))
        if isinstance(head, Lan):
            if len(args) != len(head.along):
                raise ParseError(f"Lan-type with {len(head.along)} along-type(s) applied to "
                                 f"{len(args)} argument(s)", t.line, t.col)
            return Lan(head.binders, head.along, head.body, tuple(args))
        raise ParseError("only mu- and Lan-types can be applied", t.line, t.col)

    def apply_name(self, name: str, args: list[Type], t: Token) -> Type:
        if name in self.aliases and not self.is_bound(name):
            d = self.aliases[name]
            if d.params and not args:
                return self.bare_alias(d, t)
            return self.expand_alias(d, args, t)
        return VarApp(name, tuple(args))

    def expand_alias(self, d: TypeDecl, args: list[Type], t: Token) -> Type:
        from . import subst

        params = d.params
        if len(args) != len(params):
            raise ParseError(f"type {d.name} expects {len(params)} argument(s), "
                             f"got {len(args)}", t.line, t.col)
        body = d.body
        bindings: dict[str, Union[Type, Abs]] = {}
        for p, a in zip(params, args):
            if p.arity == 0:
                bindings[p.name] = a
                continue
            # A higher-arity parameter takes a bare variable or a type alias.
            if isinstance(a, VarApp) and isinstance(a.ref, str) and not a.args:
                names = [f"%{i}" for i in range(p.arity)]
                bindings[p.name] = make_abs(names, VarApp(a.ref, tuple(VarApp(n) for n in names)))
            elif isinstance(a, Mu) and not a.args and a.fix.arity == p.arity:
                names = [f"%{i}" for i in range(p.arity)]
                bindings[p.name] = make_abs(names, a.abstraction.apply(VarApp(n) for n in names))
            else:
                raise ParseError(f"argument for {p.name}^{p.arity} of {d.name} must be a "
                                 f"type constructor name", t.line, t.col)
        return subst.substitute_free(body, bindings)

    def atom_type(self) -> Type:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            if t.text == "0":
                return ZERO
            if t.text == "1":
                return ONE
            raise ParseError(f"unexpected number {t.text}", t.line, t.col, ["0", "1"])
        if t.kind == "ident":
            name = self.ident()
            if self.accept("^"):
                k = self.number()
                if k != 0:
                    # Bare higher-arity names are only meaningful as alias arguments.
                    return VarApp(name, ())
            if name in self.aliases and not self.is_bound(name):
                d = self.aliases[name]
                if not d.params:
                    return d.body
                # A bare alias name denotes its unapplied fixpoint, if it has one.
                return self.bare_alias(d, t)
            return VarApp(name, ())
        if self.accept("Nat"):
            self.expect("[")
            bs = self.binder_list()
            self.expect("]")
            self.expect("(")
            names = [n for n, _ in bs]
            self.bound.append(set(names))
            src = self.type_()
            self.expect(",")
            tgt = self.type_()
            self.bound.pop()
            self.expect(")")
            return mk_nat(bs, src, tgt)
        if self.at("("):
            return self.paren_type(allow_abs=False)
        raise self.error(f"unexpected {t.text or 'end of input'!r}",
                         ["0", "1", "identifier", "(", "Nat"])

    def bare_alias(self, d: TypeDecl, t: Token) -> Type:
        body = d.body
        if isinstance(body, Mu) and d.gamma == () and \
                body.args == tuple(VarApp(p.name) for p in d.phi) and \
                all(p.arity == 0 for p in d.phi):
            return Mu(body.fix, body.params, body.body, ())
        raise ParseError(f"type {d.name} must be applied to its parameters", t.line, t.col)

    def paren_type(self, allow_abs: bool) -> Type:
        self.expect("(")
        if self.accept("mu"):
            fix, declared = self.binder()
            self.expect(".")
            params: list[str] = []
            if self.accept("\\"):
                params = [n for n, _ in self.binder_list((".",))]
                self.expect(".")
            if declared and declared != len(params):
                raise self.error(f"fixpoint variable {fix} declared with arity {declared} "
                                 f"but abstracts {len(params)} parameter(s)")
            self.bound.append({fix, *params})
            body = self.type_()
            self.bound.pop()
            self.expect(")")
            return mk_mu(fix, params, body, ())
        if self.accept("Lan"):
            self.expect("[")
            bs = self.binder_list()
            if any(k for _, k in bs):
                raise self.error("Lan binders must have arity 0")
            self.expect("]")
            names = [n for n, _ in bs]
            self.bound.append(set(names))
            self.expect("[")
            along = [self.type_()]
            while self.accept(","):
                along.append(self.type_())
            self.expect("]")
            body = self.type_()
            self.bound.pop()
            self.expect(")")
            return mk_lan(names, along, body, ())
        t = self.type_()
        self.expect(")")
        return t

    def mu_slot(self) -> MuAbs:
        """The ``{...}`` slot of in/fold: an unapplied fixpoint."""
        tok = self.tok
        self.expect("{")
        t = self.type_()
        self.expect("}")
        if isinstance(t, Mu) and (not t.args or t.fix.arity == 0):
            return t.abstraction
        raise ParseError("expected an unapplied mu-type", tok.line, tok.col, ["(mu ...)"])

    def abs_type(self, default: list[tuple[str, int]], extra: list[str]) -> Abs:
        """``[b1, b2] T`` or ``T``; binds the prefix (or ``default``) then ``extra``."""
        if self.accept("["):
            bs = self.binder_list()
            self.expect("]")
        else:
            bs = list(default)
        names = [n for n, _ in bs] + list(extra)
        if len(set(names)) != len(names):
            raise self.error("binder clashes with an extra variable")
        self.bound.append(set(names))
        body = self.type_()
        self.bound.pop()
        return make_abs(names, body, [k for _, k in bs] + [0] * len(extra))

    # -- terms

    def term(self) -> Term:
        t = self.tok
        if self.accept("L"):
            self.expect("[")
            bs = self.binder_list()
            self.expect("]")
            x = self.ident()
            self.expect(".")
            names = [n for n, _ in bs]
            self.bound.append(set(names))
            body = self.term()
            self.bound.pop()
            body = close_term_var(close_term_types(body, names), x)
            return Lam(tuple(Binder(n, k) for n, k in bs), x, body)
        if self.accept("case"):
            scrut = self.term()
            self.expect("of")
            self.expect("{")
            if not (self.tok.kind == "kw" and self.tok.text == "inl"):
                raise self.error("expected inl branch", ["inl"])
            self.i += 1
            x = self.ident()
            self.expect("->")
            left = self.term()
            self.expect(";")
            if not (self.tok.kind == "kw" and self.tok.text == "inr"):
                raise self.error("expected inr branch", ["inr"])
            self.i += 1
            y = self.ident()
            self.expect("->")
            right = self.term()
            self.expect("}")
            return Case(scrut, x, close_term_var(left, x), y, close_term_var(right, y))
        return self.app_term()

    def app_term(self) -> Term:
        t = self.unary_term()
        while self.at("["):
            self.i += 1
            ks: list[Union[Type, Abs]] = []
            if not self.at("]"):
                ks.append(self.type_arg())
                while self.accept(","):
                    ks.append(self.type_arg())
            self.expect("]")
            arg = self.unary_term()
            t = App(t, tuple(ks), arg)
        return t

    def type_arg(self) -> Union[Type, Abs]:
        if self.accept("\\"):
            names = [n for n, _ in self.binder_list((".",))]
            self.expect(".")
            self.bound.append(set(names))
            body = self.type_()
            self.bound.pop()
            return make_abs(names, body)
        return self.type_()

    def unary_term(self) -> Term:
        t = self.tok
        if t.kind == "kw":
            if t.text in ("inl", "inr", "fst", "snd"):
                self.i += 1
                body = self.unary_term()
                return {"inl": Inl, "inr": Inr, "fst": Proj1, "snd": Proj2}[t.text](body)
            if t.text == "absurd":
                self.i += 1
                self.expect("{")
                ann = self.type_()
                self.expect("}")
                return Absurd(ann, self.unary_term())
            if t.text == "cokan":
                self.i += 1
                return self.cokan()
        return self.atom_term()

    def atom_term(self) -> Term:
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if self.accept("unit"):
            return UNIT
        if self.accept("("):
            first = self.term()
            if self.accept(","):
                second = self.term()
                self.expect(")")
                return Pair(first, second)
            if self.accept(":"):
                ty = self.type_()
                self.expect(")")
                if isinstance(first, Lam) and isinstance(ty, Nat):
                    return Lam(first.binders, first.var, first.body, ty)
                return Ann(first, ty)
            self.expect(")")
            return first
        if self.accept("map"):
            return self.map_term()
        if self.accept("in"):
            return In(self.mu_slot())
        if self.accept("fold"):
            mu = self.mu_slot()
            self.expect("{")
            target = self.abs_type([(p.name, 0) for p in mu.params], [])
            self.expect("}")
            if len(target.binders) != len(mu.params):
                raise ParseError("fold target must bind one variable per mu parameter",
                                 t.line, t.col)
            return Fold(mu, target)
        if self.accept("kan"):
            return self.kan()
        raise self.error(f"unexpected {t.text or 'end of input'!r}",
                         ["identifier", "unit", "(", "map", "in", "fold", "kan",
                          "L", "case", "inl", "inr", "fst", "snd", "absurd", "cokan"])

    def map_term(self) -> Term:
        tok = self.tok
        self.expect("{")
        self.expect("[")
        phis = self.binder_list(("]", ";"))
        gammas: list[tuple[str, int]] = []
        if self.accept(";"):
            gammas = self.binder_list()
            if any(k for _, k in gammas):
                raise self.error("extra map variables must have arity 0")
        self.expect("]")
        gnames = [n for n, _ in gammas]
        names = [n for n, _ in phis] + gnames
        if len(set(names)) != len(names):
            raise self.error("repeated binder name")
        self.bound.append(set(names))
        body = self.type_()
        self.bound.pop()
        self.expect("}")
        body_abs = close_type(body, names)

        def slot() -> list[Abs]:
            self.expect("{")
            out: list[Abs] = []
            for j, (p, k) in enumerate(phis):
                if j:
                    self.expect(",")
                default = [(f"{p}_{i}" if k > 1 else p + "_", 0) for i in range(k)] if k else []
                a = self.abs_type(default, gnames)
                if len(a.binders) != k + len(gnames):
                    raise ParseError(f"map argument for {p} must bind {k} variable(s)",
                                     tok.line, tok.col)
                out.append(a)
            self.expect("}")
            return out

        srcs = slot()
        tgts = slot()
        return Map(tuple(Binder(n, k) for n, k in phis), tuple(Binder(n) for n in gnames),
                   body_abs, tuple(srcs), tuple(tgts))

    def kan_binders(self, groups: int) -> list[list[tuple[str, int]]] | None:
        if not self.accept("["):
            return None
        out = [self.binder_list(("]", ";"))]
        for _ in range(groups - 1):
            self.expect(";")
            out.append(self.binder_list(("]", ";")))
        self.expect("]")
        return out

    def types_slot(self) -> list[Type]:
        self.expect("{")
        out = [self.type_()]
        while self.accept(","):
            out.append(self.type_())
        self.expect("}")
        return out

    def kan(self) -> Term:
        explicit = self.kan_binders(2)
        along = self.types_slot()
        self.expect("{")
        body = self.type_()
        self.expect("}")
        if explicit is None:
            alphas = [(n, 0) for t in along for n in free_type_vars(t) if not self._ambient(n)]
            alphas = list(dict.fromkeys(alphas))
            seen = {n for n, _ in alphas}
            phis = [(n, k) for n, k in free_type_vars(body).items()
                    if n not in seen and not self._ambient(n)]
        else:
            phis, alphas = explicit
        names = [n for n, _ in phis] + [n for n, _ in alphas]
        return KanIntro(tuple(Binder(n, k) for n, k in phis), tuple(Binder(n) for n, _ in alphas),
                        tuple(close_type(k, names) for k in along), close_type(body, names))

    def cokan(self) -> Term:
        explicit = self.kan_binders(3)
        self.expect("{")
        target = self.type_()
        self.expect("}")
        along = self.types_slot()
        self.expect("{")
        source = self.type_()
        self.expect("}")
        body = self.unary_term()
        if explicit is None:
            alphas = list(dict.fromkeys((n, 0) for t in along for n in free_type_vars(t)
                                        if not self._ambient(n)))
            anames = {n for n, _ in alphas}
            phis = [(n, k) for n, k in free_type_vars(source).items()
                    if n not in anames and not self._ambient(n)]
            pnames = {n for n, _ in phis}
            betas = [(n, 0) for n in free_type_vars(target)
                     if n not in pnames and not self._ambient(n)]
        else:
            phis, alphas, betas = explicit
        names = [n for n, _ in phis + alphas + betas]
        return KanElim(tuple(Binder(n, k) for n, k in phis), tuple(Binder(n) for n, _ in alphas),
                       tuple(Binder(n) for n, _ in betas), close_type(target, names),
                       tuple(close_type(k, names) for k in along), close_type(source, names), body)

    def _ambient(self, name: str) -> bool:
        # Names bound by enclosing binders are not captured by kan/cokan inference.
        return self.is_bound(name)


def parse_file(text: str) -> list[Decl]:
    """Parse a whole source file into declarations."""
    return Parser(text).parse_file()


def parse_type(text: str, aliases: dict[str, TypeDecl] | None = None) -> Type:
    p = Parser(text, aliases)
    t = p.type_()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}", ["end of input"])
    validate_type(t)
    return t


def parse_term(text: str, aliases: dict[str, TypeDecl] | None = None,
               globals_: set[str] | None = None) -> Term:
    p = Parser(text, aliases, globals_)
    t = p.term()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}", ["end of input"])
    validate_term(t)
    return t


# ---------------------------------------------------------------------------
# Pretty-printer


class _Names:
    """Chooses display names for binders, avoiding every name in use."""

    def __init__(self, avoid: Iterable[str]):
        self.used = set(avoid)

    def pick(self, hint: str) -> str:
        base = re.sub(r"[^A-Za-z0-9_']", "", hint.split("#")[0]) or "v"
        if base in KEYWORDS or not (base[0].isalpha() or base[0] == "_"):
            base = "v" + base
        name, n = base, 0
        while name in self.used:
            n += 1
            name = f"{base}{n}"
        self.used.add(name)
        return name

    def release(self, names: Iterable[str]) -> None:
        for n in names:
            self.used.discard(n)


def _binder_text(name: str, arity: int) -> str:
    return f"{name}^{arity}" if arity else name


def _type_free_names(t: Union[Type, Term]) -> set[str]:
    out: set[str] = set()
    if isinstance(t, (Zero, One, Sum, Prod, VarApp, Nat, Mu, Lan)):
        out.update(free_type_vars(t))
        return out

    def on_type(x: Type, d: int) -> Type:
        for node, _ in iter_types(x):
            if isinstance(node, VarApp) and isinstance(node.ref, str):
                out.add(node.ref)
        return x

    map_term(t, on_type=on_type)
    out.update(free_term_vars(t))
    return out


class _Printer:
    def __init__(self, avoid: Iterable[str]):
        self.names = _Names(avoid)

    def bind(self, binders: Iterable[Binder]) -> list[str]:
        return [self.names.pick(b.name) for b in binders]

    # types: precedence 1 sum, 2 product, 3 application, 4 atom

    def ty(self, t: Type, scopes: list[list[str]], prec: int = 0) -> str:
        match t:
            case Zero():
                return "0"
            case One():
                return "1"
            case Sum(l, r):
                s = f"{self.ty(l, scopes, 1)} + {self.ty(r, scopes, 2)}"
                return f"({s})" if prec > 1 else s
            case Prod(l, r):
                s = f"{self.ty(l, scopes, 2)} * {self.ty(r, scopes, 3)}"
                return f"({s})" if prec > 2 else s
            case VarApp(ref, args):
                name = scopes[-1 - ref.depth][ref.index] if isinstance(ref, BVar) else ref
                if not args:
                    return name
                s = " ".join([name] + [self.ty(a, scopes, 4) for a in args])
                return f"({s})" if prec > 3 else s
            case Nat(bs, src, tgt):
                names = self.bind(bs)
                inner = scopes + [names]
                s = (f"Nat[{', '.join(_binder_text(n, b.arity) for n, b in zip(names, bs))}]"
                     f"({self.ty(src, inner)}, {self.ty(tgt, inner)})")
                self.names.release(names)
                return s
            case Mu(fix, ps, body, args):
                s = self.mu_abs(MuAbs(fix, ps, body), scopes)
                if not args:
                    return s
                s = " ".join([s] + [self.ty(a, scopes, 4) for a in args])
                return f"({s})" if prec > 3 else s
            case Lan(bs, along, body, args):
                names = self.bind(bs)
                inner = scopes + [names]
                s = (f"(Lan[{', '.join(names)}][{', '.join(self.ty(k, inner) for k in along)}] "
                     f"{self.ty(body, inner)})")
                self.names.release(names)
                s = " ".join([s] + [self.ty(a, scopes, 4) for a in args])
                return f"({s})" if prec > 3 else s
        raise TypeError(f"not a type: {t!r}")

    def mu_abs(self, m: MuAbs, scopes: list[list[str]]) -> str:
        names = self.bind((m.fix, *m.params))
        body = self.ty(m.body, scopes + [names])
        self.names.release(names)
        if m.params:
            return f"(mu {names[0]}. \\{', '.join(names[1:])}. {body})"
        return f"(mu {names[0]}. {body})"

    def abs_(self, a: Abs, scopes: list[list[str]], nprefix: int) -> str:
        names = self.bind(a.binders[:nprefix])
        extra = scopes[-1] if nprefix < len(a.binders) else []
        inner = scopes[:-1] + [names + extra] if nprefix < len(a.binders) else scopes + [names]
        body = self.ty(a.body, inner)
        self.names.release(names)
        if names:
            bt = ", ".join(_binder_text(n, b.arity) for n, b in zip(names, a.binders))
            return f"[{bt}] {body}"
        return body

    def typearg(self, k: Union[Type, Abs], scopes: list[list[str]]) -> str:
        if isinstance(k, Abs):
            names = self.bind(k.binders)
            s = f"\\{', '.join(names)}. {self.ty(k.body, scopes + [names])}"
            self.names.release(names)
            return s
        return self.ty(k, scopes)

    # terms: 0 binder forms, 1 application, 2 prefix operators, 3 atoms

    def tm(self, t: Term, tscopes: list[list[str]], vscope: list[str], prec: int = 0) -> str:
        def paren(s: str, level: int) -> str:
            return f"({s})" if prec > level else s

        match t:
            case Var(ref):
                return vscope[-1 - ref] if isinstance(ref, int) else ref
            case Top():
                return "unit"
            case Absurd(a, b):
                return paren(f"absurd {{{self.ty(a, tscopes)}}} {self.tm(b, tscopes, vscope, 2)}", 2)
            case Inl(b) | Inr(b) | Proj1(b) | Proj2(b):
                op = {Inl: "inl", Inr: "inr", Proj1: "fst", Proj2: "snd"}[type(t)]
                return paren(f"{op} {self.tm(b, tscopes, vscope, 2)}", 2)
            case Pair(a, b):
                return f"({self.tm(a, tscopes, vscope)}, {self.tm(b, tscopes, vscope)})"
            case Case(s, ln, l, rn, r):
                x = self.names.pick(ln)
                left = self.tm(l, tscopes, vscope + [x])
                self.names.release([x])
                y = self.names.pick(rn)
                right = self.tm(r, tscopes, vscope + [y])
                self.names.release([y])
                return paren(f"case {self.tm(s, tscopes, vscope)} of "
                             f"{{ inl {x} -> {left}; inr {y} -> {right} }}", 0)
            case Lam(bs, x, body, ann):
                names = self.bind(bs)
                v = self.names.pick(x)
                s = (f"L[{', '.join(_binder_text(n, b.arity) for n, b in zip(names, bs))}] {v}. "
                     f"{self.tm(body, tscopes + [names], vscope + [v])}")
                self.names.release(names + [v])
                if ann is not None:
                    return f"({s} : {self.ty(ann, tscopes)})"
                return paren(s, 0)
            case App(h, ks, s):
                head = self.tm(h, tscopes, vscope, 1)
                args = ", ".join(self.typearg(k, tscopes) for k in ks)
                return paren(f"{head}[{args}] {self.tm(s, tscopes, vscope, 2)}", 1)
            case Map(phis, gammas, body, srcs, tgts):
                pn = self.bind(phis)
                gn = self.bind(gammas)
                prefix = ", ".join(_binder_text(n, b.arity) for n, b in zip(pn, phis))
                if gn:
                    prefix += "; " + ", ".join(gn)
                h = self.ty(body, tscopes + [pn + gn])
                self.names.release(pn)
                gscope = tscopes + [gn]
                src = ", ".join(self.abs_(a, gscope, p.arity) for a, p in zip(srcs, phis))
                tgt = ", ".join(self.abs_(a, gscope, p.arity) for a, p in zip(tgts, phis))
                self.names.release(gn)
                return f"map {{[{prefix}] {h}}} {{{src}}} {{{tgt}}}"
            case In(mu):
                return f"in {{{self.mu_abs(mu, tscopes)}}}"
            case Fold(mu, target):
                return f"fold {{{self.mu_abs(mu, tscopes)}}} {{{self.abs_(target, tscopes, len(target.binders))}}}"
            case KanIntro(phis, alphas, along, body):
                names = self.bind(phis + alphas)
                inner = tscopes + [names]
                pt = ", ".join(_binder_text(n, b.arity) for n, b in zip(names, phis))
                at = ", ".join(names[len(phis):])
                s = (f"kan [{pt}; {at}] {{{', '.join(self.ty(k, inner) for k in along)}}} "
                     f"{{{self.ty(body, inner)}}}")
                self.names.release(names)
                return s
            case KanElim(phis, alphas, betas, g, along, f, body):
                names = self.bind(phis + alphas + betas)
                inner = tscopes + [names]
                np, na = len(phis), len(alphas)
                pt = ", ".join(_binder_text(n, b.arity) for n, b in zip(names, phis))
                s = (f"cokan [{pt}; {', '.join(names[np:np + na])}; {', '.join(names[np + na:])}] "
                     f"{{{self.ty(g, inner)}}} {{{', '.join(self.ty(k, inner) for k in along)}}} "
                     f"{{{self.ty(f, inner)}}}")
                self.names.release(names)
                return paren(f"{s} {self.tm(body, tscopes, vscope, 2)}", 2)
            case Ann(b, a):
                return f"({self.tm(b, tscopes, vscope)} : {self.ty(a, tscopes)})"
        raise TypeError(f"not a term: {t!r}")


def pretty(node: Union[Type, Term, MuAbs, Abs, Decl]) -> str:
    """Render a type, term or declaration in surface syntax."""
    if isinstance(node, TypeDecl):
        pr = _Printer(_type_free_names(node.body))
        params = []
        if node.gamma:
            params.append("{" + ", ".join(_binder_text(b.name, b.arity) for b in node.gamma) + "}")
        params += [_binder_text(b.name, b.arity) for b in node.phi]
        head = " ".join([node.name] + params)
        return f"type {head} = {pr.ty(node.body, [])}"
    if isinstance(node, TermDecl):
        return f"term {node.name} : {pretty(node.type)} = {pretty(node.term)}"
    if isinstance(node, Pragma):
        return f"pragma gadt {'on' if node.gadt else 'off'}"
    if isinstance(node, MuAbs):
        return _Printer(_type_free_names(node.apply(()))).mu_abs(node, [])
    if isinstance(node, Abs):
        pr = _Printer(_type_free_names(node.body))
        return pr.abs_(node, [], len(node.binders))
    pr = _Printer(_type_free_names(node))
    if isinstance(node, (Zero, One, Sum, Prod, VarApp, Nat, Mu, Lan)):
        return pr.ty(node, [])
    return pr.tm(node, [], [])
