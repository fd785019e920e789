"""Normalization by rewriting with the calculus's equational laws.

The strategy is innermost-first (call by value): the head and argument of an
application are normalized before a redex at the application is contracted.
Rules:

* ``delta``: a global name unfolds to its definition;
* ``beta``: ``(L[as] x. t)[Ks] s`` becomes ``t[as := Ks][x := s]``;
* ``case-inl`` / ``case-inr`` and ``fst`` / ``snd`` on constructor forms;
* ``fold``: ``fold alg`` applied to ``in v`` becomes ``alg`` applied to the
  structural map of ``fold alg`` over ``v``;
* ``map``: ``map_H eta`` applied to a value is computed by the shape of
  ``H``: identity where no mapped variable occurs (this covers 0, 1 and
  Nat-types), componentwise at sums and products, ``eta`` after the source
  functor's map at a mapped variable, and by unfolding one layer at a
  mu-type;
* ``ann``: a type ascription is dropped;
* ``eta``: ``L[as] x. t[as] x`` becomes ``t``, at the top of the result only.

Kan-extension terms have no rewrite rules; they are left in place.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterable, Mapping, Union

from .subst import substitute_free, unroll
from .syntax import (
    Abs, Absurd, Ann, App, Binder, BVar, Case, Fold, In, Inl, Inr, KanElim, KanIntro,
    Lam, Lan, Map, Mu, MuAbs, Nat, One, Pair, Prod, Proj1, Proj2, Sum, Term, Top, Type,
    Var, VarApp, Zero, close_term_types, close_term_var, free_type_vars, fresh,
    fresh_names, instantiate, instantiate_term_types, iter_types, make_abs, map_term,
    map_type, open_term_types,
    open_term_var, open_type, pretty, shift,
)

DEFAULT_FUEL = 10 ** 6


class FuelExhausted(Exception):
    def __init__(self, trace: "RewriteTrace"):
        super().__init__(f"rewrite fuel exhausted after {trace.fuel_used} step(s)")
        self.trace = trace


class IllTypedInput(Exception):
    pass


class _Stuck(Exception):
    """A map redex whose argument is not in constructor form."""


@dataclass
class Step:
    rule: str
    path: tuple[str, ...]
    before: Term
    after: Term

    def to_json(self) -> dict[str, Any]:
        return {"rule": self.rule, "path": "/".join(self.path),
                "before": pretty(self.before), "after": pretty(self.after)}


@dataclass
class RewriteTrace:
    steps: list[Step] = field(default_factory=list)
    fuel_used: int = 0

    def rules(self) -> list[str]:
        return [s.rule for s in self.steps]

    def to_json(self) -> dict[str, Any]:
        return {"fuel_used": self.fuel_used, "steps": [s.to_json() for s in self.steps]}


class Rewriter:
    def __init__(self, globals_: Mapping[str, Term] | None = None, fuel: int = DEFAULT_FUEL,
                 record: bool = True, seed: int | None = None):
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.globals = dict(globals_ or {})
        self.fuel = fuel
        self.record = record
        self.trace = RewriteTrace()
        # With a seed, beta-redexes are sometimes contracted before their
        # argument is normalized, which varies the reduction order.
        self.rng = random.Random(seed) if seed is not None else None
        # Marks nodes already in normal form for these globals, so reducts
        # that reuse normalized subterms do not re-traverse them.
        self.token = object()

    def step(self, rule: str, path: tuple[str, ...], before: Term, after: Term) -> None:
        if self.trace.fuel_used >= self.fuel:
            raise FuelExhausted(self.trace)
        self.trace.fuel_used += 1
        if self.record:
            self.trace.steps.append(Step(rule, path, before, after))

    # -- the strategy

    def norm(self, t: Term, path: tuple[str, ...] = ()) -> Term:
        if t.__dict__.get("_nf") is self.token:
            return t
        out = self._norm(t, path)
        object.__setattr__(out, "_nf", self.token)
        return out

    def _norm(self, t: Term, path: tuple[str, ...]) -> Term:
        match t:
            case Var(ref) if isinstance(ref, str) and ref in self.globals:
                body = self.globals[ref]
                self.step("delta", path, t, body)
                return self.norm(body, path)
            case Var() | Top() | Map() | In() | Fold() | KanIntro():
                return t
            case Ann(body, _):
                self.step("ann", path, t, body)
                return self.norm(body, path)
            case Absurd(a, body):
                return Absurd(a, self.norm(body, path + ("absurd",)))
            case Inl(body):
                return Inl(self.norm(body, path + ("inl",)))
            case Inr(body):
                return Inr(self.norm(body, path + ("inr",)))
            case Pair(a, b):
                return Pair(self.norm(a, path + ("fst",)), self.norm(b, path + ("snd",)))
            case Proj1(body) | Proj2(body):
                b = self.norm(body, path + ("proj",))
                if isinstance(b, Pair):
                    out = b.first if isinstance(t, Proj1) else b.second
                    self.step("fst" if isinstance(t, Proj1) else "snd", path, type(t)(b), out)
                    return out
                return type(t)(b)
            case Case(scrut, ln, left, rn, right):
                s = self.norm(scrut, path + ("scrutinee",))
                if isinstance(s, Inl):
                    out = open_term_var(left, s.body)
                    self.step("case-inl", path, Case(s, ln, left, rn, right), out)
                    return self.norm(out, path)
                if isinstance(s, Inr):
                    out = open_term_var(right, s.body)
                    self.step("case-inr", path, Case(s, ln, left, rn, right), out)
                    return self.norm(out, path)
                return Case(s, ln, self.under_var(left, ln, path + ("inl",)),
                            rn, self.under_var(right, rn, path + ("inr",)))
            case Lam(bs, x, body, ann):
                names = fresh_names(bs)
                v = fresh(x)
                opened = open_term_var(open_term_types(body, names), Var(v))
                nb = self.norm(opened, path + ("body",))
                return Lam(bs, x, close_term_types(close_term_var(nb, v), names), ann)
            case KanElim():
                return KanElim(t.phis, t.alphas, t.betas, t.target, t.along, t.source,
                               self.norm(t.body, path + ("cokan",)))
            case App(head, ks, arg):
                return self.norm_app(head, ks, arg, path)
        raise TypeError(f"not a term: {t!r}")

    def under_var(self, body: Term, hint: str, path: tuple[str, ...]) -> Term:
        v = fresh(hint)
        return close_term_var(self.norm(open_term_var(body, Var(v)), path), v)

    def norm_app(self, head: Term, ks: tuple, arg: Term, path: tuple[str, ...]) -> Term:
        h = self.norm(head, path + ("head",))
        if isinstance(h, Lam) and self.rng is not None and self.rng.random() < 0.5:
            out = beta(h, ks, arg)
            self.step("beta", path, App(h, ks, arg), out)
            return self.norm(out, path)
        s = self.norm(arg, path + ("arg",))
        redex = App(h, ks, s)
        if isinstance(h, Lam):
            out = beta(h, ks, s)
            self.step("beta", path, redex, out)
            return self.norm(out, path)
        if isinstance(h, App) and isinstance(h.head, Fold) and _is_in(s):
            out = fold_step(h.head, h.arg, ks, s.arg)
            self.step("fold", path, redex, out)
            return self.norm(out, path)
        if isinstance(h, App) and isinstance(h.head, Map):
            try:
                out = map_step(h.head, h.arg, ks, s)
            except _Stuck:
                return redex
            self.step("map", path, redex, out)
            return self.norm(out, path)
        return redex


def _is_in(t: Term) -> bool:
    return isinstance(t, App) and isinstance(t.head, In)


def beta(lam: Lam, ks: tuple, arg: Term) -> Term:
    return open_term_var(instantiate_term_types(lam.body, list(ks)), arg)


def fold_step(fold: Fold, alg: Term, ks: tuple, body: Term) -> Term:
    """``fold alg (in[Ks] v)`` to ``alg[Ks] (map_H (fold alg) [Ks] v)``."""
    mu = fold.mu
    k = len(mu.params)
    betas = tuple(Binder(p.name) for p in mu.params)
    gammas = tuple(Binder(p.name) for p in mu.params)
    own = tuple(VarApp(BVar(0, i)) for i in range(k))
    src = Mu(mu.fix, mu.params, shift(mu.body, 1, 1), own)
    tgt = fold.target.body
    m = Map((mu.fix,), gammas, mu.body,
            (Abs(betas + gammas, src),), (Abs(betas + gammas, tgt),))
    # The map argument must bind the extra variables, so fold is eta-expanded.
    eta_fold = Lam(betas + gammas, "y", App(App(fold, (), alg), own, Var(0)),
                   Nat(betas + gammas, src, tgt))
    return App(alg, ks, App(App(m, (), eta_fold), ks, body))


# ---------------------------------------------------------------------------
# The map rule


@dataclass(frozen=True)
class _Mapped:
    """How a mapped variable acts: ``fn`` for arity-0 variables introduced
    while descending; ``eta`` with source/target abstractions otherwise."""

    target: Union[Type, Abs]
    fn: Any = None
    eta: Term | None = None
    source: Abs | None = None


def _component(fs: Term, j: int, n: int) -> Term:
    """Component ``j`` of the left-nested product of ``n`` map arguments."""
    if n == 1:
        return fs
    t = fs
    for _ in range(n - 1 - j):
        t = t.first if isinstance(t, Pair) else Proj1(t)
    if j == 0:
        return t
    return t.second if isinstance(t, Pair) else Proj2(t)


def _close_over(a: Abs, prefix: int, ks: tuple) -> Abs:
    """Instantiate the trailing (extra) binders of ``a`` with ``ks``."""
    names = fresh_names(a.binders)
    body = open_type(a.body, names)
    body = substitute_free(body, dict(zip(names[prefix:], ks)))
    return make_abs(names[:prefix], body, [b.arity for b in a.binders[:prefix]])


def map_step(m: Map, fs: Term, ks: tuple, v: Term) -> Term:
    pnames = fresh_names(m.phis)
    gnames = fresh_names(m.gammas)
    h = open_type(m.body, pnames + gnames)
    h = substitute_free(h, dict(zip(gnames, ks)))
    env: dict[str, _Mapped] = {}
    for j, (pn, p) in enumerate(zip(pnames, m.phis)):
        env[pn] = _Mapped(target=_close_over(m.targets[j], p.arity, ks),
                          eta=_component(fs, j, len(m.phis)),
                          source=_close_over(m.sources[j], p.arity, ks))
    return _map_value(h, env, ks, v)


def _target(t: Type, env: Mapping[str, _Mapped]) -> Type:
    return substitute_free(t, {n: e.target for n, e in env.items()})


def _map_value(t: Type, env: Mapping[str, _Mapped], ks: tuple, v: Term) -> Term:
    if not (set(free_type_vars(t)) & set(env)):
        return v
    match t:
        case Sum(l, r):
            if isinstance(v, Inl):
                return Inl(_map_value(l, env, ks, v.body))
            if isinstance(v, Inr):
                return Inr(_map_value(r, env, ks, v.body))
            raise _Stuck
        case Prod(l, r):
            if isinstance(v, Pair):
                return Pair(_map_value(l, env, ks, v.first), _map_value(r, env, ks, v.second))
            raise _Stuck
        case VarApp(ref, args) if ref in env:
            e = env[ref]
            if e.fn is not None:
                return e.fn(v)
            # Map the source functor along the arguments, then apply eta at
            # the target instantiation.
            names = fresh_names(e.source.binders)
            src = open_type(e.source.body, names)
            inner = {n: _Mapped(target=_target(a, env),
                                fn=lambda w, a=a: _map_value(a, env, ks, w))
                     for n, a in zip(names, args)}
            w = _map_value(src, inner, ks, v)
            return App(e.eta, tuple(_target(a, env) for a in args) + tuple(ks), w)
        case Mu(fix, ps, body, args):
            if not _is_in(v):
                raise _Stuck
            mu = MuAbs(fix, ps, body)
            w = _map_value(unroll(mu, args), env, ks, v.arg)
            return App(In(mu), tuple(_target(a, env) for a in args), w)
    # A non-functorial constructor variable or a Lan-type over mapped
    # variables has no syntactic map.
    raise _Stuck


# ---------------------------------------------------------------------------
# Entry points


def eta_contract(t: Term) -> tuple[Term, bool]:
    """``L[as] x. h[as] x`` to ``h`` when ``h`` mentions neither ``as`` nor ``x``."""
    if not (isinstance(t, Lam) and isinstance(t.body, App)):
        return t, False
    app = t.body
    own = tuple(VarApp(BVar(0, i)) for i in range(len(t.binders)))
    if app.typeargs != own or app.arg != Var(0):
        return t, False
    uses: list[bool] = []

    def on_var(v: Var, d: int) -> Term:
        if v.ref == d:
            uses.append(True)
        return v

    def on_type(x: Type, d: int) -> Type:
        if any(isinstance(n, VarApp) and isinstance(n.ref, BVar) and n.ref.depth == dd
               for n, dd in iter_types(x, d)):
            uses.append(True)
        return x

    map_term(app.head, on_type=on_type, on_var=on_var)
    if uses:
        return t, False
    return lower_term(app.head), True


def lower_term(t: Term) -> Term:
    """Remove one unused type group and term binder from the scope of ``t``."""
    def on_type(x: Type, d: int) -> Type:
        def on_var(v: VarApp, dd: int) -> Type:
            if isinstance(v.ref, BVar) and v.ref.depth > dd:
                return VarApp(BVar(v.ref.depth - 1, v.ref.index), v.args)
            return v
        return map_type(x, on_var, d)

    def on_var(v: Var, d: int) -> Term:
        return Var(v.ref - 1) if isinstance(v.ref, int) and v.ref > d else v

    return map_term(t, on_type=on_type, on_var=on_var)


def normalize(t: Term, fuel: int = DEFAULT_FUEL, globals_: Mapping[str, Term] | None = None,
              *, seed: int | None = None, record: bool = True,
              eta: bool = True) -> tuple[Term, RewriteTrace]:
    """Normalize ``t``; ``globals_`` maps names to their (checked) definitions."""
    rw = Rewriter(globals_, fuel, record, seed)
    out = rw.norm(t)
    if eta:
        contracted, changed = eta_contract(out)
        if changed:
            rw.step("eta", (), out, contracted)
            out = contracted
    return out, rw.trace


def normalize_checked(t: Term, ascribed: Type, fuel: int = DEFAULT_FUEL,
                      globals_types: Mapping[str, Type] | None = None,
                      globals_: Mapping[str, Term] | None = None,
                      gadt: bool = False, **kw: Any) -> tuple[Term, RewriteTrace]:
    """Typecheck ``t`` against ``ascribed`` and normalize it."""
    from .kinding import CheckError
    from .typecheck import ContextDecl, TypingJudgment, check_term, term_gamma
    try:
        t = check_term(TypingJudgment(ContextDecl(term_gamma(ascribed)), t, ascribed),
                       gadt, globals_types)
    except CheckError as e:
        raise IllTypedInput(str(e)) from e
    return normalize(t, fuel, globals_, **kw)


# ---------------------------------------------------------------------------
# Values and equations


def is_value(t: Term) -> bool:
    """Constructor forms of first-order type."""
    match t:
        case Top():
            return True
        case Inl(b) | Inr(b):
            return is_value(b)
        case Pair(a, b):
            return is_value(a) and is_value(b)
        case App(In(), _, b):
            return is_value(b)
    return False


class Inconclusive(Exception):
    pass


def enumerate_values(t: Type, depth: int, limit: int = 5000) -> list[Term]:
    """Closed values of a closed first-order type, unfolding mu at most ``depth`` times."""
    out = _values(t, depth)
    if len(out) > limit:
        raise Inconclusive(f"{len(out)} probe values exceed the limit of {limit}")
    return out


def _values(t: Type, depth: int) -> list[Term]:
    match t:
        case Zero():
            return []
        case One():
            return [Top()]
        case Sum(l, r):
            return [Inl(x) for x in _values(l, depth)] + [Inr(y) for y in _values(r, depth)]
        case Prod(l, r):
            left = _values(l, depth)
            return [Pair(a, b) for a, b in product(left, _values(r, depth))] if left else []
        case Mu(fix, ps, body, args):
            if depth <= 0:
                return []
            mu = MuAbs(fix, ps, body)
            return [App(In(mu), args, w) for w in _values(unroll(mu, args), depth - 1)]
    raise Inconclusive(f"cannot enumerate values of {pretty(t)}")


def probe_type(size: int) -> Type:
    """The closed type ``1 + ... + 1`` with ``size`` summands (0 for size 0)."""
    if size == 0:
        return Zero()
    out: Type = One()
    for _ in range(size - 1):
        out = Sum(out, One())
    return out


@dataclass
class EquationVerdict:
    verdict: str  # equal | distinct | inconclusive
    lhs: Term
    rhs: Term
    reason: str = ""
    witness: str | None = None

    def to_json(self) -> dict[str, Any]:
        out = {"verdict": self.verdict, "lhs": pretty(self.lhs), "rhs": pretty(self.rhs),
               "reason": self.reason}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def check_equation(lhs: Term, rhs: Term, fuel: int = DEFAULT_FUEL,
                   globals_: Mapping[str, Term] | None = None, ty: Type | None = None,
                   probe_sizes: Iterable[int] = (0, 1, 2), depth: int = 3) -> EquationVerdict:
    """Compare two terms of the same type ``ty`` by normal forms and, for a
    closed Nat-type, extensionally on probe instantiations and values."""
    try:
        nl, _ = normalize(lhs, fuel, globals_, record=False)
        nr, _ = normalize(rhs, fuel, globals_, record=False)
    except FuelExhausted as e:
        return EquationVerdict("inconclusive", lhs, rhs, str(e))
    if nl == nr:
        return EquationVerdict("equal", nl, nr, "normal forms coincide")
    if is_value(nl) and is_value(nr):
        return EquationVerdict("distinct", nl, nr, "distinct normal forms")
    if not isinstance(ty, Nat) or any(b.arity for b in ty.binders) or free_type_vars(ty):
        return EquationVerdict("inconclusive", nl, nr, "normal forms differ")
    sizes = list(probe_sizes)
    checked = 0
    for combo in product(sizes, repeat=len(ty.binders)):
        ks = tuple(probe_type(n) for n in combo)
        src = instantiate(ty.source, list(ks))
        try:
            vals = enumerate_values(src, depth)
        except Inconclusive as e:
            return EquationVerdict("inconclusive", nl, nr, str(e))
        for v in vals:
            try:
                a, _ = normalize(App(nl, ks, v), fuel, globals_, record=False, eta=False)
                b, _ = normalize(App(nr, ks, v), fuel, globals_, record=False, eta=False)
            except FuelExhausted as e:
                return EquationVerdict("inconclusive", nl, nr, str(e))
            checked += 1
            if a != b:
                if is_value(a) and is_value(b):
                    return EquationVerdict("distinct", nl, nr, "differ on a probe value",
                                           f"at [{', '.join(pretty(k) for k in ks)}] "
                                           f"{pretty(v)}: {pretty(a)} vs {pretty(b)}")
                return EquationVerdict("inconclusive", nl, nr,
                                       "applied forms are not values")
    return EquationVerdict("equal", nl, nr, f"agree on {checked} probe value(s)")
