"""Bidirectional typechecking of terms against ascribed types.

Terms carry enough annotation (``map``/``in``/``fold``/``kan``/``cokan``
spell out their types) that checking never needs unification: L-terms are
checked against a Nat-type and everything else is inferred bottom-up.  Type
equality is structural equality of locally nameless types.

The checker returns the term with every L-term annotated by the Nat-type it
was checked at; the evaluators rely on those annotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

from .kinding import CheckError, Diagnostic, KindError, KindJudgment, check_type
from .subst import SubstBinding, subst_type, subst_type_first_order
from .syntax import (
    Abs, Absurd, Ann, App, Binder, BVar, Case, Decl, Fold, In, Inl, Inr, KanElim,
    KanIntro, Lam, Lan, Map, Mu, MuAbs, Nat, One, Pair, Pragma, Prod, Proj1, Proj2,
    Sum, Term, TermDecl, Top, Type, TypeDecl, Var, VarApp, Zero, close_term_types,
    close_term_var, fresh, fresh_names, instantiate, mk_lan, mk_nat, open_mu,
    open_term_types, open_term_var, open_type, pretty,
)


class TypeCheckError(CheckError):
    pass


class TypeMismatch(TypeCheckError):
    pass


class NotANatType(TypeCheckError):
    pass


class FunctorialContextNotEmptyForApplication(TypeCheckError):
    pass


class BinderCountMismatch(TypeCheckError):
    pass


class AlgebraTypeMismatch(TypeCheckError):
    pass


class FreshnessViolation(TypeCheckError):
    pass


class GadtConstructDisabled(TypeCheckError):
    pass


class UnboundTermVariable(TypeCheckError):
    pass


class CannotInfer(TypeCheckError):
    pass


@dataclass(frozen=True)
class ContextDecl:
    """``Gamma; Phi | Delta``.  ``masked`` lists term variables whose types
    mention functorial variables that are out of scope at this point."""

    gamma: Mapping[str, int] = field(default_factory=dict)
    phi: Mapping[str, int] = field(default_factory=dict)
    delta: tuple[tuple[str, Type], ...] = ()
    masked: frozenset[str] = frozenset()

    def lookup(self, name: str) -> Type | None:
        for n, t in reversed(self.delta):
            if n == name:
                return t
        return None

    def extend(self, name: str, ty: Type) -> "ContextDecl":
        return replace(self, delta=self.delta + ((name, ty),), masked=self.masked - {name})


@dataclass(frozen=True)
class TypingJudgment:
    ctx: ContextDecl
    term: Term
    ascribed: Type


def _eq(a: Type, b: Type) -> bool:
    return a == b


class Checker:
    def __init__(self, globals_: Mapping[str, Type] | None = None, gadt: bool = False):
        self.globals: dict[str, Type] = dict(globals_ or {})
        self.gadt = gadt

    # -- helpers

    def kind(self, ctx: ContextDecl, t: Type, phi: Mapping[str, int] | None = None) -> None:
        check_type(KindJudgment(ctx.gamma, ctx.phi if phi is None else phi, t), self.gadt)

    def with_phi(self, ctx: ContextDecl, phi: Mapping[str, int]) -> ContextDecl:
        """Switch the functorial context, masking term variables whose types
        are no longer well-formed."""
        keep: list[tuple[str, Type]] = []
        masked = set(ctx.masked)
        for n, t in ctx.delta:
            try:
                check_type(KindJudgment(ctx.gamma, phi, t), self.gadt)
                keep.append((n, t))
                masked.discard(n)
            except KindError:
                masked.add(n)
        return ContextDecl(ctx.gamma, dict(phi), tuple(keep), frozenset(masked))

    # -- checking mode

    def check(self, ctx: ContextDecl, t: Term, ty: Type) -> Term:
        match t:
            case Lam(bs, x, body, ann):
                if ann is not None and not _eq(ann, ty):
                    raise TypeMismatch("L-term ascription differs from the expected type",
                                       pretty(ty), pretty(ann))
                return self.check_lam(ctx, t, ty)
            case Case(scrut, xn, left, yn, right):
                scrut2, sty = self.infer(ctx, scrut)
                if not isinstance(sty, Sum):
                    raise TypeMismatch("case scrutinee must have a sum type",
                                       "F + G", pretty(sty))
                x, y = fresh(xn), fresh(yn)
                l2 = self.check(ctx.extend(x, sty.left), open_term_var(left, Var(x)), ty)
                r2 = self.check(ctx.extend(y, sty.right), open_term_var(right, Var(y)), ty)
                return Case(scrut2, xn, close_term_var(l2, x), yn, close_term_var(r2, y))
            case Inl(body) | Inr(body):
                if not isinstance(ty, Sum):
                    raise TypeMismatch("injection checked against a non-sum type",
                                       pretty(ty), "F + G")
                part = ty.left if isinstance(t, Inl) else ty.right
                self.kind(ctx, ty)
                return type(t)(self.check(ctx, body, part))
            case Pair(a, b):
                if not isinstance(ty, Prod):
                    raise TypeMismatch("pair checked against a non-product type",
                                       pretty(ty), "F * G")
                return Pair(self.check(ctx, a, ty.left), self.check(ctx, b, ty.right))
            case Absurd(ann, body):
                self.kind(ctx, ann)
                if not _eq(ann, ty):
                    raise TypeMismatch("absurd annotation differs from the expected type",
                                       pretty(ty), pretty(ann))
                return Absurd(ann, self.check(ctx, body, Zero()))
            case Top():
                if not isinstance(ty, One):
                    raise TypeMismatch("unit checked against a type other than 1", pretty(ty), "1")
                return t
        t2, got = self.infer(ctx, t)
        if not _eq(got, ty):
            raise TypeMismatch("type mismatch", pretty(ty), pretty(got))
        return t2

    def check_lam(self, ctx: ContextDecl, t: Lam, ty: Type) -> Lam:
        if not isinstance(ty, Nat):
            raise NotANatType("L-term checked against a non-Nat type", "Nat[...](F, G)", pretty(ty))
        if len(t.binders) != len(ty.binders) or \
                [b.arity for b in t.binders] != [b.arity for b in ty.binders]:
            raise BinderCountMismatch(
                "L-term binders do not match the Nat-type binders",
                str(len(ty.binders)), str(len(t.binders)))
        if any(b.arity for b in t.binders) and not self.gadt:
            raise GadtConstructDisabled("higher-arity L binders require GADT mode")
        clash = [b.name for b in t.binders if b.name in ctx.gamma]
        if clash:
            raise FreshnessViolation(f"L binder {clash[0]} is already a type constructor variable")
        names = fresh_names(t.binders)
        src, tgt = open_type(ty.source, names), open_type(ty.target, names)
        inner_phi = {n: b.arity for n, b in zip(names, t.binders)}
        inner = self.with_phi(ctx, inner_phi)
        self.kind(inner, src)
        self.kind(inner, tgt)
        x = fresh(t.var)
        body = open_term_var(open_term_types(t.body, names), Var(x))
        body2 = self.check(inner.extend(x, src), body, tgt)
        return Lam(t.binders, t.var, close_term_types(close_term_var(body2, x), names), ty)

    # -- inference mode

    def infer(self, ctx: ContextDecl, t: Term) -> tuple[Term, Type]:
        match t:
            case Var(ref):
                if isinstance(ref, int):
                    raise UnboundTermVariable(f"dangling de Bruijn index {ref}")
                ty = ctx.lookup(ref)
                if ty is not None:
                    return t, ty
                if ref in ctx.masked:
                    raise FunctorialContextNotEmptyForApplication(
                        f"term variable {ref.split('#')[0]} has a type that mentions functorial "
                        f"variables not in scope here")
                if ref in self.globals:
                    return t, self.globals[ref]
                raise UnboundTermVariable(f"unbound term variable {ref}")
            case Top():
                return t, One()
            case Lam(ann=ann) if ann is not None:
                return self.check_lam(ctx, t, ann), ann
            case Lam():
                raise CannotInfer("cannot infer the type of an unannotated L-term; "
                                  "add an ascription (t : Nat[...](F, G))")
            case Ann(body, ty):
                self.kind(ctx, ty)
                return self.check(ctx, body, ty), ty
            case Pair(a, b):
                a2, ta = self.infer(ctx, a)
                b2, tb = self.infer(ctx, b)
                return Pair(a2, b2), Prod(ta, tb)
            case Proj1(body) | Proj2(body):
                b2, tb = self.infer(ctx, body)
                if not isinstance(tb, Prod):
                    raise TypeMismatch("projection from a non-product", "F * G", pretty(tb))
                return type(t)(b2), tb.left if isinstance(t, Proj1) else tb.right
            case Case(scrut, xn, left, yn, right):
                scrut2, sty = self.infer(ctx, scrut)
                if not isinstance(sty, Sum):
                    raise TypeMismatch("case scrutinee must have a sum type", "F + G", pretty(sty))
                x, y = fresh(xn), fresh(yn)
                l2, lt = self.infer(ctx.extend(x, sty.left), open_term_var(left, Var(x)))
                r2 = self.check(ctx.extend(y, sty.right), open_term_var(right, Var(y)), lt)
                return Case(scrut2, xn, close_term_var(l2, x), yn, close_term_var(r2, y)), lt
            case Absurd(ann, body):
                self.kind(ctx, ann)
                return Absurd(ann, self.check(ctx, body, Zero())), ann
            case App():
                return self.infer_app(ctx, t)
            case Map():
                return t, self.map_type(ctx, t)
            case In(mu):
                return t, self.in_type(ctx, mu)
            case Fold():
                return t, self.fold_type(ctx, t)
            case KanIntro():
                return t, self.kan_type(ctx, t)
            case KanElim():
                return self.cokan(ctx, t)
            case Inl() | Inr():
                raise CannotInfer("cannot infer the type of an injection; add an ascription")
        raise TypeError(f"not a term: {t!r}")

    def infer_app(self, ctx: ContextDecl, t: App) -> tuple[Term, Type]:
        head_ctx = self.with_phi(ctx, {})
        head, hty = self.infer(head_ctx, t.head)
        if not isinstance(hty, Nat):
            raise NotANatType("applied term does not have a Nat-type", "Nat[...](F, G)", pretty(hty))
        if len(t.typeargs) != len(hty.binders):
            raise BinderCountMismatch(
                f"application supplies {len(t.typeargs)} type argument(s) for "
                f"{len(hty.binders)} binder(s)", str(len(hty.binders)), str(len(t.typeargs)))
        ks = [self.type_arg(ctx, b, k) for b, k in zip(hty.binders, t.typeargs)]
        src = instantiate(hty.source, ks)
        tgt = instantiate(hty.target, ks)
        try:
            arg = self.check(ctx, t.arg, src)
        except TypeMismatch as e:
            if isinstance(t.head, Fold) or _is_fold_app(t.head):
                raise AlgebraTypeMismatch("fold algebra has the wrong type",
                                          e.expected, e.actual) from None
            raise
        return App(head, tuple(ks), arg), tgt

    def type_arg(self, ctx: ContextDecl, b: Binder, k: Union[Type, Abs]) -> Union[Type, Abs]:
        if b.arity == 0:
            if isinstance(k, Abs):
                raise BinderCountMismatch(f"binder {b.name} has arity 0 but receives an abstraction")
            self.kind(ctx, k)
            return k
        if not self.gadt:
            raise GadtConstructDisabled("instantiating higher-arity binders requires GADT mode")
        if isinstance(k, VarApp) and isinstance(k.ref, str) and not k.args:
            names = [fresh("b") for _ in range(b.arity)]
            k = Abs(tuple(Binder(n) for n in names),
                    VarApp(k.ref, tuple(VarApp(BVar(0, i)) for i in range(b.arity))))
        if not isinstance(k, Abs) or len(k.binders) != b.arity:
            raise BinderCountMismatch(f"binder {b.name} has arity {b.arity}; supply \\b1,...,b{b.arity}. K")
        names = fresh_names(k.binders)
        self.kind(ctx, open_type(k.body, names), {**ctx.phi, **{n: 0 for n in names}})
        return k

    # -- constants

    def map_type(self, ctx: ContextDecl, t: Map) -> Type:
        pnames = fresh_names(t.phis)
        gnames = fresh_names(t.gammas)
        h = open_type(t.body, pnames + gnames)
        self.kind(ctx, h, {**{n: p.arity for n, p in zip(pnames, t.phis)},
                           **{g: 0 for g in gnames}})
        args: list[Type] = []
        h_src, h_tgt = h, h
        for pn, p, fa, ga in zip(pnames, t.phis, t.sources, t.targets):
            betas = [fresh(b.name) for b in fa.binders[:p.arity]]
            f = open_type(fa.body, betas + gnames)
            g = open_type(ga.body, betas + gnames)
            inner = {**{b: 0 for b in betas}, **{x: 0 for x in gnames}}
            self.kind(ctx, f, inner)
            self.kind(ctx, g, inner)
            args.append(mk_nat(betas + gnames, f, g))
            h_src = subst_type(h_src, SubstBinding(pn, p.arity, tuple(betas), f))
            h_tgt = subst_type(h_tgt, SubstBinding(pn, p.arity, tuple(betas), g))
        src = args[0] if len(args) == 1 else _product(args)
        return mk_nat([], src, mk_nat(gnames, h_src, h_tgt))

    def in_type(self, ctx: ContextDecl, mu: MuAbs) -> Type:
        f, params, h = open_mu(mu)
        self.kind(ctx, h, {f: mu.fix.arity, **{p: 0 for p in params}})
        betas = [fresh(p.name) for p in mu.params]
        applied = mu.apply(VarApp(b) for b in betas)
        unrolled = subst_type(h, SubstBinding(f, mu.fix.arity, tuple(betas), applied))
        unrolled = subst_type_first_order(unrolled, [(a, VarApp(b)) for a, b in zip(params, betas)])
        return mk_nat(betas, unrolled, applied)

    def fold_type(self, ctx: ContextDecl, t: Fold) -> Type:
        mu = t.mu
        f, params, h = open_mu(mu)
        self.kind(ctx, h, {f: mu.fix.arity, **{p: 0 for p in params}})
        betas = fresh_names(t.target.binders)
        target = open_type(t.target.body, betas)
        self.kind(ctx, target, {b: 0 for b in betas})
        alg_src = subst_type(h, SubstBinding(f, mu.fix.arity, tuple(betas), target))
        alg_src = subst_type_first_order(alg_src, [(a, VarApp(b)) for a, b in zip(params, betas)])
        applied = mu.apply(VarApp(b) for b in betas)
        return mk_nat([], mk_nat(betas, alg_src, target), mk_nat(betas, applied, target))

    def kan_type(self, ctx: ContextDecl, t: KanIntro) -> Type:
        if not self.gadt:
            raise GadtConstructDisabled("kan requires 'pragma gadt on'")
        pnames = fresh_names(t.phis)
        anames = fresh_names(t.alphas)
        names = pnames + anames
        along = [open_type(k, names) for k in t.along]
        body = open_type(t.body, names)
        for k in along:
            self.kind(ctx, k, {a: 0 for a in anames})
        self.kind(ctx, body, {**{n: b.arity for n, b in zip(pnames, t.phis)},
                              **{a: 0 for a in anames}})
        lan = mk_lan(anames, along, body, along)
        return mk_nat([(n, b.arity) for n, b in zip(names, t.phis + t.alphas)], body, lan)

    def cokan(self, ctx: ContextDecl, t: KanElim) -> tuple[Term, Type]:
        if not self.gadt:
            raise GadtConstructDisabled("cokan requires 'pragma gadt on'")
        pnames = fresh_names(t.phis)
        anames = fresh_names(t.alphas)
        bnames = fresh_names(t.betas)
        names = pnames + anames + bnames
        g = open_type(t.target, names)
        along = [open_type(k, names) for k in t.along]
        f = open_type(t.source, names)
        parity = {n: b.arity for n, b in zip(pnames, t.phis)}
        for k in along:
            self.kind(ctx, k, {a: 0 for a in anames})
        self.kind(ctx, f, {**parity, **{a: 0 for a in anames}})
        self.kind(ctx, g, {**parity, **{b: 0 for b in bnames}})
        g_at_k = subst_type_first_order(g, list(zip(bnames, along)))
        want = mk_nat([(n, b.arity) for n, b in zip(pnames + anames, t.phis + t.alphas)], f, g_at_k)
        body = self.check(self.with_phi(ctx, {}), t.body, want)
        lan = mk_lan(anames, along, f, [VarApp(b) for b in bnames])
        result = mk_nat([(n, b.arity) for n, b in zip(pnames + bnames, t.phis + t.betas)], lan, g)
        return replace(t, body=body), result


def _product(ts: list[Type]) -> Type:
    if not ts:
        return One()
    out = ts[0]
    for t in ts[1:]:
        out = Prod(out, t)
    return out


def _is_fold_app(t: Term) -> bool:
    return isinstance(t, App) and isinstance(t.head, Fold)


def check_term(j: TypingJudgment, gadt_mode: bool = False,
               globals_: Mapping[str, Type] | None = None) -> Term:
    """Check ``j`` and return the annotated term; raises ``CheckError``."""
    c = Checker(globals_, gadt_mode)
    c.kind(j.ctx, j.ascribed)
    return c.check(j.ctx, j.term, j.ascribed)


def infer_redex_type(ctx: ContextDecl, t: App, gadt_mode: bool = False,
                     globals_: Mapping[str, Type] | None = None) -> Type:
    return Checker(globals_, gadt_mode).infer_app(ctx, t)[1]


# ---------------------------------------------------------------------------
# Whole programs


def decl_context(d: TypeDecl) -> KindJudgment:
    return KindJudgment({b.name: b.arity for b in d.gamma}, {b.name: b.arity for b in d.phi}, d.body)


def term_gamma(ty: Type) -> dict[str, int]:
    from .syntax import free_type_vars
    return free_type_vars(ty)


@dataclass
class Program:
    """A checked sequence of declarations."""

    decls: list[Decl]
    aliases: dict[str, TypeDecl] = field(default_factory=dict)
    types: dict[str, Type] = field(default_factory=dict)
    terms: dict[str, Term] = field(default_factory=dict)
    gadt: dict[str, bool] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def term_decls(self) -> list[TermDecl]:
        return [d for d in self.decls if isinstance(d, TermDecl)]


def check_program(decls: Iterable[Decl]) -> Program:
    """Kind-check every type declaration and typecheck every term declaration.

    Failing declarations produce diagnostics; later declarations still see
    their ascribed types so that one failure does not cascade.
    """
    prog = Program(list(decls))
    for d in prog.decls:
        if isinstance(d, Pragma):
            continue
        if isinstance(d, TypeDecl):
            prog.aliases[d.name] = d
            try:
                check_type(decl_context(d), d.gadt)
            except CheckError as e:
                prog.diagnostics.append(e.diagnostic(d.line, d.col, d.name))
            continue
        prog.types[d.name] = d.type
        prog.gadt[d.name] = d.gadt
        try:
            ctx = ContextDecl(term_gamma(d.type), {}, ())
            prog.terms[d.name] = check_term(TypingJudgment(ctx, d.term, d.type), d.gadt,
                                            {k: v for k, v in prog.types.items() if k != d.name})
        except CheckError as e:
            prog.diagnostics.append(e.diagnostic(d.line, d.col, d.name))
    return prog


def typecheck_seq_constructors() -> Program:
    """Check the Seq encoding and its constructors from the bundled corpus."""
    from .corpus import load_program
    prog = load_program("types.nc", "seq.nc")
    if not prog.ok:
        raise CheckError("; ".join(d.message for d in prog.diagnostics))
    return prog
