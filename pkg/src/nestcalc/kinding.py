"""Well-formedness of types: ``Gamma; Phi |- F``.

``Gamma`` holds non-functorial type constructor variables and ``Phi`` the
functorial ones, both as name-to-arity maps.  A mu-body sees only its own
fixpoint variable and parameters as functorial; a Nat-type's components see
only its binders.  Lan-types require GADT mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .subst import replace_var
from .syntax import (
    Lan, Mu, Nat, One, Prod, Sum, Type, VarApp, Zero, fresh, open_lan, open_mu,
    open_nat, pretty,
)


@dataclass
class Diagnostic:
    rule: str
    message: str
    line: int = 0
    col: int = 0
    expected: str | None = None
    actual: str | None = None
    decl: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items() if v is not None}


class CheckError(Exception):
    """Base class for kinding and typing rejections."""

    rule = "check"

    def __init__(self, message: str, expected: str | None = None, actual: str | None = None):
        super().__init__(message)
        self.message = message
        self.expected = expected
        self.actual = actual

    def diagnostic(self, line: int = 0, col: int = 0, decl: str | None = None) -> Diagnostic:
        return Diagnostic(type(self).__name__, self.message, line, col,
                          self.expected, self.actual, decl)


class KindError(CheckError):
    pass


class UnknownVariable(KindError):
    pass


class ArityMismatch(KindError):
    pass


class IllegalFunctorialVariableInMuBody(KindError):
    def __init__(self, variable: str):
        super().__init__(f"functorial variable {variable} may not occur in the body of a mu-type")
        self.variable = variable


class NatBinderArityViolation(KindError):
    pass


class LanDisabled(KindError):
    pass


@dataclass(frozen=True)
class KindJudgment:
    gamma: Mapping[str, int] = field(default_factory=dict)
    phi: Mapping[str, int] = field(default_factory=dict)
    subject: Type = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        clash = set(self.gamma) & set(self.phi)
        if clash:
            raise ValueError(f"variables in both contexts: {sorted(clash)}")


def _display(name: str) -> str:
    return name.split("#")[0]


def check_type(j: KindJudgment, gadt_mode: bool = False) -> None:
    """Raise a ``KindError`` unless ``j`` is derivable."""
    _check(j.subject, dict(j.gamma), dict(j.phi), {}, gadt_mode)


def is_well_formed(j: KindJudgment, gadt_mode: bool = False) -> bool:
    try:
        check_type(j, gadt_mode)
    except KindError:
        return False
    return True


def _check(t: Type, gamma: dict[str, int], phi: dict[str, int],
           hidden: dict[str, str], gadt: bool) -> None:
    # ``hidden`` maps functorial variables that are out of scope here to the
    # construct hiding them, for sharper diagnostics.
    match t:
        case Zero() | One():
            return
        case Sum(l, r) | Prod(l, r):
            _check(l, gamma, phi, hidden, gadt)
            _check(r, gamma, phi, hidden, gadt)
        case VarApp(ref, args):
            if not isinstance(ref, str):
                raise UnknownVariable(f"dangling bound variable {ref}")
            if ref in gamma:
                want = gamma[ref]
            elif ref in phi:
                want = phi[ref]
            elif hidden.get(ref) == "mu":
                raise IllegalFunctorialVariableInMuBody(_display(ref))
            elif hidden.get(ref) == "Nat":
                raise UnknownVariable(
                    f"functorial variable {_display(ref)} is not in scope inside a Nat-type")
            else:
                raise UnknownVariable(f"unknown type variable {_display(ref)}")
            if want != len(args):
                raise ArityMismatch(
                    f"{_display(ref)} has arity {want} but is applied to {len(args)} argument(s)",
                    expected=str(want), actual=str(len(args)))
            for a in args:
                _check(a, gamma, phi, hidden, gadt)
        case Nat(bs, _, _):
            if not gadt and any(b.arity for b in bs):
                raise NatBinderArityViolation(
                    "Nat binders must have arity 0 outside GADT mode")
            names, src, tgt = open_nat(t)
            inner = {n: b.arity for n, b in zip(names, bs)}
            hid = {**hidden, **{v: "Nat" for v in phi}}
            _check(src, gamma, inner, hid, gadt)
            _check(tgt, gamma, inner, hid, gadt)
        case Mu(fix, ps, _, args):
            f, params, body = open_mu(t)
            inner = {f: fix.arity, **{p: 0 for p in params}}
            hid = {**hidden, **{v: "mu" for v in phi}}
            _check(body, gamma, inner, hid, gadt)
            for a in args:
                _check(a, gamma, phi, hidden, gadt)
        case Lan(bs, _, _, args):
            if not gadt:
                raise LanDisabled("Lan-types require 'pragma gadt on'")
            names, along, body = open_lan(t)
            inner = {n: 0 for n in names}
            hid = {**hidden, **{v: "Nat" for v in phi}}
            for k in along:
                _check(k, gamma, inner, hid, gadt)
            _check(body, gamma, {**phi, **inner}, hidden, gadt)
            for a in args:
                _check(a, gamma, phi, hidden, gadt)
        case _:
            raise TypeError(f"not a type: {t!r}")


def demote(j: KindJudgment, var: str) -> KindJudgment:
    """Move ``var`` from the functorial to the non-functorial context under a
    fresh name, renaming its occurrences textually."""
    if var not in j.phi:
        raise KindError(f"{var} is not a functorial variable of the judgment")
    arity = j.phi[var]
    new = fresh(var)
    phi = {n: k for n, k in j.phi.items() if n != var}
    gamma = {**j.gamma, new: arity}
    return KindJudgment(gamma, phi, replace_var(j.subject, (var, arity), (new, arity)))


def weaken(j: KindJudgment, extra_gamma: Mapping[str, int] | None = None,
           extra_phi: Mapping[str, int] | None = None) -> KindJudgment:
    extra_gamma = dict(extra_gamma or {})
    extra_phi = dict(extra_phi or {})
    used = set(j.gamma) | set(j.phi)
    clash = (set(extra_gamma) | set(extra_phi)) & used or set(extra_gamma) & set(extra_phi)
    if clash:
        raise KindError(f"weakening by names already in the context: {sorted(clash)}")
    return KindJudgment({**j.gamma, **extra_gamma}, {**j.phi, **extra_phi}, j.subject)


def describe(j: KindJudgment) -> str:
    g = ", ".join(f"{n}^{k}" if k else n for n, k in j.gamma.items())
    p = ", ".join(f"{n}^{k}" if k else n for n, k in j.phi.items())
    return f"{g}; {p} |- {pretty(j.subject)}"
