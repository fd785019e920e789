"""Corpus loading shared by the test modules."""

from __future__ import annotations

from nestcalc.cli import CORPUS_DEPENDS
from nestcalc.corpus import load_program
from nestcalc.syntax import App, Inl, Inr, Pair, Top, pretty


def program(*names: str):
    """Check the named bundled files after their dependencies."""
    order: list[str] = []
    for n in names:
        for dep in (*CORPUS_DEPENDS.get(n, ("types.nc",)), n):
            if dep not in order:
                order.append(dep)
    return load_program(*order)


def four(v) -> int:
    """Index of a value of Four: inl (inl (inl unit)) is 1, ..., inr unit is 4."""
    match v:
        case Inl(Inl(Inl(Top()))):
            return 1
        case Inl(Inl(Inr(Top()))):
            return 2
        case Inl(Inr(Top())):
            return 3
        case Inr(Top()):
            return 4
    raise AssertionError(f"not a Four value: {pretty(v)}")


def leaves(v) -> list[int]:
    """Leaf labels of a perfect tree over Four, left to right."""
    match v:
        case Pair(a, b):
            return leaves(a) + leaves(b)
        case App(_, _, body):
            return leaves(body)
        case Inl(x) | Inr(x) if not isinstance(x, Top | Inl | Inr):
            return leaves(x)
    return [four(v)]
