"""Finite set and relational semantics.

Types denote functors on finite sets and relation transformers on finite
relations.  Fixpoints are truncated at a stage ``n``: the carrier of a
mu-type at stage ``n`` holds the values ``Wrap(m, w)`` with ``m <= n`` and
``w`` in the body at stage ``m - 1``, where ``m`` is the least such stage.
Stage tags are therefore intrinsic to a value, and stage ``n`` is a subset of
stage ``n + 1``.  Families are partial in a truncated model: an input whose
image needs a stage above ``n`` raises StageOverflow, and relational and
extensional comparisons skip such inputs.

Carriers are lazy: membership is decided structurally and elements are
listed only on demand, in a canonical order.  Environments are stacks of
binder groups plus a name table, mirroring the locally nameless syntax, so
types are interpreted without opening binders.

Nat-types denote sets of families of functions.  Without binders this is the
full function space.  With binders the carrier is either enumerated by
constraint search over the probe universe (families that preserve every
probe relation, which subsumes naturality along probe functions) or is the
pool of denotations of named terms of that type.  A function space too large
to tabulate also falls back to the pool when one is given.

Left Kan extensions are colimits over an index of probe sets of size at most
``lan_bound``, quotiented by union-find.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from itertools import product
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence, Union

from . import syntax as sx
from .syntax import BVar, Lan, Mu, MuAbs, Nat, One, Prod, Sum, Type, VarApp, Zero


class FinModelError(Exception):
    pass


class UnmappedVariable(FinModelError):
    pass


class ProbeTooLarge(FinModelError):
    pass


class StageOverflow(FinModelError):
    pass


class EmptyTypeElimination(FinModelError):
    pass


class Inconclusive(FinModelError):
    pass


# ---------------------------------------------------------------------------
# Canonical values


class _Value:
    """Structural value with its hash computed once at construction.
    Values nest deeply, so recomputing hashes dominates carrier construction."""

    _h: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash((type(self).__name__, self._fields())))

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        return self._h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (type(other) is type(self) and self._h == other._h  # type: ignore[attr-defined]
                and self._fields() == other._fields())  # type: ignore[attr-defined]


@dataclass(frozen=True)
class Unit:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class Atom:
    tag: int

    def __str__(self) -> str:
        return f"#{self.tag}"


@dataclass(frozen=True, eq=False)
class InL(_Value):
    value: Any

    def _fields(self) -> tuple:
        return (self.value,)

    def __str__(self) -> str:
        return f"inl {_paren(self.value)}"


@dataclass(frozen=True, eq=False)
class InR(_Value):
    value: Any

    def _fields(self) -> tuple:
        return (self.value,)

    def __str__(self) -> str:
        return f"inr {_paren(self.value)}"


@dataclass(frozen=True, eq=False)
class Pair(_Value):
    first: Any
    second: Any

    def _fields(self) -> tuple:
        return (self.first, self.second)

    def __str__(self) -> str:
        return f"({self.first}, {self.second})"


@dataclass(frozen=True, eq=False)
class Wrap(_Value):
    stage: int
    value: Any

    def _fields(self) -> tuple:
        return (self.stage, self.value)

    def __str__(self) -> str:
        return f"in^{self.stage} {_paren(self.value)}"


@dataclass(frozen=True, eq=False)
class LanClass(_Value):
    """Colimit class with canonical representative ``(index, maps, value)``.

    ``index`` names the probe object (set sizes, or relation descriptions on
    the relational side); ``maps[i]`` tabulates the i-th index function as
    ``(input, output)`` pairs."""

    index: tuple
    maps: tuple
    value: Any

    def _fields(self) -> tuple:
        return (self.index, self.maps, self.value)

    def __str__(self) -> str:
        maps = "; ".join("{" + ", ".join(f"{x}->{y}" for x, y in m) + "}" for m in self.maps)
        return f"[{self.index} | {maps} | {self.value}]"


def _paren(v: Any) -> str:
    s = str(v)
    return f"({s})" if " " in s and not s.startswith(("(", "[")) else s


UNIT = Unit()


def vkey(v: Any) -> tuple:
    """Total order on canonical values."""
    cached = getattr(v, "__dict__", {}).get("_k")
    if cached is not None:
        return cached
    out = _vkey(v)
    if isinstance(v, (InL, InR, Pair, Wrap, LanClass)):
        object.__setattr__(v, "_k", out)
    return out


def _vkey(v: Any) -> tuple:
    match v:
        case Unit():
            return (0,)
        case Atom(t):
            return (1, t)
        case InL(x):
            return (2, vkey(x))
        case InR(x):
            return (3, vkey(x))
        case Pair(a, b):
            return (4, vkey(a), vkey(b))
        case Wrap(m, x):
            return (5, m, vkey(x))
        case LanClass(i, maps, x):
            return (6, repr(i), tuple(tuple((vkey(a), vkey(b)) for a, b in m) for m in maps),
                    vkey(x))
        case NatValue():
            return (7,) + v.order_key()
    raise TypeError(f"not a canonical value: {v!r}")


def sort_values(vs: Iterable[Any]) -> list[Any]:
    return sorted(vs, key=vkey)


# ---------------------------------------------------------------------------
# Environments


class Env:
    """Name table plus a stack of binder groups; ``BVar(d, i)`` is entry ``i``
    of the ``d``-th group from the top."""

    __slots__ = ("names", "stack", "_hash", "_derived")

    def __init__(self, names: Mapping[str, Any] | None = None, stack: tuple = ()):
        self.names = dict(names or {})
        self.stack = stack
        self._hash: int | None = None
        self._derived: dict[str, "Env"] = {}

    def lookup(self, ref: Union[str, BVar]) -> Any:
        if isinstance(ref, BVar):
            try:
                return self.stack[-1 - ref.depth][ref.index]
            except IndexError:
                raise UnmappedVariable(f"dangling bound variable {ref}") from None
        try:
            return self.names[ref]
        except KeyError:
            raise UnmappedVariable(f"type variable {ref.split('#')[0]} is not mapped") from None

    def push(self, group: Iterable[Any]) -> "Env":
        out = Env.__new__(Env)
        out.names = self.names
        out.stack = self.stack + (tuple(group),)
        out._hash = None
        out._derived = {}
        return out

    def bind(self, **entries: Any) -> "Env":
        return Env({**self.names, **entries}, self.stack)

    def derived(self, label: str, fn: Callable[[Any], Any]) -> "Env":
        """Pointwise image under ``fn``, cached per label."""
        out = self._derived.get(label)
        if out is None:
            out = Env({k: fn(v) for k, v in self.names.items()},
                      tuple(tuple(fn(e) for e in g) for g in self.stack))
            self._derived[label] = out
        return out

    def key(self) -> tuple:
        return (tuple(sorted(self.names.items(), key=lambda kv: kv[0])), self.stack)

    def __eq__(self, other: object) -> bool:
        return self is other or (isinstance(other, Env) and hash(self) == hash(other)
                                 and self.key() == other.key())

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self) -> str:
        return f"Env({self.names!r}, {self.stack!r})"


EMPTY_ENV = Env()


# ---------------------------------------------------------------------------
# Carriers


class Carrier:
    """A lazily described finite set of canonical values."""

    _elements: list[Any] | None = None
    _hash: int | None = None

    def key(self) -> tuple:
        raise NotImplementedError

    def contains(self, x: Any) -> bool:
        raise NotImplementedError

    def _list(self) -> Iterable[Any]:
        raise NotImplementedError

    def elements(self) -> list[Any]:
        if self._elements is None:
            self._elements = sort_values(self._list())
        return self._elements

    def size(self) -> int:
        return len(self.elements())

    def __eq__(self, other: object) -> bool:
        return self is other or (type(self) is type(other) and hash(self) == hash(other)
                                 and self.key() == other.key())  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((type(self).__name__, self.key()))
        return self._hash

    def __repr__(self) -> str:
        return f"{type(self).__name__}{self.key()!r}"


class FinSet(Carrier):
    def __init__(self, elems: Iterable[Any]):
        self.elems = tuple(sort_values(set(elems)))
        self._members = frozenset(self.elems)
        self._elements = list(self.elems)

    def key(self) -> tuple:
        return self.elems

    def contains(self, x: Any) -> bool:
        return x in self._members

    def _list(self) -> Iterable[Any]:
        return self.elems

    def size(self) -> int:
        return len(self.elems)


EMPTY = FinSet(())
UNIT_SET = FinSet((UNIT,))
_PROBES: dict[int, FinSet] = {}


def probe_set(n: int) -> FinSet:
    """The canonical ``n``-element set ``{#0, ..., #n-1}``."""
    if n not in _PROBES:
        _PROBES[n] = FinSet(Atom(i) for i in range(n))
    return _PROBES[n]


def is_probe(c: Any) -> bool:
    return isinstance(c, FinSet) and c == probe_set(c.size())


class SumC(Carrier):
    def __init__(self, left: Carrier, right: Carrier):
        self.left, self.right = left, right

    def key(self) -> tuple:
        return (self.left, self.right)

    def contains(self, x: Any) -> bool:
        if isinstance(x, InL):
            return self.left.contains(x.value)
        if isinstance(x, InR):
            return self.right.contains(x.value)
        return False

    def _list(self) -> Iterable[Any]:
        return [InL(v) for v in self.left.elements()] + [InR(v) for v in self.right.elements()]


class ProdC(Carrier):
    def __init__(self, left: Carrier, right: Carrier, budget: int):
        self.left, self.right, self.budget = left, right, budget

    def key(self) -> tuple:
        return (self.left, self.right)

    def contains(self, x: Any) -> bool:
        return isinstance(x, Pair) and self.left.contains(x.first) and self.right.contains(x.second)

    def _list(self) -> Iterable[Any]:
        ls = self.left.elements()
        rs = self.right.elements() if ls else []
        if len(ls) * len(rs) > self.budget:
            raise ProbeTooLarge(f"product carrier of {len(ls)} x {len(rs)} elements")
        return [Pair(a, b) for a in ls for b in rs]


class MuC(Carrier):
    """Stage ``n`` of the fixpoint of ``mu`` at carriers ``args``."""

    def __init__(self, model: "Model", mu: MuAbs, env: Env, n: int, args: tuple[Carrier, ...]):
        self.model, self.mu, self.env, self.n, self.args = model, mu, env, n, args
        self._bodies: dict[int, Carrier] = {}
        self._index: dict[Any, Wrap] | bool | None = None

    def key(self) -> tuple:
        return (self.mu, self.env, self.n, self.args)

    def body(self, k: int) -> Carrier:
        """The body interpreted with the fixpoint variable at stage ``k``."""
        if k not in self._bodies:
            fix = MuStage(self.model, self.mu, self.env, k)
            self._bodies[k] = self.model.carrier(self.mu.body, self.env.push((fix, *self.args)))
        return self._bodies[k]

    def contains(self, x: Any) -> bool:
        # Stage tags are produced minimal by construction; membership only
        # checks that the tag is within range and the payload fits it.
        return isinstance(x, Wrap) and 1 <= x.stage <= self.n and self.body(x.stage - 1).contains(x.value)

    def wrap(self, w: Any) -> Wrap:
        """``w`` tagged with its least stage, by lookup when the carrier is listable."""
        if self._index is None:
            try:
                self._index = {x.value: x for x in self.elements()}
            except ProbeTooLarge:
                self._index = False
        if self._index is not False:
            hit = self._index.get(w)
            if hit is None:
                raise StageOverflow(f"value needs a fixpoint stage above {self.n}")
            return hit
        return Wrap(self.stage_of(w), w)

    def stage_of(self, w: Any) -> int:
        """Least stage at which ``w`` becomes a member of the body."""
        for m in range(1, self.n + 1):
            if self.body(m - 1).contains(w):
                return m
        raise StageOverflow(f"value needs a fixpoint stage above {self.n}")

    def _list(self) -> Iterable[Any]:
        out: list[Any] = []
        prev: set[Any] = set()
        for m in range(1, self.n + 1):
            cur = self.body(m - 1).elements()
            out.extend(Wrap(m, w) for w in cur if w not in prev)
            if len(out) > self.model.budget:
                raise ProbeTooLarge(f"fixpoint carrier exceeds {self.model.budget} elements")
            prev = set(cur)
        return out


class NatC(Carrier):
    """The set of families denoted by a Nat-type."""

    def __init__(self, model: "Model", nat: Nat, env: Env):
        self.model, self.nat, self.env = model, nat, env

    def key(self) -> tuple:
        return (self.nat, self.env)

    def contains(self, x: Any) -> bool:
        if not self.nat.binders:
            if not isinstance(x, NatValue):
                return False
            src = self.model.carrier(self.nat.source, self.env.push(()))
            tgt = self.model.carrier(self.nat.target, self.env.push(()))
            return all(tgt.contains(x.apply((), v)) for v in src.elements())
        return isinstance(x, NatValue)

    def _list(self) -> Iterable[Any]:
        m = self.model
        pool = m.nat_pool.get(self.nat)
        if not self.nat.binders:
            src = m.carrier(self.nat.source, self.env.push(())).elements()
            tgt = m.carrier(self.nat.target, self.env.push(())).elements()
            if len(tgt) ** len(src) <= m.budget:
                return [TableFn(tuple(zip(src, outs))) for outs in product(tgt, repeat=len(src))]
            if pool is None:
                raise ProbeTooLarge(f"function space of {len(tgt)}^{len(src)} elements")
        elif m.enumerate_nat:
            return enumerate_nat(m, self.nat, self.env)
        if pool is None:
            raise ProbeTooLarge("Nat carrier is not enumerated; enable enumerate_nat")
        out: list[NatValue] = []
        for name in pool:
            f = m.global_value(name, self.env)
            if not any(same_family(m, f, g, self.nat, self.env) for g in out):
                out.append(f)
        return out


class LanC(Carrier):
    """``(Lan_K F) args`` as a colimit over probe sets of size at most the bound.

    ``along`` and ``body`` live under the group ``prefix + S`` for the probe
    tuple ``S``."""

    def __init__(self, model: "Model", nbinders: int, along: tuple[Type, ...], body: Type,
                 env: Env, prefix: tuple, args: tuple[Carrier, ...], bound: int | None = None):
        self.model, self.nbinders, self.along, self.body = model, nbinders, along, body
        self.env, self.prefix, self.args = env, prefix, args
        self.bound = model.lan_bound if bound is None else bound
        self._classes: dict[tuple, tuple] | None = None

    def key(self) -> tuple:
        return (self.nbinders, self.along, self.body, self.env, self.prefix, self.args, self.bound)

    def index_objects(self) -> Iterator[tuple[tuple[int, ...], tuple, list[list[Any]], list[Any]]]:
        m = self.model
        for sizes in product(range(self.bound + 1), repeat=self.nbinders):
            probes = tuple(probe_set(k) for k in sizes)
            env2 = self.env.push(self.prefix + probes)
            ks = [m.carrier(k, env2).elements() for k in self.along]
            ws = m.carrier(self.body, env2).elements()
            yield sizes, probes, ks, ws

    def build(self) -> dict[tuple, tuple]:
        """Map every node ``(sizes, maps, w)`` to its canonical node."""
        if self._classes is not None:
            return self._classes
        m = self.model
        uf = UnionFind()
        objs = list(self.index_objects())
        cods = [a.elements() for a in self.args]
        maps_at: dict[tuple, list[tuple]] = {}
        for sizes, _, ks, ws in objs:
            maps_at[sizes] = [tuple(tuple(zip(k, outs)) for k, outs in zip(ks, choice))
                              for choice in product(*[list(product(c, repeat=len(k)))
                                                      for k, c in zip(ks, cods)])]
            if len(maps_at[sizes]) * max(len(ws), 1) > m.budget:
                raise ProbeTooLarge("Kan extension index is too large")
            for fm in maps_at[sizes]:
                for w in ws:
                    uf.add((sizes, fm, w))
        ident = self.env.derived("id", identity_slot)
        pre = tuple(identity_slot(p) for p in self.prefix)
        for (s1, p1, ks1, ws1), (s2, p2, ks2, _) in product(objs, repeat=2):
            for hs in product(*[list(product(range(b), repeat=a)) for a, b in zip(s1, s2)]):
                slots = tuple(Slot(a, b, partial(_apply_table, h)) for a, b, h in zip(p1, p2, hs))
                aenv = ident.push(pre + slots)
                khs = [[m.act(k, aenv, x) for x in kx] for k, kx in zip(self.along, ks1)]
                fws = [(w, m.act(self.body, aenv, w)) for w in ws1]
                for fm2 in maps_at[s2]:
                    look = [dict(t) for t in fm2]
                    fm1 = tuple(tuple((x, look[i][y]) for x, y in zip(ks1[i], khs[i]))
                                for i in range(len(ks1)))
                    for w, fw in fws:
                        uf.union((s1, fm1, w), (s2, fm2, fw))
        self._classes = uf.canonical(key=_node_key)
        return self._classes

    def canon(self, node: tuple) -> LanClass:
        classes = self.build()
        if node not in classes:
            raise ProbeTooLarge("representative lies outside the Kan extension index")
        s, fm, w = classes[node]
        return LanClass(s, fm, w)

    def members(self, z: LanClass) -> list[tuple]:
        """All index nodes in the class of ``z``."""
        rep = (z.index, z.maps, z.value)
        return [n for n, c in self.build().items() if c == rep]

    def contains(self, x: Any) -> bool:
        if not isinstance(x, LanClass):
            return False
        rep = (x.index, x.maps, x.value)
        return self.build().get(rep) == rep

    def _list(self) -> Iterable[Any]:
        return [LanClass(*c) for c in set(self.build().values())]


def _node_key(node: tuple) -> tuple:
    sizes, fm, w = node
    return (sum(sizes), sizes, tuple(tuple((vkey(a), vkey(b)) for a, b in t) for t in fm), vkey(w))


def _apply_table(h: Sequence[int], x: Atom) -> Atom:
    return Atom(h[x.tag])


class UnionFind:
    def __init__(self) -> None:
        self.parent: dict[Any, Any] = {}

    def add(self, x: Any) -> None:
        self.parent.setdefault(x, x)

    def find(self, x: Any) -> Any:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: Any, b: Any) -> None:
        if a not in self.parent or b not in self.parent:
            raise ProbeTooLarge("identification leaves the Kan extension index")
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def canonical(self, key: Callable[[Any], Any]) -> dict[Any, Any]:
        """Each element mapped to the least member of its class under ``key``."""
        best: dict[Any, Any] = {}
        for x in self.parent:
            r = self.find(x)
            if r not in best or key(x) < key(best[r]):
                best[r] = x
        return {x: best[self.find(x)] for x in self.parent}


# ---------------------------------------------------------------------------
# Functors and arrows


class Functor:
    """A set functor of some arity: ``obj`` on carriers and ``act`` on
    functions ``gs`` with sources ``sa`` and targets ``ta``."""

    arity: int
    _hash: int | None = None

    def key(self) -> tuple:
        raise NotImplementedError

    def obj(self, args: Sequence[Carrier]) -> Carrier:
        raise NotImplementedError

    def act(self, gs: Sequence[Callable], sa: Sequence[Carrier], ta: Sequence[Carrier], v: Any) -> Any:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        return self is other or (type(self) is type(other) and self.key() == other.key())  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((type(self).__name__, self.key()))
        return self._hash


class TypeFunctor(Functor):
    """``\\b1..bk. body`` under ``env``; the group is ``args + suffix``."""

    def __init__(self, model: "Model", body: Type, env: Env, arity: int, suffix: tuple = (),
                 label: str | None = None):
        self.model, self.body, self.env, self.arity, self.suffix = model, body, env, arity, suffix
        self.label = label

    def key(self) -> tuple:
        return (self.body, self.env, self.arity, self.suffix)

    def obj(self, args: Sequence[Carrier]) -> Carrier:
        return self.model.carrier(self.body, self.env.push(tuple(args) + self.suffix))

    def act(self, gs, sa, ta, v):
        slots = tuple(Slot(s, t, g) for s, t, g in zip(sa, ta, gs))
        aenv = self.env.derived("id", identity_slot).push(
            slots + tuple(identity_slot(c) for c in self.suffix))
        return self.model.act(self.body, aenv, v)

    def __repr__(self) -> str:
        return self.label or f"TypeFunctor({sx.pretty(self.body)})"


class MuStage(Functor):
    def __init__(self, model: "Model", mu: MuAbs, env: Env, n: int):
        self.model, self.mu, self.env, self.n = model, mu, env, n
        self.arity = len(mu.params)

    def key(self) -> tuple:
        return (self.mu, self.env, self.n)

    def obj(self, args):
        return self.model.mu_carrier(self.mu, self.env, self.n, tuple(args))

    def act(self, gs, sa, ta, v):
        return self.model.mu_act(self.mu, self.env.derived("id", identity_slot), gs, sa, ta, v)

    def __repr__(self) -> str:
        return f"MuStage({self.n})"


@dataclass
class Slot:
    """One variable of an arrow environment: source, target and the arrow.
    Arity-0 arrows are functions; higher-arity arrows take ``(gs, sa, ta, v)``."""

    src: Any
    tgt: Any
    arrow: Callable
    ident: bool = False


def _ident(v: Any) -> Any:
    return v


def identity_slot(e: Any) -> Slot:
    if isinstance(e, Functor):
        return Slot(e, e, e.act, True)
    return Slot(e, e, _ident, True)


def _reshapes(aenv: Env) -> bool:
    """Whether some slot is a non-identity transformation between functors
    other than a fixpoint stage; only those can change a value's shape."""
    flag = aenv._derived.get("reshapes")
    if flag is None:
        entries = list(aenv.names.values()) + [e for g in aenv.stack for e in g]
        flag = any(isinstance(e, Slot) and isinstance(e.src, Functor) and not e.ident
                   and not isinstance(e.src, MuStage) for e in entries)
        aenv._derived["reshapes"] = flag  # type: ignore[assignment]
    return flag  # type: ignore[return-value]


def arrows_src(aenv: Env) -> Env:
    return aenv.derived("src", lambda s: s.src)


def arrows_tgt(aenv: Env) -> Env:
    return aenv.derived("tgt", lambda s: s.tgt)


# ---------------------------------------------------------------------------
# Relations


class Relation:
    dom: Carrier
    cod: Carrier

    def contains(self, pair: tuple[Any, Any]) -> bool:
        raise NotImplementedError

    def pairs(self) -> frozenset:
        raise NotImplementedError


class FinRel(Relation):
    def __init__(self, dom: Carrier, cod: Carrier, pairs: Iterable[tuple[Any, Any]]):
        self.dom, self.cod, self._pairs = dom, cod, frozenset(pairs)

    def contains(self, pair):
        return pair in self._pairs

    def pairs(self):
        return self._pairs

    def __repr__(self) -> str:
        return f"FinRel({self.dom.size()}, {self.cod.size()}, {len(self._pairs)})"


class EqRel(Relation):
    def __init__(self, carrier: Carrier):
        self.dom = self.cod = carrier

    def contains(self, pair):
        return pair[0] == pair[1] and self.dom.contains(pair[0])

    def pairs(self):
        return frozenset((x, x) for x in self.dom.elements())


class SumR(Relation):
    def __init__(self, left: Relation, right: Relation):
        self.left, self.right = left, right
        self.dom, self.cod = SumC(left.dom, right.dom), SumC(left.cod, right.cod)

    def contains(self, pair):
        x, y = pair
        if isinstance(x, InL) and isinstance(y, InL):
            return self.left.contains((x.value, y.value))
        if isinstance(x, InR) and isinstance(y, InR):
            return self.right.contains((x.value, y.value))
        return False

    def pairs(self):
        return frozenset([(InL(a), InL(b)) for a, b in self.left.pairs()]
                         + [(InR(a), InR(b)) for a, b in self.right.pairs()])


class ProdR(Relation):
    def __init__(self, left: Relation, right: Relation, budget: int):
        self.left, self.right, self.budget = left, right, budget
        self.dom = ProdC(left.dom, right.dom, budget)
        self.cod = ProdC(left.cod, right.cod, budget)

    def contains(self, pair):
        x, y = pair
        return (isinstance(x, Pair) and isinstance(y, Pair)
                and self.left.contains((x.first, y.first))
                and self.right.contains((x.second, y.second)))

    def pairs(self):
        ls = self.left.pairs()
        rs = self.right.pairs() if ls else frozenset()
        if len(ls) * len(rs) > self.budget:
            raise ProbeTooLarge(f"product relation of {len(ls)} x {len(rs)} pairs")
        return frozenset((Pair(a, c), Pair(b, d)) for a, b in ls for c, d in rs)


class MuR(Relation):
    """Stage ``n`` of the relational fixpoint."""

    def __init__(self, model: "Model", mu: MuAbs, renv: Env, n: int, args: tuple[Relation, ...]):
        self.model, self.mu, self.renv, self.n, self.args = model, mu, renv, n, args
        self.dom = model.mu_carrier(mu, project_env(renv, 1), n, tuple(a.dom for a in args))
        self.cod = model.mu_carrier(mu, project_env(renv, 2), n, tuple(a.cod for a in args))
        self._bodies: dict[int, Relation] = {}
        self._pairs: frozenset | None = None

    def body(self, k: int) -> Relation:
        if k not in self._bodies:
            fix = MuRelT(self.model, self.mu, self.renv, k)
            self._bodies[k] = self.model.rel(self.mu.body, self.renv.push((fix, *self.args)))
        return self._bodies[k]

    def contains(self, pair):
        x, y = pair
        if not (isinstance(x, Wrap) and isinstance(y, Wrap)):
            return False
        if not (1 <= x.stage <= self.n and 1 <= y.stage <= self.n):
            return False
        return self.body(self.n - 1).contains((x.value, y.value))

    def pairs(self):
        if self._pairs is None:
            out: set[tuple[Any, Any]] = set()
            prev: frozenset = frozenset()
            for m in range(1, self.n + 1):
                cur = self.body(m - 1).pairs()
                for w1, w2 in cur - prev:
                    out.add((self.dom.wrap(w1), self.cod.wrap(w2)))
                if len(out) > self.model.budget:
                    raise ProbeTooLarge("fixpoint relation is too large")
                prev = cur
            self._pairs = frozenset(out)
        return self._pairs


class NatRel(Relation):
    """Pairs of families taking related arguments to related results at every
    probe relation for the binders."""

    def __init__(self, model: "Model", nat: Nat, renv: Env):
        self.model, self.nat, self.renv = model, nat, renv
        self.dom = model.nat_carrier(nat, project_env(renv, 1))
        self.cod = model.nat_carrier(nat, project_env(renv, 2))
        self._memo: dict[tuple[Any, Any], bool] = {}
        self._grid_cache: list[tuple] | None = None

    def witness(self, pair: tuple[Any, Any]) -> str | None:
        """A description of a violated instance, or ``None`` if the pair is related."""
        if any(b.arity for b in self.nat.binders):
            raise Inconclusive("relational Nat-type with higher-arity binders")
        f, g = pair
        for rels, doms, cods, src, tgt in self._grid():
            for x, y in src:
                try:
                    fx, gy = f.apply(doms, x), g.apply(cods, y)
                except StageOverflow:
                    # Outside the truncation: the families are undefined here.
                    continue
                if not tgt.contains((fx, gy)):
                    return (f"at relations [{', '.join(describe_relation(r) for r in rels)}] "
                            f"the related arguments {x} and {y} map to {fx} and {gy}")
        return None

    def _grid(self) -> list[tuple]:
        """Per probe tuple: the relations, their sides, the sorted related
        arguments and the result relation.  Shared by every pair tested."""
        if self._grid_cache is None:
            m = self.model
            grid = []
            for rels in m.relation_probe_tuples(len(self.nat.binders)):
                renv2 = self.renv.push(rels)
                src = sorted(m.rel(self.nat.source, renv2).pairs(),
                             key=lambda p: (vkey(p[0]), vkey(p[1])))
                grid.append((rels, tuple(r.dom for r in rels), tuple(r.cod for r in rels),
                             src, m.rel(self.nat.target, renv2)))
            self._grid_cache = grid
        return self._grid_cache

    def contains(self, pair):
        if pair not in self._memo:
            self._memo[pair] = self.witness(pair) is None
        return self._memo[pair]

    def pairs(self):
        if self.nat.binders:
            return frozenset((f, g) for f in self.dom.elements() for g in self.cod.elements()
                             if self.contains((f, g)))
        return self._pairs_without_binders()

    def _pairs_without_binders(self) -> frozenset:
        """Candidate filtering: index the codomain families by their value at
        each related argument, then intersect per domain family."""
        m = self.model
        renv2 = self.renv.push(())
        src = sorted(m.rel(self.nat.source, renv2).pairs(), key=lambda p: (vkey(p[0]), vkey(p[1])))
        tgt_rel = m.rel(self.nat.target, renv2)
        if any(isinstance(n, Nat) for n, _ in sx.iter_types(self.nat.target)):
            # Results are families, not carrier elements: test membership.
            return self._pairs_by_membership(src, tgt_rel)
        tgt = tgt_rel.pairs()
        image: dict[Any, set] = {}
        for a, b in tgt:
            image.setdefault(a, set()).add(b)
        gs = self.cod.elements()
        everyone = frozenset(range(len(gs)))
        index: dict[Any, dict[Any, set[int]]] = {}
        free: dict[Any, set[int]] = {}
        for y in {y for _, y in src}:
            by_value: dict[Any, set[int]] = {}
            free[y] = set()
            for i, g in enumerate(gs):
                try:
                    by_value.setdefault(g.apply((), y), set()).add(i)
                except StageOverflow:
                    free[y].add(i)
            index[y] = by_value
        out = set()
        for f in self.dom.elements():
            cand = set(everyone)
            for x, y in src:
                try:
                    fx = f.apply((), x)
                except StageOverflow:
                    continue
                allowed = set(free[y])
                for b in image.get(fx, ()):
                    allowed |= index[y].get(b, set())
                cand &= allowed
                if not cand:
                    break
            out.update((f, gs[i]) for i in cand)
        return frozenset(out)

    def _pairs_by_membership(self, src: list, tgt: Relation) -> frozenset:
        gs = self.cod.elements()
        out = set()
        for f in self.dom.elements():
            cand = list(gs)
            for x, y in src:
                try:
                    fx = f.apply((), x)
                except StageOverflow:
                    continue
                keep = []
                for g in cand:
                    try:
                        if tgt.contains((fx, g.apply((), y))):
                            keep.append(g)
                    except StageOverflow:
                        keep.append(g)
                cand = keep
                if not cand:
                    break
            out.update((f, g) for g in cand)
        return frozenset(out)


def describe_relation(r: Relation) -> str:
    ps = sorted(r.pairs(), key=lambda p: (vkey(p[0]), vkey(p[1])))
    body = ", ".join(f"({a},{b})" for a, b in ps)
    return f"{r.dom.size()}x{r.cod.size()}:{{{body}}}"


class RelTransformer:
    arity: int

    def rel(self, args: Sequence[Relation]) -> Relation:
        raise NotImplementedError

    @property
    def f1(self) -> Functor:
        raise NotImplementedError

    @property
    def f2(self) -> Functor:
        raise NotImplementedError


class TypeRelT(RelTransformer):
    def __init__(self, model: "Model", body: Type, renv: Env, arity: int, suffix: tuple = ()):
        self.model, self.body, self.renv, self.arity, self.suffix = model, body, renv, arity, suffix

    def rel(self, args):
        return self.model.rel(self.body, self.renv.push(tuple(args) + self.suffix))

    @property
    def f1(self):
        return TypeFunctor(self.model, self.body, project_env(self.renv, 1), self.arity,
                           tuple(r.dom for r in self.suffix))

    @property
    def f2(self):
        return TypeFunctor(self.model, self.body, project_env(self.renv, 2), self.arity,
                           tuple(r.cod for r in self.suffix))


class MuRelT(RelTransformer):
    def __init__(self, model: "Model", mu: MuAbs, renv: Env, n: int):
        self.model, self.mu, self.renv, self.n = model, mu, renv, n
        self.arity = len(mu.params)

    def rel(self, args):
        return MuR(self.model, self.mu, self.renv, self.n, tuple(args))

    @property
    def f1(self):
        return MuStage(self.model, self.mu, project_env(self.renv, 1), self.n)

    @property
    def f2(self):
        return MuStage(self.model, self.mu, project_env(self.renv, 2), self.n)


class GraphT(RelTransformer):
    """The graph relation transformer of a natural transformation
    ``alpha : F -> G``; ``alpha=None`` stands for the identity of ``F``.

    At relations ``R``, it relates ``F(pi1) w`` to ``alpha(F(pi2) w)`` for
    every ``w`` in ``F`` applied to the relations viewed as sets of pairs."""

    def __init__(self, source: Functor, target: Functor | None = None,
                 alpha: Callable[[tuple, Any], Any] | None = None):
        self.source = source
        self.target = target if target is not None else source
        self.alpha = alpha
        self.arity = source.arity

    def rel(self, args):
        sets = tuple(FinSet(Pair(a, b) for a, b in r.pairs()) for r in args)
        doms = tuple(r.dom for r in args)
        cods = tuple(r.cod for r in args)
        p1 = [lambda p: p.first] * len(args)
        p2 = [lambda p: p.second] * len(args)
        out = set()
        for w in self.source.obj(sets).elements():
            x = self.source.act(p1, sets, doms, w)
            y = self.source.act(p2, sets, cods, w)
            out.add((x, self.alpha(cods, y) if self.alpha else y))
        return FinRel(self.source.obj(doms), self.target.obj(cods), out)

    @property
    def f1(self):
        return self.source

    @property
    def f2(self):
        return self.target


def graph_relation(fn: Callable[[Any], Any], dom: Carrier, cod: Carrier) -> FinRel:
    return FinRel(dom, cod, ((x, fn(x)) for x in dom.elements()))


def graph_transformer(alpha: Callable[[tuple, Any], Any] | None, source: Functor,
                      target: Functor | None = None) -> GraphT:
    return GraphT(source, target, alpha)


def _eq_entry(e: Any) -> Any:
    if isinstance(e, Functor):
        return GraphT(e)
    return EqRel(e)


def equality_env(env: Env) -> Env:
    """Equality relations on carriers; identity graphs on functors."""
    return env.derived("eq", _eq_entry)


def _project(side: int, e: Any) -> Any:
    if isinstance(e, Relation):
        return e.dom if side == 1 else e.cod
    if isinstance(e, RelTransformer):
        return e.f1 if side == 1 else e.f2
    raise TypeError(f"not a relational entry: {e!r}")


def project_env(renv: Env, side: int) -> Env:
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    return renv.derived(f"pi{side}", partial(_project, side))


# ---------------------------------------------------------------------------
# Nat-type values


class NatValue:
    """A family of functions, applied at type arguments (carriers for arity-0
    binders, functors otherwise)."""

    label: str = "fn"

    def apply(self, targs: Sequence[Any], v: Any) -> Any:
        raise NotImplementedError

    def order_key(self) -> tuple:
        return (9, self.label, id(self))

    def __str__(self) -> str:
        return f"<{self.label}>"


class TableFn(NatValue):
    """A function of a Nat-type without binders, tabulated."""

    def __init__(self, table: Iterable[tuple[Any, Any]]):
        self.table = tuple(table)
        self._lookup = dict(self.table)
        self.label = "table"

    def apply(self, targs, v):
        try:
            return self._lookup[v]
        except KeyError:
            raise FinModelError(f"{v} is outside the tabulated domain") from None

    def order_key(self):
        return (0, tuple((vkey(a), vkey(b)) for a, b in self.table))

    def __eq__(self, other):
        return isinstance(other, TableFn) and self.table == other.table

    def __hash__(self):
        return hash(self.table)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{a}->{b}" for a, b in self.table) + "}"


class HostFamily(NatValue):
    """A family given directly by a Python function, outside the term language."""

    def __init__(self, fn: Callable[[tuple, Any], Any], label: str):
        self.fn, self.label = fn, label

    def apply(self, targs, v):
        return self.fn(tuple(targs), v)

    def order_key(self):
        return (2, self.label)


class EnumFamily(NatValue):
    """A family found by enumeration, tabulated on probe sets and extended to
    other sets along naturality."""

    def __init__(self, model: "Model", nat: Nat, env: Env, table: Mapping[tuple, Any], index: int):
        self.model, self.nat, self.env = model, nat, env
        self.table = dict(table)
        self.sizes = {s for s, _ in self.table}
        self.label = f"family{index}"
        self._key = tuple(sorted(((s, vkey(x), vkey(y)) for (s, x), y in self.table.items())))

    def apply(self, targs, v):
        targs = tuple(targs)
        if all(is_probe(a) for a in targs):
            sizes = tuple(a.size() for a in targs)
            if (sizes, v) in self.table:
                return self.table[(sizes, v)]
        return extend_by_naturality(self.model, self.nat, self.env,
                                    lambda sizes, x: self.table[(sizes, x)], self.sizes,
                                    targs, v)

    def order_key(self):
        return (1, self._key)

    def __eq__(self, other):
        return isinstance(other, EnumFamily) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{s}:{x}->{y}" for (s, x), y in
                               sorted(self.table.items(), key=lambda kv: (kv[0][0], vkey(kv[0][1])))) + "}"


def extend_by_naturality(model: "Model", nat: Nat, env: Env, at_probe: Callable[[tuple, Any], Any],
                         sizes_known: set, targs: tuple, v: Any) -> Any:
    """Apply a family known on probe sets at arbitrary carriers.

    The elements of each carrier occurring in ``v`` are renamed to a probe
    set, the family is applied there, and the result is renamed back."""
    seen: list[dict[Any, int]] = [{} for _ in targs]

    def record(i: int, x: Any) -> Any:
        seen[i].setdefault(x, len(seen[i]))
        return x

    ident = env.derived("id", identity_slot)
    model.act(nat.source, ident.push(tuple(Slot(a, a, partial(record, i))
                                           for i, a in enumerate(targs))), v)
    sizes = tuple(len(s) for s in seen)
    if sizes not in sizes_known:
        raise ProbeTooLarge(f"family is not tabulated at probe sizes {sizes}")
    probes = tuple(probe_set(k) for k in sizes)
    to_probe = ident.push(tuple(Slot(a, p, lambda x, i=i: Atom(seen[i][x]))
                                for i, (a, p) in enumerate(zip(targs, probes))))
    back = [{n: x for x, n in s.items()} for s in seen]
    from_probe = ident.push(tuple(Slot(p, a, lambda x, i=i: back[i][x.tag])
                                  for i, (a, p) in enumerate(zip(targs, probes))))
    x0 = model.act(nat.source, to_probe, v)
    return model.act(nat.target, from_probe, at_probe(sizes, x0))


class PolyFn(NatValue):
    """The denotation of an L-term: a closure, memoized per application."""

    def __init__(self, model: "Model", lam: sx.Lam, tenv: Env, venv: tuple, label: str = "L"):
        self.model, self.lam, self.tenv, self.venv, self.label = model, lam, tenv, venv, label
        self.memo: dict[tuple, Any] = {}

    def apply(self, targs, v):
        k = (tuple(targs), v)
        if k not in self.memo:
            try:
                self.memo[k] = self.model.eval(self.lam.body, self.tenv.push(targs),
                                               self.venv + (v,))
            except StageOverflow as e:
                self.memo[k] = e
        out = self.memo[k]
        if isinstance(out, StageOverflow):
            raise out
        return out


class InFn(NatValue):
    label = "in"

    def __init__(self, model: "Model", mu: MuAbs, tenv: Env):
        self.model, self.mu, self.tenv = model, mu, tenv

    def apply(self, targs, v):
        c = self.model.mu_carrier(self.mu, self.tenv, self.model.depth, tuple(targs))
        return Wrap(c.stage_of(v), v)


class FoldFn(NatValue):
    label = "fold"

    def __init__(self, model: "Model", fold: sx.Fold, tenv: Env):
        self.model, self.fold, self.tenv = model, fold, tenv

    def apply(self, targs, alg):
        return FoldAlg(self.model, self.fold, self.tenv, alg)


class FoldAlg(NatValue):
    """``fold alg``: structural recursion on stage-tagged values."""

    label = "fold-alg"

    def __init__(self, model: "Model", fold: sx.Fold, tenv: Env, alg: NatValue):
        self.model, self.fold, self.tenv, self.alg = model, fold, tenv, alg
        self.target = TypeFunctor(model, fold.target.body, tenv, len(fold.target.binders))
        self.memo: dict[tuple, Any] = {}

    def apply(self, targs, v):
        targs = tuple(targs)
        k = (targs, v)
        if k in self.memo:
            return self.memo[k]
        if not isinstance(v, Wrap):
            raise FinModelError(f"fold applied to a non-fixpoint value {v}")
        m = self.model
        mu = self.fold.mu
        ident = self.tenv.derived("id", identity_slot)
        src = MuStage(m, mu, self.tenv, v.stage - 1)

        def rec(gs, sa, ta, x):
            return self.apply(ta, src.act(gs, sa, ta, x))

        fix = Slot(src, self.target, rec)
        aenv = ident.push((fix, *(identity_slot(a) for a in targs)))
        out = self.alg.apply(targs, m.act(mu.body, aenv, v.value))
        self.memo[k] = out
        return out


class MapFn(NatValue):
    label = "map"

    def __init__(self, model: "Model", mp: sx.Map, tenv: Env):
        self.model, self.mp, self.tenv = model, mp, tenv

    def apply(self, targs, fs):
        return MapAt(self.model, self.mp, self.tenv, fs)


class MapAt(NatValue):
    """``map_H etas``: the functorial action of ``H`` along the etas."""

    label = "map-eta"

    def __init__(self, model: "Model", mp: sx.Map, tenv: Env, fs: Any):
        self.model, self.mp, self.tenv = model, mp, tenv
        n = len(mp.phis)
        self.etas = [fs] if n == 1 else _split_product(fs, n)

    def apply(self, targs, v):
        m, mp = self.model, self.mp
        cs = tuple(targs)
        slots = []
        for p, a_src, a_tgt, eta in zip(mp.phis, mp.sources, mp.targets, self.etas):
            f_src = TypeFunctor(m, a_src.body, self.tenv, p.arity, cs)
            f_tgt = TypeFunctor(m, a_tgt.body, self.tenv, p.arity, cs)

            def arrow(gs, sa, ta, x, eta=eta, f_src=f_src):
                return eta.apply(tuple(ta) + cs, f_src.act(gs, sa, ta, x))

            if p.arity == 0:
                slots.append(Slot(f_src.obj(()), f_tgt.obj(()),
                                  lambda x, eta=eta: eta.apply(cs, x)))
            else:
                slots.append(Slot(f_src, f_tgt, arrow))
        aenv = self.tenv.derived("id", identity_slot).push(
            tuple(slots) + tuple(identity_slot(c) for c in cs))
        return m.act(mp.body, aenv, v)


def _split_product(v: Any, n: int) -> list[Any]:
    out = []
    for _ in range(n - 1):
        if not isinstance(v, Pair):
            raise FinModelError("map arguments must form a product")
        out.append(v.second)
        v = v.first
    out.append(v)
    return out[::-1]


class KanIntroFn(NatValue):
    """``kan``: the colimit injection at the identity index function."""

    label = "kan"

    def __init__(self, model: "Model", t: sx.KanIntro, tenv: Env):
        self.model, self.t, self.tenv = model, t, tenv

    def apply(self, targs, w):
        m, t = self.model, self.t
        nphi = len(t.phis)
        phis, carriers = tuple(targs[:nphi]), tuple(targs[nphi:])
        # Transport the carriers to probe sets along their canonical order.
        probes = tuple(probe_set(c.size()) for c in carriers)
        elems = [c.elements() for c in carriers]
        ident = self.tenv.derived("id", identity_slot)
        pre = tuple(identity_slot(p) for p in phis)
        to_probe = ident.push(pre + tuple(
            Slot(c, p, lambda x, e=e: Atom(e.index(x))) for c, p, e in zip(carriers, probes, elems)))
        from_probe = ident.push(pre + tuple(
            Slot(p, c, lambda x, e=e: e[x.tag]) for c, p, e in zip(carriers, probes, elems)))
        penv = self.tenv.push(phis + probes)
        genv = self.tenv.push(phis + carriers)
        args = tuple(m.carrier(k, genv) for k in t.along)
        lan = m.lan_carrier(len(t.alphas), t.along, t.body, self.tenv, phis, args)
        maps = tuple(tuple((x, m.act(k, from_probe, x)) for x in m.carrier(k, penv).elements())
                     for k in t.along)
        sizes = tuple(p.size() for p in probes)
        return lan.canon((sizes, maps, m.act(t.body, to_probe, w)))


class KanElimFn(NatValue):
    """``cokan t``: on the class of ``(S, f, w)``, ``G(f)(t_S w)``."""

    label = "cokan"

    def __init__(self, model: "Model", t: sx.KanElim, tenv: Env, body: NatValue):
        self.model, self.t, self.tenv, self.body = model, t, tenv, body

    def apply(self, targs, z):
        if not isinstance(z, LanClass):
            raise FinModelError("cokan applied to a non-class value")
        return self.at_node(tuple(targs), (z.index, z.maps, z.value))

    def at_node(self, targs: tuple, node: tuple) -> Any:
        m, t = self.model, self.t
        nphi = len(t.phis)
        phis, betas = targs[:nphi], targs[nphi:]
        sizes, maps, w = node
        probes = tuple(probe_set(k) for k in sizes)
        kenv = self.tenv.push(phis + probes + tuple(EMPTY for _ in t.betas))
        ks = tuple(m.carrier(k, kenv) for k in t.along)
        inner = self.body.apply(phis + probes, w)
        ident = self.tenv.derived("id", identity_slot)
        slots = (tuple(identity_slot(p) for p in phis) + tuple(identity_slot(p) for p in probes)
                 + tuple(Slot(k, b, dict(mp).__getitem__) for k, b, mp in zip(ks, betas, maps)))
        return m.act(t.target, ident.push(slots), inner)


# ---------------------------------------------------------------------------
# The model


@dataclass
class Model:
    """Interpretation parameters and caches.

    ``depth`` truncates fixpoints; ``probe_sizes`` is the probe universe for
    relations and Nat enumeration; ``lan_bound`` bounds Kan-extension index
    sets; ``budget`` caps any single enumeration."""

    depth: int = 3
    probe_sizes: tuple[int, ...] = (0, 1, 2, 3)
    lan_bound: int = 2
    rel_lan_bound: int = 1
    enumerate_nat: bool = False
    budget: int = 200_000
    relation_budget: int = 5_000
    globals: Mapping[str, sx.Term] = field(default_factory=dict)
    nat_pool: dict[Nat, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        self.probe_sizes = tuple(sorted(set(self.probe_sizes)))
        self._mu: dict[tuple, MuC] = {}
        self._nat: dict[tuple, NatC] = {}
        self._lan: dict[tuple, LanC] = {}
        self._globals: dict[tuple, Any] = {}
        self._relations: dict[tuple[int, int], list[FinRel]] = {}

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other: object) -> bool:
        return self is other

    # -- interned carriers

    def mu_carrier(self, mu: MuAbs, env: Env, n: int, args: tuple[Carrier, ...]) -> MuC:
        k = (mu, env, n, args)
        c = self._mu.get(k)
        if c is None:
            c = self._mu[k] = MuC(self, mu, env, n, args)
        return c

    def nat_carrier(self, nat: Nat, env: Env) -> NatC:
        k = (nat, env)
        c = self._nat.get(k)
        if c is None:
            c = self._nat[k] = NatC(self, nat, env)
        return c

    def lan_carrier(self, nbinders: int, along: tuple, body: Type, env: Env, prefix: tuple,
                    args: tuple, bound: int | None = None) -> LanC:
        k = (nbinders, along, body, env, prefix, args, bound)
        c = self._lan.get(k)
        if c is None:
            c = self._lan[k] = LanC(self, nbinders, along, body, env, prefix, args, bound)
        return c

    # -- set interpretation

    def carrier(self, t: Type, env: Env) -> Carrier:
        match t:
            case Zero():
                return EMPTY
            case One():
                return UNIT_SET
            case Sum(l, r):
                return SumC(self.carrier(l, env), self.carrier(r, env))
            case Prod(l, r):
                return ProdC(self.carrier(l, env), self.carrier(r, env), self.budget)
            case VarApp(ref, args):
                e = env.lookup(ref)
                # Fixpoint variables of parameterless mu-types are 0-ary functors.
                if not args and not isinstance(e, Functor):
                    return e
                if e.arity != len(args):
                    raise FinModelError(f"{ref} is mapped to an arity-{e.arity} functor "
                                        f"but used at arity {len(args)}")
                return e.obj(tuple(self.carrier(a, env) for a in args))
            case Nat():
                return self.nat_carrier(t, env)
            case Mu(fix, ps, body, args):
                return self.mu_carrier(MuAbs(fix, ps, body), env, self.depth,
                                       tuple(self.carrier(a, env) for a in args))
            case Lan(bs, along, body, args):
                return self.lan_carrier(len(bs), along, body, env, (),
                                        tuple(self.carrier(a, env) for a in args))
        raise TypeError(f"not a type: {t!r}")

    def functor(self, body: Type, env: Env, arity: int) -> TypeFunctor:
        return TypeFunctor(self, body, env, arity)

    # -- functorial action

    def act(self, t: Type, aenv: Env, v: Any) -> Any:
        """Action of ``t`` on the arrows of ``aenv`` (an environment of slots)."""
        match t:
            case Zero() | One() | Nat():
                return v
            case Sum(l, r):
                if isinstance(v, InL):
                    return InL(self.act(l, aenv, v.value))
                if isinstance(v, InR):
                    return InR(self.act(r, aenv, v.value))
                raise FinModelError(f"{v} is not a sum value")
            case Prod(l, r):
                if not isinstance(v, Pair):
                    raise FinModelError(f"{v} is not a pair")
                return Pair(self.act(l, aenv, v.first), self.act(r, aenv, v.second))
            case VarApp(ref, args):
                slot = aenv.lookup(ref)
                if not args and not isinstance(slot.src, Functor):
                    return v if slot.ident else slot.arrow(v)
                gs, sa, ta = self._arg_arrows(args, aenv)
                return slot.arrow(gs, sa, ta, v)
            case Mu(fix, ps, body, args):
                gs, sa, ta = self._arg_arrows(args, aenv)
                return self.mu_act(MuAbs(fix, ps, body), aenv, gs, sa, ta, v)
            case Lan(bs, along, body, args):
                return self._lan_act(t, aenv, v)
        raise TypeError(f"not a type: {t!r}")

    def _arg_arrows(self, args: tuple[Type, ...], aenv: Env):
        gs = tuple(partial(self.act, a, aenv) for a in args)
        src, tgt = arrows_src(aenv), arrows_tgt(aenv)
        sa = tuple(self.carrier(a, src) for a in args)
        ta = tuple(self.carrier(a, tgt) for a in args)
        return gs, sa, ta

    def mu_act(self, mu: MuAbs, aenv: Env, gs, sa, ta, v: Any) -> Any:
        if not isinstance(v, Wrap):
            raise FinModelError(f"{v} is not a fixpoint value")
        k = v.stage - 1
        fix = Slot(MuStage(self, mu, arrows_src(aenv), k), MuStage(self, mu, arrows_tgt(aenv), k),
                   partial(self.mu_act, mu, aenv))
        params = tuple(Slot(s, t, g) for s, t, g in zip(sa, ta, gs))
        w = self.act(mu.body, aenv.push((fix, *params)), v.value)
        if not _reshapes(aenv):
            return Wrap(v.stage, w)
        # A transformation between functors can shrink the value, so its
        # least stage is recomputed in the target.
        target = self.mu_carrier(mu, arrows_tgt(aenv), self.depth, tuple(ta))
        return Wrap(target.stage_of(w), w)

    def _lan_act(self, t: Lan, aenv: Env, z: Any) -> Any:
        if not isinstance(z, LanClass):
            raise FinModelError(f"{z} is not a Kan extension class")
        gs = [partial(self.act, a, aenv) for a in t.args]
        probes = tuple(probe_set(k) for k in z.index)
        w = self.act(t.body, aenv.push(tuple(identity_slot(p) for p in probes)), z.value)
        maps = tuple(tuple((x, g(y)) for x, y in mp) for mp, g in zip(z.maps, gs))
        target = self.carrier(t, arrows_tgt(aenv))
        return target.canon((z.index, maps, w))

    # -- relational interpretation

    def rel(self, t: Type, renv: Env) -> Relation:
        match t:
            case Zero():
                return FinRel(EMPTY, EMPTY, ())
            case One():
                return EqRel(UNIT_SET)
            case Sum(l, r):
                return SumR(self.rel(l, renv), self.rel(r, renv))
            case Prod(l, r):
                return ProdR(self.rel(l, renv), self.rel(r, renv), self.budget)
            case VarApp(ref, args):
                e = renv.lookup(ref)
                if not args and not isinstance(e, RelTransformer):
                    return e
                return e.rel(tuple(self.rel(a, renv) for a in args))
            case Nat():
                return NatRel(self, t, renv)
            case Mu(fix, ps, body, args):
                return MuR(self, MuAbs(fix, ps, body), renv, self.depth,
                           tuple(self.rel(a, renv) for a in args))
            case Lan(bs, along, body, args):
                return self.lan_rel(t, renv)
        raise TypeError(f"not a type: {t!r}")

    def relations(self, n: int, m: int) -> list[FinRel]:
        """All relations between the probe sets of sizes ``n`` and ``m``."""
        if (n, m) not in self._relations:
            a, b = probe_set(n), probe_set(m)
            cells = [(x, y) for x in a.elements() for y in b.elements()]
            self._relations[(n, m)] = [
                FinRel(a, b, (c for c, keep in zip(cells, bits) if keep))
                for bits in product((False, True), repeat=len(cells))]
        return self._relations[(n, m)]

    def relation_probes(self, sizes: Iterable[int] | None = None) -> list[FinRel]:
        sizes = list(self.probe_sizes if sizes is None else sizes)
        return [r for n in sizes for m in sizes for r in self.relations(n, m)]

    def relation_probe_tuples(self, k: int) -> list[tuple[FinRel, ...]]:
        """Probe relations for ``k`` binders; sizes shrink from the top until
        the number of tuples fits ``relation_budget``."""
        sizes = list(self.probe_sizes)
        while True:
            probes = self.relation_probes(sizes)
            if len(probes) ** k <= self.relation_budget or len(sizes) <= 1:
                return list(product(probes, repeat=k))
            sizes.pop()

    def lan_rel(self, t: Lan, renv: Env) -> FinRel:
        """Relational Kan extension: colimits of both sides over an index of
        probe relations and relation-preserving index maps."""
        rels = tuple(self.rel(a, renv) for a in t.args)
        qprobes = self.relation_probes(range(self.rel_lan_bound + 1))
        ident1 = project_env(renv, 1).derived("id", identity_slot)
        ident2 = project_env(renv, 2).derived("id", identity_slot)
        objs = []
        for qs in product(qprobes, repeat=len(t.binders)):
            renv2 = renv.push(qs)
            krels = [self.rel(k, renv2) for k in t.along]
            maps = []
            for choice in product(*[_rel_morphisms(kr, r) for kr, r in zip(krels, rels)]):
                maps.append(tuple(choice))
            frel = self.rel(t.body, renv2)
            objs.append((qs, krels, maps, frel))
        uf1, uf2 = UnionFind(), UnionFind()
        for qi, (qs, krels, maps, frel) in enumerate(objs):
            for fm in maps:
                for w in frel.dom.elements():
                    uf1.add((qi, fm, w))
                for w in frel.cod.elements():
                    uf2.add((qi, fm, w))
        for (i1, (q1, k1, _, f1)), (i2, (q2, k2, maps2, _)) in product(enumerate(objs), repeat=2):
            for hs in product(*[_rel_morphisms(a, b) for a, b in zip(q1, q2)]):
                slots1 = tuple(Slot(a.dom, b.dom, dict(h[0]).__getitem__) for a, b, h in zip(q1, q2, hs))
                slots2 = tuple(Slot(a.cod, b.cod, dict(h[1]).__getitem__) for a, b, h in zip(q1, q2, hs))
                a1, a2 = ident1.push(slots1), ident2.push(slots2)
                for fm2 in maps2:
                    fm1 = tuple(
                        (tuple((x, dict(f[0])[self.act(k, a1, x)]) for x in kr.dom.elements()),
                         tuple((x, dict(f[1])[self.act(k, a2, x)]) for x in kr.cod.elements()))
                        for k, kr, f in zip(t.along, k1, fm2))
                    for w in f1.dom.elements():
                        uf1.union((i1, fm1, w), (i2, fm2, self.act(t.body, a1, w)))
                    for w in f1.cod.elements():
                        uf2.union((i1, fm1, w), (i2, fm2, self.act(t.body, a2, w)))
        key = lambda node: (node[0], repr(node[1]), vkey(node[2]))
        c1, c2 = uf1.canonical(key), uf2.canonical(key)

        def cls(node: tuple, side: int) -> LanClass:
            qi, fm, w = node
            desc = tuple(describe_relation(q) for q in objs[qi][0])
            return LanClass((side, qi, desc), tuple(f[side - 1] for f in fm), w)

        pairs = set()
        for qi, (qs, krels, maps, frel) in enumerate(objs):
            for fm in maps:
                for w1, w2 in frel.pairs():
                    pairs.add((cls(c1[(qi, fm, w1)], 1), cls(c2[(qi, fm, w2)], 2)))
        dom = FinSet(cls(n, 1) for n in set(c1.values()))
        cod = FinSet(cls(n, 2) for n in set(c2.values()))
        out = FinRel(dom, cod, pairs)
        out.nodes = (objs, c1, c2)  # type: ignore[attr-defined]
        return out

    # -- terms

    def global_value(self, name: str, env: Env) -> Any:
        """A named term's denotation; only the name table of ``env`` is visible."""
        k = (name, tuple(sorted(env.names.items(), key=lambda kv: kv[0])))
        if k not in self._globals:
            if name not in self.globals:
                raise FinModelError(f"unknown term {name}")
            v = self.eval(self.globals[name], Env(env.names), ())
            if isinstance(v, NatValue):
                v.label = name
            self._globals[k] = v
        return self._globals[k]

    def type_arg(self, k: Union[Type, sx.Abs], tenv: Env) -> Any:
        if isinstance(k, sx.Abs):
            return TypeFunctor(self, k.body, tenv, len(k.binders))
        return self.carrier(k, tenv)

    def eval(self, t: sx.Term, tenv: Env = EMPTY_ENV, venv: tuple = ()) -> Any:
        match t:
            case sx.Var(ref):
                if isinstance(ref, int):
                    return venv[-1 - ref]
                return self.global_value(ref, tenv)
            case sx.Top():
                return UNIT
            case sx.Absurd():
                raise EmptyTypeElimination("absurd reached during evaluation")
            case sx.Inl(b):
                return InL(self.eval(b, tenv, venv))
            case sx.Inr(b):
                return InR(self.eval(b, tenv, venv))
            case sx.Pair(a, b):
                return Pair(self.eval(a, tenv, venv), self.eval(b, tenv, venv))
            case sx.Proj1(b):
                return self.eval(b, tenv, venv).first
            case sx.Proj2(b):
                return self.eval(b, tenv, venv).second
            case sx.Case(s, _, left, _, right):
                v = self.eval(s, tenv, venv)
                if isinstance(v, InL):
                    return self.eval(left, tenv, venv + (v.value,))
                if isinstance(v, InR):
                    return self.eval(right, tenv, venv + (v.value,))
                raise FinModelError(f"case on a non-sum value {v}")
            case sx.Lam():
                return PolyFn(self, t, tenv, venv)
            case sx.App(h, ks, s):
                f = self.eval(h, tenv, venv)
                targs = tuple(self.type_arg(k, tenv) for k in ks)
                return f.apply(targs, self.eval(s, tenv, venv))
            case sx.Map():
                return MapFn(self, t, tenv)
            case sx.In(mu):
                return InFn(self, mu, tenv)
            case sx.Fold():
                return FoldFn(self, t, tenv)
            case sx.KanIntro():
                return KanIntroFn(self, t, tenv)
            case sx.KanElim():
                return KanElimFn(self, t, tenv, self.eval(t.body, tenv, venv))
            case sx.Ann(b, _):
                return self.eval(b, tenv, venv)
        raise TypeError(f"not a term: {t!r}")


def _rel_morphisms(src: Relation, tgt: Relation) -> list[tuple[tuple, tuple]]:
    """Relation-preserving pairs of functions, each tabulated as (x, y) pairs."""
    d1, d2 = src.dom.elements(), src.cod.elements()
    c1, c2 = tgt.dom.elements(), tgt.cod.elements()
    sp = src.pairs()
    out = []
    for o1 in product(c1, repeat=len(d1)):
        f1 = dict(zip(d1, o1))
        for o2 in product(c2, repeat=len(d2)):
            f2 = dict(zip(d2, o2))
            if all(tgt.contains((f1[x], f2[y])) for x, y in sp):
                out.append((tuple(zip(d1, o1)), tuple(zip(d2, o2))))
    return out


# ---------------------------------------------------------------------------
# Enumeration of Nat carriers


def enumerate_nat(model: Model, nat: Nat, env: Env, sizes: Iterable[int] | None = None,
                  limit: int | None = None) -> list[EnumFamily]:
    """All families on probe sets that preserve every probe relation.

    Variables are ``(probe sizes, x)`` with ``x`` in the source carrier; each
    probe relation contributes binary constraints between the variables of
    its two sides.  Outer variables are related by equality."""
    if any(b.arity for b in nat.binders):
        raise Inconclusive("enumeration of Nat-types with higher-arity binders")
    sizes = list(model.probe_sizes if sizes is None else sizes)
    limit = model.budget if limit is None else limit
    k = len(nat.binders)
    variables: list[tuple[tuple, Any]] = []
    domains: dict[tuple, list[Any]] = {}
    for tup in product(sizes, repeat=k):
        env2 = env.push(tuple(probe_set(n) for n in tup))
        tgt = model.carrier(nat.target, env2).elements()
        for x in model.carrier(nat.source, env2).elements():
            variables.append((tup, x))
            domains[(tup, x)] = list(tgt)
    allowed: dict[tuple, set] = {}
    renv = equality_env(env)
    probes = [r for n in sizes for m in sizes for r in model.relations(n, m)]
    for rels in product(probes, repeat=k):
        renv2 = renv.push(rels)
        src = model.rel(nat.source, renv2)
        tgt = model.rel(nat.target, renv2)
        t1 = tuple(r.dom.size() for r in rels)
        t2 = tuple(r.cod.size() for r in rels)
        for x, y in src.pairs():
            u, w = (t1, x), (t2, y)
            ok = {(a, b) for a in domains[u] for b in domains[w] if tgt.contains((a, b))}
            key = (u, w)
            allowed[key] = allowed[key] & ok if key in allowed else ok
    # Unary constraints come from pairs relating a variable to itself.
    for (u, w), ok in list(allowed.items()):
        if u == w:
            domains[u] = [a for a in domains[u] if (a, a) in ok]
    neighbours: dict[tuple, list[tuple[tuple, set, bool]]] = {v: [] for v in variables}
    for (u, w), ok in allowed.items():
        if u != w:
            neighbours[u].append((w, ok, True))
            neighbours[w].append((u, ok, False))
    order = sorted(variables, key=lambda v: len(domains[v]))
    solutions: list[dict] = []
    assignment: dict[tuple, Any] = {}

    def consistent(var: tuple, val: Any) -> bool:
        for other, ok, forward in neighbours[var]:
            if other in assignment:
                pair = (val, assignment[other]) if forward else (assignment[other], val)
                if pair not in ok:
                    return False
        return True

    def search(i: int) -> None:
        if len(solutions) > limit:
            raise ProbeTooLarge(f"more than {limit} families")
        if i == len(order):
            solutions.append(dict(assignment))
            return
        var = order[i]
        for val in domains[var]:
            if consistent(var, val):
                assignment[var] = val
                search(i + 1)
                del assignment[var]

    search(0)
    fams = [EnumFamily(model, nat, env, s, i) for i, s in enumerate(solutions)]
    return sorted(fams, key=vkey)


def same_family(model: Model, f: NatValue, g: NatValue, nat: Nat, env: Env,
                sizes: Iterable[int] | None = None) -> bool:
    """Extensional equality on the probe universe."""
    if any(b.arity for b in nat.binders):
        raise Inconclusive("comparison of families with higher-arity binders")
    sizes = list(model.probe_sizes if sizes is None else sizes)
    for tup in product(sizes, repeat=len(nat.binders)):
        probes = tuple(probe_set(n) for n in tup)
        for x in model.carrier(nat.source, env.push(probes)).elements():
            try:
                fx, gx = f.apply(probes, x), g.apply(probes, x)
            except StageOverflow:
                continue
            if fx != gx:
                return False
    return True


# ---------------------------------------------------------------------------
# Helpers for callers


def arrow_env(env: Env, arrows: Mapping[str, tuple[Any, Any, Callable]]) -> Env:
    """Identity slots for ``env`` except the named arity-0 arrows ``(src, tgt, fn)``."""
    base = env.derived("id", identity_slot)
    return Env({**base.names, **{n: Slot(s, t, f) for n, (s, t, f) in arrows.items()}},
               base.stack)


def graph_env(env: Env, arrows: Mapping[str, tuple[Any, Any, Callable]]) -> Env:
    """Graph relations of the named functions; identity graphs elsewhere."""
    base = equality_env(env)
    return Env({**base.names, **{n: graph_relation(f, s, t) for n, (s, t, f) in arrows.items()}},
               base.stack)


def value_of_term(model: Model, t: sx.Term) -> Any:
    """The canonical value of a closed constructor term."""
    return model.eval(t)


def show(v: Any) -> str:
    return str(v)
