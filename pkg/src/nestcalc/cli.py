"""Command-line front end: check, normalize, denote and verify.

Exit codes: 0 success or expectations met, 1 check failure, 2 usage error,
3 internal error.  Settings come from defaults, then the key=value file
named by NESTCALC_CONFIG, then flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import syntax as sx
from .corpus import available, source as corpus_source
from .typecheck import Program, check_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

# Bundled files and the bundled files they depend on, in load order.
CORPUS_DEPENDS = {
    "types.nc": (),
    "laws.nc": ("types.nc", "ptree.nc", "bush.nc", "list.nc"),
    "list.nc": ("types.nc", "ptree.nc"),
    "fusion.nc": ("types.nc", "ptree.nc", "list.nc"),
}

# Largest number of elements printed for a carrier unless --all is given.
SHOW_LIMIT = 50


class UsageError(Exception):
    pass


@dataclass
class Config:
    probe_sizes: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    mu_depth: int = 3
    fuel: int = 10 ** 6
    gadt: bool = False
    enumerate_nat: bool = False
    workers: int = 1
    output: str | None = None

    def validate(self) -> None:
        if not self.probe_sizes:
            raise UsageError("probe_sizes must be nonempty")
        if any(s < 0 for s in self.probe_sizes):
            raise UsageError("probe sizes must be non-negative")
        self.probe_sizes = sorted(set(self.probe_sizes))
        if self.mu_depth < 1:
            raise UsageError("mu_depth must be at least 1")
        if self.fuel < 1 or self.workers < 1:
            raise UsageError("fuel and workers must be positive")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _parse_sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"probe sizes must be comma-separated integers, got {text!r}") from None


def read_config_file(path: str) -> dict[str, Any]:
    """``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, Any] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e.strerror}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key == "probe_sizes":
                out[key] = _parse_sizes(value)
            elif key in ("mu_depth", "fuel", "workers"):
                out[key] = int(value)
            elif key in ("gadt", "enumerate_nat"):
                out[key] = _parse_bool(value)
            elif key == "output":
                out[key] = value
            else:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}") from None
    return out


def build_config(args: argparse.Namespace, environ: dict[str, str] | None = None) -> Config:
    environ = os.environ if environ is None else environ
    cfg = Config()
    if environ.get("NESTCALC_CONFIG"):
        for k, v in read_config_file(environ["NESTCALC_CONFIG"]).items():
            setattr(cfg, k, v)
    if getattr(args, "probe_sizes", None) is not None:
        cfg.probe_sizes = _parse_sizes(args.probe_sizes)
    for key in ("mu_depth", "fuel", "workers", "output"):
        if getattr(args, key, None) is not None:
            setattr(cfg, key, getattr(args, key))
    for key in ("gadt", "enumerate_nat"):
        if getattr(args, key, False):
            setattr(cfg, key, True)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Loading programs


def resolve_files(files: Sequence[str]) -> list[tuple[str, str]]:
    """``(label, text)`` per file.  Paths are read from disk; names of bundled
    corpus files that do not exist on disk load the bundled file and its
    dependencies."""
    out: list[tuple[str, str]] = []
    seen: set[str] = set()

    def add_bundled(name: str) -> None:
        for dep in CORPUS_DEPENDS.get(name, ("types.nc",)):
            if dep != name:
                add_bundled(dep)
        if name not in seen:
            seen.add(name)
            out.append((f"corpus:{name}", corpus_source(name)))

    for f in files:
        p = Path(f)
        if p.exists():
            try:
                out.append((str(p), p.read_text(encoding="utf-8")))
            except OSError as e:
                raise UsageError(f"cannot read {f}: {e.strerror}") from None
        elif p.name in available() and p.parent == Path("."):
            add_bundled(p.name)
        elif f.startswith("corpus:") and f[7:] in available():
            add_bundled(f[7:])
        else:
            raise UsageError(f"no such file: {f}")
    return out


def load(files: Sequence[str], gadt: bool) -> tuple[Program, list[dict[str, Any]]]:
    """Parse and check the concatenation of ``files``; aliases declared in one
    file are visible in later ones.  Returns the program and every diagnostic,
    located by file and line."""
    texts = resolve_files(files)
    chunks = ["pragma gadt on"] if gadt else []
    starts: list[tuple[int, str]] = []
    line = len(chunks) + 1
    for label, text in texts:
        starts.append((line, label))
        chunks.append(text)
        line += text.count("\n") + 1

    def locate(d: dict[str, Any]) -> dict[str, Any]:
        at = d.get("line", 0)
        first, label = max(((s, lab) for s, lab in starts if s <= at), default=(1, "<input>"))
        return {"file": label, **d, "line": at - first + 1 if at else 0}

    try:
        decls = sx.parse_file("\n".join(chunks))
    except sx.ParseError as e:
        err = {"rule": "ParseError", "message": str(e).split(": ", 1)[-1],
               "line": e.line, "col": e.col}
        return check_program([]), [locate(err)]
    prog = check_program(decls)
    return prog, [locate(d.to_json()) for d in prog.diagnostics]


def _emit(cfg: Config, text: str) -> None:
    if cfg.output:
        Path(cfg.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_check(args: argparse.Namespace, cfg: Config) -> int:
    prog, diags = load(args.files, cfg.gadt)
    ok = not diags
    if args.json:
        _emit(cfg, json.dumps({"ok": ok, "types": len(prog.aliases), "terms": len(prog.types),
                               "diagnostics": diags}, indent=2))
    else:
        lines = []
        for d in diags:
            where = f"{d.get('file', '')}:{d.get('line', 0)}:{d.get('col', 0)}".lstrip(":")
            name = f" {d['decl']}:" if d.get("decl") else ""
            lines.append(f"{where}:{name} {d['rule']}: {d['message']}")
        lines.append(f"{'ok' if ok else 'failed'}: {len(prog.aliases)} type(s), "
                     f"{len(prog.types)} term(s), {len(diags)} diagnostic(s)")
        _emit(cfg, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _require(prog: Program, diags: list, name: str) -> None:
    if diags:
        raise _CheckFailed("program does not check: " + "; ".join(d["message"] for d in diags))
    if name not in prog.terms:
        raise UsageError(f"no term named {name}")


class _CheckFailed(Exception):
    pass


def cmd_normalize(args: argparse.Namespace, cfg: Config) -> int:
    from .rewrite import FuelExhausted, normalize
    *files, name = args.items
    prog, errors = load(files, cfg.gadt)
    _require(prog, errors, name)
    try:
        nf, trace = normalize(sx.Var(name), cfg.fuel, prog.terms, seed=args.seed,
                              record=args.trace)
    except FuelExhausted as e:
        if args.json:
            _emit(cfg, json.dumps({"term": name, "error": "FuelExhausted",
                                   "fuel_used": e.trace.fuel_used}, indent=2))
        else:
            print(f"{name}: {e}", file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        out: dict[str, Any] = {"term": name, "normal_form": sx.pretty(nf),
                               "fuel_used": trace.fuel_used}
        if args.trace:
            out["trace"] = trace.to_json()["steps"]
        _emit(cfg, json.dumps(out, indent=2))
    else:
        lines = []
        if args.trace:
            for i, s in enumerate(trace.steps, 1):
                lines.append(f"{i:4d} {s.rule:8s} at /{'/'.join(s.path)}: {sx.pretty(s.before)}")
        lines.append(sx.pretty(nf))
        _emit(cfg, "\n".join(lines))
    return EXIT_OK


def _parse_assignments(items: Sequence[str], what: str) -> dict[str, str]:
    out = {}
    for it in items:
        if "=" not in it:
            raise UsageError(f"{what} expects name=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_relation(text: str):
    """``NxM`` or ``NxM:i-j,i-j`` for a relation between probe sets."""
    from .finmodel import Atom, FinRel, probe_set
    shape, _, body = text.partition(":")
    try:
        n, m = (int(x) for x in shape.lower().split("x"))
        pairs = []
        for p in filter(None, body.split(",")):
            i, j = (int(x) for x in p.split("-"))
            if not (0 <= i < n and 0 <= j < m):
                raise UsageError(f"pair {p} lies outside {n}x{m}")
            pairs.append((Atom(i), Atom(j)))
    except ValueError:
        raise UsageError(f"relations are written NxM:i-j,...; got {text!r}") from None
    return FinRel(probe_set(n), probe_set(m), pairs)


def _elements_json(carrier, show_all: bool) -> dict[str, Any]:
    elems = carrier.elements()
    shown = elems if show_all else elems[:SHOW_LIMIT]
    return {"size": len(elems), "elements": [str(e) for e in shown],
            "truncated": len(shown) < len(elems)}


def cmd_denote(args: argparse.Namespace, cfg: Config) -> int:
    from .finmodel import Env, Model, probe_set, sort_values
    files = list(args.items)
    name = None
    if args.type is None:
        if not files:
            raise UsageError("denote needs a term or type name, or --type")
        *files, name = files
    # Without files the shared data types are in scope.
    prog, diags = load(files or ["types.nc"], cfg.gadt)
    if diags:
        raise _CheckFailed("program does not check: " + "; ".join(d["message"] for d in diags))
    model = Model(depth=cfg.mu_depth, probe_sizes=tuple(cfg.probe_sizes),
                  enumerate_nat=cfg.enumerate_nat, globals=prog.terms)
    sets = {k: probe_set(int(v)) for k, v in _parse_assignments(args.set or [], "--set").items()}
    rels = {k: _parse_relation(v) for k, v in _parse_assignments(args.rel or [], "--rel").items()}
    out: dict[str, Any]
    if args.type is not None or (name is not None and name in prog.aliases
                                 and name not in prog.types):
        text = args.type if args.type is not None else name
        t = sx.parse_type(text, prog.aliases)
        if name is not None and name in prog.aliases:
            decl = prog.aliases[name]
            t = sx.parse_type(" ".join([name] + [b.name for b in decl.gamma + decl.phi]),
                              prog.aliases)
        free = sx.free_type_vars(t)
        missing = [v for v in free if v not in sets and v not in rels]
        if missing:
            raise UsageError(f"assign the free variable(s) {', '.join(missing)} with --set or --rel")
        out = {"type": sx.pretty(t), "depth": cfg.mu_depth}
        if sets or not rels:
            env = Env({**sets, **{k: r.dom for k, r in rels.items()}})
            out["set"] = _elements_json(model.carrier(t, env), args.all)
        if rels:
            from .finmodel import EqRel
            renv = Env({**{k: EqRel(c) for k, c in sets.items()}, **rels})
            r = model.rel(t, renv)
            pairs = sorted((str(a), str(b)) for a, b in r.pairs())
            out["relation"] = {"dom_size": r.dom.size(), "cod_size": r.cod.size(),
                               "pairs": len(pairs),
                               "listed": pairs if args.all else pairs[:SHOW_LIMIT]}
            out["set_at_first_projection"] = _elements_json(
                model.carrier(t, Env({**sets, **{k: q.dom for k, q in rels.items()}})), args.all)
    else:
        if name not in prog.terms:
            raise UsageError(f"no term or type named {name}")
        ty = prog.types[name]
        env = Env(sets)
        v = model.global_value(name, env)
        out = {"term": name, "type": sx.pretty(ty), "depth": cfg.mu_depth}
        if isinstance(ty, sx.Nat):
            table = []
            from itertools import product
            if any(b.arity for b in ty.binders):
                raise UsageError("tabulating families with higher-arity binders is not supported")
            for tup in product(cfg.probe_sizes, repeat=len(ty.binders)):
                probes = tuple(probe_set(n) for n in tup)
                src = model.carrier(ty.source, env.push(probes))
                rows = []
                for x in sort_values(src.elements())[: None if args.all else SHOW_LIMIT]:
                    try:
                        rows.append([str(x), str(v.apply(probes, x))])
                    except Exception as e:  # noqa: BLE001 - reported per row
                        rows.append([str(x), f"<{type(e).__name__}>"])
                table.append({"sizes": list(tup), "rows": rows})
            out["family"] = table
        else:
            out["value"] = str(v)
    _emit(cfg, json.dumps(out, indent=2))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: Config) -> int:
    from .paramlab import LabConfig, run_suite
    lab = LabConfig(probe_sizes=tuple(cfg.probe_sizes), mu_depth=cfg.mu_depth, fuel=cfg.fuel,
                    enumerate_nat=cfg.enumerate_nat, workers=cfg.workers)
    report = run_suite(args.suite, lab)
    if args.json:
        _emit(cfg, json.dumps(report.to_json(), indent=2))
    else:
        lines = []
        for i in report.instances:
            mark = "ok  " if i.met else "FAIL"
            note = "" if i.expected == "pass" else f" (expected {i.expected})"
            params = ", ".join(f"{k}={v}" for k, v in i.parameters.items())
            lines.append(f"{mark} {i.verdict:12s} {i.description}{note}"
                         + (f" [{params}]" if params else ""))
            if i.witness and (i.verdict != "pass" or not i.met):
                lines.append(f"       witness: {i.witness}")
        s = report.summary
        lines.append(f"{args.suite}: {s['pass']} pass, {s['fail']} fail, "
                     f"{s['inconclusive']} inconclusive; expectations "
                     f"{'met' if report.ok else 'NOT met'} ({report.duration_ms} ms)")
        _emit(cfg, "\n".join(lines))
    return EXIT_OK if report.ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    from .paramlab import SUITES
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--probe-sizes", help="comma-separated probe set sizes")
    common.add_argument("--mu-depth", type=int, help="fixpoint truncation stage")
    common.add_argument("--fuel", type=int, help="rewrite step budget")
    common.add_argument("--gadt", action="store_true", help="enable Lan types and kan/cokan")
    common.add_argument("--enumerate-nat", action="store_true",
                        help="enumerate Nat carriers instead of using named terms")
    common.add_argument("--workers", type=int, help="worker processes for verify")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--output", help="write output to this file")

    p = argparse.ArgumentParser(prog="nestcalc",
                                description="Nested types calculus: checker, rewriter, "
                                            "finite model and parametricity checks.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="parse, kind-check and typecheck files")
    c.add_argument("files", nargs="*", help="source files or bundled corpus names")
    c.set_defaults(run=cmd_check)

    n = sub.add_parser("normalize", parents=[common], help="normalize a named term")
    n.add_argument("items", nargs="+", metavar="FILE... NAME")
    n.add_argument("--trace", action="store_true", help="print every rewrite step")
    n.add_argument("--seed", type=int, help="random redex order instead of innermost")
    n.set_defaults(run=cmd_normalize)

    d = sub.add_parser("denote", parents=[common], help="finite denotation of a term or type")
    d.add_argument("items", nargs="*", metavar="FILE... NAME")
    d.add_argument("--type", help="a type expression to interpret")
    d.add_argument("--set", action="append", metavar="VAR=SIZE",
                   help="interpret a type variable as a probe set")
    d.add_argument("--rel", action="append", metavar="VAR=NxM:i-j,...",
                   help="interpret a type variable as a probe relation")
    d.add_argument("--all", action="store_true", help="list every element")
    d.set_defaults(run=cmd_denote)

    v = sub.add_parser("verify", parents=[common], help="run a parametricity suite")
    v.add_argument("suite", choices=SUITES)
    v.set_defaults(run=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = build_config(args)
        return args.run(args, cfg)
    except UsageError as e:
        print(f"nestcalc: {e}", file=sys.stderr)
        return EXIT_USAGE
    except _CheckFailed as e:
        print(f"nestcalc: {e}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as e:  # noqa: BLE001 - last-resort report for the exit code contract
        print(f"nestcalc: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
