"""Bundled example programs and their loader."""

from __future__ import annotations

from importlib import resources

from ..syntax import parse_file


def source(*names: str) -> str:
    root = resources.files(__name__)
    return "\n".join(root.joinpath(n).read_text(encoding="utf-8") for n in names)


def load_decls(*names: str):
    return parse_file(source(*names))


def load_program(*names: str):
    from ..typecheck import check_program
    return check_program(load_decls(*names))


def available() -> list[str]:
    root = resources.files(__name__)
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".nc"))
