"""Access to files shipped with the package (fixtures, prompts, templates)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_path(*parts: str) -> Path:
    """Filesystem path of a shipped data file, e.g. data_path("blocksworld.ttl")."""
    root = resources.files("sbtforge") / "data"
    return Path(str(root.joinpath(*parts)))


def data_text(*parts: str) -> str:
    return data_path(*parts).read_text(encoding="utf-8")
