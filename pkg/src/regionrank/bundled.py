"""Access to data files shipped inside the package."""

from __future__ import annotations

from importlib import resources


def fixture_path(name: str):
    return resources.files("regionrank").joinpath("data", name)


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")
