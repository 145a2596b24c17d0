from __future__ import annotations

import sys
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOMLDecodeError = tomllib.TOMLDecodeError


def loads(text: str) -> dict:
    return tomllib.loads(text)


def load_path(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_data(name: str) -> dict:
    """Parse a TOML file shipped in ``collapsesim/data``."""
    return tomllib.loads(resources.files("collapsesim").joinpath("data", name).read_text("utf-8"))
