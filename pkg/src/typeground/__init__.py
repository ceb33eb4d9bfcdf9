"""Zero-shot entity typing by grounding mentions to type-compatible concepts.

The pipeline grounds a mention-in-context to encyclopedia concepts via an
inverted word-concept index, re-ranks candidates by context consistency,
consults a surface-form prior, and infers coarse and fine taxonomy types
with a count-ratio decision procedure. Target taxonomies are configured
through a Boolean type-definition DSL over primitive type paths.
"""

from importlib import resources

__version__ = "0.1.0"

_DEFINITION_NAMES = (
    "figer",
    "bbn",
    "ontonotes_fine",
    "ontonotes",
    "muc",
    "conll",
    "bb3",
)


def builtin_definition_names() -> tuple[str, ...]:
    """Names of the type-definition files shipped with the package."""
    return _DEFINITION_NAMES


def builtin_definition_text(name: str) -> str:
    """Source text of a shipped type-definition file."""
    if name not in _DEFINITION_NAMES:
        raise KeyError(f"unknown definition {name!r}; have {_DEFINITION_NAMES}")
    return (
        resources.files("typeground")
        .joinpath("definitions", f"{name}.typedef")
        .read_text(encoding="utf-8")
    )
