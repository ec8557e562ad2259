"""Reading and writing models, solver reports and oracle results."""

from .document import (
    FORMAT_VERSION, ModelDocument, ParseError, format_rational, model_digest, parse_rational,
)
from .structured import canonical_model, parse_structured, write_model as _write_structured
from .tabular import parse_tabular, write_tabular

STRUCTURED = "structured"
TABULAR = "tabular"
FORMATS = (STRUCTURED, TABULAR)


def parse_model(data, format: str = STRUCTURED, strict: bool = True) -> ModelDocument:
    """Parse bytes into a model document or raise ``ParseError``.

    ``format`` is ``"structured"`` (JSON) or ``"tabular"`` (CSV). Any input
    yields either a document or a ``ParseError``; no other exception escapes.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown model format {format!r}")
    reader = parse_structured if format == STRUCTURED else parse_tabular
    try:
        return reader(data, strict=strict)
    except ParseError:
        raise
    except Exception as exc:  # last-resort guard for totality
        from ..core import Diagnostic, Level

        raise ParseError([Diagnostic(Level.ERROR, "syntax-error", f"unreadable input: {exc}")]) from None


def write_model(doc: ModelDocument, format: str = STRUCTURED) -> bytes:
    if format == STRUCTURED:
        return _write_structured(doc)
    if format == TABULAR:
        return write_tabular(doc)
    raise ValueError(f"unknown model format {format!r}")


def guess_format(name: str) -> str:
    return TABULAR if name.lower().endswith((".csv", ".tsv", ".txt")) else STRUCTURED


__all__ = [
    "FORMAT_VERSION", "FORMATS", "ModelDocument", "ParseError", "STRUCTURED", "TABULAR",
    "canonical_model", "format_rational", "guess_format", "model_digest", "parse_model",
    "parse_rational", "write_model",
]
