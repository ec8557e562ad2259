"""Shared document types, number handling and parse errors."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Any, Dict, List, Sequence

from ..core import Diagnostic, FmecaModel, Level

FORMAT_VERSION = "1.0"
SUPPORTED_VERSIONS = frozenset({FORMAT_VERSION})


class ParseError(Exception):
    """Input could not be turned into a model; carries every diagnostic found."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.level is Level.ERROR]
        head = str(errors[0]) if errors else "parse failed"
        more = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(head + more)


@dataclass(frozen=True)
class ModelDocument:
    model: FmecaModel
    metadata: Dict[str, Any] = field(default_factory=dict)
    format_version: str = FORMAT_VERSION
    # warnings collected while parsing; not part of document identity
    diagnostics: List[Diagnostic] = field(default_factory=list, compare=False)


def parse_rational(value: Any) -> Fraction:
    """Exact rational from an int, Decimal, or a string like ``"12.5"`` / ``"7/2"``."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    if isinstance(value, (int, Decimal, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        # JSON is read with parse_float=Decimal; a float here came from Python code
        return Fraction(Decimal(repr(value)))
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, _, den = text.partition("/")
            return Fraction(int(num), int(den))
        try:
            return Fraction(Decimal(text))
        except InvalidOperation:
            raise ValueError(f"not a number: {value!r}") from None
    raise ValueError(f"not a number: {value!r}")


def _terminates(den: int) -> bool:
    for p in (2, 5):
        while den % p == 0:
            den //= p
    return den == 1


def format_rational(value: Fraction) -> str:
    """Canonical text form: integer, finite decimal, or ``p/q``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    if _terminates(value.denominator):
        digits = 0
        while (value * 10 ** digits).denominator != 1:
            digits += 1
        sign = "-" if value < 0 else ""
        scaled = abs(value.numerator * 10 ** digits // value.denominator)
        whole, frac = divmod(scaled, 10 ** digits)
        return f"{sign}{whole}.{frac:0{digits}d}"
    return f"{value.numerator}/{value.denominator}"


def json_rational(value: Fraction):
    """Integers stay JSON numbers; anything else is written as a string."""
    value = Fraction(value)
    return value.numerator if value.denominator == 1 else format_rational(value)


def model_digest(model: FmecaModel) -> str:
    from .structured import write_model

    payload = write_model(ModelDocument(model=model))
    return "sha256:" + hashlib.sha256(payload).hexdigest()
