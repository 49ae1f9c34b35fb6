"""Exact rational helpers shared by the JSON formats and the CLI."""

from __future__ import annotations

from fractions import Fraction


def parse_rational(text: str | int) -> Fraction:
    """Parse a rational from a decimal-integer string or a "p/q" string.

    Plain integers are accepted as well so hand-written files can use
    JSON numbers for whole values.
    """
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        return Fraction(text.strip())
    raise ValueError(f"expected rational string, got {type(text).__name__}")


def format_rational(value: Fraction) -> str:
    """Canonical string form: "p" for integers, "p/q" otherwise."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_decimal(value: Fraction | float, digits: int = 15) -> str:
    """Decimal rendering with the given number of significant digits (CSV)."""
    return f"{float(value):.{digits}g}"
