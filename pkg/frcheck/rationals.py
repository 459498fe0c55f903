"""
Exact rational helpers: parsing, wire format and Hölder conjugates
"""

import re
from fractions import Fraction

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


def parse_rational(text):
    """Parse an integer or "num/den" string; floating literals are rejected"""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    match = _RATIONAL_RE.match(str(text))
    if not match:
        raise ValueError(f"not an exact rational: '{text}' (use an integer or num/den)")
    numerator, denominator = match.group(1), match.group(2)
    if denominator is not None and int(denominator) == 0:
        raise ValueError(f"zero denominator in '{text}'")
    return Fraction(int(numerator), int(denominator or 1))


def as_fraction(value):
    """Coerce ints, Fractions and num/den strings; floats are refused"""
    if isinstance(value, float):
        raise TypeError(f"floating value {value!r} cannot be used as an exact parameter")
    return parse_rational(value)


def as_pair(values):
    pair = tuple(as_fraction(v) for v in values)
    if len(pair) != 2:
        raise ValueError(f"expected a pair, got {len(pair)} entries")
    return pair


def format_rational(value):
    if value is None:
        return None
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def format_pair(pair):
    return [format_rational(v) for v in pair]


def parse_pair(values):
    return tuple(None if v is None else parse_rational(v) for v in values)


def conjugate(p):
    """Hölder conjugate p' of p >= 1; None stands for infinity (p = 1)"""
    p = Fraction(p)
    if p < 1:
        raise ValueError(f"Hölder conjugate needs p >= 1, got {p}")
    if p == 1:
        return None
    return p / (p - 1)


def inverse_conjugate(p):
    """1/p' = 1 - 1/p, which is 0 for p = 1"""
    return 1 - 1 / Fraction(p)
