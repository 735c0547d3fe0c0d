"""
Reports
=======
The result record every verifier returns, and the text forms used in CSV
and JSON output: exact values as 'p/q', approximate values as
'value±err'.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import mpmath

from .realnum import Ball


def format_fraction(x):
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_approx(value, err):
    """'value±err' with 12 significant digits."""
    return f"{float(value):.12g}±{float(err):.3g}"


def format_value(value):
    """Text form of one cell."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, Ball):
        if value.radius == 0:
            return format_fraction(value.center)
        return format_approx(value.center, value.radius)
    if isinstance(value, (float, mpmath.mpf)):
        return f"{float(value):.12g}"
    if isinstance(value, (list, tuple)):
        return ' '.join(format_value(v) for v in value)
    return str(value)


@dataclass
class BoundsReport:
    """
    Rows of one verification plus the fitted constants it produced.

    passed is None when nothing was asserted (e.g. every row was in a
    record-only range); indeterminate counts rows that could not be decided.
    """

    name: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    fitted: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    indeterminate: int = 0

    @property
    def passed(self):
        verdicts = [row.get('pass') for row in self.rows if row.get('pass') is not None]
        if not verdicts:
            return None
        return all(verdicts)

    @property
    def failures(self):
        return [row for row in self.rows if row.get('pass') is False]

    def add(self, **row):
        self.rows.append(row)
        return row

    def table(self):
        """Rows as lists of strings in column order."""
        return [[format_value(row.get(c)) for c in self.columns] for row in self.rows]

    def to_dict(self):
        return {
            'name': self.name,
            'columns': self.columns,
            'rows': self.table(),
            'fitted': {k: format_value(v) for k, v in self.fitted.items()},
            'notes': self.notes,
            'indeterminate': self.indeterminate,
            'passed': self.passed,
        }
