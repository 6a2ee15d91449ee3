"""Routh-Hurwitz test for real polynomials."""

from __future__ import annotations

from typing import Sequence


def routh_first_column(coeffs: Sequence[float]) -> list[float]:
    """First column of the Routh array, highest-degree coefficient first.

    A zero pivot is reported as 0.0 and ends the array early; such a
    polynomial is never Hurwitz.
    """
    coeffs = [float(c) for c in coeffs]
    if not coeffs or coeffs[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    if len(coeffs) == 1:
        return [coeffs[0]]
    rows = [coeffs[0::2], coeffs[1::2]]
    width = len(rows[0])
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    column = [rows[0][0], rows[1][0]]
    for _ in range(len(coeffs) - 2):
        upper, lower = rows[-2], rows[-1]
        pivot = lower[0]
        if pivot == 0:
            column.append(0.0)
            return column
        new = [(pivot * upper[k + 1] - upper[0] * lower[k + 1]) / pivot for k in range(width - 1)] + [0.0]
        rows.append(new)
        column.append(new[0])
    return column


def is_hurwitz(coeffs: Sequence[float]) -> bool:
    """True when every root of ``coeffs[0] s^n + ... + coeffs[n]`` has negative real part."""
    column = routh_first_column(coeffs)
    sign = 1.0 if column[0] > 0 else -1.0
    return all(sign * c > 0 for c in column)
