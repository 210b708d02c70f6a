"""Adaptive Simpson integration used by the assay and bias calculations."""

from __future__ import annotations

import math
from typing import Callable


class QuadratureError(RuntimeError):
    """Raised when the adaptive subdivision cap is hit before convergence."""


def _simpson(f: Callable[[float], float], a: float, fa: float, b: float, fb: float):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _recurse(f, a, fa, b, fb, m, fm, whole, tol, depth):
    if depth <= 0:
        raise QuadratureError(
            f"adaptive Simpson failed to converge on [{a}, {b}] at tol={tol}"
        )
    lm, flm, left = _simpson(f, a, fa, m, fm)
    rm, frm, right = _simpson(f, m, fm, b, fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    half = tol / 2.0
    return _recurse(f, a, fa, m, fm, lm, flm, left, half, depth - 1) + _recurse(
        f, m, fm, b, fb, rm, frm, right, half, depth - 1
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Integrate f over [a, b] to absolute tolerance tol.

    The integrand must be finite on [a, b]; subdivision stops at max_depth
    halvings and raises QuadratureError if the local error is still above
    tolerance at that point.
    """
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)
    return _recurse(f, a, fa, b, fb, m, fm, whole, tol, max_depth)


def adaptive_simpson_sqrt0(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Adaptive Simpson after the substitution u = a + t^2.

    Use when f has an algebraic derivative singularity at the lower
    endpoint (e.g. a gamma survival curve with shape < 1 at u = 0); the
    substitution regularizes it so subdivision converges.
    """
    if b <= a:
        return 0.0
    width = math.sqrt(b - a)
    # clamp to b: t*t can overshoot in floating point, and f may jump there
    return adaptive_simpson(
        lambda t: 2.0 * t * f(min(a + t * t, b)), 0.0, width, tol=tol,
        max_depth=max_depth,
    )
