import math

import pytest

from recencysim.quadrature import (
    QuadratureError,
    adaptive_simpson,
    adaptive_simpson_sqrt0,
)


def test_polynomial_exact():
    # Simpson is exact for cubics
    assert adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 3.0) == pytest.approx(
        81.0 / 4 - 9.0, abs=1e-12
    )


def test_exponential():
    val = adaptive_simpson(lambda x: math.exp(-x), 0.0, 5.0, tol=1e-12)
    assert val == pytest.approx(1.0 - math.exp(-5.0), abs=1e-11)


def test_empty_interval():
    assert adaptive_simpson(lambda x: 1.0, 2.0, 2.0) == 0.0
    assert adaptive_simpson(lambda x: 1.0, 3.0, 2.0) == 0.0


def test_sqrt_singularity_handled():
    # int_0^1 sqrt(x) dx = 2/3; derivative blows up at 0 but the
    # substitution makes the integrand polynomial
    val = adaptive_simpson_sqrt0(math.sqrt, 0.0, 1.0, tol=1e-12)
    assert val == pytest.approx(2.0 / 3.0, abs=1e-11)


def test_shifted_lower_endpoint():
    val = adaptive_simpson_sqrt0(lambda x: math.sqrt(x - 1.0), 1.0, 2.0, tol=1e-12)
    assert val == pytest.approx(2.0 / 3.0, abs=1e-11)


def test_nonconvergence_raises():
    with pytest.raises(QuadratureError):
        adaptive_simpson(math.sqrt, 0.0, 1.0, tol=1e-13, max_depth=8)
