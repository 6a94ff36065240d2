import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymfair.errors import QuadratureError
from asymfair.quadrature import integrate, integrate_batch


def test_polynomials_exact_on_first_pass():
    val, err = integrate(lambda x: x**19, np.array([0.0, 1.0]), atol=1e-14)
    assert val == pytest.approx(1 / 20, abs=1e-15)


def test_smooth_and_kinked():
    assert integrate(np.exp, np.array([0.0, 1.0]))[0] == pytest.approx(math.e - 1, abs=1e-12)
    assert integrate(lambda x: np.abs(x - 0.3), np.array([0.0, 0.3, 1.0]))[0] == pytest.approx(0.29, abs=1e-14)
    val, _ = integrate(lambda x: np.abs(x - 0.3), np.array([0.0, 1.0]), atol=1e-10)
    assert val == pytest.approx(0.29, abs=1e-10)


def test_batch_owner_indices():
    vals, errs = integrate_batch(lambda x, k: np.where(k == 0, np.sin(x), x * x),
                                 [np.array([0.0, math.pi]), np.array([0.0, 0.5, 2.0])], atol=1e-12)
    np.testing.assert_allclose(vals, [2.0, 8 / 3], atol=1e-11)
    assert np.all(errs <= 1e-10)


def test_budget_exhaustion():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.sin(1 / np.maximum(x, 1e-300)), np.array([0.0, 1.0]), atol=1e-14, max_panels=50)


@given(st.floats(-3, 3), st.floats(0.0, 1.0), st.floats(0.01, 1.0))
def test_affine_exact(a, lo, width):
    hi = lo + width
    val, _ = integrate(lambda x: a * x + 1, np.array([lo, hi]))
    assert val == pytest.approx(a * (hi**2 - lo**2) / 2 + width, abs=1e-12)
