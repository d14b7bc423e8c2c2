import math

import numpy as np
import pytest

from maxrank import dual


@pytest.mark.parametrize(
    "f, df, x",
    [
        (np.sin, np.cos, 0.7),
        (np.exp, np.exp, -1.3),
        (np.sqrt, lambda x: 0.5 / np.sqrt(x), 2.0),
        (lambda x: x**3 - 2 * x, lambda x: 3 * x**2 - 2, 1.5),
        (lambda x: 1.0 / (1.0 + x * x), lambda x: -2 * x / (1 + x * x) ** 2, 0.4),
        (np.expm1, np.exp, 0.3),
        (np.log1p, lambda x: 1 / (1 + x), 0.3),
    ],
)
def test_derivative_matches_closed_form(f, df, x):
    assert dual.derivative(f, x) == pytest.approx(df(x), rel=1e-14, abs=1e-14)


def test_where_picks_branch_derivative():
    f = lambda y: dual.where(y.val >= 0, np.expm1(y), -np.expm1(-y))
    assert dual.derivative(f, 0.5) == pytest.approx(math.exp(0.5))
    assert dual.derivative(f, -0.5) == pytest.approx(math.exp(0.5))


def test_seed_gives_identity_jacobian():
    xs = dual.seed(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert len(xs) == 2
    out = xs[0] * xs[1]
    np.testing.assert_allclose(out.val, [3.0, 8.0])
