import numpy as np
import pytest

from netmoment.quadrature import adaptive_gauss_legendre, composite_gauss_legendre, panel_count


def test_composite_rule_integrates_polynomials_exactly():
    x, w = composite_gauss_legendre(-1.0, 2.0, 3, order=8, breakpoints=(0.5,))
    assert np.sum(w) == pytest.approx(3.0, rel=1e-14)
    assert np.sum(w * x**15) == pytest.approx((2.0**16 - 1.0) / 16, rel=1e-13)
    assert np.all(np.diff(x) > 0)


def test_adaptive_handles_sharp_peaks():
    h = 1e-3
    value = adaptive_gauss_legendre(lambda x: h / (np.pi * (x * x + h * h)), -1.0, 1.0, tol=1e-12)
    assert value == pytest.approx(2 * np.arctan(1 / h) / np.pi, abs=1e-11)


def test_adaptive_vector_valued():
    value = adaptive_gauss_legendre(lambda x: np.stack([np.sin(x), np.cos(x)]), 0.0, np.pi)
    assert value == pytest.approx([2.0, 0.0], abs=1e-12)


def test_panel_count_resolves_scales():
    assert panel_count(3.0, 0.1, 250, 1.5) >= 3.0 / min(0.05, 3.0 / 250)
    assert panel_count(1.0, 10.0, 1, 1.0) >= 4
