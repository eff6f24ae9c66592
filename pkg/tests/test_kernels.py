import numpy as np
import pytest
from scipy.integrate import quad

from netmoment import kernels
from netmoment.errors import ContractError, DomainError, SingularityError
from netmoment.kernels import Geometry, Interval
from netmoment.quadrature import adaptive_gauss_legendre


def test_poisson_values():
    assert kernels.poisson(0.0, 1.0) == pytest.approx(1 / np.pi, rel=1e-15)
    assert kernels.poisson(1.0, 1.0) == pytest.approx(1 / (2 * np.pi), rel=1e-15)


def test_poisson_unit_mass():
    # truncated to [-L, L]; the tail 2y/(pi L) is added back analytically
    L = 1e4
    body = adaptive_gauss_legendre(lambda x: kernels.poisson(x, 0.1), -L, L, tol=1e-12,
                                   breakpoints=(-10, -1, 0, 1, 10))
    tail = 2 * np.arctan(0.1 / L) / np.pi
    assert abs(body + tail - 1.0) < 1e-10


def test_conj_poisson_values(rng):
    assert kernels.conj_poisson(0.0, 0.1) == 0.0
    assert kernels.conj_poisson(1.0, 1.0) == pytest.approx(1 / (2 * np.pi))
    x = rng.uniform(-5, 5, 50)
    assert np.all(kernels.conj_poisson(x, 0.3) + kernels.conj_poisson(-x, 0.3) == 0.0)


@pytest.mark.parametrize("f", [kernels.poisson, kernels.conj_poisson, kernels.dpoisson_dx,
                               kernels.dconj_poisson_dx])
def test_height_must_be_positive(f):
    with pytest.raises(DomainError):
        f(0.5, 0.0)
    with pytest.raises(DomainError):
        f(0.5, -1.0)


def test_derivatives_match_finite_differences(rng):
    x = rng.uniform(-2, 2, 40)
    y = 0.1
    step = 1e-6
    for f, df in ((kernels.poisson, kernels.dpoisson_dx), (kernels.conj_poisson, kernels.dconj_poisson_dx)):
        fd = (f(x + step, y) - f(x - step, y)) / (2 * step)
        exact = df(x, y)
        assert np.all(np.abs(fd - exact) <= 1e-6 * np.maximum(np.abs(exact), 1.0))
    assert kernels.dpoisson_dx(0.0, 0.1) == 0.0
    assert kernels.dconj_poisson_dx(0.1, 0.1) == 0.0


def test_cauchy_riemann(rng):
    x = rng.uniform(-2, 2, 100)
    y = rng.uniform(0.05, 1.0, 100)
    step = 1e-6
    dPdy = (kernels.poisson(x, y + step) - kernels.poisson(x, y - step)) / (2 * step)
    dQdx = kernels.dconj_poisson_dx(x, y)
    assert np.all(np.abs(dPdy + dQdx) <= 1e-6 * np.maximum(np.abs(dQdx), 1.0))


def test_dpoisson_l1_norm():
    y = 0.1
    L = 1e4
    body = adaptive_gauss_legendre(lambda x: np.abs(kernels.dpoisson_dx(x, y)), -L, L, tol=1e-13,
                                   breakpoints=(-1, 0, 1))
    tail = 2 * kernels.poisson(L, y)
    assert body + tail == pytest.approx(2 / (np.pi * y), rel=1e-8)


def test_conv_indicator_P_closed_form():
    assert kernels.conv_indicator_P(0.0, 0.1, (-1, 1)) == pytest.approx(2 / np.pi * np.arctan(10), rel=1e-14)
    assert kernels.conv_indicator_P(0.0, 0.1, (-1, 1)) == pytest.approx(0.936549, abs=1e-6)
    assert kernels.conv_indicator_P(1e8, 0.1, (-1, 1)) < 1e-9
    assert kernels.conv_indicator_P(0.0, 1e-9, (-1, 1)) == pytest.approx(1.0, abs=1e-8)
    v = kernels.conv_indicator_P(np.linspace(-5, 5, 101), 0.2, (-1, 0.5))
    assert np.all((v > 0) & (v < 1))


def test_conv_indicator_special_values():
    assert kernels.conv_indicator_dP(0.0, 0.1, (-1, 1)) == 0.0
    expected = 2 / (np.pi * 1.01)
    assert kernels.conv_indicator_dQ(0.0, 0.1, (-1, 1)) == pytest.approx(expected, rel=1e-14)
    assert kernels.conv_indicator_dQ(0.0, 0.1, (-1, 1)) == pytest.approx(0.6303166063, rel=1e-9)


def test_convolutions_match_quadrature(rng):
    J = (-0.7, 0.4)
    h = 0.1
    for x in rng.uniform(-1.5, 1.5, 20):
        pts = sorted({J[0], J[1], min(max(x, J[0]), J[1])})
        for closed, kern in ((kernels.conv_indicator_P, kernels.poisson),
                             (kernels.conv_indicator_Q, kernels.conj_poisson),
                             (kernels.conv_indicator_dP, kernels.dpoisson_dx),
                             (kernels.conv_indicator_dQ, kernels.dconj_poisson_dx)):
            ref = quad(lambda t: kern(x - t, h), J[0], J[1], points=pts[1:-1] or None,
                       epsabs=1e-13, epsrel=1e-13, limit=200)[0]
            assert abs(closed(x, h, J) - ref) < 1e-9


def test_degenerate_interval():
    with pytest.raises(DomainError):
        Interval(1.0, 1.0)
    with pytest.raises(DomainError):
        kernels.conv_indicator_Q(0.0, 0.1, (2.0, 1.0))


def test_hilbert_indicator():
    J = Interval(-1.0, 1.0)
    assert kernels.hilbert_indicator(0.0, J) == 0.0
    assert kernels.hilbert_indicator(2.0, J) == pytest.approx(np.log(3) / np.pi, rel=1e-15)
    assert kernels.hilbert_indicator(2.0, J) == pytest.approx(0.349699, abs=1e-6)
    assert kernels.hilbert_indicator(-2.0, J) == pytest.approx(-np.log(3) / np.pi)
    with pytest.raises(SingularityError):
        kernels.hilbert_indicator(np.array([0.0, 1.0]), J)


def test_hilbert_indicator_matches_principal_value():
    J = (-1.0, 1.0)
    for x in (-0.6, 0.3, 2.0, -3.5):
        if J[0] < x < J[1]:
            pv = quad(lambda t: 1.0, J[0], J[1], weight="cauchy", wvar=x)[0]
            ref = -pv / np.pi
        else:
            ref = quad(lambda t: 1.0 / (x - t), *J, epsabs=1e-14)[0] / np.pi
        assert kernels.hilbert_indicator(x, J) == pytest.approx(ref, abs=1e-12)


def test_P_of_hilbert_indicator_is_Q_of_indicator():
    # P_h * (H chi_J) = Q_h * chi_J: the identity a2 relies on
    J, h = (-0.5, 0.3), 0.1
    for x in (-1.2, -0.1, 0.25, 0.9):
        f = lambda t: kernels.poisson(x - t, h) * kernels.hilbert_indicator(t, J)
        total = 0.0
        edges = [-np.inf, -50, J[0], J[1], 50, np.inf]
        for a, b in zip(edges[:-1], edges[1:]):
            total += quad(f, a, b, limit=400, epsabs=1e-13)[0]
        assert total == pytest.approx(kernels.conv_indicator_Q(x, h, J), abs=1e-8)


def _grid(n, half=50.0):
    return np.linspace(-half, half, n, endpoint=False)


def _wavelet(x):
    # fourth derivative of exp(-x^2): four vanishing moments keep H u short-tailed
    return (16 * x**4 - 48 * x**2 + 12) * np.exp(-x * x)


def test_hilbert_grid_involution_and_isometry():
    x = _grid(2**16)
    u = _wavelet(x)
    Hu = kernels.hilbert_grid(u, x)
    assert np.max(np.abs(kernels.hilbert_grid(Hu, x) + u)) < 1e-6 * np.max(np.abs(u))
    ratio = np.linalg.norm(Hu) / np.linalg.norm(u)
    assert 1 - 1e-6 <= ratio <= 1 + 1e-6


def test_hilbert_grid_maps_P_to_Q():
    x = _grid(2**20)
    for y in (0.1, 0.05):
        err = np.abs(kernels.hilbert_grid(kernels.poisson(x, y), x) - kernels.conj_poisson(x, y))
        # the cut 1/x^2 tail of P only matters next to the window edges
        assert np.max(err[np.abs(x) <= 40]) < 1e-5


def test_poisson_derivative_commutation():
    # u = P_a, so P_y * u = P_{y+a}; check d_y(P_y*u) + H(d_x(P_y*u)) = 0
    x = _grid(2**20)
    c = 0.3
    dy = (x**2 - c**2) / (np.pi * (x**2 + c**2) ** 2)
    res = dy + kernels.hilbert_grid(kernels.dpoisson_dx(x, c), x)
    assert np.max(np.abs(res)) < 1e-4


def test_hilbert_grid_contract():
    with pytest.raises(ContractError):
        kernels.hilbert_grid(np.ones(7))
    with pytest.raises(ContractError):
        kernels.hilbert_grid(np.ones(4), grid=[0, 1, 3, 4])


def test_kop_zero_eigenfunction():
    # H(chi_I / sqrt((x-a)(b-x))) vanishes on I; t = mid + half cos(theta) removes the endpoint singularities
    a, b = -0.4, 1.1
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    for x in np.linspace(a, b, 12)[1:-1][:10]:
        th0 = np.arccos((x - mid) / half)
        smooth = lambda th: (th - th0) / (x - (mid + half * np.cos(th))) if th != th0 else -1.0 / (half * np.sin(th0))
        value = quad(smooth, 0.0, np.pi, weight="cauchy", wvar=th0, epsabs=1e-12)[0] / np.pi
        assert abs(value) < 1e-3


def test_geometry():
    g = Geometry.reference()
    assert (g.s, g.q, g.h) == (1.0, 1.5, 0.1)
    assert g.is_physical
    assert Geometry.parse("1,2,0.5") == Geometry(1.0, 2.0, 0.5)
    with pytest.raises(DomainError):
        Geometry(1.0, 1.5, 0.0)
    with pytest.raises(ContractError):
        Geometry.parse("1,2")
    assert not Geometry(2.0, 1.0, 0.1).is_physical
