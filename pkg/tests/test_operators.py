import json

import numpy as np
import pytest
from scipy.integrate import quad

from netmoment import kernels
from netmoment.errors import ContractError, DomainError
from netmoment.experiments import BUILTINS
from netmoment.operators import (FieldSamples, Magnetization, a2_field, a2_identity_check, adjoint_eval,
                                 adjoint_residual, forward_coeffs, forward_field, sample_field)
from netmoment.quadrature import adaptive_gauss_legendre, composite_gauss_legendre
from netmoment.spectral import FourierVector, basis_eval

E1 = Magnetization(((-1.0, 1.0, 1.0),), ())
E2 = Magnetization((), ((-1.0, 1.0, 1.0),))


def random_magnetization(rng, max_pieces=4, s=1.0):
    def pieces():
        k = int(rng.integers(1, max_pieces + 1))
        edges = np.sort(rng.uniform(-s, s, 2 * k))
        return tuple((edges[2 * i], edges[2 * i + 1], rng.uniform(-1, 1)) for i in range(k))
    return Magnetization(pieces(), pieces())


def random_phi(rng, N, q=1.5):
    x = rng.standard_normal(2 * N + 1) / np.concatenate([[1.0], np.arange(1, N + 1), np.arange(1, N + 1)])
    return FourierVector.from_real(x, q)


def convolution_oracle(m, geometry, x):
    h = geometry.h
    m1 = lambda t: m.values(t)[0]
    m2 = lambda t: m.values(t)[1]
    pts = [p for p in m.breakpoints() if -geometry.s < p < geometry.s] + [x]
    f = lambda t: -kernels.dpoisson_dx(x - t, h) * m1(t) + kernels.dconj_poisson_dx(x - t, h) * m2(t)
    return quad(f, -geometry.s, geometry.s, points=sorted(set(pts)), epsabs=1e-13, epsrel=1e-13, limit=500)[0]


def test_forward_field_special_values(geometry):
    assert forward_field(E1, geometry, 0.0) == 0.0
    assert forward_field(E2, geometry, 0.0) == pytest.approx(2 / (np.pi * 1.01), rel=1e-14)
    assert forward_field(E2, geometry, 0.0) == pytest.approx(0.6303166063, rel=1e-9)
    x = np.linspace(-1.5, 1.5, 301)
    assert np.max(np.abs(forward_field(E1, geometry, x) + forward_field(E1, geometry, -x))) < 1e-15
    assert np.all(forward_field(Magnetization(), geometry, x) == 0.0)


def test_forward_field_matches_convolution_quadrature(geometry, rng):
    m = random_magnetization(rng)
    for x in rng.uniform(-1.5, 1.5, 20):
        assert forward_field(m, geometry, x) == pytest.approx(convolution_oracle(m, geometry, x), abs=1e-9)


def test_forward_field_domain(geometry):
    with pytest.raises(ContractError):
        forward_field(E1, geometry, 1.6)


def test_forward_linearity(geometry, rng):
    m, n = random_magnetization(rng), random_magnetization(rng)
    x = np.linspace(-1.5, 1.5, 257)
    combo = m.combine(0.7, n, -2.5)
    lhs = forward_field(combo, geometry, x)
    rhs = 0.7 * forward_field(m, geometry, x) - 2.5 * forward_field(n, geometry, x)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_magnetization_validation(geometry):
    with pytest.raises(ContractError):
        Magnetization(((-1.0, 0.5, 1.0), (0.2, 0.8, 1.0)))
    with pytest.raises(DomainError):
        Magnetization(((0.5, 0.5, 1.0),))
    with pytest.raises(ContractError):
        Magnetization(((-1.2, 0.0, 1.0),)).validate(geometry)
    assert BUILTINS["steps"].validate(geometry) is BUILTINS["steps"]


def test_magnetization_json_roundtrip(tmp_path, rng):
    m = random_magnetization(rng)
    path = tmp_path / "m.json"
    m.save(path)
    assert Magnetization.load(path) == m
    assert json.loads(path.read_text())["pieces1"][0] == list(m.pieces1[0])
    with pytest.raises(ContractError):
        Magnetization.from_json({"pieces1": []})


def test_field_samples_json(geometry):
    fs = sample_field(E2, geometry, 64)
    again = FieldSamples.from_json(json.loads(json.dumps(fs.to_json())))
    assert np.array_equal(again.values, fs.values)
    with pytest.raises(ContractError):
        FieldSamples(0.0, 1.0, [1.0, np.nan, 2.0])


def test_forward_coeffs_basic(geometry):
    c = forward_coeffs(BUILTINS["constant"], geometry, 250)
    assert c.is_hermitian()
    assert np.all(forward_coeffs(Magnetization(), geometry, 10).coeffs == 0)


def test_field_sample_coefficients_match_exact(geometry):
    m = BUILTINS["steps"]
    exact = forward_coeffs(m, geometry, 250)
    from_samples = sample_field(m, geometry).coefficients(geometry, 250)
    assert np.max(np.abs(from_samples.coeffs - exact.coeffs)) < 1e-12


def _parseval_gap(geometry, N):
    m = BUILTINS["constant"]
    c = forward_coeffs(m, geometry, N)
    full = adaptive_gauss_legendre(lambda x: forward_field(m, geometry, x) ** 2, -geometry.q, geometry.q, tol=1e-14)
    return 1.0 - c.l2_norm() ** 2 / full


def test_parseval_gap_is_small_and_shrinks(geometry):
    # b2[m] does not vanish at +-q, so coefficients decay like 1/n and the gap like 1/N
    gaps = [_parseval_gap(geometry, N) for N in (62, 125, 250)]
    assert all(g > 0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-5


@pytest.mark.xfail(strict=True, reason="non-periodic data on K: the gap at N=250 is 5.4e-6")
def test_parseval_gap_below_1e6(geometry):
    assert _parseval_gap(geometry, 250) < 1e-6


@pytest.mark.xfail(strict=True, reason="periodic extension of b2[m] jumps at +-q; spectrum decays like 1/n")
def test_field_spectrum_decays_below_1e10(geometry):
    c = np.abs(forward_coeffs(BUILTINS["constant"], geometry, 250).coeffs)
    assert c[-1] / c.max() < 1e-10


def test_adjoint_eval_even_phi(geometry):
    g0 = FourierVector(np.eye(5)[2], geometry.q)
    first, _ = adjoint_eval(g0, geometry, 0.0)
    assert abs(first) < 1e-13


def test_adjoint_eval_parity(geometry):
    # phi = i(g_1 - g_-1)/sqrt(2) = -sin(pi x/q)/sqrt(q), an odd real function
    c = np.zeros(5, dtype=complex)
    c[3], c[1] = 1j / np.sqrt(2), -1j / np.sqrt(2)
    phi = FourierVector(c, geometry.q)
    t = np.linspace(0.1, 1.0, 7)
    a1p, a2p = adjoint_eval(phi, geometry, t)
    a1m, a2m = adjoint_eval(phi, geometry, -t)
    assert np.allclose(a1p, a1m, atol=1e-13)
    assert np.allclose(a2p, -a2m, atol=1e-13)
    # and the even phi = g_0 gives the opposite parities
    g0 = FourierVector(np.eye(5)[2], geometry.q)
    b1p, b2p = adjoint_eval(g0, geometry, t)
    b1m, b2m = adjoint_eval(g0, geometry, -t)
    assert np.allclose(b1p, -b1m, atol=1e-13)
    assert np.allclose(b2p, b2m, atol=1e-13)


def test_adjoint_eval_matches_quad(geometry, rng):
    phi = random_phi(rng, 6)
    for t in (-0.8, 0.1, 0.95):
        f1 = lambda x: kernels.dpoisson_dx(t - x, geometry.h) * phi.evaluate(x).real
        f2 = lambda x: kernels.dconj_poisson_dx(t - x, geometry.h) * phi.evaluate(x).real
        ref1 = quad(f1, -1.5, 1.5, points=[t], epsabs=1e-13, limit=300)[0]
        ref2 = quad(f2, -1.5, 1.5, points=[t], epsabs=1e-13, limit=300)[0]
        got = adjoint_eval(phi, geometry, t)
        assert got[0] == pytest.approx(ref1, abs=1e-10)
        assert got[1] == pytest.approx(ref2, abs=1e-10)


def test_adjoint_eval_indicator_closed_forms(geometry):
    pieces = [(-1.2, -0.3, 2.0), (0.4, 1.4, -1.0)]
    t = np.linspace(-1, 1, 9)
    closed = adjoint_eval(pieces, geometry, t)
    x, w = composite_gauss_legendre(-1.5, 1.5, 600, breakpoints=(-1.2, -0.3, 0.4, 1.4))
    phi = np.zeros_like(x)
    for lo, hi, c in pieces:
        phi[(x >= lo) & (x < hi)] = c
    diff = t[:, None] - x
    assert np.allclose(closed[0], kernels.dpoisson_dx(diff, 0.1) @ (w * phi), atol=1e-10)
    assert np.allclose(closed[1], kernels.dconj_poisson_dx(diff, 0.1) @ (w * phi), atol=1e-10)


def test_adjoint_identity(geometry, rng):
    for _ in range(5):
        m = random_magnetization(rng)
        phi = random_phi(rng, int(rng.integers(4, 33)))
        lhs = float(np.sum((forward_coeffs(m, geometry, phi.N).coeffs * np.conj(phi.coeffs)).real))
        x, w = composite_gauss_legendre(-1.0, 1.0, 300, breakpoints=m.breakpoints())
        a1, a2 = adjoint_eval(phi, geometry, x)
        m1, m2 = m.values(x)
        rhs = float(np.sum(w * (m1 * a1 + m2 * a2)))
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-12)


def test_adjoint_residual_zero_phi(geometry):
    zero = FourierVector.zeros(8, geometry.q)
    assert adjoint_residual(zero, "e1", geometry) == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert adjoint_residual(zero, "e2", geometry) == pytest.approx(np.sqrt(2.0), rel=1e-12)
    m = BUILTINS["steps"]
    assert adjoint_residual(zero, m, geometry) == pytest.approx(m.norm(), rel=1e-12)


def test_a2_identity(geometry):
    assert a2_identity_check(BUILTINS["constant"], geometry) < 1e-5
    assert a2_identity_check(BUILTINS["small_support"], geometry) < 1e-4
    assert a2_identity_check(Magnetization(), geometry) == 0.0


def test_a2_uses_hilbert_transform(geometry):
    # a2[m] = P_h * (m1 - H m2); check the m2 part against quadrature of hilbert_indicator
    m = Magnetization((), ((-0.5, 0.3, 1.0),))
    x = 0.7
    f = lambda t: kernels.poisson(x - t, geometry.h) * kernels.hilbert_indicator(t, (-0.5, 0.3))
    total = sum(quad(f, a, b, limit=400, epsabs=1e-13)[0]
                for a, b in zip([-np.inf, -50, -0.5, 0.3, 50], [-50, -0.5, 0.3, 50, np.inf]))
    assert a2_field(m, geometry, x) == pytest.approx(-total, abs=1e-8)
