"""Forward operator b2 (magnetisation -> vertical field on K) and its adjoint.

For a magnetisation m = (m1, m2) supported on S the measured field is

    b2[m] = -(P_h' * m1 - Q_h' * m2) restricted to K,

and the adjoint maps phi in L2(K) to (P_h' * phi, Q_h' * phi) restricted to
S.  Magnetisations are piecewise constant, so b2[m] is always evaluated
from closed forms.  The physical prefactor mu_0/2 is dropped.
"""

from dataclasses import dataclass
import json

import numpy as np
from scipy.interpolate import make_interp_spline

from . import kernels
from .errors import ContractError
from .kernels import Interval
from .quadrature import adaptive_gauss_legendre, composite_gauss_legendre, panel_count
from .spectral import FourierVector, fourier_coefficients

DEFAULT_GRID = 4096


def _normalize_pieces(pieces):
    out = []
    for piece in pieces:
        lo, hi, value = (float(v) for v in piece)
        Interval(lo, hi)
        out.append((lo, hi, value))
    out.sort()
    for (lo0, hi0, _), (lo1, _, _) in zip(out, out[1:]):
        if lo1 < hi0:
            raise ContractError(f"overlapping magnetisation pieces at [{lo1}, {hi0}]")
    return tuple(out)


def _merge(pieces_a, pieces_b, alpha=1.0, beta=1.0):
    edges = sorted({e for lo, hi, _ in pieces_a + pieces_b for e in (lo, hi)})
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        value = (alpha * sum(v for a, b, v in pieces_a if a <= mid < b)
                 + beta * sum(v for a, b, v in pieces_b if a <= mid < b))
        if value != 0.0:
            out.append((lo, hi, value))
    return tuple(out)


@dataclass(frozen=True)
class Magnetization:
    """Piecewise-constant (m1, m2); each piece is (lo, hi, value), zero elsewhere."""

    pieces1: tuple = ()
    pieces2: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces1", _normalize_pieces(self.pieces1))
        object.__setattr__(self, "pieces2", _normalize_pieces(self.pieces2))

    @classmethod
    def zero(cls):
        return cls()

    def validate(self, geometry):
        S = geometry.S
        for lo, hi, _ in self.pieces1 + self.pieces2:
            if lo < S.lo or hi > S.hi:
                raise ContractError(f"piece [{lo}, {hi}] is not contained in S={S}")
        return self

    def moments(self):
        """(<m1>, <m2>), the integrals over S."""
        return (sum(v * (hi - lo) for lo, hi, v in self.pieces1),
                sum(v * (hi - lo) for lo, hi, v in self.pieces2))

    def norm2(self):
        """Squared L2(S, R^2) norm."""
        return sum(v * v * (hi - lo) for lo, hi, v in self.pieces1 + self.pieces2)

    def norm(self):
        return float(np.sqrt(self.norm2()))

    def breakpoints(self):
        return sorted({e for lo, hi, _ in self.pieces1 + self.pieces2 for e in (lo, hi)})

    def values(self, x):
        """Staircase values (m1(x), m2(x)); pieces are closed on the left."""
        x = np.asarray(x, dtype=float)
        out = []
        for pieces in (self.pieces1, self.pieces2):
            v = np.zeros_like(x)
            for lo, hi, c in pieces:
                v = np.where((x >= lo) & (x < hi), c, v)
            out.append(v)
        return tuple(out)

    def scaled(self, alpha):
        return Magnetization(tuple((lo, hi, alpha * v) for lo, hi, v in self.pieces1),
                             tuple((lo, hi, alpha * v) for lo, hi, v in self.pieces2))

    def combine(self, alpha, other, beta):
        """alpha * self + beta * other, merged onto common breakpoints."""
        return Magnetization(_merge(self.pieces1, other.pieces1, alpha, beta),
                             _merge(self.pieces2, other.pieces2, alpha, beta))

    def __add__(self, other):
        return self.combine(1.0, other, 1.0)

    def to_json(self):
        return {"pieces1": [list(p) for p in self.pieces1],
                "pieces2": [list(p) for p in self.pieces2]}

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict) or not {"pieces1", "pieces2"} <= set(data):
            raise ContractError("magnetisation JSON needs 'pieces1' and 'pieces2'")
        try:
            return cls(tuple(tuple(p) for p in data["pieces1"]),
                       tuple(tuple(p) for p in data["pieces2"]))
        except (TypeError, ValueError) as exc:
            raise ContractError(f"malformed magnetisation pieces: {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")


@dataclass(frozen=True, eq=False)
class FieldSamples:
    """Field values on a uniform grid of [grid_lo, grid_hi] (endpoints included)."""

    grid_lo: float
    grid_hi: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise ContractError("FieldSamples needs at least three values")
        if not np.all(np.isfinite(v)):
            raise ContractError("FieldSamples values must be finite")
        if not self.grid_lo < self.grid_hi:
            raise ContractError("FieldSamples grid must have grid_lo < grid_hi")
        object.__setattr__(self, "values", v)

    @property
    def grid(self):
        return np.linspace(self.grid_lo, self.grid_hi, self.values.size)

    def coefficients(self, geometry, N):
        """<f, g_k>_{L2(K)} from the samples.

        The samples are interpolated by a quintic spline, which is then
        integrated with the same Gauss-Legendre rule as exact data.  Plain
        Simpson on the grid loses about four digits on the top modes.
        """
        if not (np.isclose(self.grid_lo, -geometry.q) and np.isclose(self.grid_hi, geometry.q)):
            raise ContractError("FieldSamples grid does not span K of the given geometry")
        spline = make_interp_spline(self.grid, self.values, k=5)
        return fourier_coefficients(spline, geometry, N)

    def to_json(self):
        return {"grid_lo": float(self.grid_lo), "grid_hi": float(self.grid_hi),
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_json(cls, data):
        try:
            return cls(float(data["grid_lo"]), float(data["grid_hi"]), np.asarray(data["values"], float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"malformed FieldSamples JSON: {exc}") from exc


def forward_field(m, geometry, x):
    """Closed-form b2[m](x) for x in the closure of K."""
    x = np.asarray(x, dtype=float)
    q, h = geometry.q, geometry.h
    if np.any(np.abs(x) > q * (1.0 + 1e-12)):
        raise ContractError("forward_field is only defined on the closure of K")
    out = np.zeros_like(x)
    for lo, hi, c in m.pieces1:
        out -= c * (kernels.poisson(x - lo, h) - kernels.poisson(x - hi, h))
    for lo, hi, c in m.pieces2:
        out += c * (kernels.conj_poisson(x - lo, h) - kernels.conj_poisson(x - hi, h))
    return out


def sample_field(m, geometry, n=DEFAULT_GRID):
    x = np.linspace(-geometry.q, geometry.q, n)
    return FieldSamples(-geometry.q, geometry.q, forward_field(m, geometry, x))


def forward_coeffs(m, geometry, N):
    """<b2[m], g_k>_{L2(K)} for k=-N..N (Hermitian vector)."""
    return fourier_coefficients(lambda t: forward_field(m, geometry, t), geometry, N)


def _synthesis_nodes(geometry, N):
    q = geometry.q
    return composite_gauss_legendre(-q, q, panel_count(2 * q, geometry.h, N, q))


def adjoint_eval(phi, geometry, t):
    """b2*[phi](t) = ((P_h' * phi)(t), (Q_h' * phi)(t)) for t in the closure of S.

    ``phi`` is a FourierVector (integrated by composite Gauss-Legendre over K)
    or a sequence of (lo, hi, value) pieces in K (closed forms).
    """
    t = np.asarray(t, dtype=float)
    s, h = geometry.s, geometry.h
    if np.any(np.abs(t) > s * (1.0 + 1e-12)):
        raise ContractError("adjoint_eval is only defined on the closure of S")
    if isinstance(phi, FourierVector):
        x, w = _synthesis_nodes(geometry, phi.N)
        weighted = w * phi.evaluate(x).real
        diff = t[..., None] - x
        return (kernels.dpoisson_dx(diff, h) @ weighted,
                kernels.dconj_poisson_dx(diff, h) @ weighted)
    first = np.zeros_like(t)
    second = np.zeros_like(t)
    for lo, hi, c in phi:
        J = Interval(float(lo), float(hi))
        first += c * kernels.conv_indicator_dP(t, h, J)
        second += c * kernels.conv_indicator_dQ(t, h, J)
    return first, second


def _target_values(target, geometry, x):
    if isinstance(target, str):
        ones = np.ones_like(x)
        zeros = np.zeros_like(x)
        if target == "e1":
            return ones, zeros
        if target == "e2":
            return zeros, ones
        raise ContractError(f"unknown target {target!r}")
    return target.values(x)


def adjoint_residual(phi, target, geometry, tol=1e-10):
    """||b2*[phi] - e||_{L2(S, R^2)} by adaptive Gauss-Legendre over S."""
    s = geometry.s
    breaks = () if isinstance(target, str) else target.breakpoints()

    def integrand(x):
        a1, a2 = adjoint_eval(phi, geometry, x)
        e1, e2 = _target_values(target, geometry, x)
        return (a1 - e1) ** 2 + (a2 - e2) ** 2

    return float(np.sqrt(max(adaptive_gauss_legendre(integrand, -s, s, tol=tol, breakpoints=breaks), 0.0)))


def a2_field(m, geometry, x):
    """a2[m] = P_h * (m1 - H m2) on K.

    P_h * H chi_J equals Q_h * chi_J, so every piece has a closed form.
    """
    x = np.asarray(x, dtype=float)
    h = geometry.h
    out = np.zeros_like(x)
    for lo, hi, c in m.pieces1:
        out += c * kernels.conv_indicator_P(x, h, (lo, hi))
    for lo, hi, c in m.pieces2:
        out -= c * kernels.conv_indicator_Q(x, h, (lo, hi))
    return out


def a2_identity_check(m, geometry, n=DEFAULT_GRID, step=1e-4):
    """Sup over an interior grid of |-(d/dx) a2[m] - b2[m]|, derivative by central differences."""
    q = geometry.q
    x = np.linspace(-q, q, n)[1:-1]
    deriv = (a2_field(m, geometry, x + step) - a2_field(m, geometry, x - step)) / (2.0 * step)
    return float(np.max(np.abs(-deriv - forward_field(m, geometry, x)))) if x.size else 0.0
