"""Poisson and conjugate Poisson kernels of the upper half-plane.

Every kernel carries its own 1/pi normalisation:

    P_y(x) = y / (pi (x^2 + y^2)),    Q_y(x) = x / (pi (x^2 + y^2)).

Besides pointwise evaluation the module provides closed forms for the
convolution of each kernel (and of its x-derivative) with the indicator of
an interval, the Hilbert transform of an indicator, and a spectral Hilbert
transform on uniform grids used to validate the classical identities.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ContractError, DomainError, SingularityError


@dataclass(frozen=True)
class Geometry:
    """Source interval S=(-s, s), measurement interval K=(-q, q), height h."""

    s: float
    q: float
    h: float

    def __post_init__(self):
        for name in ("s", "q", "h"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"geometry parameter {name} must be > 0, got {value}")

    @classmethod
    def reference(cls):
        """h=0.1, s=1, q=1.5: the configuration used for all reported tables."""
        return cls(s=1.0, q=1.5, h=0.1)

    @classmethod
    def parse(cls, text):
        """Parse ``"s,q,h"``."""
        try:
            s, q, h = (float(v) for v in text.split(","))
        except ValueError as exc:
            raise ContractError(f"geometry must be 's,q,h', got {text!r}") from exc
        return cls(s, q, h)

    @property
    def is_physical(self):
        """True when |K| > |S| > h, the regime the method targets."""
        return self.q > self.s > self.h

    @property
    def S(self):
        return Interval(-self.s, self.s)

    @property
    def K(self):
        return Interval(-self.q, self.q)

    def key(self):
        return (float(self.s), float(self.q), float(self.h))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"degenerate interval [{self.lo}, {self.hi}]")

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, other):
        return self.lo <= other.lo and other.hi <= self.hi


def _interval(J):
    if isinstance(J, Interval):
        return J
    lo, hi = J
    return Interval(float(lo), float(hi))


def _check_height(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("kernel height y must be > 0")
    return y


def poisson(x, y):
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    return y / (np.pi * (x * x + y * y))


def conj_poisson(x, y):
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    return x / (np.pi * (x * x + y * y))


def dpoisson_dx(x, y):
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    r2 = x * x + y * y
    return -2.0 * x * y / (np.pi * r2 * r2)


def dconj_poisson_dx(x, y):
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    r2 = x * x + y * y
    return (y * y - x * x) / (np.pi * r2 * r2)


def conv_indicator_P(x, y, J):
    """(P_y * chi_J)(x); takes values in (0, 1)."""
    J = _interval(J)
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    return (np.arctan((x - J.lo) / y) - np.arctan((x - J.hi) / y)) / np.pi


def conv_indicator_Q(x, y, J):
    """(Q_y * chi_J)(x)."""
    J = _interval(J)
    y = _check_height(y)
    x = np.asarray(x, dtype=float)
    num = (x - J.lo) ** 2 + y * y
    den = (x - J.hi) ** 2 + y * y
    return np.log(num / den) / (2.0 * np.pi)


def conv_indicator_dP(x, y, J):
    """((d/dx P_y) * chi_J)(x) = P_y(x - lo) - P_y(x - hi)."""
    J = _interval(J)
    x = np.asarray(x, dtype=float)
    return poisson(x - J.lo, y) - poisson(x - J.hi, y)


def conv_indicator_dQ(x, y, J):
    """((d/dx Q_y) * chi_J)(x) = Q_y(x - lo) - Q_y(x - hi)."""
    J = _interval(J)
    x = np.asarray(x, dtype=float)
    return conj_poisson(x - J.lo, y) - conj_poisson(x - J.hi, y)


def hilbert_indicator(x, J):
    """Principal-value Hilbert transform of chi_J: log(|x-lo|/|x-hi|)/pi."""
    J = _interval(J)
    x = np.asarray(x, dtype=float)
    if np.any((x == J.lo) | (x == J.hi)):
        raise SingularityError("Hilbert transform of an indicator is singular at its endpoints")
    return np.log(np.abs(x - J.lo) / np.abs(x - J.hi)) / np.pi


def hilbert_grid(samples, grid=None):
    """Discrete Hilbert transform of uniformly sampled, compactly supported data.

    The samples are read as the band-limited (sinc) interpolant, whose
    transform has the spectral multiplier -i*sign(xi).  On the grid this is
    the linear convolution with 2/(pi m) at odd offsets m, done by FFT
    without periodic wrap-around.  ``grid`` (optional) is checked for
    uniform spacing.
    """
    u = np.asarray(samples, dtype=float)
    if u.ndim != 1 or u.size % 2:
        raise ContractError("hilbert_grid needs a 1-D sample array of even length")
    if grid is not None:
        dx = np.diff(np.asarray(grid, dtype=float))
        if dx.size != u.size - 1 or not np.allclose(dx, dx[0], rtol=1e-9, atol=0.0):
            raise ContractError("hilbert_grid needs a uniform grid matching the samples")
    n = u.size
    m = np.arange(-(n - 1), n)
    kernel = np.zeros(m.size)
    odd = m % 2 == 1
    kernel[odd] = 2.0 / (np.pi * m[odd])
    return fftconvolve(u, kernel, mode="full")[n - 1:2 * n - 1]
