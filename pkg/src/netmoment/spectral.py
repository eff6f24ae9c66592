"""Fourier basis on K, the normal-operator Gram matrix and right-hand sides.

Basis functions are the normalised exponentials

    g_n(x) = exp(i n pi x / q) / sqrt(2 q),   n = -N..N,

so that the L2(K) norm of sum c_n g_n is exactly the Euclidean norm of c.
Coefficient vectors are stored with index ``n + N``.  Real-valued functions
have Hermitian coefficients (c_{-n} = conj(c_n)); solves are carried out in
the equivalent real trigonometric basis

    [1/sqrt(2q), cos(w_1 x)/sqrt(q) .. cos(w_N x)/sqrt(q),
                 sin(w_1 x)/sqrt(q) .. sin(w_N x)/sqrt(q)],   w_n = n pi / q.
"""

from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from . import kernels
from .errors import AssemblyError, ContractError
from .kernels import Geometry
from .quadrature import adaptive_gauss_legendre, composite_gauss_legendre, panel_count

log = logging.getLogger(__name__)

SPACES = ("L2", "W012")
HERMITIAN_TOL = 1e-12


def normalize_space(space):
    key = str(space).upper().replace("_", "").replace("^", "")
    if key in ("L2",):
        return "L2"
    if key in ("W012", "W", "W0", "H01"):
        return "W012"
    raise ContractError(f"unknown space {space!r}; expected one of {SPACES}")


def basis_eval(n, x, q):
    """g_n(x) in the normalised basis."""
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    return np.exp(1j * np.pi * n * x / q) / np.sqrt(2.0 * q)


def eigenvalue_mu(n, q):
    """Laplacian eigenvalue (n pi / q)^2 of g_n."""
    return (np.pi * np.asarray(n, dtype=float) / q) ** 2


def mode_indices(N):
    return np.arange(-N, N + 1)


def real_mu(N, q):
    """Eigenvalues in the order of the real trigonometric basis."""
    mu = eigenvalue_mu(np.arange(1, N + 1), q)
    return np.concatenate([[0.0], mu, mu])


def real_basis_eval(x, N, q):
    """Matrix of real basis functions, shape (len(x), 2N+1)."""
    x = np.asarray(x, dtype=float)
    w = np.pi * np.arange(1, N + 1) / q
    arg = np.multiply.outer(x, w)
    const = np.full(x.shape + (1,), 1.0 / np.sqrt(2.0 * q))
    return np.concatenate([const, np.cos(arg) / np.sqrt(q), np.sin(arg) / np.sqrt(q)], axis=-1)


@lru_cache(maxsize=8)
def _unitary(N):
    """U with complex coefficients = U @ real coordinates."""
    size = 2 * N + 1
    U = np.zeros((size, size), dtype=complex)
    U[N, 0] = 1.0
    r = 1.0 / np.sqrt(2.0)
    for n in range(1, N + 1):
        U[N + n, n] = r
        U[N - n, n] = r
        U[N + n, N + n] = -1j * r
        U[N - n, N + n] = 1j * r
    U.setflags(write=False)
    return U


def complex_to_real(c):
    c = np.asarray(c, dtype=complex)
    N = (c.size - 1) // 2
    pos = c[N + 1:]
    return np.concatenate([[c[N].real], np.sqrt(2.0) * pos.real, -np.sqrt(2.0) * pos.imag])


def real_to_complex(x):
    x = np.asarray(x, dtype=float)
    N = (x.size - 1) // 2
    pos = (x[1:N + 1] - 1j * x[N + 1:]) / np.sqrt(2.0)
    return np.concatenate([np.conj(pos[::-1]), [x[0]], pos])


@dataclass(frozen=True, eq=False)
class FourierVector:
    """Truncated coefficient vector on g_n, n = -N..N, for an interval (-q, q)."""

    coeffs: np.ndarray
    q: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ContractError("FourierVector needs an odd-length 1-D coefficient array")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self):
        return (self.coeffs.size - 1) // 2

    @classmethod
    def zeros(cls, N, q):
        return cls(np.zeros(2 * N + 1, dtype=complex), q)

    @classmethod
    def from_real(cls, x, q):
        return cls(real_to_complex(x), q)

    def to_real(self):
        return complex_to_real(self.coeffs)

    def coefficient(self, n):
        return self.coeffs[n + self.N]

    def hermitian_defect(self):
        c = self.coeffs
        return float(np.max(np.abs(c - np.conj(c[::-1]))))

    def is_hermitian(self, tol=HERMITIAN_TOL):
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return self.hermitian_defect() <= tol * scale

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))

    def w_norm(self):
        """L2 norm of the derivative, sqrt(sum mu_n |c_n|^2)."""
        mu = eigenvalue_mu(mode_indices(self.N), self.q)
        return float(np.sqrt(np.sum(mu * np.abs(self.coeffs) ** 2)))

    def norm(self, space):
        return self.w_norm() if normalize_space(space) == "W012" else self.l2_norm()

    def evaluate(self, x):
        """Synthesised function sum c_n g_n(x) (complex; real part for real data)."""
        x = np.asarray(x, dtype=float)
        n = mode_indices(self.N)
        return basis_eval(n, x[..., None], self.q) @ self.coeffs

    def derivative(self, x):
        n = mode_indices(self.N)
        x = np.asarray(x, dtype=float)
        return basis_eval(n, x[..., None], self.q) @ (1j * np.pi * n / self.q * self.coeffs)

    def __add__(self, other):
        self._check_compatible(other)
        return FourierVector(self.coeffs + other.coeffs, self.q)

    def __sub__(self, other):
        self._check_compatible(other)
        return FourierVector(self.coeffs - other.coeffs, self.q)

    def __mul__(self, alpha):
        return FourierVector(alpha * self.coeffs, self.q)

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if other.N != self.N or other.q != self.q:
            raise ContractError("FourierVectors differ in truncation order or interval")

    def to_json(self):
        return {"q": self.q, "N": self.N,
                "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}

    @classmethod
    def from_json(cls, data):
        c = np.array([complex(re, im) for re, im in data["coeffs"]])
        return cls(c, float(data["q"]))


def fourier_coefficients(f, geometry, N, breakpoints=()):
    """<f, g_k>_{L2(K)} for k=-N..N by composite Gauss-Legendre quadrature.

    ``f`` is a vectorised real function on K.  The panel width resolves both
    the kernel scale h and the highest mode.
    """
    q = geometry.q
    panels = panel_count(2 * q, geometry.h, N, q)
    t, w = composite_gauss_legendre(-q, q, panels, breakpoints=breakpoints)
    Phi = real_basis_eval(t, N, q)
    x = Phi.T @ (w * f(t))
    return FourierVector.from_real(x, q)


def kernel_I(t1, t2, x, h):
    """P_h'(x-t1) P_h'(x-t2) + Q_h'(x-t1) Q_h'(x-t2)."""
    u = np.asarray(x) - np.asarray(t1)
    v = np.asarray(x) - np.asarray(t2)
    return (kernels.dpoisson_dx(u, h) * kernels.dpoisson_dx(v, h)
            + kernels.dconj_poisson_dx(u, h) * kernels.dconj_poisson_dx(v, h))


def kernel_k(t1, t2, geometry, tol=1e-10):
    """Integral of kernel_I over S by adaptive Gauss-Legendre (vectorised over pairs)."""
    t1, t2 = np.broadcast_arrays(np.asarray(t1, float), np.asarray(t2, float))
    s, h = geometry.s, geometry.h
    value = adaptive_gauss_legendre(
        lambda x: kernel_I(t1[..., None], t2[..., None], x, h), -s, s, tol=tol)
    return value[()] if np.ndim(value) == 0 else value


def kernel_k_closed(t1, t2, geometry):
    """Closed form of kernel_k.

    With a = t1 - ih, b = t2 + ih the integrand equals
    Re[1 / (pi^2 (x-a)^2 (x-b)^2)], integrated by partial fractions.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    s, h = geometry.s, geometry.h
    a = t1 - 1j * h
    b = t2 + 1j * h
    d = a - b

    def F(x):
        return (-(1.0 / (x - a) + 1.0 / (x - b)) / d ** 2
                - 2.0 * (np.log(x - a) - np.log(x - b)) / d ** 3)

    return np.real(F(s) - F(-s)) / np.pi ** 2


def gram_entries_direct(geometry, N, pairs, panels=None, chunk=512):
    """Gram entries (n, k) by 2-D Gauss-Legendre quadrature of the closed-form k.

    entry(n, k) = iint_{KxK} k(t1, t2) conj(g_n(t1)) g_k(t2) dt1 dt2.  This
    route never forms b2*[g_n] and serves as the independent oracle for
    :func:`gram_assemble`.
    """
    q = geometry.q
    pairs = [(int(n), int(k)) for n, k in pairs]
    top = max(max(abs(n), abs(k)) for n, k in pairs)
    if panels is None:
        panels = panel_count(2 * q, geometry.h, max(top, 1), q)
    t, w = composite_gauss_legendre(-q, q, panels)
    ns = np.array([n for n, _ in pairs])
    ks = np.array([k for _, k in pairs])
    left = np.conj(basis_eval(ns[None, :], t[:, None], q)) * w[:, None]
    right = basis_eval(ks[None, :], t[:, None], q) * w[:, None]
    inner = np.zeros((t.size, len(pairs)), dtype=complex)
    for start in range(0, t.size, chunk):
        rows = slice(start, start + chunk)
        K = kernel_k_closed(t[rows, None], t[None, :], geometry)
        inner[rows] = K @ right
    return np.sum(left * inner, axis=0)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Gram matrix <b2*[g_k], b2*[g_n]> of the adjoint on the Fourier basis.

    ``real`` holds the real symmetric form over the trigonometric basis;
    ``entries`` is the Hermitian matrix over the complex exponentials.
    """

    geometry: Geometry
    N: int
    real: np.ndarray
    space: str = "L2"
    method: str = "quadrature"
    grid: int = 0

    @cached_property
    def entries(self):
        U = _unitary(self.N)
        return U @ self.real @ U.conj().T

    def entry(self, n, k):
        return self.entries[n + self.N, k + self.N]

    def with_space(self, space):
        return replace(self, space=normalize_space(space))

    def key(self):
        return cache_key(self.geometry, self.N, self.method, self.grid)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(tmp, real=self.real, key=json.dumps(self.key()))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, key=None):
        """Load a cached matrix; returns None when the stored key differs."""
        with np.load(path, allow_pickle=False) as data:
            stored = json.loads(str(data["key"]))
            if key is not None and stored != key:
                return None
            real = data["real"]
        s, q, h = stored["geometry"]
        return cls(Geometry(s, q, h), stored["N"], real,
                   method=stored["method"], grid=stored["grid"])


def cache_key(geometry, N, method, grid):
    return {"geometry": list(geometry.key()), "N": int(N), "method": method, "grid": int(grid)}


def cache_path(cache_dir, key):
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]
    return Path(cache_dir) / f"gram_{digest}.npz"


def default_cache_dir():
    return os.environ.get("NETMOMENT_CACHE_DIR")


def _assemble_quadrature(geometry, N):
    s, q, h = geometry.s, geometry.q, geometry.h
    t, wt = composite_gauss_legendre(-q, q, panel_count(2 * q, h, N, q))
    x, wx = composite_gauss_legendre(-s, s, panel_count(2 * s, h, N, q))
    Phi = real_basis_eval(t, N, q) * wt[:, None]
    diff = x[:, None] - t[None, :]
    A1 = kernels.dpoisson_dx(diff, h) @ Phi
    A2 = kernels.dconj_poisson_dx(diff, h) @ Phi
    G = A1.T @ (wx[:, None] * A1) + A2.T @ (wx[:, None] * A2)
    return 0.5 * (G + G.T)


def _assemble_fft(geometry, N, M):
    q = geometry.q
    if M < 2 * N + 1:
        raise AssemblyError(f"FFT grid {M} too small for order {N}")
    dt = 2.0 * q / M
    t = -q + (np.arange(M) + 0.5) * dt
    K = kernel_k_closed(t[:, None], t[None, :], geometry)
    F = np.fft.fft(np.fft.ifft(K, axis=1) * M, axis=0)
    n = mode_indices(N)
    phase_left = np.exp(1j * np.pi * n * (1.0 - 1.0 / M))
    phase_right = np.exp(-1j * np.pi * n * (1.0 - 1.0 / M))
    sub = F[np.ix_(n % M, n % M)]
    C = (dt * dt / (2.0 * q)) * phase_left[:, None] * sub * phase_right[None, :]
    U = _unitary(N)
    real = (U.conj().T @ C @ U).real
    return 0.5 * (real + real.T), C


def _check_entries(geometry, N, entries, rng, count=5, rtol=1e-4):
    size = 2 * N + 1
    pairs = [tuple(int(v) - N for v in rng.integers(0, size, 2)) for _ in range(count)]
    direct = gram_entries_direct(geometry, N, pairs)
    got = np.array([entries[n + N, k + N] for n, k in pairs])
    floor = 1e-12 * float(np.max(np.abs(entries)))
    err = np.abs(got - direct)
    return bool(np.all(err <= rtol * np.abs(direct) + floor)), pairs, err


def gram_assemble(geometry, N, space="L2", method="quadrature", check=True,
                  cache_dir=None, grid=None, seed=0):
    """Assemble the Gram matrix of b2* on the first 2N+1 Fourier modes.

    ``method="quadrature"`` evaluates b2*[basis] on Gauss-Legendre nodes of S
    and forms A^T W A; ``method="fft"`` samples the closed-form kernel k on a
    midpoint grid of K x K (default 4N points per side) and takes a 2-D FFT,
    with one Richardson step if the self-check fails.  The self-check
    compares five random entries with :func:`gram_entries_direct` at 1e-4
    relative.  ``cache_dir`` (or ``NETMOMENT_CACHE_DIR`` when it is None) enables an
    on-disk cache keyed by (s, q, h, N, method, grid); ``False`` disables it.
    """
    if N < 1:
        raise ContractError("truncation order N must be >= 1")
    space = normalize_space(space)
    if method not in ("quadrature", "fft"):
        raise ContractError(f"unknown Gram assembly method {method!r}")
    M = int(grid or 4 * N) if method == "fft" else 0
    key = cache_key(geometry, N, method, M)
    path = None
    if cache_dir is None:
        cache_dir = default_cache_dir()
    if cache_dir:
        path = cache_path(cache_dir, key)
        if path.exists():
            cached = GramMatrix.load(path, key)
            if cached is not None:
                log.debug("Gram cache hit %s", path)
                return cached.with_space(space)

    rng = np.random.default_rng(seed)
    if method == "quadrature":
        real = _assemble_quadrature(geometry, N)
        gram = GramMatrix(geometry, N, real, space, method, M)
        if check:
            ok, pairs, err = _check_entries(geometry, N, gram.entries, rng)
            if not ok:
                raise AssemblyError(f"Gram self-check failed on entries {pairs}: {err}")
    else:
        real, C = _assemble_fft(geometry, N, M)
        if check:
            ok, pairs, err = _check_entries(geometry, N, C, rng)
            if not ok:
                log.info("FFT Gram grid %d failed self-check, applying Richardson step", M)
                real2, C2 = _assemble_fft(geometry, N, 2 * M)
                real = (4.0 * real2 - real) / 3.0
                C = (4.0 * C2 - C) / 3.0
                ok, pairs, err = _check_entries(geometry, N, C, rng)
                if not ok:
                    raise AssemblyError(
                        f"FFT Gram on grid {M} (refined {2 * M}) failed self-check on {pairs}: {err}")
        gram = GramMatrix(geometry, N, real, space, method, M)

    if path is not None:
        gram.save(path)
    return gram


def target_norm2(geometry, target):
    """Squared L2(S, R^2) norm of the target e."""
    if isinstance(target, str):
        if target not in ("e1", "e2"):
            raise ContractError(f"unknown target {target!r}")
        return 2.0 * geometry.s
    return target.norm2()


def rhs_vector(geometry, N, target):
    """r_k = <e, b2*[g_k]> = <b2[e], g_k>_{L2(K)}.

    For e1 = (chi_S, 0) the field is P_h(s-t) - P_h(s+t); for e2 = (0, chi_S)
    it is Q_h(s-t) + Q_h(s+t) (even in t, so r_0 != 0).  Any other
    :class:`~netmoment.operators.Magnetization` goes through its forward field.
    """
    s, h = geometry.s, geometry.h
    if isinstance(target, str):
        if target == "e1":
            f = lambda t: kernels.poisson(s - t, h) - kernels.poisson(s + t, h)
        elif target == "e2":
            f = lambda t: kernels.conj_poisson(s - t, h) + kernels.conj_poisson(s + t, h)
        else:
            raise ContractError(f"unknown target {target!r}")
        return fourier_coefficients(f, geometry, N)
    from .operators import forward_coeffs

    return forward_coeffs(target, geometry, N)


def to_real_system(gram, r):
    """Real symmetric matrix and real vector equivalent to (G, r).

    Raises ContractError if the inputs are not Hermitian-symmetric to 1e-12.
    """
    entries = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=complex)
    N = (entries.shape[0] - 1) // 2
    scale = max(1.0, float(np.max(np.abs(entries))))
    if np.max(np.abs(entries - entries.conj().T)) > HERMITIAN_TOL * scale:
        raise ContractError("Gram matrix is not Hermitian")
    flipped = entries[::-1, ::-1].conj()
    if np.max(np.abs(entries - flipped)) > HERMITIAN_TOL * scale:
        raise ContractError("Gram matrix lacks the real-operator symmetry G[-n,-k] = conj(G[n,k])")
    if not r.is_hermitian():
        raise ContractError("right-hand side is not Hermitian-symmetric")
    if isinstance(gram, GramMatrix):
        Gr = gram.real
    else:
        U = _unitary(N)
        Gr = (U.conj().T @ entries @ U).real
        Gr = 0.5 * (Gr + Gr.T)
    return Gr, r.to_real()
