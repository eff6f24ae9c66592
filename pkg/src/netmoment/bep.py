"""Norm-constrained best approximation of a target by the adjoint range.

For a Gram matrix G, right-hand side r and weight lambda > 0 the critical
point system is

    (G + lambda D) c = r,

with D = I for the L2(K) budget and D = diag(mu_n) for the W0^{1,2}(K)
budget.  The achieved norm M(lambda) decreases strictly in lambda, which
``solve_for_M`` exploits to saturate a prescribed budget by bisection.

Solves run in the real trigonometric basis with a Cholesky factorisation.
One or two steps of iterative refinement with residuals accumulated in
extended precision keep the saturation identity

    lambda M^2 = Re(c^H r) - c^H G c

accurate to about 1e-10 even when lambda is near 1e-9, where plain double
precision loses it to cancellation.
"""

from dataclasses import dataclass
import csv
import io
import json
import math

import numpy as np
from scipy import linalg

from .errors import BracketError, ContractError, SolverError
from .spectral import FourierVector, GramMatrix, normalize_space, real_mu, to_real_system

LOG_LAMBDA_BRACKET = (-14.0, 6.0)
MAX_BISECTION = 200
M_RTOL = 1e-6
REFINE_STEPS = 4

_LD = np.longdouble


@dataclass(frozen=True)
class BepSpec:
    """Problem statement: target, space and either a fixed lambda or a budget M."""

    target: object = "e1"
    space: str = "L2"
    lam: float | None = None
    M: float | None = None
    shift: FourierVector | None = None
    keep_zero_mode: bool = False

    def __post_init__(self):
        object.__setattr__(self, "space", normalize_space(self.space))
        if (self.lam is None) == (self.M is None):
            raise ContractError("give exactly one of lam (fixed lambda) or M (target norm)")
        value = self.lam if self.lam is not None else self.M
        if not (math.isfinite(value) and value > 0):
            raise ContractError(f"lambda / M must be finite and > 0, got {value}")
        if self.shift is not None and self.M is not None:
            raise ContractError("a shifted problem needs a fixed lambda")

    @property
    def mode(self):
        return "fixed_lambda" if self.lam is not None else "target_M"


@dataclass(frozen=True, eq=False)
class BepSolution:
    coeffs: FourierVector
    lam: float
    M_achieved: float
    residual: float
    space: str
    keep_zero_mode: bool = False
    geometry: tuple | None = None
    target: str | None = None
    shifted: bool = False

    def evaluate(self, x):
        """Real estimator phi(x) on K."""
        return self.coeffs.evaluate(x).real

    def to_json(self):
        data = {
            "space": self.space,
            "lambda": float(self.lam),
            "M": float(self.M_achieved),
            "residual": float(self.residual),
            "keep_zero_mode": bool(self.keep_zero_mode),
            "geometry": list(self.geometry) if self.geometry is not None else None,
            "target": self.target,
            "shifted": self.shifted,
        }
        data.update(self.coeffs.to_json())
        return data

    @classmethod
    def from_json(cls, data):
        try:
            coeffs = FourierVector.from_json(data)
            geometry = tuple(data["geometry"]) if data.get("geometry") is not None else None
            return cls(coeffs, float(data["lambda"]), float(data["M"]), float(data["residual"]),
                       normalize_space(data["space"]), bool(data.get("keep_zero_mode", False)),
                       geometry, data.get("target"), bool(data.get("shifted", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"malformed solution JSON: {exc}") from exc

    def dumps(self):
        return json.dumps(self.to_json(), indent=1)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    M: float
    residual: float
    error: str | None = None


def _weights(N, q, space):
    return real_mu(N, q) if space == "W012" else np.ones(2 * N + 1)


def _active(space, keep_zero_mode, size):
    """Indices of the real unknowns kept in the solve."""
    if space == "W012" and not keep_zero_mode:
        return np.arange(1, size)
    return np.arange(size)


def _real_data(G, r):
    Gr, rr = to_real_system(G, r)
    if Gr.shape[0] != rr.size:
        raise ContractError(f"Gram order {(Gr.shape[0] - 1) // 2} differs from rhs order {r.N}")
    return Gr, rr


def _solve_real(Gr, rhs, d, lam):
    """Solve (Gr + lam diag(d)) x = rhs with extended-precision refinement."""
    A = Gr + lam * np.diag(d)
    try:
        factor = linalg.cho_factor(A, lower=False, check_finite=True)
        solve = lambda b: linalg.cho_solve(factor, b)
    except linalg.LinAlgError:
        try:
            lu = linalg.lu_factor(A)
        except (linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"system G + lambda D is singular at lambda={lam:.3e}") from exc
        solve = lambda b: linalg.lu_solve(lu, b)
    x = solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError(f"non-finite solution at lambda={lam:.3e}")
    A_ld = Gr.astype(_LD) + _LD(lam) * np.diag(d.astype(_LD))
    x_ld = x.astype(_LD)
    b_ld = rhs.astype(_LD)
    scale = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
    for _ in range(REFINE_STEPS):
        res = b_ld - A_ld @ x_ld
        if float(np.max(np.abs(res))) <= 1e-15 * scale:
            break
        x_ld = x_ld + solve(res.astype(float)).astype(_LD)
    x = x_ld.astype(float)
    final = float(np.max(np.abs(b_ld - A_ld @ x.astype(_LD))))
    if final > 1e-8 * scale:
        raise SolverError(f"ill-conditioned solve at lambda={lam:.3e}: residual {final:.2e}")
    return x


def _residual(Gr, rr, x, target_norm2):
    if target_norm2 is None:
        return float("nan")
    x_ld = x.astype(_LD)
    value = x_ld @ (Gr.astype(_LD) @ x_ld) - 2 * (x_ld @ rr.astype(_LD)) + _LD(target_norm2)
    return float(np.sqrt(max(float(value), 0.0)))


def _geometry_of(G):
    return G.geometry.key() if isinstance(G, GramMatrix) else None


def _solve(G, r, lam, space, target_norm2, keep_zero_mode, shift=None):
    if not (math.isfinite(lam) and lam > 0):
        raise ContractError(f"lambda must be > 0, got {lam}")
    space = normalize_space(space)
    Gr, rr = _real_data(G, r)
    N = r.N
    d = _weights(N, r.q, space)
    rhs = rr.copy()
    f = None
    if shift is not None:
        if shift.N != N:
            raise ContractError("shift and right-hand side differ in truncation order")
        f = shift.to_real()
        rhs = rhs + lam * d * f
    idx = _active(space, keep_zero_mode, rr.size)
    x = np.zeros_like(rr)
    if np.any(rhs[idx] != 0):
        x[idx] = _solve_real(Gr[np.ix_(idx, idx)], rhs[idx], d[idx], lam)
    delta = x if f is None else x - np.where(np.isin(np.arange(x.size), idx), f, 0.0)
    M = float(np.sqrt(np.sum(d * delta * delta)))
    return BepSolution(FourierVector.from_real(x, r.q), float(lam), M,
                       _residual(Gr, rr, x, target_norm2), space, bool(keep_zero_mode),
                       _geometry_of(G), shifted=f is not None)


def solve_fixed_lambda(G, r, lam, space="L2", target_norm2=None, keep_zero_mode=False):
    """Solve (G + lam D) c = r.

    ``target_norm2`` (the squared norm of the target e) is only needed for
    the reported residual ||b2*[phi] - e||; without it the residual is NaN.
    In W012 the constant mode is dropped unless ``keep_zero_mode`` is set, in
    which case that mode is regularised by the Gram matrix alone.
    """
    return _solve(G, r, lam, space, target_norm2, keep_zero_mode)


def solve_shifted(G, r, f, lam, space="L2", target_norm2=None, keep_zero_mode=False):
    """Solve (G + lam D) c = r + lam D f; M_achieved is the space norm of c - f."""
    return _solve(G, r, lam, space, target_norm2, keep_zero_mode, shift=f)


def _M_at(G, r, log_lam, space, keep_zero_mode):
    return solve_fixed_lambda(G, r, 10.0 ** log_lam, space, None, keep_zero_mode).M_achieved


def solve_for_M(G, r, M_target, space="L2", target_norm2=None, keep_zero_mode=False,
                bracket=LOG_LAMBDA_BRACKET, rtol=M_RTOL, max_iter=MAX_BISECTION):
    """Saturate ||phi|| = M_target by bisection on log10(lambda)."""
    if not (math.isfinite(M_target) and M_target > 0):
        raise ContractError(f"M target must be > 0, got {M_target}")
    lo, hi = bracket
    M_hi = _M_at(G, r, hi, space, keep_zero_mode)
    M_lo = None
    while lo < hi:
        try:
            M_lo = _M_at(G, r, lo, space, keep_zero_mode)
            break
        except SolverError:
            lo += 1.0
    if M_lo is None or not (M_hi <= M_target <= M_lo):
        raise BracketError(
            f"M={M_target} not reachable for log10(lambda) in [{lo}, {hi}] "
            f"(M ranges over [{M_hi}, {M_lo}])", M_low_lambda=M_lo, M_high_lambda=M_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        sol = solve_fixed_lambda(G, r, 10.0 ** mid, space, target_norm2, keep_zero_mode)
        if abs(sol.M_achieved - M_target) < rtol * M_target:
            return sol
        if sol.M_achieved > M_target:
            lo = mid
        else:
            hi = mid
    raise SolverError(f"bisection did not reach rtol={rtol} in {max_iter} steps (last M={sol.M_achieved})")


def lambda_sweep(G, r, lambdas, space="L2", target_norm2=None, keep_zero_mode=False):
    """One solve per lambda, in input order; failures become rows with ``error`` set."""
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ContractError("lambda list is empty")
    if any(not (math.isfinite(v) and v > 0) for v in lambdas):
        raise ContractError("all lambdas must be finite and > 0")
    rows = []
    for lam in lambdas:
        try:
            sol = solve_fixed_lambda(G, r, lam, space, target_norm2, keep_zero_mode)
            rows.append(SweepRow(lam, sol.M_achieved, sol.residual))
        except SolverError as exc:
            rows.append(SweepRow(lam, float("nan"), float("nan"), str(exc)))
    return rows


def fmt(value):
    """17 significant digits: round-trip exact and stable across runs."""
    return format(float(value), ".17g")


def sweep_csv(rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["lambda", "M", "residual"])
    for row in rows:
        writer.writerow([fmt(row.lam), fmt(row.M), fmt(row.residual)])
    return out.getvalue()


def saturation_check(sol, G, r):
    """Normalised violation |lam M^2 + c^H G c - Re(c^H r)| / (lam M^2), in extended precision."""
    if sol.M_achieved == 0.0:
        return 0.0
    Gr, rr = _real_data(G, r)
    x = sol.coeffs.to_real().astype(_LD)
    d = _weights(r.N, r.q, sol.space).astype(_LD)
    lam = _LD(sol.lam)
    lhs = lam * np.sum(d * x * x)
    gap = lhs + x @ (Gr.astype(_LD) @ x) - x @ rr.astype(_LD)
    return float(abs(gap) / lhs)


def spectral_decay(G):
    """Eigenvalues of the real symmetric Gram form, descending."""
    real = G.real if isinstance(G, GramMatrix) else np.asarray(G, dtype=float)
    return np.linalg.eigvalsh(0.5 * (real + real.T))[::-1]
