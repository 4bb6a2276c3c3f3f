"""Jacobi tensor A_t along a geodesic: A'' = -R_t A, A_0 = 0, A'_0 = I.

Columns of A_t are the Jacobi fields with Y(0) = 0 and Y'(0) a basis vector of m.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from nrspace import curvature
from nrspace.algebra import AlgebraSpec, AlgVec
from nrspace.config import get_rk_step, get_taylor_order, get_truncation_tolerance
from nrspace.errors import SpecError, TruncationError, UnsupportedSpaceError

logger = logging.getLogger(__name__)

MAX_ORDER = 200
ORDER_STEP = 20


@dataclass(frozen=True)
class TaylorTensor:
    """C_k = A^(k)_0 / k! for k = 0..order; shape (order + 1, *batch, d, d)."""

    direction: np.ndarray
    order: int
    coefficients: np.ndarray

    @property
    def dim(self) -> int:
        return self.coefficients.shape[-1]

    @property
    def batched(self) -> bool:
        return self.coefficients.ndim > 3


@dataclass(frozen=True)
class SeriesValue:
    A: np.ndarray
    dA: np.ndarray
    tail_bound: float


@dataclass(frozen=True)
class JacobiField:
    direction: np.ndarray
    initial: np.ndarray
    times: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray


def _check_order(N: Optional[int]) -> int:
    N = get_taylor_order() if N is None else N
    if N < 2:
        raise SpecError(f"series order must be at least 2, got {N}")
    return N


def _solve_recurrence(rho: np.ndarray, N: int) -> np.ndarray:
    """(k+2)(k+1) C_(k+2) = -sum_j rho_j C_(k-j) with C_0 = 0, C_1 = I."""
    dim = rho.shape[-1]
    C = np.zeros((N + 1,) + rho.shape[1:])
    C[1] = np.broadcast_to(np.eye(dim), rho.shape[1:])
    for k in range(0, N - 1):
        acc = np.zeros(rho.shape[1:])
        # C_0 = 0, so j = k contributes nothing
        for j in range(0, k):
            acc += rho[j] @ C[k - j]
        C[k + 2] = -acc / ((k + 2) * (k + 1))
    return C


def _scaled_derivatives(derivatives: np.ndarray) -> np.ndarray:
    factorials = np.array([math.factorial(j) for j in range(len(derivatives))], dtype=float)
    return derivatives / factorials.reshape((-1,) + (1,) * (derivatives.ndim - 1))


def taylor_series(spec: AlgebraSpec, v, N: Optional[int] = None) -> TaylorTensor:
    """Taylor coefficients of A_t from R^(j)_0, built through the derivative relation."""
    N = _check_order(N)
    sequence = curvature.derivative_sequence(spec, v, N + 1)
    rho = _scaled_derivatives(np.stack([curvature.to_float(R) for R in sequence]))
    arr, _ = curvature.as_direction(spec, v)
    series = TaylorTensor(
        direction=np.array([float(c) for c in arr[: spec.dim_m]]),
        order=N,
        coefficients=_solve_recurrence(rho, N),
    )
    logger.debug(f"[taylor_series] {spec.name}: N={N}, |C_N|={np.linalg.norm(series.coefficients[-1]):.3e}")
    return series


def taylor_series_batch(spec: AlgebraSpec, V: np.ndarray, N: Optional[int] = None) -> TaylorTensor:
    """taylor_series for a (B, dim_m) batch of float unit directions."""
    N = _check_order(N)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    rho = _scaled_derivatives(curvature.derivative_sequence_batch(spec, V, N + 1))
    return TaylorTensor(direction=V, order=N, coefficients=_solve_recurrence(rho, N))


def _tail_bound(series: TaylorTensor, t: float) -> float:
    """|C_N| |t|^N N / (N - |t| rho), rho = N sqrt(|C_N| / |C_(N-2)|) from the last nonzero pair."""
    if t == 0.0:
        return 0.0
    norms = np.linalg.norm(series.coefficients, axis=(-2, -1))
    if norms.ndim > 1:
        norms = norms.max(axis=tuple(range(1, norms.ndim)))
    n = series.order
    if norms[n] == 0.0 and n - 1 >= 3:
        n -= 1
    if norms[n] == 0.0:
        return 0.0
    below = norms[n - 2] if n >= 2 else 0.0
    if below == 0.0:
        return math.inf
    rho = n * math.sqrt(norms[n] / below)
    margin = n - abs(t) * rho
    if margin <= 0.0:
        return math.inf
    return float(norms[n] * abs(t) ** n * n / margin)


def evaluate_A(series: TaylorTensor, t: float, tolerance: Optional[float] = None) -> SeriesValue:
    """Horner evaluation of A_t and A'_t; raises TruncationError when the tail bound exceeds tolerance."""
    C = series.coefficients
    A = np.zeros(C.shape[1:])
    dA = np.zeros(C.shape[1:])
    for k in range(series.order, 0, -1):
        A = A * t + C[k]
        dA = dA * t + k * C[k]
    A = A * t
    bound = _tail_bound(series, t)
    if tolerance is not None and bound > tolerance:
        raise TruncationError(bound, tolerance, t, series.order)
    return SeriesValue(A=A, dA=dA, tail_bound=bound)


def _fit_order(build: Callable[[int], TaylorTensor], N: int, t_max: float, tolerance: float) -> TaylorTensor:
    # the bound grows with |t|, so fitting at t_max covers the whole grid
    series = build(N)
    while _tail_bound(series, t_max) > tolerance and series.order < MAX_ORDER:
        series = build(min(MAX_ORDER, series.order + ORDER_STEP))
    if series.order > N:
        logger.info(f"[fit_order] raised N from {N} to {series.order} for |t| <= {t_max:g}")
    return series


def fitted_series(spec: AlgebraSpec, v, t_max: float, N: Optional[int] = None, tolerance: Optional[float] = None) -> TaylorTensor:
    """taylor_series with N raised until the tail bound at t_max is within tolerance."""
    N = _check_order(N)
    tolerance = get_truncation_tolerance() if tolerance is None else tolerance
    return _fit_order(lambda n: taylor_series(spec, v, n), N, abs(float(t_max)), tolerance)


def fitted_series_batch(spec: AlgebraSpec, V: np.ndarray, t_max: float, N: Optional[int] = None, tolerance: Optional[float] = None) -> TaylorTensor:
    N = _check_order(N)
    tolerance = get_truncation_tolerance() if tolerance is None else tolerance
    return _fit_order(lambda n: taylor_series_batch(spec, V, n), N, abs(float(t_max)), tolerance)


def _curve(spec: AlgebraSpec, v) -> Callable[[float], np.ndarray]:
    """R_t from the closed form, or from conjugation when no closed form exists."""
    try:
        form = curvature.closed_form(spec, v)
        return form.evaluate
    except UnsupportedSpaceError:
        logger.info(f"[ode_oracle] {spec.name}: no closed form, integrating against the conjugation curve")
        return lambda t: curvature.conjugated_jacobi(spec, v, t)


def _rk4_step(fn, t: float, w: Tuple[np.ndarray, np.ndarray], h: float) -> Tuple[np.ndarray, np.ndarray]:
    def shift(state, k, c):
        return tuple(s + c * x for s, x in zip(state, k))

    K1 = tuple(h * x for x in fn(t, w))
    K2 = tuple(h * x for x in fn(t + h / 2, shift(w, K1, 0.5)))
    K3 = tuple(h * x for x in fn(t + h / 2, shift(w, K2, 0.5)))
    K4 = tuple(h * x for x in fn(t + h, shift(w, K3, 1.0)))
    return tuple(s + (a + 2 * b + 2 * c + d) / 6 for s, a, b, c, d in zip(w, K1, K2, K3, K4))


def _integrate(fn, w, a: float, b: float, step: float):
    if b == a:
        return w
    n = max(1, int(math.ceil(abs(b - a) / step - 1e-9)))
    h = (b - a) / n
    t = a
    for j in range(1, n + 1):
        w = _rk4_step(fn, t, w, h)
        t = a + j * h
    return w


def _system(spec: AlgebraSpec, v):
    R = _curve(spec, v)

    def fn(t, w):
        A, B = w
        return B, -R(t) @ A

    return fn


def ode_oracle(spec: AlgebraSpec, v, t_end: float, step: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 for A'' = -R_t A from (0, I)."""
    step = get_rk_step() if step is None else step
    if step <= 0:
        raise SpecError("RK4 step must be positive")
    d = spec.dim_m
    A, B = _integrate(_system(spec, v), (np.zeros((d, d)), np.eye(d)), 0.0, float(t_end), step)
    return A, B


def ode_trajectory(spec: AlgebraSpec, v, times: Sequence[float], step: Optional[float] = None) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    """RK4 states (t, A_t, A'_t) at each of a sorted, non-negative time grid."""
    step = get_rk_step() if step is None else step
    if step <= 0:
        raise SpecError("RK4 step must be positive")
    grid = [float(t) for t in times]
    if any(t < 0 for t in grid) or grid != sorted(grid):
        raise SpecError("trajectory times must be sorted and non-negative")
    fn = _system(spec, v)
    d = spec.dim_m
    w = (np.zeros((d, d)), np.eye(d))
    out = []
    previous = 0.0
    for t in grid:
        w = _integrate(fn, w, previous, t, step)
        previous = t
        out.append((t, w[0].copy(), w[1].copy()))
    return out


def _initial_in_m(spec: AlgebraSpec, w) -> np.ndarray:
    arr = w.to_array() if isinstance(w, AlgVec) else np.asarray(w)
    arr = np.array([float(c) for c in arr])
    if len(arr) == spec.dim_g:
        if np.any(np.abs(arr[spec.dim_m :]) > 1e-12):
            raise SpecError("initial derivative must lie in m")
        arr = arr[: spec.dim_m]
    if len(arr) != spec.dim_m:
        raise SpecError(f"initial derivative has {len(arr)} entries, expected {spec.dim_m}")
    return arr


def jacobi_field(spec: AlgebraSpec, v, w, t: float, series: Optional[TaylorTensor] = None, tolerance: Optional[float] = None) -> AlgVec:
    """Y(t) = A_t w for the Jacobi field with Y(0) = 0, Y'(0) = w."""
    initial = _initial_in_m(spec, w)
    series = series or fitted_series(spec, v, t)
    Y = evaluate_A(series, t, tolerance).A @ initial
    return AlgVec(tuple(float(c) for c in Y) + (0.0,) * spec.dim_h, "m")


def jacobi_field_grid(
    spec: AlgebraSpec, v, w, times: Sequence[float], N: Optional[int] = None, tolerance: Optional[float] = None
) -> JacobiField:
    """Y(t) and Y'(t) on a time grid; N is raised to fit the grid unless given."""
    initial = _initial_in_m(spec, w)
    t_max = max((abs(float(t)) for t in times), default=0.0)
    series = taylor_series(spec, v, N) if N is not None else fitted_series(spec, v, t_max, tolerance=tolerance)
    values, derivatives = [], []
    for t in times:
        value = evaluate_A(series, float(t), tolerance)
        values.append(value.A @ initial)
        derivatives.append(value.dA @ initial)
    return JacobiField(
        direction=series.direction,
        initial=initial,
        times=np.asarray(times, dtype=float),
        values=np.array(values),
        derivatives=np.array(derivatives),
    )


# -- the alpha/beta form of the recurrence ---------------------------------------------


def _series_derivative(S: np.ndarray) -> np.ndarray:
    out = np.zeros_like(S)
    weights = np.arange(1, len(S)).reshape((-1,) + (1,) * (S.ndim - 1))
    out[:-1] = S[1:] * weights
    return out


def _series_product(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(X)
    for n in range(len(X)):
        for j in range(n + 1):
            out[n] += X[j] @ Y[n - j]
    return out


def alpha_beta_coefficients(spec: AlgebraSpec, v, N: int) -> np.ndarray:
    """beta_k(0) for k = 0..N from beta_k = alpha_(k-1) + beta'_(k-1), alpha_k = alpha'_(k-1) - beta_(k-1) R.

    Matrix functions of t are carried as truncated Taylor series; beta_k(0) = A^(k)_0.
    """
    if N < 1:
        raise SpecError("order must be at least 1")
    d = spec.dim_m
    depth = N + 1
    sequence = curvature.derivative_sequence(spec, v, depth)
    R = _scaled_derivatives(np.stack([curvature.to_float(X) for X in sequence]))
    alpha = np.zeros((depth, d, d))
    beta = np.zeros((depth, d, d))
    beta[0] = np.eye(d)
    out = np.zeros((N + 1, d, d))
    out[1] = beta[0]
    for k in range(2, N + 1):
        alpha, beta = _series_derivative(alpha) - _series_product(beta, R), alpha + _series_derivative(beta)
        out[k] = beta[0]
    return out


def lagrange_defect(A: np.ndarray, dA: np.ndarray) -> float:
    """max |A^T A' - A'^T A|; zero for any solution with A_0 = 0."""
    At = np.swapaxes(A, -1, -2)
    dAt = np.swapaxes(dA, -1, -2)
    return float(np.max(np.abs(At @ dA - dAt @ A)))
