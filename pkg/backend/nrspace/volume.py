"""Volume density, geodesic sphere areas and ball volumes by Monte Carlo over the unit sphere of m."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate
import scipy.special
from pydantic import BaseModel, Field

from nrspace.algebra import AlgebraSpec
from nrspace.config import (
    get_gauss_nodes,
    get_sample_count,
    get_seed,
    get_simpson_nodes,
    get_taylor_order,
    get_truncation_tolerance,
    get_workers,
)
from nrspace.errors import SpecError
from nrspace.jacobi import TaylorTensor, evaluate_A, fitted_series, fitted_series_batch, taylor_series_batch

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
PRINTED_V1_CONSTANT = 16 * math.pi ** 3 / 105


class QuadratureConfig(BaseModel):
    sample_count: int = Field(default_factory=get_sample_count, ge=1)
    seed: int = Field(default_factory=get_seed, ge=0, lt=2 ** 64)
    t_integrator: Literal["simpson", "gauss"] = "simpson"
    nodes: Optional[int] = Field(default=None, ge=2)
    order: int = Field(default_factory=get_taylor_order, ge=2)
    antithetic: bool = False
    workers: int = Field(default_factory=get_workers, ge=1)

    def node_count(self) -> int:
        if self.nodes is not None:
            return self.nodes
        return get_simpson_nodes() if self.t_integrator == "simpson" else get_gauss_nodes()


class VolumeRow(BaseModel):
    t: float = Field(..., ge=0)
    theta_mean: float
    theta_stderr: float = Field(..., ge=0)
    area: float = Field(..., ge=0)
    volume: float = Field(..., ge=0)


def unit_sphere_volume(dim: int) -> float:
    """vol(S^(dim-1)) = 2 pi^(dim/2) / Gamma(dim/2)."""
    return float(2 * math.pi ** (dim / 2) / scipy.special.gamma(dim / 2))


# -- sampling --------------------------------------------------------------------------


def _block_count(quad: QuadratureConfig) -> int:
    base = math.ceil(quad.sample_count / 2) if quad.antithetic else quad.sample_count
    return math.ceil(base / BLOCK_SIZE)


def block_directions(quad: QuadratureConfig, dim: int, block: int) -> np.ndarray:
    """Unit vectors of one sampling block; each depends only on (seed, sample index)."""
    rng = np.random.default_rng(np.random.SeedSequence(quad.seed, spawn_key=(block,)))
    G = rng.standard_normal((BLOCK_SIZE, dim))
    U = G / np.linalg.norm(G, axis=1, keepdims=True)
    per_block = 2 * BLOCK_SIZE if quad.antithetic else BLOCK_SIZE
    remaining = quad.sample_count - block * per_block
    if quad.antithetic:
        paired = np.empty((2 * BLOCK_SIZE, dim))
        paired[0::2] = U
        paired[1::2] = -U
        U = paired
    return U[: max(0, min(per_block, remaining))]


def sample_directions(quad: QuadratureConfig, dim: int) -> np.ndarray:
    return np.concatenate([block_directions(quad, dim, b) for b in range(_block_count(quad))])


def _sphere_statistics(
    spec: AlgebraSpec,
    quad: QuadratureConfig,
    evaluate: Callable[[np.ndarray], np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of evaluate(u) over the sampled unit directions."""

    def run(block: int):
        U = block_directions(quad, spec.dim_m, block)
        values = evaluate(U)
        mean = values.mean(axis=0)
        return len(U), mean, ((values - mean) ** 2).sum(axis=0)

    blocks = range(_block_count(quad))
    if quad.workers > 1:
        with ThreadPoolExecutor(max_workers=quad.workers) as executor:
            results = list(executor.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    # Chan et al. pairwise merge of (count, mean, M2), in block order
    n, mean, m2 = results[0]
    for count, block_mean, block_m2 in results[1:]:
        total = n + count
        delta = block_mean - mean
        mean = mean + delta * (count / total)
        m2 = m2 + block_m2 + delta * delta * (n * count / total)
        n = total
    if n > 1:
        stderr = np.sqrt(m2 / (n - 1) / n)
    else:
        stderr = np.zeros_like(mean)
    logger.debug(f"[sphere_statistics] {spec.name}: {n} samples in {len(results)} blocks")
    return mean, stderr


# -- theta -----------------------------------------------------------------------------


def _theta_from_series(series: TaylorTensor, ts: Sequence[float], tolerance: Optional[float]) -> np.ndarray:
    """theta at each t, shape (*batch, len(ts)); t = 0 gives the limit 1."""
    d = series.dim
    out = []
    for t in ts:
        if t == 0.0:
            out.append(np.ones(series.coefficients.shape[1:-2]))
            continue
        A = evaluate_A(series, t, tolerance).A
        out.append(np.abs(np.linalg.det(A)) / t ** d)
    return np.stack(out, axis=-1)


def theta(spec: AlgebraSpec, v, t: float, series: Optional[TaylorTensor] = None, tolerance: Optional[float] = None) -> float:
    """|det A_t| / t^dim_m."""
    if t < 0:
        raise SpecError("theta needs t >= 0")
    tolerance = get_truncation_tolerance() if tolerance is None else tolerance
    series = series or fitted_series(spec, v, t, tolerance=tolerance)
    return float(_theta_from_series(series, [t], tolerance)[..., 0])


def theta_statistics(spec: AlgebraSpec, ts: Sequence[float], quad: Optional[QuadratureConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Sphere mean and standard error of theta(t u) at every t."""
    quad = quad or QuadratureConfig()
    tolerance = get_truncation_tolerance()
    ts = [float(t) for t in ts]
    if any(t < 0 for t in ts):
        raise SpecError("radii must be non-negative")

    t_max = max(ts, default=0.0)

    def evaluate(U: np.ndarray) -> np.ndarray:
        series = fitted_series_batch(spec, U, t_max, quad.order, tolerance)
        return _theta_from_series(series, ts, tolerance)

    return _sphere_statistics(spec, quad, evaluate)


def sphere_area(spec: AlgebraSpec, t: float, quad: Optional[QuadratureConfig] = None) -> Tuple[float, float]:
    """(area, stderr) of the geodesic sphere of radius t."""
    if t <= 0:
        raise SpecError("sphere_area needs t > 0")
    mean, stderr = theta_statistics(spec, [t], quad)
    scale = unit_sphere_volume(spec.dim_m) * t ** (spec.dim_m - 1)
    return float(scale * mean[0]), float(scale * stderr[0])


def _areas(spec: AlgebraSpec, ts: np.ndarray, quad: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean, stderr = theta_statistics(spec, ts, quad)
    scale = unit_sphere_volume(spec.dim_m) * ts ** (spec.dim_m - 1)
    return scale * mean, mean, stderr


def _integration_nodes(
    a: float, b: float, quad: QuadratureConfig, n: Optional[int] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Nodes on [a, b], and Gauss weights (None for Simpson)."""
    n = quad.node_count() if n is None else n
    if quad.t_integrator == "gauss":
        x, w = np.polynomial.legendre.leggauss(n)
        half = (b - a) / 2
        return a + half * (x + 1), half * w
    if n % 2 == 0:
        n += 1
    return np.linspace(a, b, n), None


def ball_volume(spec: AlgebraSpec, r: float, quad: Optional[QuadratureConfig] = None) -> float:
    """V(r) = integral of the sphere area over [0, r]."""
    if r <= 0:
        raise SpecError("ball_volume needs r > 0")
    quad = quad or QuadratureConfig()
    nodes, weights = _integration_nodes(0.0, r, quad)
    areas, _, _ = _areas(spec, nodes, quad)
    if weights is not None:
        return float(np.dot(weights, areas))
    return float(scipy.integrate.simpson(areas, x=nodes))


def volume_table(spec: AlgebraSpec, t_grid: Sequence[float], quad: Optional[QuadratureConfig] = None) -> List[VolumeRow]:
    """One row per grid radius with cumulative volume integrated segment by segment."""
    quad = quad or QuadratureConfig()
    grid = [float(t) for t in t_grid]
    if not grid or any(t < 0 for t in grid) or grid != sorted(grid):
        raise SpecError("t grid must be non-empty, sorted and non-negative")

    spans = sum(1 for a, b in zip([0.0] + grid, grid) if b > a)
    per_segment = max(3, quad.node_count() // max(1, spans))
    segments = []
    previous = 0.0
    for t in grid:
        segments.append(_integration_nodes(previous, t, quad, per_segment) if t > previous else (np.array([t]), None))
        previous = t
    all_nodes = np.concatenate([np.array(grid)] + [s[0] for s in segments])
    unique, inverse = np.unique(all_nodes, return_inverse=True)
    areas, mean, stderr = _areas(spec, unique, quad)

    rows = []
    volume = 0.0
    offset = len(grid)
    for index, (t, (nodes, weights)) in enumerate(zip(grid, segments)):
        node_areas = areas[inverse[offset : offset + len(nodes)]]
        offset += len(nodes)
        if len(nodes) > 1:
            volume += float(np.dot(weights, node_areas)) if weights is not None else float(scipy.integrate.simpson(node_areas, x=nodes))
        k = inverse[index]
        rows.append(
            VolumeRow(
                t=t,
                theta_mean=float(mean[k]),
                theta_stderr=float(stderr[k]),
                area=max(0.0, float(areas[k])),
                volume=max(0.0, volume),
            )
        )
    logger.info(f"[volume_table] {spec.name}: {len(rows)} rows, {quad.sample_count} samples, seed {quad.seed}")
    return rows


# -- determinant series ----------------------------------------------------------------


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for n in range(K):
        out[..., n] = np.sum(a[..., : n + 1] * b[..., n::-1], axis=-1)
    return out


def _series_inverse(a: np.ndarray) -> np.ndarray:
    """1/a for series with nonzero constant term."""
    K = a.shape[-1]
    out = np.zeros_like(a)
    out[..., 0] = 1.0 / a[..., 0]
    for n in range(1, K):
        out[..., n] = -np.sum(a[..., 1 : n + 1] * out[..., n - 1 :: -1], axis=-1) * out[..., 0]
    return out


def det_series(series: TaylorTensor) -> np.ndarray:
    """Coefficients a_0..a_(d+N-1) of det A_t, by elimination over truncated power series.

    A_t = t B(t) with B(0) = I, so every pivot is an invertible series.
    """
    d, N = series.dim, series.order
    # B[..., i, j, k] = coefficient of t^k in B_ij
    B = np.moveaxis(series.coefficients[1:], 0, -1).copy()
    det = np.zeros(B.shape[:-3] + (N,))
    det[..., 0] = 1.0
    for col in range(d):
        pivot = B[..., col, col, :]
        det = _series_mul(det, pivot)
        if col == d - 1:
            break
        inverse = _series_inverse(pivot)
        for row in range(col + 1, d):
            factor = _series_mul(B[..., row, col, :], inverse)
            B[..., row, col + 1 :, :] -= _series_mul(factor[..., None, :], B[..., col, col + 1 :, :])
    out = np.zeros(det.shape[:-1] + (d + N,))
    out[..., d:] = det
    return out


def det_series_coeff(series: TaylorTensor, n: int):
    """a_n, the coefficient of t^n in det A_t."""
    limit = series.dim + series.order - 1
    if n < 0 or n > limit:
        raise SpecError(f"a_{n} needs series order >= {n - series.dim + 1}, have {series.order}")
    coeffs = det_series(series)[..., n]
    return float(coeffs) if np.ndim(coeffs) == 0 else coeffs


def _compositions(n: int, parts: int):
    for cuts in itertools.combinations(range(1, n), parts - 1):
        bounds = (0,) + cuts + (n,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def det_coeff_by_rows(series: TaylorTensor, n: int):
    """a_n = sum over compositions r of n into d positive parts of det(row i taken from C_(r_i))."""
    d = series.dim
    if n > series.order + d - 1:
        raise SpecError(f"a_{n} is beyond the series order {series.order}")
    C = series.coefficients
    total = np.zeros(C.shape[1:-2])
    for parts in _compositions(n, d):
        if max(parts) > series.order:
            continue
        matrix = np.stack([C[r, ..., i, :] for i, r in enumerate(parts)], axis=-2)
        total = total + np.linalg.det(matrix)
    return float(total) if np.ndim(total) == 0 else total


# -- moments ---------------------------------------------------------------------------


def sphere_moments(spec: AlgebraSpec, quad: Optional[QuadratureConfig] = None, max_power: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Sphere mean and standard error of a_n(u) for n = 0..max_power."""
    quad = quad or QuadratureConfig()
    d = spec.dim_m
    limit = d + quad.order - 1
    max_power = limit if max_power is None else max_power
    if max_power > limit:
        raise SpecError(f"a_{max_power} needs series order >= {max_power - d + 1}, have {quad.order}")

    def evaluate(U: np.ndarray) -> np.ndarray:
        return det_series(taylor_series_batch(spec, U, quad.order))[..., : max_power + 1]

    mean, stderr = _sphere_statistics(spec, quad, evaluate)
    return {"powers": np.arange(max_power + 1), "mean": mean, "stderr": stderr}


def _series_powers(d: int, n_max: int, include_odd: bool) -> List[int]:
    top = 2 * n_max + 1
    return [k for k in range(d, top + 1) if include_odd or (k - d) % 2 == 0]


def area_series(
    spec: AlgebraSpec,
    t: float,
    n_max: int,
    quad: Optional[QuadratureConfig] = None,
    include_odd: bool = False,
    moments: Optional[Dict[str, np.ndarray]] = None,
) -> float:
    """vol(S^(d-1)) sum_k M_k t^(k-1), M_k the sphere average of a_k, up to t^(2 n_max)."""
    quad = quad or QuadratureConfig()
    d = spec.dim_m
    powers = _series_powers(d, n_max, include_odd)
    if not powers:
        raise SpecError(f"n_max={n_max} leaves no terms for d={d}")
    moments = moments or sphere_moments(spec, quad, max(powers))
    if len(moments["mean"]) <= max(powers):
        raise SpecError(f"moments computed up to a_{len(moments['mean']) - 1}, need a_{max(powers)}")
    mean = moments["mean"]
    return unit_sphere_volume(d) * float(sum(mean[k] * t ** (k - 1) for k in powers))


def ball_volume_series(
    spec: AlgebraSpec,
    r: float,
    n_max: int,
    quad: Optional[QuadratureConfig] = None,
    include_odd: bool = False,
    moments: Optional[Dict[str, np.ndarray]] = None,
) -> float:
    """The integrated moment series vol(S^(d-1)) sum_k M_k r^k / k."""
    quad = quad or QuadratureConfig()
    d = spec.dim_m
    powers = _series_powers(d, n_max, include_odd)
    moments = moments or sphere_moments(spec, quad, max(powers))
    mean = moments["mean"]
    return unit_sphere_volume(d) * float(sum(mean[k] * r ** k / k for k in powers))


def normalization_report(spec: AlgebraSpec, quad: Optional[QuadratureConfig] = None, t: float = 0.01) -> Dict[str, object]:
    """Compare S(t)/t^(d-1) at small t with vol(S^(d-1)) and, for d = 7, the printed 16 pi^3 / 105."""
    quad = quad or QuadratureConfig()
    d = spec.dim_m
    area, stderr = sphere_area(spec, t, quad)
    observed = area / t ** (d - 1)
    sphere = unit_sphere_volume(d)
    report: Dict[str, object] = {
        "t": t,
        "observed": observed,
        "stderr": stderr / t ** (d - 1),
        "unit_sphere": sphere,
        "unit_sphere_rel_error": abs(observed - sphere) / sphere,
        "printed": None,
        "printed_rel_error": None,
    }
    if d == 7:
        report["printed"] = PRINTED_V1_CONSTANT
        report["printed_rel_error"] = abs(observed - PRINTED_V1_CONSTANT) / PRINTED_V1_CONSTANT
    printed_error = report["printed_rel_error"]
    matches_printed = printed_error is not None and printed_error < report["unit_sphere_rel_error"]
    report["match"] = "printed" if matches_printed else "unit_sphere"
    if d == 7 and not matches_printed:
        logger.warning(
            f"[normalization_report] S(t)/t^6 = {observed:.6g} matches vol(S^6) = {sphere:.6g}, "
            f"not the printed {PRINTED_V1_CONSTANT:.6g}"
        )
    return report
