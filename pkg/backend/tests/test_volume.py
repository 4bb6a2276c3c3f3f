import math

import numpy as np
import pytest
from pydantic import ValidationError

from nrspace import curvature
from nrspace.algebra import basis_vector, flat_spec
from nrspace.errors import SpecError
from nrspace.jacobi import evaluate_A, taylor_series, taylor_series_batch
from nrspace.volume import (
    BLOCK_SIZE,
    PRINTED_V1_CONSTANT,
    QuadratureConfig,
    _sphere_statistics,
    area_series,
    ball_volume,
    ball_volume_series,
    block_directions,
    det_coeff_by_rows,
    det_series,
    det_series_coeff,
    normalization_report,
    sample_directions,
    sphere_area,
    sphere_moments,
    theta,
    theta_statistics,
    unit_sphere_volume,
    volume_table,
)

from conftest import random_unit


def quad(**overrides):
    settings = dict(sample_count=512, seed=3, order=20, workers=1)
    settings.update(overrides)
    return QuadratureConfig(**settings)


def test_unit_sphere_volume():
    assert unit_sphere_volume(3) == pytest.approx(4 * math.pi)
    assert unit_sphere_volume(7) == pytest.approx(16 * math.pi ** 3 / 15)
    assert unit_sphere_volume(7) == pytest.approx(7 * PRINTED_V1_CONSTANT)


def test_theta_small_t(v1, rng):
    for _ in range(5):
        v = random_unit(rng, 7)
        series = taylor_series(v1, v, 20)
        trace = np.trace(curvature.jacobi_operator(v1, v))
        t = 1e-3
        value = theta(v1, v, t, series=series)
        assert abs(value - 1.0) <= 1e-5
        assert value == pytest.approx(1 - trace * t ** 2 / 6, abs=1e-10)
    assert theta(v1, v, 0.0, series=series) == 1.0


def test_theta_flat_and_su2(flat7, su2):
    assert theta(flat7, basis_vector(flat7, 3), 2.0) == pytest.approx(1.0, abs=1e-14)
    series = taylor_series(su2, [1.0, 0.0, 0.0], 40)
    for t in (1.0, 2.0):
        expected = (math.sin(t / 2) / (t / 2)) ** 2
        assert theta(su2, [1.0, 0.0, 0.0], t, series=series) == pytest.approx(expected, abs=1e-10)
    with pytest.raises(SpecError):
        theta(su2, [1.0, 0.0, 0.0], -1.0, series=series)


def test_determinant_series_leading_terms(v1, rng):
    for _ in range(5):
        v = random_unit(rng, 7)
        series = taylor_series(v1, v, 12)
        trace = np.trace(curvature.jacobi_operator(v1, v))
        a = det_series(series)
        assert a.shape == (19,)
        assert not np.any(a[:7])
        assert a[7] == pytest.approx(1.0, abs=1e-14)
        assert a[8] == pytest.approx(0.0, abs=1e-14)
        assert a[9] == pytest.approx(-trace / 6, abs=1e-12)
        assert det_series_coeff(series, 9) == pytest.approx(a[9], abs=1e-15)


def test_determinant_series_by_rows_agrees(v1, rng):
    series = taylor_series(v1, random_unit(rng, 7), 10)
    for n in (7, 8, 9, 10):
        assert det_coeff_by_rows(series, n) == pytest.approx(det_series_coeff(series, n), abs=1e-11)


def test_determinant_series_sums_to_det(v1, rng):
    series = taylor_series(v1, random_unit(rng, 7), 30)
    a = det_series(series)
    t = 0.3
    direct = np.linalg.det(evaluate_A(series, t).A)
    assert sum(c * t ** n for n, c in enumerate(a)) == pytest.approx(direct, rel=1e-10)


def test_determinant_series_parity(v1, rng):
    v = random_unit(rng, 7)
    plus = det_series(taylor_series(v1, v, 12))
    minus = det_series(taylor_series(v1, -v, 12))
    for n in range(7, 7 + 9):
        sign = (-1) ** (n + 7)
        assert minus[n] == pytest.approx(sign * plus[n], abs=1e-10 * (1 + abs(plus[n])))


def test_determinant_series_batched(v1, rng):
    V = np.stack([random_unit(rng, 7) for _ in range(3)])
    batch = det_series(taylor_series_batch(v1, V, 10))
    assert batch.shape == (3, 17)
    for b, v in enumerate(V):
        assert np.allclose(batch[b], det_series(taylor_series(v1, v, 10)), atol=1e-12)


def test_determinant_coefficient_beyond_order(v1, rng):
    series = taylor_series(v1, random_unit(rng, 7), 5)
    with pytest.raises(SpecError):
        det_series_coeff(series, 12)


def test_blocks_are_deterministic_and_unit():
    config = quad(sample_count=BLOCK_SIZE + 10)
    U = sample_directions(config, 7)
    assert U.shape == (BLOCK_SIZE + 10, 7)
    assert np.allclose(np.linalg.norm(U, axis=1), 1.0)
    assert np.array_equal(U[:BLOCK_SIZE], block_directions(quad(sample_count=5000), 7, 0))
    assert np.array_equal(U, sample_directions(config, 7))
    assert not np.array_equal(U, sample_directions(quad(sample_count=BLOCK_SIZE + 10, seed=4), 7))


def test_antithetic_pairs():
    U = sample_directions(quad(sample_count=10, antithetic=True), 7)
    assert U.shape == (10, 7)
    assert np.array_equal(U[1::2], -U[0::2])


def test_flat_area_and_volume(flat7):
    area, stderr = sphere_area(flat7, 1.5, quad(sample_count=64))
    assert area == pytest.approx(unit_sphere_volume(7) * 1.5 ** 6, rel=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-9)
    volume = ball_volume(flat7, 1.5, quad(sample_count=64))
    assert volume == pytest.approx(unit_sphere_volume(7) * 1.5 ** 7 / 7, rel=1e-9)


def test_su2_areas_and_volume(su2):
    config = quad(sample_count=256, order=40)
    for t in (0.5, 1.0, 2.0, 3.0):
        area, _ = sphere_area(su2, t, config)
        assert area == pytest.approx(16 * math.pi * math.sin(t / 2) ** 2, rel=1e-8)
    assert ball_volume(su2, 2.0, config) == pytest.approx(8 * math.pi * (2.0 - math.sin(2.0)), rel=1e-6)
    gauss = quad(sample_count=256, order=40, t_integrator="gauss", nodes=16)
    assert ball_volume(su2, 2.0, gauss) == pytest.approx(8 * math.pi * (2.0 - math.sin(2.0)), rel=1e-10)


def test_su2_volume_table(su2):
    rows = volume_table(su2, [0.0, 1.0, 2.0, 3.0], quad(sample_count=64, order=40))
    assert [row.t for row in rows] == [0.0, 1.0, 2.0, 3.0]
    assert rows[0].volume == 0.0 and rows[0].theta_mean == 1.0
    for row in rows[1:]:
        assert row.volume == pytest.approx(8 * math.pi * (row.t - math.sin(row.t)), rel=1e-5)
    volumes = [row.volume for row in rows]
    assert volumes == sorted(volumes)
    with pytest.raises(SpecError):
        volume_table(su2, [1.0, 0.5], quad(sample_count=64))


def test_v1_small_sphere_matches_unit_sphere(v1):
    area, stderr = sphere_area(v1, 0.01, quad(sample_count=1024))
    assert area / 0.01 ** 6 == pytest.approx(unit_sphere_volume(7), rel=2e-3)


def test_normalization_report(v1, caplog):
    report = normalization_report(v1, quad(sample_count=512))
    assert report["match"] == "unit_sphere"
    assert report["unit_sphere_rel_error"] < 2e-3
    assert report["printed_rel_error"] == pytest.approx(6.0, rel=1e-2)
    assert "16 pi^3" in caplog.text or "printed" in caplog.text


def test_results_do_not_depend_on_worker_count(v1):
    single = theta_statistics(v1, [0.2, 0.6], quad(sample_count=2 * BLOCK_SIZE + 100, workers=1))
    pooled = theta_statistics(v1, [0.2, 0.6], quad(sample_count=2 * BLOCK_SIZE + 100, workers=3))
    assert np.array_equal(single[0], pooled[0])
    assert np.array_equal(single[1], pooled[1])


def test_antithetic_moments_cancel_odd_terms(v1):
    moments = sphere_moments(v1, quad(sample_count=256, antithetic=True, order=12), 14)
    mean = moments["mean"]
    for n in (8, 10, 12, 14):
        assert abs(mean[n]) <= 1e-10 * (1 + np.max(np.abs(mean)))
    assert mean[7] == pytest.approx(1.0)


def test_plain_moments_odd_terms_are_noise(v1):
    moments = sphere_moments(v1, quad(sample_count=512, order=12), 14)
    for n in (8, 10, 12):
        assert abs(moments["mean"][n]) <= 3 * moments["stderr"][n] + 1e-12


def test_area_series_matches_sampled_area(v1):
    config = quad(sample_count=512, antithetic=True, order=20)
    moments = sphere_moments(v1, config, 25)
    for t in (0.25, 0.5, 1.0):
        direct, _ = sphere_area(v1, t, config)
        series = area_series(v1, t, 12, config, moments=moments)
        assert series == pytest.approx(direct, rel=1e-2)
    volume = ball_volume_series(v1, 0.5, 12, config, moments=moments)
    assert volume == pytest.approx(ball_volume(v1, 0.5, quad(sample_count=512, antithetic=True, order=20, nodes=21)), rel=1e-2)


def test_area_series_needs_enough_moments(v1):
    config = quad(sample_count=64, order=8)
    with pytest.raises(SpecError):
        sphere_moments(v1, config, 20)


def test_quadrature_config_validation():
    with pytest.raises(ValidationError):
        QuadratureConfig(sample_count=0)
    with pytest.raises(ValidationError):
        QuadratureConfig(t_integrator="trapezoid")
    assert QuadratureConfig(nodes=7).node_count() == 7


def test_default_order_reaches_pi(v1, su2, rng):
    config = QuadratureConfig(sample_count=64, seed=3, workers=1)
    for spec in (v1, su2):
        v = random_unit(rng, spec.dim_m)
        for t in np.linspace(0.5, math.pi, 6):
            assert theta(spec, v, t) > 0.0
        area, stderr = sphere_area(spec, 3.0, config)
        assert area > 0.0 and stderr >= 0.0
    area, _ = sphere_area(su2, math.pi, config)
    assert area == pytest.approx(16 * math.pi, rel=1e-8)
    rows = volume_table(v1, [0.0, 1.0, 2.0, 3.0], QuadratureConfig(sample_count=32, seed=5, nodes=31, workers=1))
    assert [row.volume for row in rows] == sorted(row.volume for row in rows)


def test_statistics_survive_a_large_common_offset():
    config = quad(sample_count=2 * BLOCK_SIZE + 37)
    U = sample_directions(config, 7)
    offset = 1e8

    def evaluate(block_U):
        return offset + 1e-3 * block_U[:, :2]

    mean, stderr = _sphere_statistics(flat_spec(7), config, evaluate)
    values = offset + 1e-3 * U[:, :2]
    expected = np.std(values - offset, axis=0, ddof=1) / math.sqrt(len(U))
    assert np.allclose(mean - offset, np.mean(values - offset, axis=0), atol=1e-6)
    assert np.allclose(stderr, expected, rtol=1e-6)
