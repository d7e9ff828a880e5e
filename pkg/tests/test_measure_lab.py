"""
Tests de orbitas empiricas, franjas, ocupacion, desintegracion y generadores
"""
import itertools
from dataclasses import replace

import numpy as np
import pytest

from src.circle_maps import Arc, circle_distance, word_log_derivative, wrap
from src.errors import ConditionViolation, SampleCapExceeded
from src.measure_lab import (
    OrbitMeasure,
    build_strips,
    disintegration_histogram,
    fiber_spanning_count,
    lyapunov_exponent,
    occupancy,
    occupancy_table,
    orbit_fiber_points,
    strip_core,
    strip_length_trend,
    strips_nested,
    weak_star_gap,
)


N_MAX = 12


@pytest.fixture(scope="module")
def orbits(reference_stages, family):
    return {m: orbit_fiber_points(reference_stages, m, family) for m in range(1, N_MAX + 1)}


@pytest.fixture(scope="module")
def table(reference_stages, family, ref_config, orbits):
    measure = ref_config.measure
    return occupancy_table(
        reference_stages, family, N_MAX, theta=float(measure.theta),
        resolution=float(measure.resolution), endpoint_tol=float(measure.endpoint_tol), orbits=orbits,
    )


def test_orbit_closes_on_fixed_point(reference_stages, orbits):
    for m, orbit in orbits.items():
        stage = reference_stages[m]
        assert len(orbit) == stage.pi
        assert orbit.symbols.tolist() == stage.xi.expand().tolist()
        assert circle_distance(float(orbit.points[-1]), stage.q) < 1e-9


def test_orbit_sample_cap(reference_stages, family):
    with pytest.raises(SampleCapExceeded):
        orbit_fiber_points(reference_stages, 10, family, sample_cap=100)


def test_lyapunov_negative_on_stage_orbits(family, orbits):
    for orbit in orbits.values():
        assert lyapunov_exponent(orbit, family) < 0


def test_strip_arc_counts(reference_stages, family):
    for n in range(1, 6):
        strips = build_strips(reference_stages, n, family)
        assert strips.i_count == 3 ** n
        assert strips.arc_count == 3 ** n
        assert strips.j_prime.length <= reference_stages[n].J.length


def test_strip_core_covers_next_arc(reference_stages):
    for n in range(1, 6):
        core = strip_core(reference_stages, n)
        nxt = reference_stages[n + 1].J
        assert core.contains_point(nxt.center)
        assert core.length >= 0.5 * reference_stages[n].J.length


def test_exact_occupancy_all_pass(table):
    assert table.failures() == []
    assert len(table.rows) == N_MAX * (N_MAX + 1) // 2
    for row in table.rows:
        assert row.required == 2 ** row.m
        assert row.count >= row.required
        assert row.proportion >= 0.5


def test_occupancy_monotone_in_strip_level(table):
    diagonal = {row.m: row.proportion for row in table.rows if row.n == row.m}
    for row in table.rows:
        if row.m > row.n:
            assert row.proportion >= diagonal[row.m]


def test_strip_lengths_shrink(reference_stages, family, table):
    trend = strip_length_trend(reference_stages, family, N_MAX, table=table)
    lengths = [row.total_length for row in trend]
    assert [row.n for row in trend] == list(range(1, N_MAX + 1))
    assert all(a > b for a, b in zip(lengths, lengths[1:]))
    assert lengths[-1] / lengths[0] < 0.1
    for row in trend:
        assert row.inf_occupancy >= row.rho_n_max - 1e-15


def test_occupancy_counts_closed_arcs(reference_stages, family, orbits):
    strips = build_strips(reference_stages, 3, family)
    occ = occupancy(orbits[3], strips)
    assert occ.total == reference_stages[3].pi
    assert occ.meets(reference_stages[3].required_count())


@pytest.mark.parametrize("n, eps", list(itertools.product([10, 100, 1000], [0.1, 0.05, 0.01])))
def test_spanning_count_linear_bound(reference_stages, family, n, eps):
    result = fiber_spanning_count(family, reference_stages[6].point, n, eps)
    assert result.verified
    assert result.within_bound
    assert result.bound == n * (int(1 / eps + 1e-9) + 1)
    assert result.test_points >= 10 / eps - 1e-9


def test_spanning_rejects_bad_parameters(reference_stages, family):
    with pytest.raises(ValueError):
        fiber_spanning_count(family, reference_stages[2].point, 10, 0.5)
    with pytest.raises(ValueError):
        fiber_spanning_count(family, reference_stages[2].point, 0, 0.1)


@pytest.mark.parametrize("bins", [4, 16, 64])
def test_conditional_histograms_sum_to_one(orbits, bins):
    report = disintegration_histogram(orbits[8], 2, bins)
    assert report.max_sum_error <= 1e-12
    weights = np.array([c.weight for c in report.cylinders])
    assert abs(weights.sum() - 1.0) <= 1e-12
    weighted = sum(c.weight * c.histogram.sum() for c in report.cylinders)
    assert abs(weighted - 1.0) <= 1e-12
    assert 1.0 / bins - 1e-12 <= report.aggregate_heaviest <= 1.0 + 1e-12


def test_disintegration_small_example():
    orbit = OrbitMeasure.from_points([0.1, 0.1, 0.6, 0.6], [1, 2, 1, 2])
    split = disintegration_histogram(orbit, 0, 2)
    assert len(split.cylinders) == 2
    assert all(c.heaviest_mass == 0.5 for c in split.cylinders)
    assert split.aggregate_heaviest == pytest.approx(0.5)
    whole = disintegration_histogram(orbit, 0, 1)
    assert whole.aggregate_heaviest == pytest.approx(1.0)
    with pytest.raises(ValueError):
        disintegration_histogram(orbit, -1, 2)


def test_weak_star_gap(orbits):
    same = weak_star_gap(orbits[5], orbits[5])
    assert same.value == pytest.approx(0.0, abs=1e-12)
    far = weak_star_gap(orbits[1], orbits[6])
    assert 0.0 < far.value <= 2.0
    back = weak_star_gap(orbits[6], orbits[1])
    assert far.cylinder == pytest.approx(back.cylinder)
    assert far.fourier == pytest.approx(back.fourier)


def test_lyapunov_matches_word_log_derivative(reference_stages, family, orbits):
    for m in range(1, 11):
        stage = reference_stages[m]
        total = len(orbits[m]) * lyapunov_exponent(orbits[m], family)
        assert total == pytest.approx(word_log_derivative(family, stage.xi, stage.q), abs=1e-9)


def test_strip_sets_are_nested(reference_stages, family):
    strips = {n: build_strips(reference_stages, n, family) for n in range(1, N_MAX + 1)}
    for n in range(1, N_MAX):
        assert strips_nested(strips[n], strips[n + 1]), n


def test_table_records_nesting(table):
    assert table.nesting_failures() == []
    for row in table.strips[:-1]:
        assert row.nested_next is True
    assert table.strips[-1].nested_next is None


def test_strip_length_within_arc_count(reference_stages, family):
    for n in range(1, 8):
        strips = build_strips(reference_stages, n, family)
        assert strips.total_length <= strips.arc_count * strips.j_prime.length + 1e-15


def test_core_fallback_only_on_last_strip(table):
    assert table.strips[-1].core_fallback
    assert not any(row.core_fallback for row in table.strips[:-1])


def test_no_residual_endpoint_conflicts(table):
    assert all(row.residual_conflicts == 0 for row in table.strips)


def test_strip_core_rejects_next_arc_outside(reference_stages):
    stages = list(reference_stages)
    shifted = Arc.centered(wrap(stages[2].q + 0.4), stages[3].J.length)
    stages[3] = replace(stages[3], J=shifted)
    with pytest.raises(ConditionViolation):
        strip_core(stages, 2)


def test_uniform_points_spread_over_bins():
    rng = np.random.default_rng(11)
    uniform = OrbitMeasure.from_points(rng.random(20000), rng.integers(1, 3, 20000))
    report = disintegration_histogram(uniform, 0, 64)
    assert report.aggregate_heaviest < 3.0 / 64


def test_reference_orbit_concentrates(orbits):
    report = disintegration_histogram(orbits[N_MAX], 2, 64)
    assert report.aggregate_heaviest >= 0.4
