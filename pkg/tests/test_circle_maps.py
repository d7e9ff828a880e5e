"""
Tests de la familia senoidal, composicion por palabras, arcos y puntos fijos
"""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.circle_maps import (
    Arc,
    SineFamily,
    arc_contains,
    arc_image,
    arcs_disjoint,
    build_family,
    circle_distance,
    eval_word,
    find_attracting_fixed_point,
    overlap_report,
    word_derivative,
    word_log_derivative,
    wrap,
)
from src.errors import ConditionViolation, NoContraction


def test_family_rejects_non_diffeomorphism():
    with pytest.raises(ValueError):
        SineFamily({1: (0.0, 1.0), 2: (0.1, 0.2)})
    with pytest.raises(ValueError):
        SineFamily({1: (0.0, 0.5), 3: (0.1, 0.2)})
    with pytest.raises(ValueError):
        build_family("tent", {1: (0.0, 0.5)})


def test_reference_symbol_one_fixed_point(family):
    assert circle_distance(family.eval_symbol(1, 0.07), 0.07) < 1e-10
    assert family.derivative(1, 0.07) == pytest.approx(0.2, abs=1e-8)
    assert family.eval_symbol(2, 0.0) == 0.0


def test_wrap_scalar_and_array():
    assert wrap(1.25) == 0.25
    assert wrap(-0.25) == 0.75
    assert np.allclose(wrap(np.array([-0.5, 1.5, 2.0])), [0.5, 0.5, 0.0])
    assert circle_distance(0.95, 0.05) == pytest.approx(0.1)


def test_word_derivative_against_finite_differences(family):
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        word = rng.integers(1, 3, size=rng.integers(1, 4)).tolist()
        x = float(rng.random())
        forward = eval_word(family, word, wrap(x + h))
        backward = eval_word(family, word, wrap(x - h))
        numeric = (wrap(forward - backward + 0.5) - 0.5) / (2 * h)
        exact = word_derivative(family, word, x)
        assert abs(numeric - exact) <= 1e-6 * abs(exact)


@given(
    st.lists(st.integers(1, 2), min_size=1, max_size=40),
    st.lists(st.integers(1, 2), min_size=1, max_size=40),
    st.floats(min_value=0.0, max_value=0.999),
)
def test_composition_coherence(family, u, v, x):
    joint = eval_word(family, u + v, x)
    staged = eval_word(family, v, eval_word(family, u, x))
    assert circle_distance(joint, staged) < 1e-12

    log_joint = word_log_derivative(family, u + v, x)
    log_staged = word_log_derivative(family, u, x) + word_log_derivative(family, v, eval_word(family, u, x))
    assert abs(log_joint - log_staged) < 1e-10 * max(1.0, abs(log_joint))


def test_eval_word_array_matches_scalar(family):
    xs = np.linspace(0.0, 0.99, 17)
    word = [2, 1, 1, 2]
    out = eval_word(family, word, xs)
    for x, y in zip(xs, out):
        assert circle_distance(eval_word(family, word, float(x)), float(y)) < 1e-13


def test_long_word_log_derivative_does_not_underflow(family):
    # 5000 aplicaciones del simbolo 1 cerca de su punto fijo: derivada ~ 0.2^5000
    log_d = word_log_derivative(family, [1] * 5000, 0.07)
    assert math.isfinite(log_d)
    assert log_d == pytest.approx(5000 * math.log(0.2), rel=1e-6)


def test_arc_basics():
    arc = Arc.centered(0.0, 0.2)
    assert arc.anchor == pytest.approx(0.9)
    assert arc.center == pytest.approx(0.0, abs=1e-15) or arc.center == pytest.approx(1.0)
    assert arc.contains_point(0.05)
    assert arc.contains_point(0.95)
    assert not arc.contains_point(0.5)
    with pytest.raises(ValueError):
        Arc(0.0, 1.5)


def test_arc_contains():
    outer = Arc.centered(0.0, 0.2)
    assert arc_contains(outer, Arc.centered(0.02, 0.05))
    assert not arc_contains(outer, Arc.centered(0.09, 0.05))
    assert arc_contains(Arc(0.0, 1.0), Arc(0.3, 0.5))


def test_arc_image_contracts(family):
    J0 = Arc.centered(0.0, 0.2)
    image = arc_image(family, (2,), J0)
    assert arc_contains(J0, image)
    assert image.length < J0.length
    with pytest.raises(ValueError):
        arc_image(family, (2,), Arc(0.0, 1.0))


def test_overlap_report():
    disjoint = overlap_report(np.array([0.1, 0.3, 0.8]), np.array([0.1, 0.1, 0.1]))
    assert disjoint.disjoint
    assert disjoint.min_gap == pytest.approx(0.1)

    overlapping = overlap_report(np.array([0.1, 0.15]), np.array([0.1, 0.1]))
    assert overlapping.failures == 1
    assert overlapping.worst_overlap == pytest.approx(0.05)

    # Un arco que cruza 0 toca al que empieza en 0
    across = overlap_report(np.array([0.9, 0.0]), np.array([0.1, 0.05]))
    assert not across.disjoint
    assert across.touching == 1

    # Cruza 0 y solapa al que empieza en 0: un solo contacto
    wrapped = overlap_report(np.array([0.9, 0.0]), np.array([0.15, 0.1]))
    assert wrapped.touching == 1
    assert wrapped.failures == 1
    assert wrapped.unresolved == 0
    assert wrapped.worst_overlap == pytest.approx(0.05)

    tiny = overlap_report(np.array([0.1, 0.2]), np.array([0.1 + 1e-13, 0.1]), tolerance=1e-10)
    assert tiny.failures == 0 and tiny.unresolved == 1


def test_arcs_disjoint_touching_counts():
    assert arcs_disjoint([Arc(0.1, 0.1), Arc(0.3, 0.1)])
    assert not arcs_disjoint([Arc(0.1, 0.1), Arc(0.2, 0.1)])


def test_fixed_point_of_reference_stage_zero(family):
    fixed = find_attracting_fixed_point(family, (2,), Arc.centered(0.0, 0.2))
    assert circle_distance(fixed.q, 0.0) < 1e-12
    # sup de la derivada en la grilla: extremos de J_0
    assert fixed.c == pytest.approx(1 - 0.62832 * math.cos(0.2 * math.pi), rel=1e-9)
    q, c = fixed
    assert c < 1.0


def test_fixed_point_two_symbol_word(family):
    fixed = find_attracting_fixed_point(family, "22", Arc.centered(0.0, 0.2))
    assert circle_distance(fixed.q, 0.0) < 1e-12
    edge = 1 - 0.62832 * math.cos(0.2 * math.pi)
    inner = 1 - 0.62832 * math.cos(2 * math.pi * family.eval_symbol(2, 0.1))
    assert fixed.c == pytest.approx(edge * inner, rel=1e-6)


def test_repelling_region_raises(family):
    with pytest.raises(NoContraction):
        find_attracting_fixed_point(family, (2,), Arc.centered(0.5, 0.2))
    assert issubclass(NoContraction, ConditionViolation)


def test_identity_and_rotation_do_not_contract():
    identity = SineFamily({1: (0.0, 0.0), 2: (0.0, 0.0)})
    with pytest.raises(NoContraction):
        find_attracting_fixed_point(identity, (1,), Arc.centered(0.3, 0.2))
    rotation = SineFamily({1: (0.3, 0.0), 2: (0.3, 0.0)})
    with pytest.raises(NoContraction):
        find_attracting_fixed_point(rotation, (1, 2), Arc.centered(0.3, 0.2))


@pytest.mark.parametrize("word", [(2,), (1, 2), (2, 2, 1), (1, 1, 2, 2)])
def test_image_of_sub_arc_is_no_longer(family, word):
    J0 = Arc.centered(0.0, 0.2)
    whole = arc_image(family, word, J0)
    for center in (-0.05, 0.0, 0.04):
        part = arc_image(family, word, Arc.centered(center, 0.08))
        assert part.length <= whole.length + 1e-15
