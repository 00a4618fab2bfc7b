import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dprgda.core import (AlgoParams, BallProjection, ParameterError, PrivacyBudget, RandomSource,
                         Unconstrained, project_y, projector_from_dict, sample_batch, sample_uniform_ball)
from dprgda.problems import value_quadratic

vec2 = arrays(np.float64, 2, elements=st.floats(-1e3, 1e3, allow_nan=False))


def test_identity_projection():
    oracle = value_quadratic(np.eye(2), dim_y=2)
    np.testing.assert_array_equal(project_y(oracle, np.array([1.0, -2.0])), [1.0, -2.0])


def test_ball_projection_examples():
    P = BallProjection(1.0)
    np.testing.assert_allclose(P(np.array([3.0, 4.0])), [0.6, 0.8], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(P(np.array([0.3, 0.4])), [0.3, 0.4])


@given(vec2, vec2)
def test_ball_projection_idempotent_nonexpansive(a, b):
    P = BallProjection(1.0, center=np.array([0.5, -0.5]))
    pa, pb = P(a), P(b)
    np.testing.assert_allclose(P(pa), pa, atol=1e-12)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-9
    assert np.linalg.norm(pa - P.center) <= 1.0 + 1e-12


def test_projector_roundtrip():
    for P in (Unconstrained(), BallProjection(2.0, center=np.array([1.0, 0.0]))):
        Q = projector_from_dict(P.to_dict())
        y = np.array([5.0, 5.0])
        np.testing.assert_allclose(Q(y), P(y))


def test_ball_zero_radius():
    rs = RandomSource(0)
    np.testing.assert_array_equal(sample_uniform_ball(rs, 4, 0.0), np.zeros(4))


def test_ball_mean_norm_dim2():
    gen = np.random.default_rng(0)
    norms = [np.linalg.norm(sample_uniform_ball(gen, 2, 1.0)) for _ in range(100_000)]
    assert abs(np.mean(norms) - 2 / 3) < 0.01


def test_ball_volume_fraction_dim3():
    gen = np.random.default_rng(1)
    norms = np.array([np.linalg.norm(sample_uniform_ball(gen, 3, 2.0)) for _ in range(100_000)])
    assert abs(np.mean(norms <= 1.0) - 1 / 8) < 0.01
    assert norms.max() <= 2.0


def test_streams_are_independent_and_reproducible():
    a, b = RandomSource(5), RandomSource(5)
    a.noise.standard_normal(10)  # consuming one stream leaves the others untouched
    np.testing.assert_array_equal(a.perturbation.random(3), b.perturbation.random(3))
    b.noise.standard_normal(10)
    np.testing.assert_array_equal(a.noise.random(3), b.noise.random(3))
    assert not np.array_equal(RandomSource(5).noise.random(3), RandomSource(6).noise.random(3))


def test_sample_batch():
    rs = RandomSource(0)
    np.testing.assert_array_equal(sample_batch(rs, 5, 5), np.arange(5))
    idx = sample_batch(rs, 100, 30)
    assert len(set(idx.tolist())) == 30 and idx.min() >= 0 and idx.max() < 100


def test_params_validation():
    AlgoParams().validate(400)
    with pytest.raises(ParameterError):
        AlgoParams(lam=0.0).validate()
    with pytest.raises(ParameterError):
        AlgoParams(S1=500).validate(400)
    with pytest.raises(ParameterError):
        AlgoParams(t_thres=0).validate()
    with pytest.raises(ParameterError):
        AlgoParams(alpha=-1).validate()


def test_budget():
    b = PrivacyBudget(2.0, 1e-6)
    assert b.private and not PrivacyBudget.disabled().private
    with pytest.raises(ParameterError):
        PrivacyBudget(1.0, 1.0)
    with pytest.raises(ValueError):
        b.record("x", 0.1, 1e-8, -1)
