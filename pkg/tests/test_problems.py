import numpy as np
import pytest

from dprgda import problems
from dprgda.problems import MatrixSensing, generate_matrix_sensing, load_instance, save_instance


def test_benchmark_shape():
    inst = generate_matrix_sensing(np.random.default_rng(0), 20, 20, 3, 400, 0.01)
    assert inst.A.shape == (400, 20, 20) and inst.b.shape == (400,)
    assert inst.dim_x == 120 and inst.dim_y == 400
    assert np.isclose(np.linalg.norm(inst.X_star), 1.0)
    assert np.linalg.matrix_rank(inst.X_star) == 3


def test_rank_rejected():
    with pytest.raises(ValueError):
        generate_matrix_sensing(np.random.default_rng(0), 3, 2, 3, 10)


def test_zero_target_zero_noise():
    inst = generate_matrix_sensing(np.random.default_rng(0), 4, 4, 1, 10, sigma_noise=0.0, scale=0.0)
    np.testing.assert_array_equal(inst.b, np.zeros(10))


def test_sensing_matrix_variance():
    p = q = 10
    inst = generate_matrix_sensing(np.random.default_rng(1), p, q, 1, 1000)  # 10^5 entries
    assert abs(inst.A.var() * p * q - 1) < 0.02


def test_initial_point():
    inst = generate_matrix_sensing(np.random.default_rng(2), 20, 20, 3, 400)
    x0, y0 = inst.initial_point(np.random.default_rng(3))
    assert abs(x0.std() - 0.1) < 0.02 and not y0.any()


def _single(residual):
    A = np.zeros((1, 2, 2))
    A[0, 0, 0] = 1.0
    inst = MatrixSensing(A, [-residual], rank=1)
    return inst, inst.join(np.zeros((2, 1)), np.zeros((2, 1)))


def test_single_measurement_examples():
    inst, x = _single(2.0)
    np.testing.assert_allclose(inst.inner_maximizer(x), [2.0])
    assert inst.value(x) == 2.0


def test_zero_residual():
    inst = generate_matrix_sensing(np.random.default_rng(0), 4, 4, 1, 10, sigma_noise=0.0, scale=0.0)
    x = np.zeros(inst.dim_x)
    np.testing.assert_array_equal(inst.inner_maximizer(x), np.zeros(10))
    assert inst.value(x) == 0.0 and not inst.value_grad(x).any()


def test_inner_first_order_condition():
    inst = generate_matrix_sensing(np.random.default_rng(4), 5, 4, 2, 30)
    gen = np.random.default_rng(5)
    for _ in range(50):
        x = gen.standard_normal(inst.dim_x)
        assert np.linalg.norm(inst.grad(x, inst.inner_maximizer(x))[1]) <= 1e-12


def test_value_gradient_central_differences():
    inst = generate_matrix_sensing(np.random.default_rng(6), 5, 4, 2, 30)
    gen = np.random.default_rng(7)
    h = 1e-6
    for _ in range(20):
        x = gen.standard_normal(inst.dim_x)
        g = inst.value_grad(x)
        fd = np.array([(inst.value(x + h * e) - inst.value(x - h * e)) / (2 * h) for e in np.eye(x.size)])
        assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


def test_envelope_and_maximality():
    inst = generate_matrix_sensing(np.random.default_rng(8), 5, 4, 2, 30)
    gen = np.random.default_rng(9)
    for _ in range(100):
        x, y = gen.standard_normal(inst.dim_x), gen.standard_normal(inst.n)
        phi = inst.value(x)
        assert np.isclose(phi, inst.objective(x, inst.inner_maximizer(x)), rtol=1e-12)
        assert inst.objective(x, y) <= phi + 1e-12


def test_per_sample_mean_matches_full_gradient():
    inst = generate_matrix_sensing(np.random.default_rng(10), 5, 4, 2, 30)
    gen = np.random.default_rng(11)
    x, y = gen.standard_normal(inst.dim_x), gen.standard_normal(inst.n)
    gx, gy = inst.per_sample_grads(x, y, np.arange(inst.n))
    fx, fy = inst.grad(x, y)
    np.testing.assert_allclose(gx.mean(0), fx, atol=1e-12)
    np.testing.assert_allclose(gy.mean(0), fy, atol=1e-12)
    # per-sample squared-residual gradients average to grad Phi
    np.testing.assert_allclose(inst.phi_per_sample_grads(x, np.arange(inst.n)).mean(0), inst.value_grad(x),
                               atol=1e-12)


def test_value_gradient_identity():
    inst = generate_matrix_sensing(np.random.default_rng(12), 5, 4, 2, 30)
    x = np.random.default_rng(13).standard_normal(inst.dim_x)
    np.testing.assert_allclose(inst.value_grad(x), inst.grad(x, inst.inner_maximizer(x))[0], atol=1e-14)


def test_roundtrip(tmp_path):
    inst = generate_matrix_sensing(np.random.default_rng(14), 4, 3, 2, 12)
    back = load_instance(save_instance(inst, tmp_path / "inst.json"))
    np.testing.assert_array_equal(back.A, inst.A)
    np.testing.assert_array_equal(back.b, inst.b)
    assert back.fingerprint() == inst.fingerprint()
    sad = problems.random_quadratic_saddle(np.random.default_rng(0), 2, 2)
    back = load_instance(save_instance(sad, tmp_path / "sad.json"))
    assert back.fingerprint() == sad.fingerprint() and back.n == sad.n


def test_quadratic_saddle():
    sad = problems.random_quadratic_saddle(np.random.default_rng(1), 3, 4, n=10, mu=1.0, L=2.0)
    assert np.isclose(sad.mu, 1.0)
    x = np.array([0.5, -1.0, 2.0])
    assert np.linalg.norm(sad.grad(x, sad.inner_maximizer(x))[1]) <= 1e-12
    with pytest.raises(ValueError):
        problems.QuadraticSaddle(np.eye(2), None, np.eye(2))
