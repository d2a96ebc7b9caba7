import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vquemodes import svr

from _svr_oracle import full_coefficients, kernel_matrix, kkt_violation, qp_dual


def _sin_data(n=50):
    x = np.linspace(0, 2 * np.pi, n)[:, None]
    return x, np.sin(x[:, 0])


def _feasible(model):
    assert np.all(np.abs(model.dual_coeffs) <= model.C + 1e-9)
    assert abs(model.dual_coeffs.sum()) < 1e-6 * model.C


def test_sin_toy_matches_qp_reference():
    x, z = _sin_data()
    model = svr.train(svr.TrainingSet(x, z), C=10, epsilon=0.01, tol=1e-6)
    K = kernel_matrix(model, x)
    coef = full_coefficients(model, len(z))
    ref_obj, _ = qp_dual(K, z, 10, 0.01)
    assert svr.dual_objective(coef, K, z, 0.01) - ref_obj < 1e-6
    assert np.sqrt(np.mean((svr.predict(model, x) - z) ** 2)) < 0.05
    _feasible(model)
    assert kkt_violation(model, x, z, coef) < 1e-5


@pytest.mark.parametrize("seed", range(3))
def test_random_problems_match_qp_and_satisfy_kkt(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(40, 3))
    z = np.sin(x[:, 0]) + 0.3 * x[:, 1] ** 2 + rng.normal(0, 0.1, 40)
    model = svr.train(svr.TrainingSet(x, z), C=5.0, tol=1e-6)
    K = kernel_matrix(model, x)
    coef = full_coefficients(model, 40)
    ref_obj, _ = qp_dual(K, z, 5.0, model.epsilon)
    assert abs(svr.dual_objective(coef, K, z, model.epsilon) - ref_obj) < 1e-6
    _feasible(model)
    assert kkt_violation(model, x, z, coef) < 1e-5


def test_default_hyperparameters():
    rng = np.random.default_rng(3)
    x = rng.uniform(-5, 50, size=(30, 37))
    z = rng.normal(size=30)
    m = svr.train(svr.TrainingSet(x, z))
    assert m.C == 100.0
    assert m.epsilon == pytest.approx(0.1 * np.std(z))
    xn = (x - x.min(0)) / (x.max(0) - x.min(0))
    assert m.gamma == pytest.approx(1 / (37 * np.var(xn)))
    _feasible(m)


def test_constant_labels_give_bias_only_model():
    x = np.random.default_rng(0).normal(size=(20, 4))
    m = svr.train(svr.TrainingSet(x, np.full(20, 7.0)))
    assert m.constant and len(m.dual_coeffs) == 0
    assert np.all(svr.predict(m, np.random.default_rng(1).normal(size=(10, 4))) == 7.0)


def test_duplicated_rows_with_half_C_give_same_predictions():
    # each row twice is the same problem with the per-row bound doubled
    x, z = _sin_data(30)
    a = svr.train(svr.TrainingSet(x, z), C=4.0, epsilon=0.05, gamma=2.0, tol=1e-9)
    b = svr.train(svr.TrainingSet(np.vstack([x, x]), np.concatenate([z, z])),
                  C=2.0, epsilon=0.05, gamma=2.0, tol=1e-9)
    probe = np.linspace(-0.5, 7, 101)[:, None]
    np.testing.assert_allclose(svr.predict(a, probe), svr.predict(b, probe), atol=1e-6)


def test_row_permutation_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 2))
    z = x[:, 0] - np.cos(x[:, 1])
    perm = rng.permutation(40)
    a = svr.train(svr.TrainingSet(x, z), C=3.0, tol=1e-9)
    b = svr.train(svr.TrainingSet(x[perm], z[perm]), C=3.0, tol=1e-9)
    probe = rng.normal(size=(50, 2))
    np.testing.assert_allclose(svr.predict(a, probe), svr.predict(b, probe), atol=1e-6)


def test_prediction_equals_explicit_kernel_sum():
    x, z = _sin_data()
    m = svr.train(svr.TrainingSet(x, z), C=10, epsilon=0.01)
    for q in (0.3, 2.0, 5.5):
        xq = (q - m.norm_min[0]) * m.norm_scale[0]
        total = m.bias
        for c, sv in zip(m.dual_coeffs, m.support_vectors):
            total += c * np.exp(-m.gamma * (xq - sv[0]) ** 2)
        assert svr.predict(m, [q]) == pytest.approx(total, abs=1e-12)


def test_free_support_vectors_sit_on_the_tube():
    x, z = _sin_data()
    m = svr.train(svr.TrainingSet(x, z), C=10, epsilon=0.05, tol=1e-6)
    free = (np.abs(m.dual_coeffs) > 1e-8) & (np.abs(m.dual_coeffs) < m.C - 1e-8)
    assert free.any()
    for idx in m.support_index[free]:
        assert abs(svr.predict(m, x[idx]) - z[idx]) <= m.epsilon + 1e-5


def test_zero_support_vectors_predict_bias():
    m = svr.SvrModel(np.zeros((0, 3)), np.zeros(0), 1.25, 1.0, 1.0, 0.1,
                     np.zeros(3), np.ones(3))
    assert svr.predict(m, [1.0, 2.0, 3.0]) == 1.25


def test_objective_history_is_monotone():
    x, z = _sin_data()
    m = svr.train(svr.TrainingSet(x, z), C=10, epsilon=0.01, debug=True)
    h = np.array(m.objective_history)
    assert len(h) == m.n_iter > 0
    # minimisation form: never increases (the maximisation form never decreases)
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[1:]).max())
    K = kernel_matrix(m, x)
    assert h[-1] == pytest.approx(svr.dual_objective(full_coefficients(m, 50), K, z, 0.01), rel=1e-9)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(60, 37))
    z = x[:, 0] + x[:, 36] ** 2
    m = svr.train(svr.TrainingSet(x, z))
    svr.save_model(m, tmp_path / "m.svr")
    back = svr.load_model(tmp_path / "m.svr")
    probe = rng.normal(size=(100, 37))
    assert np.array_equal(svr.predict(m, probe), svr.predict(back, probe))
    assert back.gamma == m.gamma and back.bias == m.bias


def test_model_file_corruption_and_version(tmp_path):
    x, z = _sin_data(20)
    svr.save_model(svr.train(svr.TrainingSet(x, z)), tmp_path / "m.svr")
    text = (tmp_path / "m.svr").read_text()
    (tmp_path / "trunc.svr").write_text(text[: len(text) // 2])
    with pytest.raises(svr.ChecksumError):
        svr.load_model(tmp_path / "trunc.svr")
    (tmp_path / "flip.svr").write_text(text.replace("bias ", "bias 1", 1))
    with pytest.raises(svr.ChecksumError):
        svr.load_model(tmp_path / "flip.svr")
    (tmp_path / "old.svr").write_text(text.replace("vquemodes-svr v1", "vquemodes-svr v0", 1))
    with pytest.raises(svr.VersionError):
        svr.load_model(tmp_path / "old.svr")
    (tmp_path / "junk.svr").write_text("hello\n")
    with pytest.raises(svr.ModelFormatError):
        svr.load_model(tmp_path / "junk.svr")


def test_input_errors():
    x, z = _sin_data(10)
    m = svr.train(svr.TrainingSet(x, z))
    with pytest.raises(ValueError):
        svr.predict(m, [1.0, 2.0])
    with pytest.raises(ValueError):
        svr.predict(m, [np.nan])
    with pytest.raises(ValueError):
        svr.TrainingSet([[np.inf]], [1.0])
    with pytest.raises(ValueError):
        svr.TrainingSet([[1.0], [2.0]], [1.0])
    with pytest.raises(ValueError):
        svr.train(svr.TrainingSet([[1.0]], [1.0]))
    with pytest.raises(ValueError):
        svr.train(svr.TrainingSet(x, z), C=0)


def test_constant_feature_column_normalises_to_zero():
    x = np.column_stack([np.linspace(0, 1, 20), np.full(20, 3.0)])
    m = svr.train(svr.TrainingSet(x, x[:, 0] ** 2))
    assert m.norm_scale[1] == 0
    assert np.all(m.normalise(x)[:, 1] == 0)


def test_grid_search_picks_from_grid():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(60, 2))
    z = np.sin(2 * x[:, 0]) + x[:, 1]
    C, g = svr.grid_search(svr.TrainingSet(x, z), Cs=(1.0, 10.0, 100.0), gammas=(0.1, 1.0, 10.0))
    assert C in (1.0, 10.0, 100.0) and g in (0.1, 1.0, 10.0)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(5, 25), C=st.floats(0.1, 50), seed=st.integers(0, 10_000))
def test_feasibility_and_kkt_property(n, C, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    z = rng.normal(size=n)
    m = svr.train(svr.TrainingSet(x, z), C=C, tol=1e-6)
    _feasible(m)
    assert kkt_violation(m, x, z, full_coefficients(m, n)) < 1e-4 * max(1.0, C)
