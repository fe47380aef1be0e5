"""Tests for kernels and the dual SVM solver."""

import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from learnkit.dataset import from_arrays
from learnkit.errors import DataError, ModelFormatError
from learnkit.svm import (
    KernelKind,
    KernelSpec,
    SvmModel,
    decision_value,
    decision_values,
    dual_objective,
    gram_matrix,
    kernel_eval,
    kkt_residual,
    load_model,
    loo_bound,
    predict,
    save_model,
    train,
)

from conftest import separable_clusters

BOX_C = 1000.0


def brute_force_dual(Q: np.ndarray, y: np.ndarray, box_c: float) -> float:
    """Optimal dual objective by enumerating which multipliers sit at 0, C or between.

    For each assignment the free multipliers solve the stationarity system
    ``Q_FF a_F + Q_FU C + y_F b = 1`` with ``y'a = 0``. Every box-feasible
    solution is a feasible dual point, and the optimum is among them.
    """
    n = len(y)
    best = -np.inf
    for states in itertools.product((0, 1, 2), repeat=n):
        free = [i for i in range(n) if states[i] == 1]
        upper = [i for i in range(n) if states[i] == 2]
        alphas = np.zeros(n)
        alphas[upper] = box_c
        if free:
            m = len(free)
            system = np.zeros((m + 1, m + 1))
            system[:m, :m] = Q[np.ix_(free, free)]
            system[:m, m] = y[free]
            system[m, :m] = y[free]
            rhs = np.zeros(m + 1)
            rhs[:m] = 1.0 - Q[np.ix_(free, upper)].sum(axis=1) * box_c
            rhs[m] = -box_c * y[upper].sum()
            solution = np.linalg.lstsq(system, rhs, rcond=None)[0]
            if not np.allclose(system @ solution, rhs, atol=1e-9):
                continue
            alphas[free] = solution[:m]
        if np.any(alphas < -1e-12) or np.any(alphas > box_c + 1e-12):
            continue
        if abs(y @ alphas) > 1e-9:
            continue
        best = max(best, float(alphas.sum() - 0.5 * alphas @ Q @ alphas))
    return best


def random_problem(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    dim = int(rng.integers(1, 4))
    X = rng.normal(size=(n, dim))
    y = rng.choice([-1, 1], size=n)
    y[0], y[1] = 1, -1
    kernel = KernelSpec.linear() if seed % 2 == 0 else KernelSpec.rbf(0.5)
    return from_arrays(X, y.tolist()), kernel


class TestKernelSpec:
    """Test KernelSpec validation and text form."""

    def test_constructors(self):
        """Test named constructors."""
        assert KernelSpec.linear().kind is KernelKind.LINEAR
        assert KernelSpec.polynomial(3).degree == 3
        assert KernelSpec.rbf(0.25).gamma == 0.25

    @pytest.mark.parametrize(
        "spec", [KernelSpec.linear(), KernelSpec.polynomial(2), KernelSpec.rbf(0.1)]
    )
    def test_text_form(self, spec):
        """Test parse accepts what str produces."""
        assert KernelSpec.parse(str(spec)) == spec

    def test_invalid_parameters(self):
        """Test degree and gamma bounds."""
        with pytest.raises(ValueError):
            KernelSpec.polynomial(0)
        with pytest.raises(ValueError):
            KernelSpec.rbf(0.0)

    def test_parse_garbage(self):
        """Test unknown kernel text."""
        with pytest.raises(ModelFormatError):
            KernelSpec.parse("sigmoid 2")


class TestKernels:
    """Test kernel evaluation."""

    def test_linear(self):
        """Test the dot product."""
        assert kernel_eval(KernelSpec.linear(), [1, 2], [3, 4]) == 11.0

    def test_polynomial(self):
        """Test (x.y + 1)^d."""
        assert kernel_eval(KernelSpec.polynomial(2), [1, 2], [3, 4]) == 144.0

    def test_rbf(self):
        """Test exp(-gamma |x - y|^2)."""
        value = kernel_eval(KernelSpec.rbf(0.5), [0, 0], [1, 1])
        assert value == pytest.approx(np.exp(-1.0), abs=1e-15)

    def test_dimension_mismatch(self):
        """Test vectors of different lengths."""
        with pytest.raises(DataError, match="Dimension mismatch"):
            kernel_eval(KernelSpec.linear(), [1, 2], [1, 2, 3])

    @given(
        X=arrays(
            np.float64,
            st.tuples(st.integers(1, 8), st.integers(1, 4)),
            elements=st.floats(-3, 3),
        ),
        kind=st.sampled_from(["linear", "polynomial 2", "rbf 0.7"]),
    )
    @settings(max_examples=50, deadline=None)
    def test_gram_is_symmetric_psd(self, X, kind):
        """Test every Gram matrix is symmetric positive semidefinite."""
        K = gram_matrix(KernelSpec.parse(kind), X)

        assert np.allclose(K, K.T)
        scale = max(1.0, float(np.abs(K).max()))
        assert np.linalg.eigvalsh(K).min() >= -1e-9 * scale


class TestTrain:
    """Test the dual solver."""

    def test_two_point_fixture(self):
        """Test the analytic two-point problem."""
        ds = from_arrays([[1.0, 0.0], [-1.0, 0.0]], [1, -1])

        model = train(ds, KernelSpec.linear(), box_c=BOX_C)

        assert model.alphas.tolist() == pytest.approx([0.5, 0.5], abs=1e-8)
        assert model.bias == pytest.approx(0.0, abs=1e-8)
        assert dual_objective(model) == pytest.approx(0.5, abs=1e-8)
        assert decision_value(model, [0.5, 0.0]) == pytest.approx(0.5, abs=1e-8)
        assert model.n_support == 2

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_brute_force_oracle(self, seed):
        """Test the dual objective against active-set enumeration."""
        ds, kernel = random_problem(seed)
        model = train(ds, kernel, box_c=BOX_C)

        y = model.labels
        Q = np.outer(y, y) * gram_matrix(kernel, ds.features_matrix())
        expected = brute_force_dual(Q, y, BOX_C)

        assert dual_objective(model) == pytest.approx(
            expected, abs=1e-5 * max(1.0, abs(expected))
        )
        assert kkt_residual(model) <= 1e-6
        assert abs(model.alphas @ y) <= 1e-8
        assert np.all(model.alphas >= 0.0)
        assert np.all(model.alphas <= BOX_C)

    def test_xor_all_support_vectors(self):
        """Test XOR under an RBF kernel needs every point."""
        ds = from_arrays([[0, 0], [1, 1], [0, 1], [1, 0]], [-1, -1, 1, 1])

        model = train(ds, KernelSpec.rbf(1.0))

        assert model.n_support == 4
        assert loo_bound(model) == 1.0
        assert [predict(model, ex.features) for ex in ds] == [-1, -1, 1, 1]

    def test_separable_points_classified(self):
        """Test a hard margin separates separable data."""
        ds = separable_clusters(seed=11, n=20)

        model = train(ds, KernelSpec.linear())

        signs = [predict(model, ex.features) for ex in ds]
        assert signs == model.labels.astype(int).tolist()

    def test_deterministic(self):
        """Test identical input gives identical multipliers."""
        ds = separable_clusters(seed=5, n=12)
        first = train(ds, KernelSpec.rbf(0.5))
        second = train(ds, KernelSpec.rbf(0.5))

        assert np.array_equal(first.alphas, second.alphas)
        assert first.bias == second.bias

    def test_single_class(self):
        """Test training needs both classes."""
        ds = from_arrays([[0.0], [1.0]], [1, 1])
        with pytest.raises(DataError, match="need two classes"):
            train(ds, KernelSpec.linear())

    def test_word_labels(self):
        """Test labels must be +1/-1."""
        ds = from_arrays([[0.0], [1.0]], ["App", "Dys"])
        with pytest.raises(DataError, match="labels must be"):
            train(ds, KernelSpec.linear())

    def test_invalid_box(self):
        """Test box_c must be positive."""
        ds = from_arrays([[0.0], [1.0]], [1, -1])
        with pytest.raises(ValueError):
            train(ds, KernelSpec.linear(), box_c=0.0)

    def test_iteration_cap_warns(self, caplog):
        """Test stopping at the cap is logged."""
        ds = separable_clusters(seed=2, n=10)
        with caplog.at_level(logging.WARNING, logger="learnkit.svm"):
            train(ds, KernelSpec.rbf(0.5), max_iter=1)

        assert "iteration cap" in caplog.text


class TestPredict:
    """Test decision values and prediction."""

    def test_dimension_mismatch(self):
        """Test a query of the wrong length."""
        model = train(from_arrays([[1.0], [-1.0]], [1, -1]), KernelSpec.linear())
        with pytest.raises(DataError, match="Dimension mismatch"):
            decision_value(model, [1.0, 2.0])

    def test_zero_decision_is_positive(self):
        """Test a decision value of exactly zero predicts +1."""
        model = train(from_arrays([[1.0], [-1.0]], [1, -1]), KernelSpec.linear())
        assert decision_value(model, [0.0]) == 0.0
        assert predict(model, [0.0]) == 1

    def test_two_point_decision_value(self):
        """Test f(3, 0) = 3 on the two-point problem."""
        ds = from_arrays([[1.0, 0.0], [-1.0, 0.0]], [1, -1])
        model = train(ds, KernelSpec.linear(), box_c=BOX_C)
        assert decision_value(model, [3.0, 0.0]) == pytest.approx(3.0, abs=1e-8)

    def test_two_point_predictions(self):
        """Test points on either side of the two-point margin."""
        ds = from_arrays([[1.0, 0.0], [-1.0, 0.0]], [1, -1])
        model = train(ds, KernelSpec.linear(), box_c=BOX_C)
        assert predict(model, [2.0, 0.0]) == 1
        assert predict(model, [-2.0, 0.0]) == -1

    def test_vectorised_matches_single(self):
        """Test decision_values row by row."""
        ds = separable_clusters(seed=3, n=10)
        model = train(ds, KernelSpec.polynomial(2))
        X = ds.features_matrix()

        values = decision_values(model, X)

        for row, value in zip(X, values):
            assert decision_value(model, row) == pytest.approx(value, abs=1e-12)


class TestLooBound:
    """Test the support-vector bound on leave-one-out error."""

    def test_empty_support_set_warns(self, caplog):
        """Test a model without support vectors."""
        ds = from_arrays([[1.0], [-1.0]], [1, -1])
        model = SvmModel(np.zeros(2), 0.0, KernelSpec.linear(), ds)

        with caplog.at_level(logging.WARNING, logger="learnkit.svm"):
            assert loo_bound(model) == 0.0
        assert "empty" in caplog.text

    def test_three_of_ten_support_vectors(self):
        """Test ten training points with three support vectors give 0.3."""
        ds = separable_clusters(seed=4, n=10)
        alphas = np.zeros(10)
        alphas[[0, 1, 3]] = [0.75, 0.5, 0.25]
        model = SvmModel(alphas, 0.0, KernelSpec.linear(), ds)

        assert model.n_support == 3
        assert loo_bound(model) == 0.3

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_bounds_leave_one_out_error(self, seed):
        """Test leave-one-out mistakes never exceed the support vectors."""
        rng = np.random.default_rng(seed)
        ds = separable_clusters(seed, n=int(rng.integers(20, 41)))
        kernel = KernelSpec.linear()
        model = train(ds, kernel)

        mistakes = 0
        for i in range(len(ds)):
            rest = ds.subset([j for j in range(len(ds)) if j != i])
            held_out = train(rest, kernel)
            if predict(held_out, ds[i].features) != model.labels[i]:
                mistakes += 1

        assert mistakes / len(ds) <= loo_bound(model)


class TestModelFile:
    """Test save_model and load_model."""

    def test_save_and_load(self, temp_dir):
        """Test a saved model predicts the same."""
        ds = separable_clusters(seed=4, n=8)
        model = train(ds, KernelSpec.rbf(0.5))
        path = temp_dir / "model.svm"

        save_model(model, path)
        loaded = load_model(path)

        assert loaded.kernel == model.kernel
        assert loaded.bias == model.bias
        assert np.array_equal(loaded.alphas, model.alphas)
        assert np.array_equal(
            decision_values(loaded, ds.features_matrix()),
            decision_values(model, ds.features_matrix()),
        )

    def test_truncated(self, temp_dir):
        """Test a file with only a kernel line."""
        path = temp_dir / "short.svm"
        path.write_text("kernel linear\n")

        with pytest.raises(ModelFormatError, match="Truncated"):
            load_model(path)

    def test_bad_params(self, temp_dir):
        """Test a params line missing the bias."""
        path = temp_dir / "bad.svm"
        path.write_text("kernel linear\nparams box_c=1.0 sv_tolerance=1e-06\nattributes x1\n")

        with pytest.raises(ModelFormatError, match="invalid params"):
            load_model(path)
