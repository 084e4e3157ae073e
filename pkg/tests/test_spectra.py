import logging

import numpy as np
import pytest

from graphfkt.atlas_graph import gft_basis, identity_basis
from graphfkt.errors import DataError, DimensionMismatchError, SingleClassError
from graphfkt.spectra import (
    ExpectancyKind,
    Label,
    NormalizedSpectra,
    SubjectRecord,
    class_means,
    gft_coefficients,
    joint_expectancy,
    normalize_columns,
    subject_expectancy,
)

from .conftest import path_graph, random_subjects


def _expectancies(subjects, basis):
    return [(subject_expectancy(s.X, basis)[1], s.label) for s in subjects]


class TestGftCoefficients:
    def test_constant_signal_lands_on_mode_zero(self):
        basis = gft_basis(path_graph(5))
        X = np.full((5, 3), 2.0)
        X_hat = gft_coefficients(X, basis)
        np.testing.assert_allclose(X_hat[0], 2.0 * np.sqrt(5), rtol=1e-12)
        np.testing.assert_allclose(X_hat[1:], 0.0, atol=1e-12)

    def test_eigenvector_signal_is_unit_vector(self):
        basis = gft_basis(path_graph(5))
        X_hat = gft_coefficients(basis.eigenvectors[:, [3]], basis)
        np.testing.assert_allclose(X_hat[:, 0], np.eye(5)[3], atol=1e-12)

    def test_matches_explicit_sum(self, small_basis):
        X = np.random.default_rng(2).standard_normal((12, 3))
        V = small_basis.eigenvectors
        expected = np.zeros((12, 3))
        for k in range(12):
            for t in range(3):
                expected[k, t] = sum(V[i, k] * X[i, t] for i in range(12))
        np.testing.assert_allclose(gft_coefficients(X, small_basis), expected, atol=1e-12)

    def test_row_count_mismatch(self, small_basis):
        with pytest.raises(DimensionMismatchError):
            gft_coefficients(np.zeros((11, 4)), small_basis)


class TestNormalizeColumns:
    def test_two_mode_column(self):
        Y = normalize_columns(np.array([[1.0], [3.0]])).Y
        np.testing.assert_allclose(Y[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)

    def test_normalized_column_is_unchanged(self):
        column = np.array([[1.0], [-1.0], [0.0]]) / np.sqrt(2)
        np.testing.assert_allclose(normalize_columns(column).Y, column, atol=1e-12)

    def test_columns_are_centred_and_unit_norm(self):
        Y = normalize_columns(np.random.default_rng(3).standard_normal((7, 40))).Y
        np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(Y, axis=0), 1.0, atol=1e-12)

    def test_constant_column_dropped_with_warning(self, caplog):
        X_hat = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 6.0]])
        with caplog.at_level(logging.WARNING, logger="graphfkt"):
            spectra = normalize_columns(X_hat)
        assert spectra.dropped_columns == (0,)
        assert spectra.T == 1
        assert "degenerate" in caplog.text

    def test_all_columns_degenerate(self):
        with pytest.raises(DataError, match="no informative time-points"):
            normalize_columns(np.ones((4, 6)))


class TestJointExpectancy:
    def test_single_column_is_outer_product(self):
        y = np.array([1.0, -2.0, 1.0]) / np.sqrt(6)
        S = joint_expectancy(NormalizedSpectra(y[:, None])).S
        np.testing.assert_allclose(S, np.outer(y, y), atol=1e-15)

    def test_matches_explicit_sum(self):
        Y = normalize_columns(np.random.default_rng(4).standard_normal((4, 6))).Y
        expected = np.zeros((4, 4))
        for t in range(6):
            expected += np.outer(Y[:, t], Y[:, t])
        expected /= np.trace(expected)
        np.testing.assert_allclose(joint_expectancy(NormalizedSpectra(Y)).S, expected, atol=1e-14)

    def test_symmetric_psd_unit_trace(self, small_basis):
        for seed in range(10):
            X = np.random.default_rng(seed).standard_normal((12, 20))
            S = subject_expectancy(X, small_basis)[1].S
            np.testing.assert_array_equal(S, S.T)
            assert np.trace(S) == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(S).min() > -1e-12

    def test_constant_vector_is_annihilated(self, small_basis):
        X = np.random.default_rng(5).standard_normal((12, 30))
        S = subject_expectancy(X, small_basis)[1].S
        np.testing.assert_allclose(S @ np.ones(12), 0.0, atol=1e-12)

    def test_scale_invariance(self, small_basis):
        X = np.random.default_rng(6).standard_normal((12, 30))
        a = subject_expectancy(X, small_basis)[1].S
        b = subject_expectancy(3.7 * X, small_basis)[1].S
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestClassMeans:
    def test_class_fraction_and_mixture(self):
        subjects = random_subjects(5, n_asd=4, n_nt=6, T=12, seed=0)
        means = class_means(_expectancies(subjects, identity_basis(5)))
        assert means.alpha_asd == pytest.approx(0.4)
        np.testing.assert_allclose(means.S_bar.S, 0.4 * means.S_asd.S + 0.6 * means.S_nt.S, atol=1e-12)
        assert means.S_bar.kind is ExpectancyKind.GLOBAL_MEAN
        assert means.S_asd.kind is ExpectancyKind.CLASS_MEAN_ASD

    def test_two_subjects(self):
        subjects = random_subjects(4, n_asd=1, n_nt=1, T=8, seed=1)
        pairs = _expectancies(subjects, identity_basis(4))
        means = class_means(pairs)
        assert means.alpha_asd == 0.5
        np.testing.assert_allclose(means.S_bar.S, (pairs[0][0].S + pairs[1][0].S) / 2, atol=1e-15)

    def test_means_are_psd_unit_trace(self):
        subjects = random_subjects(6, n_asd=5, n_nt=5, T=20, seed=2)
        means = class_means(_expectancies(subjects, identity_basis(6)))
        for S in (means.S_bar.S, means.S_asd.S, means.S_nt.S):
            assert np.trace(S) == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(S).min() > -1e-12
        np.testing.assert_allclose(means.S_bar.S @ np.ones(6), 0.0, atol=1e-12)

    def test_single_class_rejected(self):
        subjects = random_subjects(4, n_asd=3, n_nt=0, T=8, seed=3)
        with pytest.raises(SingleClassError, match="both classes required"):
            class_means(_expectancies(subjects, identity_basis(4)))

    def test_empty_rejected(self):
        with pytest.raises(SingleClassError):
            class_means([])


class TestRecords:
    def test_label_parse(self):
        assert Label.parse(" asd ") is Label.ASD
        with pytest.raises(DataError):
            Label.parse("control")

    def test_subject_needs_two_time_points(self):
        with pytest.raises(DataError):
            SubjectRecord(id="x", label="NT", X=np.zeros((4, 1)))

    def test_subject_rejects_nan(self):
        X = np.zeros((3, 4))
        X[1, 2] = np.nan
        with pytest.raises(DataError):
            SubjectRecord(id="x", label="NT", X=X)
