from collections import Counter

import numpy as np
import pytest

from graphfkt.atlas_graph import build_graph, gft_basis
from graphfkt.errors import DataError, DimensionMismatchError, UsageError
from graphfkt.fkt import fit_fkt
from graphfkt.spectra import Label, subject_expectancy
from graphfkt.synthetic import (
    SyntheticSpec,
    default_planted_modes,
    generate_synthetic,
    permute_labels,
    planted_templates,
    preset_spec,
    synthetic_atlas,
)


def _basis(r, seed=0):
    return gft_basis(build_graph(synthetic_atlas(r, seed=seed), "knn", K=2))


def _fit(subjects, basis, m=1):
    expectancies = [subject_expectancy(s.X, basis)[1] for s in subjects]
    return fit_fkt(expectancies, [s.label for s in subjects]).with_dimensions(m)


class TestGenerator:
    def test_class_count_rounds_alpha(self):
        spec = preset_spec("none", r=4, n_subjects=10, T=5, alpha_asd=0.4)
        subjects = generate_synthetic(spec, _basis(4))
        assert sum(s.label is Label.ASD for s in subjects) == 4
        assert [s.id for s in subjects[:2]] == ["synth-0001", "synth-0002"]

    def test_seeded_output_is_identical(self):
        spec = preset_spec("strong", r=6, n_subjects=8, T=12, seed=3)
        a = generate_synthetic(spec, _basis(6))
        b = generate_synthetic(spec, _basis(6))
        assert [s.label for s in a] == [s.label for s in b]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.X, y.X)

    def test_non_psd_template_rejected(self):
        bad = np.diag([1.0, -1.0, 1.0])
        spec = SyntheticSpec(r=3, n_subjects=4, T=5, alpha_asd=0.5, template_asd=bad, template_nt=np.eye(3))
        with pytest.raises(DataError, match="non-psd"):
            generate_synthetic(spec, _basis(3))

    def test_basis_size_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            generate_synthetic(preset_spec("none", r=5, n_subjects=4, T=5), _basis(6))

    def test_unknown_preset(self):
        with pytest.raises(UsageError):
            preset_spec("medium", r=5, n_subjects=4, T=5)

    def test_planted_templates(self):
        templates = planted_templates(5, 1, 3, 20.0)
        assert templates[Label.ASD][1, 1] == 21.0
        assert templates[Label.NT][3, 3] == 21.0
        assert templates[Label.ASD][3, 3] == 1.0
        with pytest.raises(UsageError):
            planted_templates(5, 5, 1, 1.0)

    def test_permuted_labels_keep_signals_and_counts(self):
        subjects = generate_synthetic(preset_spec("weak", r=4, n_subjects=12, T=6, seed=1), _basis(4))
        shuffled = permute_labels(subjects, seed=2)
        assert Counter(s.label for s in shuffled) == Counter(s.label for s in subjects)
        for a, b in zip(subjects, shuffled):
            np.testing.assert_array_equal(a.X, b.X)

    def test_synthetic_atlas_names(self):
        atlas = synthetic_atlas(5, seed=4)
        assert atlas.names == ["ROI1", "ROI2", "ROI3", "ROI4", "ROI5"]


class TestPlantedRecovery:
    def test_dominant_rows_peak_on_planted_modes(self):
        r = 10
        mode_asd, mode_nt = default_planted_modes(r)
        basis = _basis(r)
        recovered = 0
        for seed in range(100):
            spec = preset_spec("strong", r=r, n_subjects=40, T=100, noise=0.0, seed=seed)
            model = _fit(generate_synthetic(spec, basis), basis)
            if (int(np.argmax(np.abs(model.P[model.dom_asd[0]]))) == mode_asd
                    and int(np.argmax(np.abs(model.P[model.dom_nt[0]]))) == mode_nt):
                recovered += 1
        assert recovered >= 99

    def test_identical_templates_give_balanced_eigenvalues(self):
        r = 6
        basis = _basis(r)
        spec = SyntheticSpec(r=r, n_subjects=60, T=300, alpha_asd=0.5,
                             template_asd=np.eye(r), template_nt=np.eye(r), seed=5)
        model = _fit(generate_synthetic(spec, basis), basis)
        np.testing.assert_allclose(model.lambda_asd[1:], 1.0, atol=0.25)
