import json

import numpy as np
import pytest

from graphfkt.atlas_graph import build_graph, gft_basis, identity_basis
from graphfkt.data_manager import DataManager, load_timeseries
from graphfkt.errors import DataError, DimensionMismatchError
from graphfkt.fkt import fit_fkt
from graphfkt.harness import TSV_COLUMNS, EvalReport
from graphfkt.phenotypes import PhenotypeRecord
from graphfkt.spectra import Label, subject_expectancy
from graphfkt.tree import fit_tree
from graphfkt.features import FeatureVector

from .conftest import random_subjects


@pytest.fixture
def manager(tmp_path):
    return DataManager(tmp_path)


class TestModelsAndTrees:
    def test_model_round_trip_is_bit_exact(self, manager, tmp_path):
        subjects = random_subjects(6, 4, 4, 15, seed=0)
        basis = identity_basis(6)
        model = fit_fkt([subject_expectancy(s.X, basis)[1] for s in subjects],
                        [s.label for s in subjects]).with_dimensions(2)
        manager.save_model(model, tmp_path / "models" / "model.json")
        restored = manager.load_model(tmp_path / "models" / "model.json")
        np.testing.assert_array_equal(restored.P, model.P)
        np.testing.assert_array_equal(restored.lambda_asd, model.lambda_asd)
        assert restored.dom_nt == model.dom_nt

    def test_tree_round_trip(self, manager, tmp_path):
        rng = np.random.default_rng(1)
        vectors = [FeatureVector(v, ("a", "b")) for v in rng.standard_normal((20, 2))]
        labels = [Label.ASD, Label.NT] * 10
        tree = fit_tree(vectors, labels, 2)
        manager.save_tree(tree, tmp_path / "tree.json")
        assert manager.load_tree(tmp_path / "tree.json").to_dict() == tree.to_dict()

    def test_missing_model_file(self, manager, tmp_path):
        with pytest.raises(DataError, match="does not exist"):
            manager.load_model(tmp_path / "absent.json")

    def test_corrupt_json(self, manager, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            manager.load_model(path)


class TestReports:
    def test_json_and_tsv(self, manager, tmp_path):
        reports = [
            EvalReport(method="ours(knn,K=2)", per_trial_accuracy=(0.9, 1.0), m=3, test_fraction=0.05,
                       comparisons={"sfm m=3": 0.01}),
            EvalReport(method="sfm", per_trial_accuracy=(0.6, 0.7), m=3, test_fraction=0.05),
        ]
        manager.save_reports(reports, tmp_path / "r.json", tmp_path / "r.tsv")

        restored = manager.load_reports(tmp_path / "r.json")
        assert [r.per_trial_accuracy for r in restored] == [(0.9, 1.0), (0.6, 0.7)]

        lines = (tmp_path / "r.tsv").read_text().splitlines()
        assert lines[0].split("\t") == list(TSV_COLUMNS)
        assert lines[1].split("\t")[-1] == "sfm m=3=0.01"

    def test_output_has_no_leftover_temp_files(self, manager, tmp_path):
        report = EvalReport(method="sfm", per_trial_accuracy=(0.5,))
        manager.save_reports([report], tmp_path / "out" / "r.json")
        assert [p.name for p in (tmp_path / "out").iterdir()] == ["r.json"]

    def test_graph_dump(self, manager, tmp_path, small_atlas):
        graph = build_graph(small_atlas, "knn", K=2)
        manager.save_graph(graph, gft_basis(graph), small_atlas, tmp_path / "g.json")
        data = json.loads((tmp_path / "g.json").read_text())
        assert data["graph"] == "knn(K=2)"
        assert data["r"] == 12
        assert len(data["eigenvectors"]) == 12


class TestCohortsAndSignals:
    def test_cohort_keeps_ids_verbatim(self, manager, tmp_path):
        records = [PhenotypeRecord("0050002", Label.ASD), PhenotypeRecord("0050009", Label.NT)]
        manager.save_cohort(records, ["0050009", "0050002"], tmp_path / "cohort.csv")
        assert manager.load_cohort(tmp_path / "cohort.csv") == [("0050009", Label.NT), ("0050002", Label.ASD)]

    def test_timeseries_is_transposed(self, tmp_path):
        path = tmp_path / "s1.txt"
        path.write_text("# t x roi\n1 2 3\n4 5 6\n")
        np.testing.assert_array_equal(load_timeseries(path, 3), [[1, 4], [2, 5], [3, 6]])

    def test_csv_timeseries(self, tmp_path):
        path = tmp_path / "s1.csv"
        path.write_text("1,2\n3,4\n5,6\n")
        assert load_timeseries(path, 2).shape == (2, 3)

    def test_column_mismatch_names_subject(self, tmp_path):
        path = tmp_path / "s7.txt"
        path.write_text("1 2 3\n4 5 6\n")
        with pytest.raises(DimensionMismatchError, match="subject s7"):
            load_timeseries(path, 90)

    def test_missing_subject_file(self, manager, tmp_path):
        with pytest.raises(DataError, match="subject nobody"):
            manager.load_dataset([("nobody", Label.NT)], tmp_path, 3)

    def test_synthetic_dataset_round_trip(self, manager, tmp_path, planted_small):
        atlas, subjects = planted_small
        manager.save_synthetic_dataset(subjects, atlas, tmp_path / "ds")
        loaded_atlas, loaded = manager.load_synthetic_dataset(tmp_path / "ds", workers=2)
        assert loaded_atlas == atlas
        assert [s.id for s in loaded] == [s.id for s in subjects]
        assert [s.label for s in loaded] == [s.label for s in subjects]
        for a, b in zip(subjects, loaded):
            np.testing.assert_array_equal(a.X, b.X)
