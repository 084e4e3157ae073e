"""
Experiment harness

Repeated random train/test splits and leave-one-out runs of the full
pipeline (graph basis, spectra, FKT, features, tuned tree), with the GFT
and spatial-filtering baselines, accuracy statistics and Student's t-tests.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from sklearn.model_selection import StratifiedShuffleSplit
from tqdm import tqdm

from .atlas_graph import GftBasis, GraphKind, RoiAtlas, build_graph, gft_basis, identity_basis
from .config import (
    DEFAULT_INNER_FOLDS,
    DEFAULT_TUNING_GRID,
    DEFAULT_WORKERS,
    JSON_FORMAT_VERSION,
    MAX_SPLIT_ATTEMPTS,
)
from .errors import DataError, DimensionMismatchError, SingleClassError, UsageError
from .features import Banding, FeatureVector, fkt_features, gft_baseline_features, project
from .fkt import FktModel, fit_fkt
from .spectra import JointExpectancy, Label, NormalizedSpectra, SubjectRecord, subject_expectancy
from .tree import DecisionTree, fit_tree, predict, tune_min_leaf
from .utils import derive_seeds, format_float

logger = logging.getLogger(__name__)

LOOCV = "loocv"
ALL_DIMENSIONS = "all"

# Test fractions of the training-size sweep
DEFAULT_SWEEP_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)

# Keys that belong to the CLI (file locations), not to the experiment itself
PATH_KEYS = ("atlas", "cohort", "timeseries_dir", "dataset")

TSV_COLUMNS = ("method", "m", "test_fraction", "trials", "mean", "std", "p_values")


class Method(str, Enum):
    OURS = "ours"
    GFT = "gft"
    SFM = "sfm"

    @classmethod
    def parse(cls, value) -> "Method":
        for method in cls:
            if method.value == str(value).strip().lower():
                return method
        raise UsageError(f"unknown method {value!r} (choose from ours, gft, sfm)")


def _parse_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{key}: expected a boolean, got {value!r}")


def _parse_int(key: str, value: Any) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise UsageError(f"{key}: expected an integer, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    method: Method = Method.OURS
    graph: GraphKind = GraphKind.KNN
    k: Optional[int] = 2
    graph_seed: Optional[int] = None
    banding: Banding = Banding.PER_MODE
    m: Union[int, str] = 3
    test_fraction: Union[float, str] = 0.05
    n_trials: int = 10
    seed: int = 0
    tuning_grid: Tuple[int, ...] = DEFAULT_TUNING_GRID
    inner_folds: int = DEFAULT_INNER_FOLDS
    stratify: bool = False
    workers: int = DEFAULT_WORKERS

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        """
        Build a config from ``key = value`` strings (config file plus CLI overrides)

        Unknown keys are rejected; file-location keys are left to the caller.
        """
        kwargs: Dict[str, Any] = {}
        for key, value in values.items():
            if key in PATH_KEYS or value is None:
                continue
            if key == "method":
                kwargs["method"] = Method.parse(value)
            elif key == "graph":
                kwargs["graph"] = GraphKind.parse(value)
            elif key == "k":
                kwargs["k"] = _parse_int(key, value)
            elif key == "graph_seed":
                kwargs["graph_seed"] = _parse_int(key, value)
            elif key == "banding":
                kwargs["banding"] = Banding.parse(value)
            elif key == "m":
                text = str(value).strip().lower()
                kwargs["m"] = ALL_DIMENSIONS if text == ALL_DIMENSIONS else _parse_int(key, value)
            elif key == "test_fraction":
                text = str(value).strip().lower()
                if text == LOOCV:
                    kwargs["test_fraction"] = LOOCV
                else:
                    try:
                        kwargs["test_fraction"] = float(text)
                    except ValueError:
                        raise UsageError(f"test_fraction: expected a fraction or 'loocv', got {value!r}") from None
            elif key in ("trials", "n_trials"):
                kwargs["n_trials"] = _parse_int(key, value)
            elif key == "seed":
                kwargs["seed"] = _parse_int(key, value)
            elif key == "tuning_grid":
                items = value if isinstance(value, (list, tuple)) else str(value).split(",")
                kwargs["tuning_grid"] = tuple(_parse_int(key, v) for v in items if str(v).strip())
            elif key == "inner_folds":
                kwargs["inner_folds"] = _parse_int(key, value)
            elif key == "stratify":
                kwargs["stratify"] = _parse_bool(key, value)
            elif key == "workers":
                kwargs["workers"] = _parse_int(key, value)
            else:
                raise UsageError(f"unknown config key {key!r}")

        config = cls(**kwargs)
        config.validate()
        return config

    @property
    def uses_fkt(self) -> bool:
        return self.method is not Method.GFT

    @property
    def is_loocv(self) -> bool:
        return self.test_fraction == LOOCV

    def validate(self, r: Optional[int] = None):
        """Check parameter ranges; ``m`` is checked against r when given"""
        if not self.is_loocv:
            if not isinstance(self.test_fraction, float) or not 0.0 < self.test_fraction < 1.0:
                raise UsageError(f"test_fraction must be in (0, 1) or 'loocv', got {self.test_fraction!r}")
        if self.n_trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.n_trials}")
        if not self.tuning_grid or min(self.tuning_grid) < 1:
            raise UsageError(f"tuning_grid must be a nonempty list of values >= 1, got {self.tuning_grid}")
        if self.inner_folds < 2:
            raise UsageError(f"inner_folds must be >= 2, got {self.inner_folds}")
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")
        if self.method is Method.OURS and self.graph is GraphKind.KNN and (self.k is None or self.k < 1):
            raise UsageError(f"knn graphs need k >= 1, got {self.k}")
        if self.uses_fkt and self.m != ALL_DIMENSIONS:
            if not isinstance(self.m, int) or self.m < 1:
                raise UsageError(f"m must be a positive integer or 'all', got {self.m!r}")
            if r is not None and self.m > r - 1:
                raise UsageError(f"m must be in [1, {r - 1}], got {self.m}")

    def resolve_m(self, r: int) -> int:
        return r - 1 if self.m == ALL_DIMENSIONS else int(self.m)

    def descriptor(self) -> str:
        """Short method label used in reports, e.g. ``ours(knn,K=2)``"""
        if self.method is Method.GFT:
            return f"gft({self.banding.value})"
        if self.method is Method.SFM:
            return "sfm"
        if self.graph is GraphKind.KNN:
            return f"ours(knn,K={self.k})"
        if self.graph is GraphKind.RAND_WFC:
            return f"ours(randWFC,seed={self.effective_graph_seed})"
        return f"ours({self.graph.value})"

    @property
    def effective_graph_seed(self) -> int:
        return self.seed if self.graph_seed is None else self.graph_seed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "graph": self.graph.value,
            "k": self.k,
            "graph_seed": self.graph_seed,
            "banding": self.banding.value,
            "m": self.m,
            "test_fraction": self.test_fraction,
            "trials": self.n_trials,
            "seed": self.seed,
            "tuning_grid": list(self.tuning_grid),
            "inner_folds": self.inner_folds,
            "stratify": self.stratify,
        }


@dataclass
class EvalReport:
    """Per-trial test accuracies of one method, with optional t-test p-values"""
    method: str
    per_trial_accuracy: Tuple[float, ...]
    m: Optional[int] = None
    test_fraction: Union[float, str, None] = None
    comparisons: Dict[str, float] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.per_trial_accuracy = tuple(float(a) for a in self.per_trial_accuracy)
        if not self.per_trial_accuracy:
            raise DataError("a report needs at least one trial")
        if any(not 0.0 <= a <= 1.0 for a in self.per_trial_accuracy):
            raise DataError("accuracies must lie in [0, 1]")

    @property
    def key(self) -> str:
        """Method label qualified by m, unique within a comparison table"""
        return self.method if self.m is None else f"{self.method} m={self.m}"

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_trial_accuracy))

    @property
    def std(self) -> float:
        """Sample standard deviation over trials (0 for a single trial)"""
        if len(self.per_trial_accuracy) < 2:
            return 0.0
        return float(np.std(self.per_trial_accuracy, ddof=1))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": JSON_FORMAT_VERSION,
            "kind": "eval_report",
            "method": self.method,
            "m": self.m,
            "test_fraction": self.test_fraction,
            "per_trial_accuracy": list(self.per_trial_accuracy),
            "mean": self.mean,
            "std": self.std,
            "comparisons": [{"other_method": k, "p_value": v} for k, v in self.comparisons.items()],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        if data.get("kind") != "eval_report":
            raise DataError(f"not an evaluation report (kind={data.get('kind')!r})")
        return cls(
            method=data["method"],
            per_trial_accuracy=tuple(data["per_trial_accuracy"]),
            m=data.get("m"),
            test_fraction=data.get("test_fraction"),
            comparisons={c["other_method"]: float(c["p_value"]) for c in data.get("comparisons", [])},
            config=data.get("config", {}),
        )

    def to_tsv_row(self) -> List[str]:
        p_values = ";".join(f"{k}={format_float(v)}" for k, v in self.comparisons.items())
        return [
            self.method,
            "" if self.m is None else str(self.m),
            "" if self.test_fraction is None else str(self.test_fraction),
            str(len(self.per_trial_accuracy)),
            format_float(self.mean),
            format_float(self.std),
            p_values,
        ]


@dataclass(frozen=True)
class PreparedDataset:
    """Per-subject spectra in the experiment's basis, computed once"""
    subjects: Tuple[SubjectRecord, ...]
    basis: GftBasis
    spectra: Tuple[NormalizedSpectra, ...] = field(repr=False)
    expectancies: Tuple[JointExpectancy, ...] = field(repr=False)

    @property
    def labels(self) -> List[Label]:
        return [s.label for s in self.subjects]

    def __len__(self) -> int:
        return len(self.subjects)


@dataclass(frozen=True)
class FittedPipeline:
    """Everything learned from one training split"""
    method: Method
    tree: Optional[DecisionTree]
    model: Optional[FktModel] = None
    banding: Banding = Banding.PER_MODE

    def features(self, spectra: NormalizedSpectra) -> FeatureVector:
        if self.model is None:
            return gft_baseline_features(spectra, self.banding)
        return fkt_features(project(spectra, self.model), self.model.dom_asd, self.model.dom_nt)

    def predict(self, spectra: NormalizedSpectra) -> Label:
        return predict(self.tree, self.features(spectra))


def experiment_basis(config: ExperimentConfig, atlas: RoiAtlas) -> GftBasis:
    """Basis fixed by the atlas alone (identity for the spatial-filtering baseline)"""
    if config.method is Method.SFM:
        return identity_basis(atlas.r)
    seed = config.effective_graph_seed if config.graph is GraphKind.RAND_WFC else None
    k = config.k if config.graph is GraphKind.KNN else None
    graph = build_graph(atlas, config.graph, K=k, seed=seed)
    return gft_basis(graph)


def prepare_dataset(config: ExperimentConfig, dataset: Sequence[SubjectRecord],
                    atlas: Optional[RoiAtlas] = None, basis: Optional[GftBasis] = None) -> PreparedDataset:
    """
    Compute every subject's normalised spectra and joint expectancy

    Args:
        config: Experiment config (selects the basis)
        dataset: Subjects
        atlas: ROI atlas, required unless ``basis`` is given
        basis: Explicit basis overriding the config's

    Returns:
        PreparedDataset
    """
    if basis is None:
        if atlas is None:
            raise UsageError("an atlas or an explicit basis is required")
        basis = experiment_basis(config, atlas)

    for subject in dataset:
        if subject.r != basis.r:
            raise DimensionMismatchError(f"subject {subject.id} has {subject.r} ROI rows, atlas has {basis.r}")

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        results = list(executor.map(lambda s: subject_expectancy(s.X, basis), dataset))

    return PreparedDataset(
        subjects=tuple(dataset),
        basis=basis,
        spectra=tuple(r[0] for r in results),
        expectancies=tuple(r[1] for r in results),
    )


def fit_pipeline(prepared: PreparedDataset, train_idx: Sequence[int], config: ExperimentConfig,
                 seed: int) -> FittedPipeline:
    """
    Fit FKT (or baseline features), tune the leaf size and grow the tree on one training split

    Args:
        prepared: Prepared dataset
        train_idx: Training subject indices
        config: Experiment config
        seed: Seed for the inner tuning folds

    Returns:
        FittedPipeline
    """
    labels = [prepared.subjects[i].label for i in train_idx]

    if config.uses_fkt:
        model = fit_fkt([prepared.expectancies[i] for i in train_idx], labels)
        model = model.with_dimensions(config.resolve_m(model.r))
        pipeline = FittedPipeline(method=config.method, tree=None, model=model)
    else:
        pipeline = FittedPipeline(method=config.method, tree=None, banding=config.banding)

    features = [pipeline.features(prepared.spectra[i]) for i in train_idx]
    min_leaf = tune_min_leaf(features, labels, config.tuning_grid, config.inner_folds, seed)
    return replace(pipeline, tree=fit_tree(features, labels, min_leaf))


def _split_accuracy(prepared: PreparedDataset, train_idx: Sequence[int], test_idx: Sequence[int],
                    config: ExperimentConfig, seed: int) -> float:
    pipeline = fit_pipeline(prepared, train_idx, config, seed)
    hits = [pipeline.predict(prepared.spectra[i]) is prepared.subjects[i].label for i in test_idx]
    return float(np.mean(hits))


def _has_both_classes(labels: Sequence[Label], idx: np.ndarray) -> bool:
    present = {labels[i] for i in idx}
    return Label.ASD in present and Label.NT in present


def split_trials(n: int, test_fraction: float, n_trials: int, seed: int,
                 labels: Optional[Sequence] = None,
                 stratify: bool = False) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Random train/test splits, deterministic from the seed

    When labels are given, a split whose training part misses a class is
    redrawn (up to MAX_SPLIT_ATTEMPTS times).

    Args:
        n: Number of subjects
        test_fraction: Fraction held out for testing
        n_trials: Number of splits
        seed: Master seed
        labels: Optional subject labels
        stratify: Preserve class proportions in every split

    Returns:
        List of (train indices, test indices), each sorted ascending
    """
    if not 0.0 < test_fraction < 1.0:
        raise UsageError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if n_trials < 1:
        raise UsageError(f"n_trials must be >= 1, got {n_trials}")
    n_test = int(np.floor(n * test_fraction + 1e-9))
    if not 1 <= n_test <= n - 2:
        raise UsageError(f"test size {n_test} for n={n} must be in [1, {n - 2}]")

    if labels is not None:
        labels = [Label.parse(label) for label in labels]
        if len(labels) != n:
            raise DimensionMismatchError(f"{len(labels)} labels for {n} subjects")

    if stratify:
        if labels is None:
            raise UsageError("stratified splits need labels")
        splitter = StratifiedShuffleSplit(n_splits=n_trials, test_size=n_test, random_state=seed)
        y = np.array([label is Label.ASD for label in labels])
        try:
            return [(np.sort(train), np.sort(test)) for train, test in splitter.split(np.zeros(n), y)]
        except ValueError as e:
            raise DataError(f"cannot stratify {int(y.sum())} ASD and {int(n - y.sum())} NT subjects "
                            f"with test size {n_test}: {e}") from e

    rng = np.random.default_rng(seed)
    splits = []
    for trial in range(n_trials):
        for attempt in range(MAX_SPLIT_ATTEMPTS):
            order = rng.permutation(n)
            test, train = np.sort(order[:n_test]), np.sort(order[n_test:])
            if labels is None or _has_both_classes(labels, train):
                break
            logger.warning("Trial %d: training split misses a class, resampling (attempt %d)", trial + 1, attempt + 1)
        else:
            raise DataError(f"trial {trial + 1}: no training split with both classes after {MAX_SPLIT_ATTEMPTS} attempts")
        splits.append((train, test))
    return splits


def loocv_splits(labels: Sequence[Label]) -> List[Tuple[np.ndarray, np.ndarray]]:
    """One fold per subject; every training fold must hold both classes"""
    n = len(labels)
    if n < 3:
        raise UsageError(f"leave-one-out needs at least 3 subjects, got {n}")
    all_idx = np.arange(n)
    folds = []
    for i in range(n):
        train = np.delete(all_idx, i)
        if not _has_both_classes(labels, train):
            raise SingleClassError(f"holding out subject {i + 1} leaves a single-class training set")
        folds.append((train, np.array([i])))
    return folds


def _run_splits(prepared: PreparedDataset, splits, config: ExperimentConfig, desc: str) -> List[float]:
    seeds = derive_seeds(config.seed, len(splits))
    jobs = [(train, test, seed) for (train, test), seed in zip(splits, seeds)]

    def _job(job):
        train, test, seed = job
        return _split_accuracy(prepared, train, test, config, seed)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        results = list(tqdm(executor.map(_job, jobs), total=len(jobs), desc=desc, disable=None, leave=False))
    return results


def _report(config: ExperimentConfig, prepared: PreparedDataset, accuracies: List[float]) -> EvalReport:
    return EvalReport(
        method=config.descriptor(),
        per_trial_accuracy=tuple(accuracies),
        m=config.resolve_m(prepared.basis.r) if config.uses_fkt else None,
        test_fraction=config.test_fraction,
        config=config.to_dict(),
    )


def _checked_prepare(config, dataset, atlas, basis) -> PreparedDataset:
    labels = {s.label for s in dataset}
    if labels != {Label.ASD, Label.NT}:
        raise SingleClassError("both classes required")
    prepared = prepare_dataset(config, dataset, atlas=atlas, basis=basis)
    config.validate(prepared.basis.r)
    return prepared


def run_experiment(config: ExperimentConfig, dataset: Sequence[SubjectRecord], atlas: Optional[RoiAtlas] = None,
                   basis: Optional[GftBasis] = None) -> EvalReport:
    """
    Repeated random-split evaluation of one method

    Args:
        config: Experiment config (``test_fraction = loocv`` delegates to loocv)
        dataset: Subjects with both classes
        atlas: ROI atlas the signals are expressed on
        basis: Explicit basis overriding the one derived from the atlas

    Returns:
        EvalReport with one accuracy per trial, in trial order
    """
    config.validate()
    if config.is_loocv:
        return loocv(config, dataset, atlas, basis=basis)

    prepared = _checked_prepare(config, dataset, atlas, basis)
    splits = split_trials(len(prepared), config.test_fraction, config.n_trials, config.seed,
                          labels=prepared.labels, stratify=config.stratify)
    accuracies = _run_splits(prepared, splits, config, desc=config.descriptor())
    report = _report(config, prepared, accuracies)
    logger.info("%s: mean accuracy %.3f ± %.3f over %d trials", report.method, report.mean, report.std,
                len(accuracies))
    return report


def loocv(config: ExperimentConfig, dataset: Sequence[SubjectRecord], atlas: Optional[RoiAtlas] = None,
          basis: Optional[GftBasis] = None) -> EvalReport:
    """
    Leave-one-out evaluation; the report holds one 0/1 hit per subject
    """
    config = replace(config, test_fraction=LOOCV)
    config.validate()
    prepared = _checked_prepare(config, dataset, atlas, basis)
    hits = _run_splits(prepared, loocv_splits(prepared.labels), config, desc=f"LOOCV {config.descriptor()}")
    report = _report(config, prepared, hits)
    logger.info("%s: LOOCV accuracy %.3f over %d subjects", report.method, report.mean, len(hits))
    return report


def t_test(acc_a: Sequence[float], acc_b: Sequence[float]) -> float:
    """
    Two-sided, equal-variance two-sample Student's t-test

    A zero pooled variance gives p = 1 for equal means and p = 0 otherwise.

    Args:
        acc_a: First sample (size >= 2)
        acc_b: Second sample (size >= 2)

    Returns:
        p-value in [0, 1]
    """
    a = np.asarray(acc_a, dtype=float)
    b = np.asarray(acc_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise UsageError(f"t-test needs at least 2 samples per group, got {a.size} and {b.size}")

    pooled = (a.var(ddof=1) * (a.size - 1) + b.var(ddof=1) * (b.size - 1)) / (a.size + b.size - 2)
    if pooled == 0.0:
        return 1.0 if a.mean() == b.mean() else 0.0

    result = stats.ttest_ind(a, b, equal_var=True)
    return float(np.clip(result.pvalue, 0.0, 1.0))


def compare_methods(configs: Sequence[ExperimentConfig], dataset: Sequence[SubjectRecord],
                    atlas: RoiAtlas) -> List[EvalReport]:
    """
    Run several methods on identical splits and t-test each against the first

    Args:
        configs: Method configs; the first is the reference
        dataset: Subjects
        atlas: ROI atlas

    Returns:
        One report per config, in order, with p-values attached
    """
    if not configs:
        raise UsageError("no methods to compare")
    reference = configs[0]
    for config in configs[1:]:
        if (config.seed, config.n_trials, config.test_fraction, config.stratify) != \
                (reference.seed, reference.n_trials, reference.test_fraction, reference.stratify):
            raise UsageError("compared methods must share seed, trials, test_fraction and stratify")

    reports = [run_experiment(config, dataset, atlas) for config in configs]
    ref_report = reports[0]
    for report in reports[1:]:
        if len(report.per_trial_accuracy) < 2:
            continue
        p_value = t_test(ref_report.per_trial_accuracy, report.per_trial_accuracy)
        report.comparisons[ref_report.key] = p_value
        ref_report.comparisons[report.key] = p_value
    return reports


def sweep_train_sizes(config: ExperimentConfig, dataset: Sequence[SubjectRecord], atlas: RoiAtlas,
                      fractions: Sequence[float] = DEFAULT_SWEEP_FRACTIONS) -> List[EvalReport]:
    """Accuracy versus held-out fraction, one report per fraction"""
    return [run_experiment(replace(config, test_fraction=float(f)), dataset, atlas) for f in fractions]

