"""
Graph-spectral two-population classifier

Builds an anatomical graph over atlas ROIs, takes subjects' ROI time-series
to the graph Fourier domain, extracts discriminative directions with an
extended Fukunaga-Koontz transform and classifies log-variance features
with a gain-ratio decision tree.
"""

__version__ = '1.0.0'

from .errors import (
    AtlasParseError,
    DataError,
    DimensionMismatchError,
    GraphFKTError,
    NumericalError,
    SingleClassError,
    UsageError,
)
from .atlas_graph import (
    BrainGraph,
    GftBasis,
    GraphKind,
    Roi,
    RoiAtlas,
    build_graph,
    gft_basis,
    identity_basis,
    load_atlas,
)
from .spectra import (
    ExpectancyKind,
    JointExpectancy,
    Label,
    NormalizedSpectra,
    SubjectRecord,
    class_means,
    gft_coefficients,
    joint_expectancy,
    normalize_columns,
    subject_expectancy,
)
from .fkt import FktModel, WhiteningTransform, dominant_dimensions, fit_fkt, simultaneous_diagonalize, whiten
from .features import Banding, FeatureVector, fkt_features, gft_baseline_features, project
from .tree import DecisionTree, fit_tree, predict, tune_min_leaf
from .harness import (
    EvalReport,
    ExperimentConfig,
    Method,
    compare_methods,
    loocv,
    run_experiment,
    split_trials,
    sweep_train_sizes,
    t_test,
)
from .synthetic import SyntheticSpec, generate_synthetic, planted_templates
from .phenotypes import FilterCriteria, PhenotypeRecord, filter_subjects, load_phenotypes
from .mode_report import ModeReport, export_mode_report, export_node_file
from .data_manager import DataManager

__all__ = [
    'AtlasParseError',
    'DataError',
    'DimensionMismatchError',
    'GraphFKTError',
    'NumericalError',
    'SingleClassError',
    'UsageError',
    'BrainGraph',
    'GftBasis',
    'GraphKind',
    'Roi',
    'RoiAtlas',
    'build_graph',
    'gft_basis',
    'identity_basis',
    'load_atlas',
    'ExpectancyKind',
    'JointExpectancy',
    'Label',
    'NormalizedSpectra',
    'SubjectRecord',
    'class_means',
    'gft_coefficients',
    'joint_expectancy',
    'normalize_columns',
    'subject_expectancy',
    'FktModel',
    'WhiteningTransform',
    'dominant_dimensions',
    'fit_fkt',
    'simultaneous_diagonalize',
    'whiten',
    'Banding',
    'FeatureVector',
    'fkt_features',
    'gft_baseline_features',
    'project',
    'DecisionTree',
    'fit_tree',
    'predict',
    'tune_min_leaf',
    'EvalReport',
    'ExperimentConfig',
    'Method',
    'compare_methods',
    'loocv',
    'run_experiment',
    'split_trials',
    'sweep_train_sizes',
    't_test',
    'SyntheticSpec',
    'generate_synthetic',
    'planted_templates',
    'FilterCriteria',
    'PhenotypeRecord',
    'filter_subjects',
    'load_phenotypes',
    'ModeReport',
    'export_mode_report',
    'export_node_file',
    'DataManager',
]
