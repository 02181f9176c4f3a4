"""Benchmark harness for binary classification of disease status from
registered brain volumes: BIDS-lite datasets, volume preprocessing, voxel
and regional features, from-scratch classifiers, and nested cross-validation
with full metric-distribution reporting."""

__version__ = "0.1.0"

from .dataset import (
    CohortTable,
    DatasetIndex,
    GroupSpec,
    TaskSpec,
    amyloid_status,
    convert_generic_tabular,
    derive_progression_label,
    load_dataset,
    select_cohort,
)
from .features import (
    FeatureMatrix,
    GramMatrix,
    RegionList,
    VoxelIndexMap,
    compute_gram,
    cross_gram,
    extract_regional_features,
    extract_voxel_features,
)
from .metrics import MetricsRecord, auc_from_scores, compute_metrics
from .nested import (
    CvConfig,
    ExperimentResult,
    balance_classes,
    cross_dataset_eval,
    learning_curve,
    nested_cv,
)
from .nifti import read_nifti, write_nifti
from .pipeline import run_experiment
from .splits import SplitPlan, stratified_kfold, stratified_shuffle_splits
from .synthetic import SyntheticSpec, generate_synthetic_dataset
from .volume import (
    BinaryMask,
    LabelVolume,
    Volume3D,
    brain_mask_from_tissues,
    gaussian_smooth,
    suvr_normalize,
)
