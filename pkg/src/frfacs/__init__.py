"""Functional random forests with adaptive cost-sensitive splitting for imbalanced curve classification."""

from .bench import CVConfig, ExperimentConfig, GridSpec, ModelSpec, grid_search, run_ablation, run_cv, stratified_folds
from .distance import DtwConfig, distance_matrix, dtw_distance, l2_distance_sq
from .fdata import Curve, FunctionalDataset, Grid, fourier_basis, load_dataset
from .forest import ForestConfig, ForestModel, fit_forest, fknn_baseline, proximity_matrix
from .fpca import FpcaModel, ScoreDataset, fit_fpca
from .imbalance import SmoteConfig, bootstrap_probabilities, functional_smote, global_weights, node_weights
from .metrics import MetricReport, auprc, confusion, evaluate
from .simgen import SimConfig, default_scenarios, generate
from .tree import Tree, TreeConfig, fit_tree, split_gain, weighted_gini

__version__ = "0.1.0"
