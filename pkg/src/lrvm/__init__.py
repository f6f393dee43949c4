"""Relevance vector machines, global and localized to each query's neighbourhood."""
from .baselines import KnnConfig, knn_classify
from .dataset import Dataset, FoldPlan, NormStats, gen_ripley, load_csv, stratified_kfold, zscore_apply, zscore_fit
from .evaluation import (CvResult, FriedmanReport, GridSpec, critical_difference, fisher_f, friedman_chi2,
                         friedman_report, grid_search, nemenyi_groups, rank_table, run_cv)
from .kernel import GramTable, KernelConfig, build_gram, cross_kernel, gaussian_kernel, submatrix
from .localized import LocalPrediction, LrvmConfig, classify_batch, classify_local, find_neighbors, local_design
from .rvm import (DesignMatrix, RvmModel, TrainerConfig, TrainReport, irls_posterior, predict_prob,
                  prior_variance_profile, sigmoid, train_rvm, update_alphas)

__version__ = "0.1.0"
