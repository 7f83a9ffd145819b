"""Base unsupervised labelers and the ARI metric."""

from .iforest import IsolationForest, average_path_length, fit_isolation_forest, iforest
from .kmeans import kmeans, kmeans_plusplus, lloyd, wcss
from .labeling import UNLABELED, ContingencyTable, Labeling, adjusted_rand_index, contingency_table
from .ocsvm import OneClassSVM, fit_one_class_svm, ocsvm, rbf_kernel, scale_gamma
from .spectral import knn_rbf_affinity, random_walk_matrix, rbf_affinity, spectral, spectral_embedding

METHODS = ("kmeans", "spectral", "iforest", "ocsvm")

__all__ = [
    "METHODS",
    "UNLABELED",
    "ContingencyTable",
    "IsolationForest",
    "Labeling",
    "OneClassSVM",
    "adjusted_rand_index",
    "average_path_length",
    "contingency_table",
    "fit_isolation_forest",
    "fit_one_class_svm",
    "iforest",
    "kmeans",
    "kmeans_plusplus",
    "knn_rbf_affinity",
    "lloyd",
    "ocsvm",
    "random_walk_matrix",
    "rbf_affinity",
    "rbf_kernel",
    "scale_gamma",
    "spectral",
    "spectral_embedding",
    "wcss",
]
