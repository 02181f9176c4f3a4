from .linear import LinearModel, average_linear_models
from .svm import SvmDualModel, predict_svm, reconstruct_weights, train_svm_dual
from .logreg import LogRegModel, predict_logreg, train_logreg
from .forest import ForestModel, predict_forest, train_forest

__all__ = [
    "LinearModel", "average_linear_models",
    "SvmDualModel", "train_svm_dual", "predict_svm", "reconstruct_weights",
    "LogRegModel", "train_logreg", "predict_logreg",
    "ForestModel", "train_forest", "predict_forest",
]
