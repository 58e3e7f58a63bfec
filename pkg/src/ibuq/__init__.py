"""Information-bottleneck uncertainty quantification for regression and
operator learning, with a deep-ensemble baseline.

The public surface re-exports the pieces most workflows touch: training
entry points, predictive helpers, the flow/bottleneck building blocks, and
the data-generation utilities. Subpackage imports (ibuq.datagen, ibuq.plots)
stay available for the long tail.
"""
from .autodiff import Tensor, constant, gaussian_log_prob, parameter
from .baselines import (DeepEnsemble, EnsembleConfig, ensemble_predict,
                        load_ensemble, save_ensemble, train_deep_ensemble)
from .flows import (FlowFitConfig, GINModel, RealNVPFlow, fit_flow, gin_fit,
                    gin_sample)
from .ibcore import (Encoder, GaussianDecoder, IBModel, MixupConfig,
                     decoder_log_prob, encode_sample, encoder_log_prob,
                     estimate_iyz, estimate_izx, ib_loss, mixup_batch)
from .nets import DenseNet, gradient
from .operator import (IBONetModel, OperatorBatch, OperatorConfig,
                       OperatorSample, load_operator_model, predict_field,
                       rmse_by_length, save_operator_model, train_operator)
from .optim import AdamState, LRSchedule, adam_step
from .regression import (PredictiveDistribution, RegressionConfig,
                         RegressionModel, TrainingError, info_plane_sweep,
                         load_regression_model, predict, rl2e,
                         save_regression_model, train_regression)
from .seeding import child_seeds, new_rng

__version__ = "0.1.0"

__all__ = [
    "Tensor", "constant", "gaussian_log_prob", "parameter",
    "DeepEnsemble", "EnsembleConfig", "ensemble_predict", "load_ensemble",
    "save_ensemble", "train_deep_ensemble",
    "FlowFitConfig", "GINModel", "RealNVPFlow", "fit_flow", "gin_fit",
    "gin_sample",
    "Encoder", "GaussianDecoder", "IBModel", "MixupConfig",
    "decoder_log_prob", "encode_sample", "encoder_log_prob", "estimate_iyz",
    "estimate_izx", "ib_loss", "mixup_batch",
    "DenseNet", "gradient",
    "IBONetModel", "OperatorBatch", "OperatorConfig", "OperatorSample",
    "load_operator_model", "predict_field", "rmse_by_length",
    "save_operator_model", "train_operator",
    "AdamState", "LRSchedule", "adam_step",
    "PredictiveDistribution", "RegressionConfig", "RegressionModel",
    "TrainingError", "info_plane_sweep", "load_regression_model", "predict",
    "rl2e", "save_regression_model", "train_regression",
    "child_seeds", "new_rng",
    "__version__",
]
