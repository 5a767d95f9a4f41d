"""Quaternion-valued recurrent networks on a minimal numpy autodiff core.

The package provides quaternion algebra primitives, quaternion linear
layers built from structured real matrices, QLSTM/LSTM cells trained by
backpropagation through time, the synthetic copy-task benchmark, an
acoustic quaternion feature packer, and a deterministic training CLI.
"""

from .quaternions import (MalformedVectorError, Quaternion, QuaternionVector,
                          conjugate, hamilton_product, left_mul_matrix, norm,
                          pack_split, unpack_split)
from .autograd import (DivergenceError, Parameter, Tensor, backward,
                       concat_rows, linear, mean_all, sigmoid,
                       softmax_cross_entropy, stable_sigmoid, sum_all, tanh,
                       zero_grad)
from .layers import (InitConfig, QuaternionLinear, RealLinear,
                     assemble_quaternion_matrix, assemble_real_matrix,
                     lstm_params, param_count, qlstm_params, quaternion_init,
                     quaternion_linear_params, real_linear_params,
                     split_activation)
from .cells import (LSTMCell, QLSTMCell, QLSTMState, bidirectional_run,
                    lstm_step, qlstm_step, run_sequence)
from .copy_task import (CopyBatch, CopyTaskModel, CopyTaskSpec, accuracies,
                        build_copy_model, build_example, evaluate,
                        generate_batch, pad_to_quaternions,
                        unpad_from_quaternions)
from .training import (Adam, AnnealConfig, GradCheckReport, MetricsRecord,
                       TrainConfig, TrainResult, grad_check, train_copy_task)
from .features import EnergyMatrix, compute_delta, delta_stack, pack_features
from .io import (CheckpointBundle, CheckpointError, load_checkpoint,
                 read_metrics, save_checkpoint, write_metrics)

__version__ = "0.1.0"

__all__ = [
    "MalformedVectorError", "Quaternion", "QuaternionVector", "conjugate",
    "hamilton_product", "left_mul_matrix", "norm", "pack_split", "unpack_split",
    "DivergenceError", "Parameter", "Tensor", "backward", "concat_rows",
    "linear", "mean_all", "sigmoid", "softmax_cross_entropy", "stable_sigmoid",
    "sum_all", "tanh", "zero_grad",
    "InitConfig", "QuaternionLinear", "RealLinear", "assemble_quaternion_matrix",
    "assemble_real_matrix", "lstm_params", "param_count", "qlstm_params",
    "quaternion_init", "quaternion_linear_params", "real_linear_params",
    "split_activation",
    "LSTMCell", "QLSTMCell", "QLSTMState", "bidirectional_run", "lstm_step",
    "qlstm_step", "run_sequence",
    "CopyBatch", "CopyTaskModel", "CopyTaskSpec", "accuracies",
    "build_copy_model", "build_example", "evaluate", "generate_batch",
    "pad_to_quaternions", "unpad_from_quaternions",
    "Adam", "AnnealConfig", "GradCheckReport", "MetricsRecord", "TrainConfig",
    "TrainResult", "grad_check", "train_copy_task",
    "EnergyMatrix", "compute_delta", "delta_stack", "pack_features",
    "CheckpointBundle", "CheckpointError", "load_checkpoint", "read_metrics",
    "save_checkpoint", "write_metrics",
    "__version__",
]
