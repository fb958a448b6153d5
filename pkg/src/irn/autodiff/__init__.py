from irn.autodiff.tensor import Tape, Tensor, backward, recording
from irn.autodiff.ops import (
    add, blend, columns, concat, dropout, linear, mean_pool_groups, mean_pool_rows,
    mul, relu, reshape, scale, sigmoid, softmax, softmax_cross_entropy, sub, sum_all,
    take_rows, tanh,
)
from irn.autodiff.lstm import LstmParams, lstm_cell, lstm_forward
from irn.autodiff.optim import Adam, AdamState, adam_step
from irn.autodiff.gradcheck import GradCheckReport, grad_check, relative_error

__all__ = [
    "Tape", "Tensor", "backward", "recording",
    "add", "blend", "columns", "concat", "dropout", "linear", "mean_pool_groups",
    "mean_pool_rows", "mul", "relu", "reshape", "scale", "sigmoid", "softmax",
    "softmax_cross_entropy", "sub", "sum_all", "take_rows", "tanh",
    "LstmParams", "lstm_cell", "lstm_forward",
    "Adam", "AdamState", "adam_step",
    "GradCheckReport", "grad_check", "relative_error",
]
