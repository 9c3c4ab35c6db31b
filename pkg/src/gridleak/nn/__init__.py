"""Dense float64 math: autodiff, LSTM/conv layers, Adam, scalers, weight store."""
from .autodiff import Variable, backward, zero_grads
from .container import load_tensors, save_tensors
from .conv import conv2d, global_avg_pool
from .lstm import lstm_cell, lstm_sequence, lstm_sequence_forward
from .optim import Adam
from .scaling import ValueScaler, fit_scaler

__all__ = [
    "Variable", "backward", "zero_grads",
    "lstm_cell", "lstm_sequence", "lstm_sequence_forward",
    "conv2d", "global_avg_pool",
    "Adam", "ValueScaler", "fit_scaler",
    "save_tensors", "load_tensors",
]
