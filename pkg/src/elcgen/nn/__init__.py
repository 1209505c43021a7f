from .core import (
    AdamState,
    CheckpointError,
    NonFiniteGradientError,
    ParamStore,
    adam_update,
    grad_check,
    load_checkpoint,
    log_softmax,
    save_checkpoint,
    sigmoid,
    softmax,
)
from .layers import Attention, Conv1dMaxPool, Embedding, GRUCell, Linear, LSTMCell

__all__ = [
    "AdamState", "Attention", "CheckpointError", "Conv1dMaxPool", "Embedding", "GRUCell",
    "LSTMCell", "Linear", "NonFiniteGradientError", "ParamStore", "adam_update", "grad_check",
    "load_checkpoint", "log_softmax", "save_checkpoint", "sigmoid", "softmax",
]
