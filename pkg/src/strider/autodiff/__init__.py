"""Dense tensors, reverse-mode differentiation, Adam and parameter checkpoints."""
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .gradcheck import check_gradients
from .optim import Adam, AdamState, adam_update
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    add,
    affine,
    as_tensor,
    backward,
    concat,
    cross_entropy,
    detach,
    elementwise,
    exp,
    gather,
    layer_norm,
    log,
    log_softmax,
    matmul,
    maximum,
    mean,
    mul,
    narrow,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    sub,
    swapaxes,
    take,
    tanh,
    tmax,
    transpose,
    tsum,
    where,
)
