from .adamw import AdamWState, adamw_step
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import KernelReport, check_catalog, grad_check
from .tensor import (
    OP_NAMES,
    Graph,
    GraphError,
    NonFiniteError,
    NumcoreError,
    ShapeError,
    Tensor,
    UnknownOpError,
    add,
    attention,
    backward,
    concat,
    gelu,
    l1_distance,
    l2_normalize,
    layer_norm,
    logsumexp,
    matmul,
    mean,
    mul,
    no_grad,
    op_forward,
    reshape,
    slice_axis,
    softmax,
    sub,
    sum_,
    transpose,
)
