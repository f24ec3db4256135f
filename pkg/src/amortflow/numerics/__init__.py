"""Tensor arithmetic, reverse-mode gradients and seeded random streams."""

from amortflow.numerics.gradcheck import analytic_gradient, central_difference, grad_check, numerical_gradient
from amortflow.numerics.rng import (
    RngStream,
    derive_stream_id,
    sample_binomial,
    sample_gaussian,
    sample_poisson,
    sample_uniform,
)
from amortflow.numerics.tensor import (
    Tensor,
    add,
    arctan,
    as_tensor,
    broadcast_to,
    concat,
    conv1d,
    elu,
    exp,
    get_default_dtype,
    linear,
    log,
    matmul,
    mean_over_axis,
    multiply,
    no_grad,
    reshape,
    set_default_dtype,
    slice_,
    square,
    sub,
    sum_over_axis,
    take,
    tanh,
)

__all__ = [
    "RngStream",
    "Tensor",
    "add",
    "analytic_gradient",
    "arctan",
    "as_tensor",
    "broadcast_to",
    "central_difference",
    "concat",
    "conv1d",
    "derive_stream_id",
    "elu",
    "exp",
    "get_default_dtype",
    "grad_check",
    "linear",
    "log",
    "matmul",
    "mean_over_axis",
    "multiply",
    "no_grad",
    "numerical_gradient",
    "reshape",
    "sample_binomial",
    "sample_gaussian",
    "sample_poisson",
    "sample_uniform",
    "set_default_dtype",
    "slice_",
    "square",
    "sub",
    "sum_over_axis",
    "take",
    "tanh",
]
