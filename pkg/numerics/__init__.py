# Differentiable computation core
from numerics.errors import ExhaustedQuestionsError, NonFiniteError, ShapeError
from numerics.gradcheck import analytic_gradients, grad_check
from numerics.init import orthogonal_init, orthogonal_kernel
from numerics.ops import (
    add, bernoulli_log_likelihood, block_sum, categorical_log_likelihood, concat,
    constant, conv2d, conv2d_down, conv2d_up, dense, entropy, gaussian_log_likelihood,
    layer_norm, leaky_relu, log_softmax_masked, lstm_step, mul, pick, reshape, scale,
    sigmoid, slice_axis, softmax, softmax_masked, split, stack, sub, sum_, tanh,
)
from numerics.optim import AdamState, adam_step
from numerics.tensor import (
    ComputationRecord, Tensor, active_record, as_tensor, get_dtype, precision,
    set_default_precision,
)
