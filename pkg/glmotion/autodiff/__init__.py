from glmotion.autodiff.ad_tensor import Tensor, Tape, backward, no_grad, current_tape, reset_tape
from glmotion.autodiff.ad_ops    import (elementwise, add, sub, mul, div, scale, matmul, transpose,
                                         swapaxes, reshape, getitem, concat, sum, mean, softmax_masked,
                                         layer_norm, gelu, linear, cross_entropy_logits, MASK_FILL)
from glmotion.autodiff.ad_check  import grad_check, GradCheckReport
