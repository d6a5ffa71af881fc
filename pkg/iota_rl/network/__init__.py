# flake8: noqa
from iota_rl.network.mlp import (
    Network, Forward, LossSpec, NetworkError, NonFiniteError,
    forward_single, forward_dueling, copy_weights, huber, huber_grad,
    composite_loss, loss_gradient, backward_and_step, gradient_check,
    HIDDEN, STREAM_HIDDEN,
)
from iota_rl.network.optim import AdamState
from iota_rl.network.checkpoint import (
    CheckpointError, save_checkpoint, load_checkpoint, dump_checkpoint,
    parse_checkpoint,
)
