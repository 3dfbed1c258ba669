"""Neural network core: parameters, forward/backward passes, losses."""
from .losses import (cce_loss, cce_loss_batch, softmax, triplet_loss,
                     triplet_loss_and_grads)
from .model import (BN_EPS, BN_MOMENTUM, PAD_ID, ForwardTrace, backward,
                    backward_from_dlogits, batchnorm_apply, forward,
                    forward_classifier)
from .params import (CHECKPOINT_MAGIC, ModelConfig, ModelParams, init_params,
                     load_checkpoint, save_checkpoint, zeros_like_params)

__all__ = [
    "BN_EPS", "BN_MOMENTUM", "PAD_ID", "CHECKPOINT_MAGIC",
    "ForwardTrace", "ModelConfig", "ModelParams",
    "backward", "backward_from_dlogits", "batchnorm_apply",
    "cce_loss", "cce_loss_batch", "forward", "forward_classifier",
    "init_params", "load_checkpoint", "save_checkpoint", "softmax",
    "triplet_loss", "triplet_loss_and_grads", "zeros_like_params",
]
