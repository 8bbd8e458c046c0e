from .config import ModelConfig
from .forward import decode, encode_stage1, encode_stage2, forward_batch, loss_and_grads
from .params import ModelParams, init_params
from .runtime import StreamRuntime, forward_stream_step, run_stream

__all__ = [
    "ModelConfig",
    "ModelParams",
    "StreamRuntime",
    "decode",
    "encode_stage1",
    "encode_stage2",
    "forward_batch",
    "forward_stream_step",
    "init_params",
    "loss_and_grads",
    "run_stream",
]
