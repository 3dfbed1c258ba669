"""Model configuration, parameter container, initialization and checkpoints."""
from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"RGNCKPT1"
CHECKPOINT_DTYPE = "<f4"  # little-endian float32 on disk


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters (plus tokenizer provenance fields).

    ``n_outputs`` is the width of the final dense layer: the number of
    classes for the classifier, or the embedding dimensionality when
    ``embedding_head`` is set (then no softmax is applied).
    """

    vocab_size: int
    n_outputs: int
    embed_dim: int = 128
    lstm_hidden: int = 768
    dense1_units: int = 384
    dropout_rate: float = 0.3
    embedding_head: bool = False
    k_levels: int | None = None
    subseq_len: int | None = None

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "lstm_hidden", "dense1_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_outputs < 2:
            raise ValueError("n_outputs must be >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        v, e, h = self.vocab_size, self.embed_dim, self.lstm_hidden
        d1, c = self.dense1_units, self.n_outputs
        return {
            "embedding": (v, e),
            "lstm_kernel": (e + h, 4 * h),
            "lstm_bias": (4 * h,),
            "attn_proj": (h, h),
            "attn_score": (h,),
            "bn_scale": (h,),
            "bn_shift": (h,),
            "bn_running_mean": (h,),
            "bn_running_var": (h,),
            "dense1_kernel": (h, d1),
            "dense1_bias": (d1,),
            "dense2_kernel": (d1, c),
            "dense2_bias": (c,),
        }


# batch-norm running statistics: saved and restored, but never updated by
# gradient descent
STATE_TENSORS = ("bn_running_mean", "bn_running_var")


class ModelParams:
    """Named parameter tensors of one model instance.

    Tensors all share one float dtype; training and checkpoints use float32,
    while gradient checking builds float64 instances.
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]):
        self.config = config
        shapes = config.tensor_shapes()
        if set(tensors) != set(shapes):
            raise ValueError("tensor names do not match the model config")
        for name, shape in shapes.items():
            if tuple(tensors[name].shape) != shape:
                raise ValueError(
                    f"tensor {name!r} has shape {tensors[name].shape}, "
                    f"expected {shape}"
                )
        self.tensors = {name: tensors[name] for name in shapes}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self.tensors:
            raise KeyError(name)
        if value.shape != self.tensors[name].shape:
            raise ValueError(f"shape mismatch for {name!r}")
        self.tensors[name] = value

    @property
    def dtype(self):
        return self.tensors["embedding"].dtype

    def learnable_names(self) -> list[str]:
        return [n for n in self.tensors if n not in STATE_TENSORS]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config,
                           {n: t.copy() for n, t in self.tensors.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config,
                           {n: t.astype(dtype) for n, t in self.tensors.items()})

    def check_finite(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise ValueError(f"tensor {name!r} contains non-finite values")


def init_params(config: ModelConfig, seed: int = 0,
                dtype=np.float32) -> ModelParams:
    """Initialize parameters: uniform(-a, a) with a = 1/sqrt(fan_in) for
    weight tensors, zero biases, unit batch-norm scale, and +1 on the LSTM
    forget-gate bias so early training does not forget state wholesale.
    """
    rng = np.random.default_rng(seed)
    h = config.lstm_hidden

    def uniform(shape, fan_in):
        a = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-a, a, size=shape).astype(dtype)

    shapes = config.tensor_shapes()
    tensors = {
        "embedding": uniform(shapes["embedding"], config.embed_dim),
        "lstm_kernel": uniform(shapes["lstm_kernel"],
                               config.embed_dim + h),
        "lstm_bias": np.zeros(shapes["lstm_bias"], dtype=dtype),
        "attn_proj": uniform(shapes["attn_proj"], h),
        "attn_score": uniform(shapes["attn_score"], h),
        "bn_scale": np.ones(shapes["bn_scale"], dtype=dtype),
        "bn_shift": np.zeros(shapes["bn_shift"], dtype=dtype),
        "bn_running_mean": np.zeros(shapes["bn_running_mean"], dtype=dtype),
        "bn_running_var": np.ones(shapes["bn_running_var"], dtype=dtype),
        "dense1_kernel": uniform(shapes["dense1_kernel"], h),
        "dense1_bias": np.zeros(shapes["dense1_bias"], dtype=dtype),
        "dense2_kernel": uniform(shapes["dense2_kernel"], config.dense1_units),
        "dense2_bias": np.zeros(shapes["dense2_bias"], dtype=dtype),
    }
    tensors["lstm_bias"][h:2 * h] += 1.0  # forget gate
    return ModelParams(config, tensors)


def zeros_like_params(config: ModelConfig, dtype=np.float32) -> ModelParams:
    tensors = {name: np.zeros(shape, dtype=dtype)
               for name, shape in config.tensor_shapes().items()}
    return ModelParams(config, tensors)


def save_checkpoint(params: ModelParams, path) -> None:
    """Write a versioned binary checkpoint.

    Layout: magic, u32 header length, JSON header (config + tensor table),
    tensor payload as little-endian float32 in table order, u32 CRC32 of
    header and payload.  Float64 parameters are downcast on save.
    """
    header = {
        "config": dataclasses.asdict(params.config),
        "tensors": [[name, list(t.shape)]
                    for name, t in params.tensors.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(t, dtype=CHECKPOINT_DTYPE).tobytes()
        for t in params.tensors.values()
    )
    crc = zlib.crc32(header_bytes + payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_checkpoint(path, expected_config: ModelConfig | None = None) -> ModelParams:
    """Load a checkpoint, verifying magic, checksum and (optionally) config."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 8 or \
            not blob.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a model checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    header_bytes = blob[off:off + header_len]
    off += header_len
    payload = blob[off:-4]
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(header_bytes + payload) & 0xFFFFFFFF != crc_stored:
        raise ValueError(f"{path}: checksum mismatch, checkpoint corrupted")
    header = json.loads(header_bytes.decode("utf-8"))
    config = ModelConfig(**header["config"])
    if expected_config is not None and config != expected_config:
        raise ValueError(f"{path}: checkpoint config {config} does not match "
                         f"expected {expected_config}")
    tensors = {}
    cursor = 0
    for name, shape in header["tensors"]:
        size = int(np.prod(shape)) * 4
        flat = np.frombuffer(payload[cursor:cursor + size],
                             dtype=CHECKPOINT_DTYPE)
        if flat.size * 4 != size:
            raise ValueError(f"{path}: truncated payload for tensor {name!r}")
        tensors[name] = flat.reshape(shape).astype(np.float32)
        cursor += size
    if cursor != len(payload):
        raise ValueError(f"{path}: trailing bytes in payload")
    return ModelParams(config, tensors)
