"""
ModelCheckpoint files: a flat container of named float64 tensors.

Layout (all integers unsigned 32-bit little-endian, values float64 little-endian)::

    b"VTLAB1" | count | count x (name_len | name utf-8 | rank | dims... | values...)
"""
import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

from ..core.logging_config import LogCategory, get_logger
from ..error_handling import MissingInputError, RejectedInputError
from .mlp import HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS, Mlp

logger = get_logger(__name__, LogCategory.PERSISTENCE)

MAGIC = b"VTLAB1"
_U32 = struct.Struct("<I")


def encode(tensors: Dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, _U32.pack(len(tensors))]
    for name, value in tensors.items():
        array = np.asarray(value, dtype="<f8")
        raw_name = name.encode("utf-8")
        parts.append(_U32.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(_U32.pack(array.ndim))
        parts.extend(_U32.pack(dim) for dim in array.shape)
        parts.append(np.ascontiguousarray(array).tobytes())
    return b"".join(parts)


def decode(blob: bytes) -> Dict[str, np.ndarray]:
    if not blob.startswith(MAGIC):
        raise RejectedInputError("not a VTLAB1 checkpoint (bad magic)")
    offset = len(MAGIC)

    def read_u32() -> int:
        nonlocal offset
        if offset + 4 > len(blob):
            raise RejectedInputError("truncated checkpoint")
        (value,) = _U32.unpack_from(blob, offset)
        offset += 4
        return value

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(read_u32()):
        name_len = read_u32()
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        shape = tuple(read_u32() for _ in range(read_u32()))
        size = int(np.prod(shape)) if shape else 1
        end = offset + 8 * size
        if end > len(blob):
            raise RejectedInputError(f"truncated checkpoint while reading '{name}'")
        tensors[name] = np.frombuffer(blob[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(blob):
        raise RejectedInputError("trailing bytes after the last checkpoint tensor")
    return tensors


def save_checkpoint(path: Union[str, Path], tensors: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(tensors))
    logger.persistence_info(f"wrote {len(tensors)} tensors to {path}", operation="save_checkpoint")
    return path


def load_checkpoint(path: Union[str, Path], producer: str = "unknown") -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(str(path), producer)
    return decode(path.read_bytes())


def mlp_to_tensors(net: Mlp, prefix: str) -> Dict[str, np.ndarray]:
    tensors = {}
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        tensors[f"{prefix}.W{layer}"] = w
        tensors[f"{prefix}.b{layer}"] = b
    tensors[f"{prefix}.meta"] = np.array(
        [
            HIDDEN_ACTIVATIONS.index(net.hidden_activation),
            OUTPUT_ACTIVATIONS.index(net.output_activation),
            len(net.blocks),
            *net.blocks,
        ],
        dtype=np.float64,
    )
    return tensors


def mlp_from_tensors(tensors: Dict[str, np.ndarray], prefix: str) -> Mlp:
    meta_key = f"{prefix}.meta"
    if meta_key not in tensors:
        raise RejectedInputError(f"checkpoint has no network '{prefix}'")
    meta = [int(v) for v in tensors[meta_key]]
    n_blocks = meta[2]
    weights, biases = [], []
    layer = 0
    while f"{prefix}.W{layer}" in tensors:
        weights.append(np.array(tensors[f"{prefix}.W{layer}"]))
        biases.append(np.array(tensors[f"{prefix}.b{layer}"]))
        layer += 1
    sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights]
    return Mlp(
        tuple(sizes),
        weights,
        biases,
        HIDDEN_ACTIVATIONS[meta[0]],
        OUTPUT_ACTIVATIONS[meta[1]],
        tuple(meta[3:3 + n_blocks]),
    )
