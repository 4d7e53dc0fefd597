"""Tensor conventions: 64-bit float numpy arrays whose entries are all finite."""
from typing import Any, Optional, Sequence

import numpy as np
import numpy.typing as npt

from ..error_handling import RejectedInputError

Tensor = npt.NDArray[np.float64]


def as_tensor(data: Any, name: str = "input", shape: Optional[Sequence[int]] = None) -> Tensor:
    """Convert ``data`` to float64 and reject non-finite entries or a wrong shape."""
    try:
        array = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise RejectedInputError(f"{name} is not numeric: {exc}") from exc
    if shape is not None and tuple(array.shape) != tuple(shape):
        raise RejectedInputError(
            f"{name} has shape {array.shape}, expected {tuple(shape)}",
            details={"shape": list(array.shape), "expected": list(shape)},
        )
    if not np.isfinite(array).all():
        raise RejectedInputError(f"{name} contains non-finite values")
    return array


def flatten(arrays: Sequence[np.ndarray]) -> Tensor:
    """Concatenate raveled arrays into one flat vector."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.ravel(a) for a in arrays]).astype(np.float64, copy=False)


def unflatten(flat: np.ndarray, like: Sequence[np.ndarray]) -> list:
    """Split ``flat`` into arrays shaped like ``like``."""
    out, offset = [], 0
    for ref in like:
        size = ref.size
        out.append(np.asarray(flat[offset:offset + size], dtype=np.float64).reshape(ref.shape))
        offset += size
    if offset != flat.size:
        raise RejectedInputError(f"flat vector has {flat.size} entries, expected {offset}")
    return out
