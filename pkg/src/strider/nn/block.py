"""The parameter-container base class shared by every network block."""
import hashlib
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from ..autodiff import CheckpointError, Tensor


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> Tensor:
    """A trainable tensor drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Block:
    """
    A container of parameter tensors and child blocks.

    Parameters are discovered from instance attributes in definition order: every
    :class:`~strider.autodiff.Tensor`, every child :class:`Block`, and every list of
    either. Attributes whose names start with an underscore are skipped. The dotted
    attribute path is the parameter name used in checkpoints.
    """

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        out = {}
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            for name, tensor in _walk(val, f"{prefix}{key}"):
                out[name] = tensor
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def trainable_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        return {k: v for k, v in self.named_parameters(prefix).items() if v.requires_grad}

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self, prefix: str = "") -> Dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters(prefix).items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = ""):
        """Copy arrays into the existing parameters (in place); names must match."""
        params = self.named_parameters(prefix)
        missing = [k for k in params if k not in state]
        if missing:
            raise CheckpointError(f"missing parameters in checkpoint: {missing[:5]}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise CheckpointError(
                    f"shape mismatch for '{name}': checkpoint {arr.shape}, model {p.shape}"
                )
            p.data[...] = arr

    def checksum(self) -> str:
        """SHA-256 over parameter names and values."""
        return checksum_of(self.named_parameters())


def checksum_of(params: Mapping[str, Tensor]) -> str:
    sha = hashlib.sha256()
    for name in sorted(params):
        sha.update(name.encode())
        sha.update(np.ascontiguousarray(params[name].data).tobytes())
    return sha.hexdigest()


def _walk(val, name: str) -> Iterator[Tuple[str, Tensor]]:
    if isinstance(val, Tensor):
        yield name, val
    elif isinstance(val, Block):
        yield from val.named_parameters(prefix=name + ".").items()
    elif isinstance(val, (list, tuple)):
        for i, item in enumerate(val):
            yield from _walk(item, f"{name}.{i}")
