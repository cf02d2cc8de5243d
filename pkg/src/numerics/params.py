"""
Named parameter storage with matching gradient buffers.
"""

from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from ..errors import ConsistencyError, DimensionError
from .tensor import resolve_dtype


class ParamStore:
    """Holds named parameter tensors and one gradient buffer per parameter."""

    def __init__(self, dtype: Union[str, np.dtype] = "float32"):
        self.dtype = resolve_dtype(dtype)
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        """Register a parameter; its gradient buffer starts at zero."""
        if name in self.params:
            raise ConsistencyError(f"Duplicate parameter name: {name}")
        tensor = np.array(value, dtype=self.dtype, copy=True)
        self.params[name] = tensor
        self.grads[name] = np.zeros_like(tensor)
        return tensor

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> List[str]:
        return sorted(self.params)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self.params[name]

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        """Add grad into the buffer of parameter name."""
        buffer = self.grads[name]
        if grad.shape != buffer.shape:
            raise DimensionError(f"Gradient for {name} has shape {grad.shape}, expected {buffer.shape}")
        buffer += grad

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            self.grads[name] = np.zeros_like(value)

    def scale_grads(self, factor: float) -> None:
        for grad in self.grads.values():
            grad *= factor

    def copy(self) -> "ParamStore":
        return self.astype(self.dtype)

    def astype(self, dtype: Union[str, np.dtype]) -> "ParamStore":
        """Return a deep copy with every parameter cast to dtype."""
        other = ParamStore(dtype)
        for name, value in self.items():
            other.add(name, value)
        return other

    def load(self, values: Dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place from a name -> array mapping."""
        missing = set(self.params) - set(values)
        if missing:
            raise ConsistencyError(f"Missing parameters: {', '.join(sorted(missing))}")
        for name, current in self.params.items():
            value = values[name]
            if value.shape != current.shape:
                raise DimensionError(f"Parameter {name} has shape {value.shape}, expected {current.shape}")
            current[...] = value

    def num_values(self) -> int:
        return int(sum(value.size for value in self.params.values()))


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], bound: float) -> np.ndarray:
    """Uniform(-bound, bound) draw in float64 (cast by ParamStore.add)."""
    return rng.uniform(-bound, bound, size=shape)


def he_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """He-uniform weights for ReLU layers, shape fan_out x fan_in."""
    return uniform_init(rng, (fan_out, fan_in), float(np.sqrt(6.0 / fan_in)))
