from __future__ import annotations

from typing import Dict, Iterator, Mapping

import numpy as np


class ParamSet:
    """Named parameter arrays with matching gradient and AdaGrad-accumulator maps."""

    def __init__(self, values: Mapping[str, np.ndarray]):
        self.values: Dict[str, np.ndarray] = {k: np.ascontiguousarray(v, dtype=np.float64)
                                              for k, v in values.items()}
        self.grads: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in self.values.items()}
        self.accum: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in self.values.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def shapes(self) -> Dict[str, tuple]:
        return {k: v.shape for k, v in self.values.items()}

    @property
    def size(self) -> int:
        return sum(v.size for v in self.values.values())

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.values.values()])

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def sq_norm(self) -> float:
        return float(sum(np.vdot(v, v) for v in self.values.values()))

    def load_values(self, values: Mapping[str, np.ndarray]) -> None:
        """Overwrite values in place, keeping every array object (and any views) alive."""
        for k, v in values.items():
            self.values[k][...] = v
