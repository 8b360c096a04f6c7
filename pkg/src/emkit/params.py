"""Flat parameter vectors with named blocks, and stopping rules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError


class ParamVec:
    """A flat real parameter vector partitioned into named, contiguous blocks.

    Blocks are given as ``[(name, start, stop), ...]`` and must be disjoint,
    contiguous and cover every index.  Coordinate-wise variants (ECM, ECME,
    SAGE) operate on one block at a time.
    """

    __slots__ = ("values", "blocks")

    def __init__(self, values, blocks):
        self.values = np.asarray(values, dtype=np.float64).copy()
        self.blocks = tuple((str(n), int(a), int(b)) for n, a, b in blocks)
        self._validate_blocks()
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("parameter values must be finite")

    def _validate_blocks(self):
        cursor = 0
        for name, a, b in self.blocks:
            if a != cursor or b <= a:
                raise InvalidParameterError(f"block {name!r} is not contiguous from index {cursor}")
            cursor = b
        if cursor != self.values.size:
            raise InvalidParameterError("blocks do not cover all indices")

    def block(self, name: str) -> np.ndarray:
        for n, a, b in self.blocks:
            if n == name:
                return self.values[a:b]
        raise KeyError(name)

    def block_names(self):
        return [n for n, _, _ in self.blocks]

    def block_slice(self, name: str) -> slice:
        for n, a, b in self.blocks:
            if n == name:
                return slice(a, b)
        raise KeyError(name)

    def with_values(self, values) -> "ParamVec":
        return ParamVec(values, self.blocks)

    def with_block(self, name: str, new_values) -> "ParamVec":
        out = self.values.copy()
        out[self.block_slice(name)] = new_values
        return ParamVec(out, self.blocks)

    def copy(self) -> "ParamVec":
        return ParamVec(self.values, self.blocks)

    def coord_names(self):
        """Block-qualified coordinate names, e.g. ``weights[0]``."""
        names = []
        for n, a, b in self.blocks:
            names.extend(f"{n}[{j}]" for j in range(b - a))
        return names

    def sup_distance(self, other: "ParamVec") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return (
            isinstance(other, ParamVec)
            and self.blocks == other.blocks
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        parts = ", ".join(f"{n}={self.block(n)}" for n in self.block_names())
        return f"ParamVec({parts})"


@dataclass(frozen=True)
class StoppingRule:
    """Termination criteria for the generic fit loop.

    ``mode='any'`` stops as soon as either tolerance is met; ``'all'``
    requires both.  ``max_iters`` always applies.
    """

    max_iters: int = 500
    tol_param: float = 1e-8
    tol_loglik: float = 1e-8
    mode: str = "any"

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")
        if self.tol_param < 0 or self.tol_loglik < 0:
            raise InvalidParameterError("tolerances must be >= 0")
        if self.mode not in ("any", "all"):
            raise InvalidParameterError("mode must be 'any' or 'all'")

    def satisfied(self, d_loglik: float, d_param: float) -> bool:
        hit_l = abs(d_loglik) < self.tol_loglik
        hit_p = d_param < self.tol_param
        return (hit_l or hit_p) if self.mode == "any" else (hit_l and hit_p)
