"""
Domain and eigenbasis models for the Neumann box
"""

from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ConfigurationError, UnsupportedDimensionError

SUPPORTED_DIMENSIONS = (1, 2)


def _as_tuple(value: Union[int, float, Sequence], dimension: int, cast) -> tuple:
    if isinstance(value, (int, float, np.integer, np.floating)):
        return tuple(cast(value) for _ in range(dimension))
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class DomainSpec:
    """Box (0, L_1) x ... x (0, L_d) with a tensor cosine truncation"""

    dimension: int = 1
    lengths: Tuple[float, ...] = (1.0,)
    n_modes: Tuple[int, ...] = (32,)
    quad_points: Tuple[int, ...] = (65,)

    @classmethod
    def create(
        cls,
        dimension: int = 1,
        lengths: Union[float, Sequence[float], None] = None,
        n_modes: Union[int, Sequence[int]] = 32,
        quad_points: Union[int, Sequence[int], None] = None
    ) -> 'DomainSpec':
        """Build a spec from scalars or per-axis sequences and check it"""
        if dimension not in SUPPORTED_DIMENSIONS:
            raise UnsupportedDimensionError(
                f"dimension {dimension} is not supported (only 1 or 2)"
            )
        lengths_t = _as_tuple(1.0 if lengths is None else lengths, dimension, float)
        modes_t = _as_tuple(n_modes, dimension, int)
        if quad_points is None:
            quad_t = tuple(2 * n + 1 for n in modes_t)
        else:
            quad_t = _as_tuple(quad_points, dimension, int)
        spec = cls(dimension=dimension, lengths=lengths_t, n_modes=modes_t, quad_points=quad_t)
        spec.check()
        return spec

    def validate(self) -> tuple[bool, str]:
        """Validate the spec"""
        if self.dimension not in SUPPORTED_DIMENSIONS:
            return False, f"dimension must be 1 or 2, got {self.dimension}"
        for name in ('lengths', 'n_modes', 'quad_points'):
            if len(getattr(self, name)) != self.dimension:
                return False, f"{name} must have one entry per axis"
        if any(not np.isfinite(L) or L <= 0 for L in self.lengths):
            return False, "lengths must be positive"
        if any(n < 1 for n in self.n_modes):
            return False, "n_modes must be at least 1 per axis"
        for n, m in zip(self.n_modes, self.quad_points):
            if m < 2 * n + 1:
                return False, f"quad_points {m} below dealiasing bound 2*{n}+1"
        return True, ""

    def check(self) -> None:
        """Raise the matching error category if the spec is invalid"""
        if self.dimension not in SUPPORTED_DIMENSIONS:
            raise UnsupportedDimensionError(
                f"dimension {self.dimension} is not supported (only 1 or 2)"
            )
        ok, message = self.validate()
        if not ok:
            raise ConfigurationError(message, key="domain")

    @property
    def n_total(self) -> int:
        """Total number of retained modes n"""
        return int(np.prod(self.n_modes))

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        return tuple(self.quad_points)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def with_modes(self, n_modes: Union[int, Sequence[int]]) -> 'DomainSpec':
        """Same box at another truncation, default dealiased grid"""
        return DomainSpec.create(self.dimension, self.lengths, n_modes)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            'dimension': self.dimension,
            'lengths': list(self.lengths),
            'n_modes': list(self.n_modes),
            'quad_points': list(self.quad_points)
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DomainSpec':
        """Create from dictionary"""
        return cls.create(
            dimension=int(data.get('dimension', 1)),
            lengths=data.get('lengths'),
            n_modes=data.get('n_modes', 32),
            quad_points=data.get('quad_points')
        )


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Eigenvalues of the Neumann Laplacian in flat mode ordering"""

    spec: DomainSpec
    eigenvalues: np.ndarray
    mode_index: np.ndarray  # shape (n, d)
    _lookup: Dict[Tuple[int, ...], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._lookup:
            for flat, multi in enumerate(self.mode_index):
                self._lookup[tuple(int(k) for k in multi)] = flat

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def flat_index(self, multi: Sequence[int]) -> Optional[int]:
        """Flat position of a multi-index, None if outside the truncation"""
        return self._lookup.get(tuple(int(k) for k in multi))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            'spec': self.spec.to_dict(),
            'eigenvalues': self.eigenvalues.tolist(),
            'mode_index': self.mode_index.tolist()
        }
