"""
Field models: spectral coefficients and grid samples of R^3-valued fields
"""

from dataclasses import dataclass
from typing import Dict, Any

import numpy as np

from models.domain_model import DomainSpec
from utils.errors import DimensionError

N_COMPONENTS = 3


@dataclass(eq=False)
class SpectralField:
    """Coefficients of u in the eigenbasis, shape (3, n)"""

    coeffs: np.ndarray
    domain: DomainSpec

    @classmethod
    def zeros(cls, domain: DomainSpec) -> 'SpectralField':
        return cls(np.zeros((N_COMPONENTS, domain.n_total)), domain)

    def validate(self) -> tuple[bool, str]:
        """Validate shape and finiteness"""
        expected = (N_COMPONENTS, self.domain.n_total)
        if self.coeffs.shape != expected:
            return False, f"coefficient shape {self.coeffs.shape} != {expected}"
        if not np.all(np.isfinite(self.coeffs)):
            return False, "non-finite coefficients"
        return True, ""

    def check_shape(self) -> None:
        expected = (N_COMPONENTS, self.domain.n_total)
        if self.coeffs.shape != expected:
            raise DimensionError(f"coefficient shape {self.coeffs.shape} != {expected}")

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def copy(self) -> 'SpectralField':
        return SpectralField(self.coeffs.copy(), self.domain)

    def like(self, coeffs: np.ndarray) -> 'SpectralField':
        """New field on the same domain"""
        return SpectralField(coeffs, self.domain)

    def _other(self, other: 'SpectralField') -> np.ndarray:
        if other.domain != self.domain:
            raise DimensionError("fields live on different domains")
        return other.coeffs

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        return self.like(self.coeffs + self._other(other))

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        return self.like(self.coeffs - self._other(other))

    def __mul__(self, scalar: float) -> 'SpectralField':
        return self.like(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> 'SpectralField':
        return self.like(-self.coeffs)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            'domain': self.domain.to_dict(),
            'coeffs': self.coeffs.tolist()
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SpectralField':
        """Create from dictionary"""
        domain = DomainSpec.from_dict(data.get('domain', {}))
        coeffs = np.asarray(data.get('coeffs', []), dtype=float)
        field = cls(coeffs.reshape(N_COMPONENTS, domain.n_total), domain)
        field.check_shape()
        return field


@dataclass(eq=False)
class PhysicalField:
    """Samples on the dealiased midpoint grid, shape (3, *quad_points)"""

    values: np.ndarray
    domain: DomainSpec

    def validate(self) -> tuple[bool, str]:
        expected = (N_COMPONENTS,) + self.domain.grid_shape
        if self.values.shape != expected:
            return False, f"grid shape {self.values.shape} != {expected}"
        return True, ""

    def check_shape(self) -> None:
        ok, message = self.validate()
        if not ok:
            raise DimensionError(message)
