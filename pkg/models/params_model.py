"""
Model parameters, noise family and drift breakdown
"""

from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional

import numpy as np

from models.domain_model import DomainSpec
from models.field_model import SpectralField, N_COMPONENTS


@dataclass(frozen=True)
class ModelParams:
    """Effective coefficients of the above-Curie stochastic LLB equation"""

    kappa1: float = 1.0
    kappa2: float = 1.0
    gamma: float = 1.0
    mu: float = 1.0
    # include gamma in the Stratonovich-to-Ito correction
    strat_gamma: bool = True

    # raw physical inputs, when the effective values were derived
    temperature: Optional[float] = None
    curie_temperature: Optional[float] = None
    chi_parallel: Optional[float] = None

    def validate(self) -> tuple[bool, str]:
        """Validate the coefficients"""
        for name in ('kappa1', 'kappa2', 'gamma', 'mu'):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                return False, f"{name} must be strictly positive, got {value}"
        if self.has_raw_inputs:
            if self.temperature <= self.curie_temperature:
                return False, "temperature must exceed the Curie temperature"
            if self.chi_parallel <= 0:
                return False, "chi_parallel must be positive"
            mu = 3.0 * self.temperature / (5.0 * (self.temperature - self.curie_temperature))
            if not np.isclose(mu, self.mu, rtol=1e-12):
                return False, "mu does not match 3T/(5(T-Tc))"
            if not np.isclose(self.kappa1 / self.chi_parallel, self.kappa2, rtol=1e-12):
                return False, "kappa2 does not match kappa1/chi_parallel"
        return True, ""

    @property
    def has_raw_inputs(self) -> bool:
        return None not in (self.temperature, self.curie_temperature, self.chi_parallel)

    @property
    def correction_factor(self) -> float:
        """Prefactor of sum_k Pi_n(G_k x h_k) in the Ito drift"""
        return 0.5 * self.gamma if self.strat_gamma else 0.5

    def replace(self, **changes) -> 'ModelParams':
        data = self.to_dict()
        data.update(changes)
        return ModelParams.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            'kappa1': self.kappa1,
            'kappa2': self.kappa2,
            'gamma': self.gamma,
            'mu': self.mu,
            'strat_gamma': self.strat_gamma,
            'temperature': self.temperature,
            'curie_temperature': self.curie_temperature,
            'chi_parallel': self.chi_parallel
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelParams':
        """Create from dictionary"""
        return cls(
            kappa1=float(data.get('kappa1', 1.0)),
            kappa2=float(data.get('kappa2', 1.0)),
            gamma=float(data.get('gamma', 1.0)),
            mu=float(data.get('mu', 1.0)),
            strat_gamma=bool(data.get('strat_gamma', True)),
            temperature=data.get('temperature'),
            curie_temperature=data.get('curie_temperature'),
            chi_parallel=data.get('chi_parallel')
        )


@dataclass(eq=False)
class NoiseBasis:
    """Family h_1..h_K with its W^{1,inf} bound ledger"""

    domain: DomainSpec
    fields: List[SpectralField] = field(default_factory=list)
    w1inf_bounds: List[float] = field(default_factory=list)
    recipe: Dict[str, Any] = field(default_factory=dict)
    # filled once at construction; paths on worker threads only read them
    coeff_stack: np.ndarray = field(init=False, repr=False)
    grid_values: np.ndarray = field(init=False, repr=False)
    grid_gradients: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        from services.spectral_core import get_space

        grid = self.domain.grid_shape
        if not self.fields:
            self.coeff_stack = np.zeros((0, N_COMPONENTS, self.domain.n_total))
            self.grid_values = np.zeros((0, N_COMPONENTS) + grid)
            self.grid_gradients = np.zeros((self.domain.dimension, 0, N_COMPONENTS) + grid)
            return
        self.coeff_stack = np.stack([h.coeffs for h in self.fields])
        space = get_space(self.domain)
        self.grid_values = space.synthesize_array(self.coeff_stack)
        self.grid_gradients = space.gradient_array(self.coeff_stack)

    @property
    def size(self) -> int:
        return len(self.fields)

    @property
    def total_bound(self) -> float:
        """h = sum_k ||h_k||^2_{W^{1,inf}}"""
        return float(sum(self.w1inf_bounds))

    def validate(self) -> tuple[bool, str]:
        if len(self.fields) != len(self.w1inf_bounds):
            return False, "one W^{1,inf} bound per noise field is required"
        for h in self.fields:
            if h.domain != self.domain:
                return False, "noise field on a different domain"
            ok, message = h.validate()
            if not ok:
                return False, message
        if not np.isfinite(self.total_bound):
            return False, "noise bound is not finite"
        return True, ""

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            'domain': self.domain.to_dict(),
            'fields': [h.coeffs.tolist() for h in self.fields],
            'w1inf_bounds': list(self.w1inf_bounds),
            'total_bound': self.total_bound,
            'recipe': dict(self.recipe)
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NoiseBasis':
        """Create from dictionary"""
        domain = DomainSpec.from_dict(data.get('domain', {}))
        fields = [
            SpectralField(np.asarray(c, dtype=float).reshape(N_COMPONENTS, domain.n_total), domain)
            for c in data.get('fields', [])
        ]
        return cls(
            domain=domain,
            fields=fields,
            w1inf_bounds=[float(b) for b in data.get('w1inf_bounds', [])],
            recipe=dict(data.get('recipe', {}))
        )


@dataclass(eq=False)
class DriftBreakdown:
    """Pieces of the Ito drift F_n"""

    f1: SpectralField
    f2: SpectralField
    f3: SpectralField
    strat_correction: SpectralField
    total: SpectralField
