"""
Time grid, Wiener increments, energy ledger and trajectory models
"""

from dataclasses import dataclass, field, fields
from typing import Dict, Any, List, Optional

import numpy as np

from models.field_model import SpectralField
from utils.errors import ConfigurationError

SCHEMES = ('em', 'heun', 'imex')


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, t_end]"""

    t_end: float = 1.0
    n_steps: int = 1000

    def __post_init__(self):
        ok, message = self.validate()
        if not ok:
            raise ConfigurationError(message, key="time")

    def validate(self) -> tuple[bool, str]:
        if not np.isfinite(self.t_end) or self.t_end <= 0:
            return False, f"t_end must be positive, got {self.t_end}"
        if int(self.n_steps) < 1:
            return False, f"n_steps must be at least 1, got {self.n_steps}"
        return True, ""

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def refined(self, factor: int = 2) -> 'TimeGrid':
        return TimeGrid(self.t_end, self.n_steps * factor)

    def to_dict(self) -> Dict[str, Any]:
        return {'t_end': self.t_end, 'n_steps': self.n_steps}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TimeGrid':
        return cls(float(data.get('t_end', 1.0)), int(data.get('n_steps', 1000)))


@dataclass(frozen=True)
class SeedInfo:
    """Seed provenance of one path"""

    master_seed: int = 0
    path_index: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {'master_seed': self.master_seed, 'path_index': self.path_index}


@dataclass(eq=False)
class WienerIncrements:
    """Per-step, per-mode Gaussian increments, shape (n_steps, K)"""

    increments: np.ndarray
    dt: float
    seed: SeedInfo = field(default_factory=SeedInfo)

    @property
    def n_steps(self) -> int:
        return int(self.increments.shape[0])

    @property
    def n_noise(self) -> int:
        return int(self.increments.shape[1])

    def coarsen(self) -> 'WienerIncrements':
        """Pairwise sums: the path on a grid with half as many steps"""
        if self.n_steps % 2:
            raise ConfigurationError("cannot coarsen an odd number of steps", key="time.n_steps")
        summed = self.increments[0::2] + self.increments[1::2]
        return WienerIncrements(summed, 2.0 * self.dt, self.seed)

    def path(self) -> np.ndarray:
        """W_k(t_j), shape (n_steps + 1, K)"""
        out = np.zeros((self.n_steps + 1, self.n_noise))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


SNAPSHOT_COLUMNS = (
    'half_l2', 'grad_sq', 'lap_sq', 'quartic', 'l4_4', 'cross_norm',
    'cubic_sq', 'linf', 'weighted_grad', 'u_dot_grad_sq', 'pairing_sq',
)
CUMULATIVE_COLUMNS = (
    'int_l2_sq', 'int_grad_sq', 'int_lap_sq', 'int_l4_4', 'int_quartic',
    'int_weighted_grad', 'int_u_dot_grad_sq', 'ito_l2', 'remainder',
    'stoch_l2', 'stoch_h1',
)


def _empty() -> np.ndarray:
    return np.zeros(0)


@dataclass(eq=False)
class EnergyLedger:
    """Terms of the L^2 and H^1 balance identities at every snapshot

    Snapshot columns are instantaneous values; cumulative columns are
    left-point (Ito) sums accumulated at every step.
    """

    stride: int = 1
    times: np.ndarray = field(default_factory=_empty)

    half_l2: np.ndarray = field(default_factory=_empty)
    grad_sq: np.ndarray = field(default_factory=_empty)
    lap_sq: np.ndarray = field(default_factory=_empty)
    quartic: np.ndarray = field(default_factory=_empty)
    l4_4: np.ndarray = field(default_factory=_empty)
    cross_norm: np.ndarray = field(default_factory=_empty)
    cubic_sq: np.ndarray = field(default_factory=_empty)
    linf: np.ndarray = field(default_factory=_empty)
    weighted_grad: np.ndarray = field(default_factory=_empty)
    u_dot_grad_sq: np.ndarray = field(default_factory=_empty)
    pairing_sq: np.ndarray = field(default_factory=_empty)

    int_l2_sq: np.ndarray = field(default_factory=_empty)
    int_grad_sq: np.ndarray = field(default_factory=_empty)
    int_lap_sq: np.ndarray = field(default_factory=_empty)
    int_l4_4: np.ndarray = field(default_factory=_empty)
    int_quartic: np.ndarray = field(default_factory=_empty)
    int_weighted_grad: np.ndarray = field(default_factory=_empty)
    int_u_dot_grad_sq: np.ndarray = field(default_factory=_empty)
    ito_l2: np.ndarray = field(default_factory=_empty)
    remainder: np.ndarray = field(default_factory=_empty)
    stoch_l2: np.ndarray = field(default_factory=_empty)
    stoch_h1: np.ndarray = field(default_factory=_empty)

    @property
    def columns(self) -> List[str]:
        return ['time'] + list(SNAPSHOT_COLUMNS) + list(CUMULATIVE_COLUMNS)

    def validate(self) -> tuple[bool, str]:
        """Non-negativity of the terms proven non-negative"""
        for name in ('half_l2', 'grad_sq', 'lap_sq', 'quartic', 'l4_4', 'u_dot_grad_sq'):
            if np.any(getattr(self, name) < 0):
                return False, f"{name} has negative entries"
        for name in ('int_l2_sq', 'int_grad_sq', 'int_lap_sq', 'int_l4_4', 'int_quartic'):
            if np.any(np.diff(getattr(self, name)) < 0):
                return False, f"{name} is not non-decreasing"
        return True, ""

    def to_rows(self) -> List[Dict[str, float]]:
        """One dictionary per snapshot, for CSV export"""
        rows = []
        for i, t in enumerate(self.times):
            row = {'time': float(t)}
            for name in SNAPSHOT_COLUMNS + CUMULATIVE_COLUMNS:
                row[name] = float(getattr(self, name)[i])
            rows.append(row)
        return rows

    @classmethod
    def from_columns(cls, stride: int, columns: Dict[str, np.ndarray]) -> 'EnergyLedger':
        names = {f.name for f in fields(cls)}
        return cls(stride=stride, **{k: np.asarray(v) for k, v in columns.items() if k in names})


@dataclass(eq=False)
class Trajectory:
    """Snapshots of one simulated path"""

    times: np.ndarray
    states: List[SpectralField]
    ledger: Optional[EnergyLedger] = None
    fingerprint: str = ""
    stride: int = 1
    dt: float = 0.0
    scheme: str = "heun"
    seed: SeedInfo = field(default_factory=SeedInfo)

    def validate(self) -> tuple[bool, str]:
        if len(self.times) != len(self.states):
            return False, "times and states differ in length"
        if np.any(np.diff(self.times) <= 0):
            return False, "times are not strictly increasing"
        return True, ""

    @property
    def final(self) -> SpectralField:
        return self.states[-1]

    @property
    def domain(self):
        return self.states[0].domain

    def coeff_array(self) -> np.ndarray:
        """Stacked coefficients, shape (snapshots, 3, n)"""
        return np.stack([s.coeffs for s in self.states])

    def to_dict(self) -> Dict[str, Any]:
        """Metadata only; coefficients go to the binary checkpoint"""
        return {
            'fingerprint': self.fingerprint,
            'stride': self.stride,
            'dt': self.dt,
            'scheme': self.scheme,
            'seed': self.seed.to_dict(),
            'snapshots': len(self.states),
            't_end': float(self.times[-1]) if len(self.times) else 0.0
        }
