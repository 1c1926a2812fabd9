"""
Report models for diagnostics and experiments
"""

from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple

import numpy as np


def _floats(values) -> List[float]:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _optional_float(value) -> Optional[float]:
    return None if value in (None, '') else float(value)


@dataclass
class MomentEstimate:
    """Monte Carlo estimate of one moment with its standard error"""

    name: str
    exponent: float
    mean: float
    stderr: float
    n_paths: int
    # set on per-window rows only
    t_start: Optional[float] = None
    t_end: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'exponent': self.exponent,
            'mean': self.mean,
            'stderr': self.stderr,
            'n_paths': self.n_paths,
            't_start': self.t_start,
            't_end': self.t_end
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MomentEstimate':
        return cls(
            name=data.get('name', ''),
            exponent=float(data.get('exponent', 1.0)),
            mean=float(data.get('mean', 0.0)),
            stderr=float(data.get('stderr', 0.0)),
            n_paths=int(data.get('n_paths', 0)),
            t_start=_optional_float(data.get('t_start')),
            t_end=_optional_float(data.get('t_end'))
        )


@dataclass
class StructureFunction:
    """S_p(tau) = mean ||u(t + tau) - u(t)||^p with its log-log slope"""

    lags: np.ndarray
    moments: np.ndarray
    pair_counts: np.ndarray
    order: float = 2.0
    norm: str = 'L2'
    slope: float = float('nan')
    fit_window: tuple = (0.0, 0.0)

    def validate(self) -> tuple[bool, str]:
        if np.any(np.diff(self.lags) <= 0):
            return False, "lags must be strictly increasing"
        if np.any(self.moments < 0):
            return False, "structure function has negative entries"
        return True, ""

    def to_rows(self) -> List[Dict[str, float]]:
        return [
            {'lag': float(t), 'moment': float(s), 'pairs': int(c)}
            for t, s, c in zip(self.lags, self.moments, self.pair_counts)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lags': _floats(self.lags),
            'moments': _floats(self.moments),
            'pair_counts': [int(c) for c in self.pair_counts],
            'order': self.order,
            'norm': self.norm,
            'slope': self.slope,
            'fit_window': list(self.fit_window)
        }


@dataclass
class UniquenessRun:
    """One (delta, path) pair of coupled trajectories"""

    delta: float
    path_index: int
    v_sq: np.ndarray
    phi_integral: np.ndarray
    amplification: float
    gronwall_ratio: float
    within_envelope: bool

    @property
    def sup_v(self) -> float:
        return float(np.sqrt(np.max(self.v_sq)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'delta': self.delta,
            'path_index': self.path_index,
            'sup_v': self.sup_v,
            'amplification': self.amplification,
            'gronwall_ratio': self.gronwall_ratio,
            'within_envelope': self.within_envelope,
            'phi_integral_final': float(self.phi_integral[-1])
        }


@dataclass
class UniquenessReport:
    """Perturbation growth against the Gronwall weight integral"""

    times: np.ndarray
    runs: List[UniquenessRun] = field(default_factory=list)
    gronwall_constant: float = 1.0
    dimension: int = 1

    def validate(self) -> tuple[bool, str]:
        for run in self.runs:
            if np.any(run.v_sq < 0):
                return False, "negative squared perturbation norm"
            if np.any(np.diff(run.phi_integral) < 0):
                return False, "Gronwall integral is decreasing"
        return True, ""

    @property
    def deltas(self) -> List[float]:
        return sorted({run.delta for run in self.runs})

    def for_delta(self, delta: float) -> List[UniquenessRun]:
        return [run for run in self.runs if run.delta == delta]

    def summary(self, quantiles=(0.5, 0.9, 1.0)) -> Dict[float, Dict[str, List[float]]]:
        """Quantiles of amplification and Gronwall ratio per delta"""
        out = {}
        for delta in self.deltas:
            runs = self.for_delta(delta)
            amp = np.array([r.amplification for r in runs])
            ratio = np.array([r.gronwall_ratio for r in runs])
            out[delta] = {
                'amplification': _floats(np.quantile(amp, quantiles)),
                'gronwall_ratio': _floats(np.quantile(ratio, quantiles)) if np.all(np.isfinite(ratio))
                else [float('nan')] * len(quantiles)
            }
        return out

    def to_rows(self) -> List[Dict[str, Any]]:
        return [run.to_dict() for run in self.runs]


@dataclass
class ConvergenceRow:
    """Error of one truncation against the reference on one path"""

    n_modes: int
    path_index: int
    sup_l2: float
    int_h1_sq: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_modes': self.n_modes,
            'path_index': self.path_index,
            'sup_l2': self.sup_l2,
            'int_h1_sq': self.int_h1_sq
        }


@dataclass
class ConvergenceReport:
    """Galerkin truncation errors against the finest run"""

    reference_modes: int
    rows: List[ConvergenceRow] = field(default_factory=list)

    def medians(self) -> Dict[int, float]:
        """Median sup_t L^2 error per truncation, coarsest first"""
        out = {}
        for n in sorted({row.n_modes for row in self.rows}):
            out[n] = float(np.median([r.sup_l2 for r in self.rows if r.n_modes == n]))
        return out

    @property
    def monotone(self) -> bool:
        values = list(self.medians().values())
        return all(a > b for a, b in zip(values, values[1:]))

    def to_rows(self) -> List[Dict[str, Any]]:
        return [row.to_dict() for row in self.rows]


@dataclass
class InvariantMeasureReport:
    """Time averages, occupation fractions and window stabilization per horizon"""

    horizons: np.ndarray
    radii: np.ndarray
    h1_sq_average: np.ndarray
    h2_sq_average: np.ndarray
    occupation: np.ndarray
    ks_distance: np.ndarray
    # sorted ||u||_{H^1} samples of the two windows, per horizon
    window_samples: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    n_paths: int = 1
    burn_in_fraction: float = 0.1
    blow_up_fraction: float = 0.0
    # window sizes are a heuristic: no mixing rate is known
    window_note: str = "windows [T, 2T] vs [2T, 4T], heuristic"

    def validate(self) -> tuple[bool, str]:
        if np.any((self.occupation < 0) | (self.occupation > 1)):
            return False, "occupation fractions outside [0, 1]"
        if np.any(np.diff(self.occupation, axis=1) > 0):
            return False, "occupation fractions increase with R"
        return True, ""

    def chebyshev_holds(self) -> bool:
        """pi_T(R) <= m_2(T) / R^2 for every horizon and radius"""
        bound = self.h1_sq_average[:, np.newaxis] / self.radii[np.newaxis, :] ** 2
        return bool(np.all(self.occupation <= bound + 1e-12))

    def tail_products(self) -> np.ndarray:
        """pi_T(R) R^2, bounded in R at fixed T"""
        return self.occupation * self.radii[np.newaxis, :] ** 2

    def window_cdf(self, j: int, window: int, x) -> np.ndarray:
        """Empirical CDF of window 0 ([T, 2T]) or 1 ([2T, 4T]) of horizon j at x"""
        samples = self.window_samples[j][window]
        if samples.size == 0:
            return np.full(np.shape(x), np.nan)
        return np.searchsorted(samples, x, side='right') / samples.size

    def cdf_rows(self) -> List[Dict[str, Any]]:
        """Step points of both window CDFs for every horizon"""
        rows = []
        for T, windows in zip(self.horizons, self.window_samples):
            for w, samples in enumerate(windows):
                n = samples.size
                rows.extend(
                    {'horizon': float(T), 'window': w, 'value': float(v), 'cdf': (i + 1) / n}
                    for i, v in enumerate(samples)
                )
        return rows

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for j, T in enumerate(self.horizons):
            row = {
                'horizon': float(T),
                'h1_sq_average': float(self.h1_sq_average[j]),
                'h2_sq_average': float(self.h2_sq_average[j]),
                'ks_distance': float(self.ks_distance[j])
            }
            for R, frac in zip(self.radii, self.occupation[j]):
                row[f'occupation_R{R:g}'] = float(frac)
            if j < len(self.window_samples):
                row['early_samples'] = int(self.window_samples[j][0].size)
                row['late_samples'] = int(self.window_samples[j][1].size)
            rows.append(row)
        return rows


@dataclass
class FellerReport:
    """|P_t phi(u0 + e_m / sqrt(1 + lambda_m)) - P_t phi(u0)| along m"""

    t: float
    modes: List[int]
    base_value: float
    base_stderr: float
    values: List[float] = field(default_factory=list)
    differences: List[float] = field(default_factory=list)
    stderrs: List[float] = field(default_factory=list)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {'mode': m, 'value': v, 'difference': d, 'stderr': s}
            for m, v, d, s in zip(self.modes, self.values, self.differences, self.stderrs)
        ]


@dataclass
class StrongOrderReport:
    """Strong error against a fine reference on the same Wiener path"""

    scheme: str
    dts: np.ndarray
    errors: np.ndarray
    order: float
    reference_dt: float
    n_paths: int = 1

    def to_rows(self) -> List[Dict[str, float]]:
        return [{'dt': float(h), 'error': float(e)} for h, e in zip(self.dts, self.errors)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scheme': self.scheme,
            'dts': _floats(self.dts),
            'errors': _floats(self.errors),
            'order': self.order,
            'reference_dt': self.reference_dt,
            'n_paths': self.n_paths
        }
