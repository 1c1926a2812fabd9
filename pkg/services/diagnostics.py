"""
Energy balances, moment estimates and regularity diagnostics

The ledger records, at every step, the terms of the two exact balances
of the Galerkin system:

  L^2: 1/2||u(t)||^2 + k1 int||grad u||^2 + k2 int int(1 + mu|u|^2)|u|^2
       = 1/2||u0||^2 + int (Ito term) + sum_k k1 int <u, h_k> dW_k
  H^1: 1/2||grad u(t)||^2 + k1 int||Lap u||^2 + k2 int int(1 + mu|u|^2)|grad u|^2
       + 2 mu k2 int int sum_j (u . d_j u)^2
       = 1/2||grad u0||^2 + sum_k int R(u, h_k) + sum_k int <grad u, grad G_k(u)> dW_k

Time integrals are left-point sums so the stochastic terms are Ito sums.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis
from models.report_model import MomentEstimate, StructureFunction
from models.trajectory_model import (
    EnergyLedger, Trajectory, SNAPSHOT_COLUMNS, CUMULATIVE_COLUMNS
)
from services import llb_model
from services.llb_model import cross_components
from services.spectral_core import get_space, sobolev_norm, linf_norm, lp_norm
from utils.errors import ConfigurationError, DimensionError, LedgerError, StatisticsError

logger = logging.getLogger(__name__)

MIN_STRUCTURE_PAIRS = 8
MAX_CROSS_EXPONENT = 4.0 / 3.0
WINDOWED_MOMENTS = ('int_grad_sq', 'int_quartic', 'int_lap_sq', 'sup_grad_sq')

# cumulative column -> instantaneous rate it integrates
RATE_SOURCES = {
    'int_l2_sq': 'l2_sq',
    'int_grad_sq': 'grad_sq',
    'int_lap_sq': 'lap_sq',
    'int_l4_4': 'l4_4',
    'int_quartic': 'quartic',
    'int_weighted_grad': 'weighted_grad',
    'int_u_dot_grad_sq': 'u_dot_grad_sq',
    'ito_l2': 'ito_l2_rate',
    'remainder': 'ito_h1_rate',
}


def _dot(a: np.ndarray, b: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.sum(a * b, axis=axis)


def ito_rates(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> tuple[float, float]:
    """Ito drift contributions to d(1/2||u||^2) and d(1/2||grad u||^2)

    <u, C(u)> + 1/2 sum_k ||G_k||^2 and <grad u, grad C(u)> + 1/2 sum_k ||grad G_k||^2,
    with C the Stratonovich correction. With the full correction the first
    reduces to k1^2/2 sum_k ||h_k||^2 and the second to sum_k R(u, h_k).
    """
    if nb.size == 0:
        return 0.0, 0.0
    space = get_space(u.domain)
    lam = space.eigenvalues
    G = llb_model.noise_operators(u, nb, p)
    corr = llb_model.strat_correction(u, nb, p).coeffs
    l2_rate = float(np.sum(u.coeffs * corr) + 0.5 * np.sum(G ** 2))
    h1_rate = float(np.sum(lam * u.coeffs * corr) + 0.5 * np.sum(lam * G ** 2))
    return l2_rate, h1_rate


def ledger_terms(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> Dict[str, float]:
    """Instantaneous ledger values of one state"""
    space = get_space(u.domain)
    c = u.coeffs
    lam = space.eigenvalues
    values = space.synthesize_array(c)
    grads = space.gradient_array(c)
    lap_values = space.synthesize_array(space.laplacian_array(c))

    mod_sq = np.sum(values ** 2, axis=0)
    weight = 1.0 + p.mu * mod_sq
    grad_mod_sq = np.sum(grads ** 2, axis=(0, 1))
    u_dot_grad = _dot(values[np.newaxis], grads, axis=1)
    cross = cross_components(values, lap_values)
    cubic = weight * values

    l2_sq = float(np.sum(c ** 2))
    terms = {
        'l2_sq': l2_sq,
        'half_l2': 0.5 * l2_sq,
        'grad_sq': float(np.sum(lam * c ** 2)),
        'lap_sq': float(np.sum(lam ** 2 * c ** 2)),
        'quartic': float(space.integrate(weight * mod_sq)),
        'l4_4': float(space.integrate(mod_sq ** 2)),
        'cross_norm': float(np.sqrt(space.integrate(np.sum(cross ** 2, axis=0)))),
        'cubic_sq': float(space.integrate(np.sum(cubic ** 2, axis=0))),
        'linf': float(np.sqrt(np.max(mod_sq))),
        'weighted_grad': float(space.integrate(weight * grad_mod_sq)),
        'u_dot_grad_sq': float(np.sum(space.integrate(u_dot_grad ** 2))),
        'pairing_sq': float(np.sum(space.integrate(u_dot_grad) ** 2)),
    }
    terms['ito_l2_rate'], terms['ito_h1_rate'] = ito_rates(u, nb, p)
    return terms


class LedgerRecorder:
    """Accumulates the energy ledger along a path, one call per step"""

    def __init__(self, nb: NoiseBasis, p: ModelParams, stride: int = 1):
        self.nb = nb
        self.p = p
        self.stride = stride
        self._series: Dict[str, List[float]] = {
            name: [] for name in ('times',) + SNAPSHOT_COLUMNS + CUMULATIVE_COLUMNS
        }
        self._totals = {name: 0.0 for name in CUMULATIVE_COLUMNS}
        self._current: Optional[Dict[str, float]] = None

    def _store(self, t: float) -> None:
        self._series['times'].append(t)
        for name in SNAPSHOT_COLUMNS:
            self._series[name].append(self._current[name])
        for name in CUMULATIVE_COLUMNS:
            self._series[name].append(self._totals[name])

    def start(self, u0: SpectralField) -> None:
        self._current = ledger_terms(u0, self.nb, self.p)
        self._store(0.0)

    def advance(self, u: SpectralField, dW_row: np.ndarray, dt: float,
                u_next: SpectralField, t_next: float, keep: bool = True) -> None:
        """Add the step u -> u_next using left-point values at u"""
        if self._current is None:
            raise LedgerError("recorder used before start()")
        terms = self._current
        for column, rate in RATE_SOURCES.items():
            self._totals[column] += dt * terms[rate]
        if self.nb.size:
            # sum_k G_k(u) dW_k paired with u and with -Lap u
            increment = llb_model.noise_increment(u, self.nb, self.p, dW_row)
            lam = get_space(u.domain).eigenvalues
            self._totals['stoch_l2'] += float(np.sum(u.coeffs * increment))
            self._totals['stoch_h1'] += float(np.sum(lam * u.coeffs * increment))
        self._current = ledger_terms(u_next, self.nb, self.p)
        if keep:
            self._store(t_next)

    def finish(self) -> EnergyLedger:
        columns = {name: np.asarray(v) for name, v in self._series.items()}
        return EnergyLedger.from_columns(self.stride, columns)


def _full_ledger(traj: Trajectory, nb: NoiseBasis) -> EnergyLedger:
    if traj.ledger is None:
        raise LedgerError("trajectory was simulated without a ledger")
    if traj.ledger.stride != 1:
        raise LedgerError(
            f"energy residuals need every step, ledger stride is {traj.ledger.stride}"
        )
    if nb.size and nb.domain != traj.domain:
        raise DimensionError("noise basis and trajectory differ in truncation")
    return traj.ledger


def l2_energy_residual(traj: Trajectory, nb: NoiseBasis, p: ModelParams) -> np.ndarray:
    """LHS - RHS of the L^2 balance at every snapshot"""
    led = _full_ledger(traj, nb)
    lhs = led.half_l2 + p.kappa1 * led.int_grad_sq + p.kappa2 * led.int_quartic
    rhs = led.half_l2[0] + led.ito_l2 + led.stoch_l2
    return lhs - rhs


def h1_energy_residual(traj: Trajectory, nb: NoiseBasis, p: ModelParams) -> np.ndarray:
    """LHS - RHS of the H^1 balance at every snapshot

    The (u, grad u)^2 term is taken pointwise, int sum_j (u . d_j u)^2 dx;
    the global pairing sum_j (int u . d_j u dx)^2 is kept in the ledger as
    pairing_sq for comparison but does not close the balance.
    """
    led = _full_ledger(traj, nb)
    lhs = (
        0.5 * led.grad_sq
        + p.kappa1 * led.int_lap_sq
        + p.kappa2 * led.int_weighted_grad
        + 2.0 * p.mu * p.kappa2 * led.int_u_dot_grad_sq
    )
    rhs = 0.5 * led.grad_sq[0] + led.remainder + led.stoch_h1
    return lhs - rhs


def r_remainder(u: SpectralField, k: int, nb: NoiseBasis, p: ModelParams) -> float:
    """R(u, h_k) = 1/2 g <grad u, G_k x grad h_k> + 1/2 <g u x grad h_k + k1 grad h_k, grad G_k>

    k is 0-based.
    """
    space = get_space(u.domain)
    G = llb_model.noise_operator(u, k, nb, p)
    values = space.synthesize_array(u.coeffs)
    G_values = space.synthesize_array(G.coeffs)
    grad_u = space.gradient_array(u.coeffs)
    grad_G = space.gradient_array(G.coeffs)
    grad_h = llb_model.noise_gradients(nb)[:, k]

    first = _dot(grad_u, cross_components(G_values[np.newaxis], grad_h, axis=1), axis=1)
    transport = p.gamma * cross_components(values[np.newaxis], grad_h, axis=1) + p.kappa1 * grad_h
    second = _dot(transport, grad_G, axis=1)
    total = 0.5 * p.gamma * first.sum(axis=0) + 0.5 * second.sum(axis=0)
    return float(space.integrate(total))


def remainder_sum(u: SpectralField, nb: NoiseBasis, p: ModelParams) -> float:
    """sum_k R(u, h_k)"""
    return math.fsum(r_remainder(u, k, nb, p) for k in range(nb.size))


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Order-independent mean and standard error"""
    values = [float(v) for v in values]
    n = len(values)
    if n == 0:
        raise StatisticsError("no samples")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def time_integral(times: np.ndarray, values: np.ndarray) -> float:
    """Left-point sum over snapshot intervals"""
    if len(times) < 2:
        return 0.0
    return float(np.sum(values[:-1] * np.diff(times)))


def _ledgers(batch: Sequence[Trajectory]) -> List[EnergyLedger]:
    if not batch:
        raise StatisticsError("empty trajectory batch")
    ledgers = [traj.ledger for traj in batch]
    if any(led is None for led in ledgers):
        raise LedgerError("every trajectory in the batch needs a ledger")
    return ledgers


def window_edges(n_snapshots: int, windows: int) -> np.ndarray:
    """Snapshot indices splitting [0, T] into nearly equal consecutive blocks"""
    if windows > n_snapshots - 1:
        raise StatisticsError(f"{windows} windows need at least {windows + 1} snapshots")
    return np.linspace(0, n_snapshots - 1, windows + 1).round().astype(int)


def _window_functionals(led: EnergyLedger, i0: int, i1: int) -> Dict[str, float]:
    return {
        'int_grad_sq': float(led.int_grad_sq[i1] - led.int_grad_sq[i0]),
        'int_quartic': float(led.int_quartic[i1] - led.int_quartic[i0]),
        'int_lap_sq': float(led.int_lap_sq[i1] - led.int_lap_sq[i0]),
        'sup_grad_sq': float(np.max(led.grad_sq[i0:i1 + 1])),
    }


def moment_report(batch: Sequence[Trajectory], p_exponents: Iterable[float] = (1.0,),
                  r: float = 1.2, windows: int = 0) -> List[MomentEstimate]:
    """Monte Carlo estimates of the a priori moment functionals

    Cumulative rows cover [0, T]. With windows > 0 the time integrals and
    sup of ||grad u||^2 are also estimated on consecutive blocks of
    snapshots; those rows carry t_start and t_end.
    """
    if not 1.0 <= r < MAX_CROSS_EXPONENT:
        raise ConfigurationError(f"cross-term exponent r={r} outside [1, 4/3)", key="moments.r")
    if windows < 0:
        raise ConfigurationError("windows must be non-negative", key="moments.windows")
    p_exponents = list(p_exponents)
    ledgers = _ledgers(batch)
    per_path = []
    for led in ledgers:
        per_path.append({
            'sup_l2_sq': float(np.max(2.0 * led.half_l2)),
            'int_grad_sq': float(led.int_grad_sq[-1]),
            'int_quartic': float(led.int_quartic[-1]),
            'sup_grad_sq': float(np.max(led.grad_sq)),
            'int_lap_sq': float(led.int_lap_sq[-1]),
            'int_cubic_sq': time_integral(led.times, led.cubic_sq),
            'int_cross_r': time_integral(led.times, led.cross_norm ** r),
            'int_linf_sq': time_integral(led.times, led.linf ** 2),
        })

    rows = []
    n = len(per_path)
    for exponent in p_exponents:
        for name in ('sup_l2_sq', 'int_grad_sq', 'int_quartic', 'sup_grad_sq',
                     'int_lap_sq', 'int_cross_r', 'int_linf_sq'):
            mean, err = mean_stderr([row[name] ** exponent for row in per_path])
            rows.append(MomentEstimate(name, float(exponent), mean, err, n))
    mean, err = mean_stderr([row['int_cubic_sq'] for row in per_path])
    rows.append(MomentEstimate('int_cubic_sq', 1.0, mean, err, n))

    if windows:
        times = ledgers[0].times
        if any(len(led.times) != len(times) for led in ledgers):
            raise LedgerError("windowed moments need ledgers on a common snapshot grid")
        edges = window_edges(len(times), windows)
        for i0, i1 in zip(edges[:-1], edges[1:]):
            blocks = [_window_functionals(led, i0, i1) for led in ledgers]
            for exponent in p_exponents:
                for name in WINDOWED_MOMENTS:
                    mean, err = mean_stderr([block[name] ** exponent for block in blocks])
                    rows.append(MomentEstimate(name, float(exponent), mean, err, n,
                                               t_start=float(times[i0]), t_end=float(times[i1])))
    return rows


def martingale_proxy(batch: Sequence[Trajectory]) -> List[MomentEstimate]:
    """Mean and standard error at T of both stochastic-integral ledgers"""
    ledgers = _ledgers(batch)
    rows = []
    for name in ('stoch_l2', 'stoch_h1'):
        mean, err = mean_stderr([getattr(led, name)[-1] for led in ledgers])
        rows.append(MomentEstimate(name, 1.0, mean, err, len(ledgers)))
    return rows


def interpolation_ratios(samples: Sequence[SpectralField], d: Optional[int] = None) -> float:
    """max ||v||_X / (||v||_{L^2}^{1/2} ||v||_{H^1}^{1/2}), X = L^inf (d=1) or L^4 (d=2)"""
    best = 0.0
    for v in samples:
        dim = d if d is not None else v.domain.dimension
        if dim != v.domain.dimension:
            raise DimensionError(f"sample lives in dimension {v.domain.dimension}, not {dim}")
        l2 = sobolev_norm(v, 0.0)
        if l2 == 0.0:
            continue
        h1 = sobolev_norm(v, 0.5)
        top = linf_norm(v) if dim == 1 else lp_norm(v, 4.0)
        best = max(best, top / math.sqrt(l2 * h1))
    return best


def cross_term_ratios(samples: Sequence[SpectralField]) -> float:
    """max ||Pi_n(u x Lap u)|| / (||u||_{H^1}^{1/2} ||u||_{H^2}^{3/2})"""
    best = 0.0
    for u in samples:
        h1 = sobolev_norm(u, 0.5)
        if h1 == 0.0:
            continue
        h2 = sobolev_norm(u, 1.0)
        cross = sobolev_norm(llb_model.f2_cross_term(u), 0.0)
        best = max(best, cross / (math.sqrt(h1) * h2 ** 1.5))
    return best


def _increment_norms(traj: Trajectory, lag: int, norm: str) -> np.ndarray:
    coeffs = traj.coeff_array()
    diff = coeffs[lag:] - coeffs[:-lag]
    if norm == 'L2':
        return np.sqrt(np.sum(diff ** 2, axis=(1, 2)))
    space = get_space(traj.domain)
    values = space.synthesize_array(diff)
    modulus = np.sqrt(np.sum(values ** 2, axis=1))
    return space.integrate(modulus ** 1.5) ** (2.0 / 3.0)


def holder_structure(batch: Sequence[Trajectory], lags: Sequence[float], norm: str = 'L2',
                     order: float = 2.0) -> StructureFunction:
    """Structure function over a batch sharing one snapshot grid

    The slope is a least-squares fit of log S vs log tau over lags in
    [4 dt, T/8], dt being the snapshot spacing.
    """
    if norm not in ('L2', 'L3/2'):
        raise ConfigurationError(f"norm must be 'L2' or 'L3/2', got '{norm}'")
    if not batch:
        raise StatisticsError("empty trajectory batch")
    times = batch[0].times
    if len(times) < 2:
        raise StatisticsError("trajectories hold a single snapshot")
    spacing = float(times[1] - times[0])
    for traj in batch[1:]:
        if len(traj.times) != len(times) or not np.allclose(traj.times, times):
            raise ConfigurationError("trajectories do not share a time grid")

    lags = np.asarray(sorted(lags), dtype=float)
    steps = np.rint(lags / spacing).astype(int)
    if np.any(steps < 1) or not np.allclose(steps * spacing, lags, rtol=1e-9, atol=1e-12):
        raise ConfigurationError("lags must be positive multiples of the snapshot spacing")

    moments = np.zeros(len(lags))
    counts = np.zeros(len(lags), dtype=int)
    for i, step in enumerate(steps):
        samples = []
        for traj in batch:
            if step < len(traj.times):
                samples.extend(_increment_norms(traj, step, norm) ** order)
        counts[i] = len(samples)
        if counts[i] < MIN_STRUCTURE_PAIRS:
            raise StatisticsError(
                f"lag {lags[i]:g} has {counts[i]} pairs, need {MIN_STRUCTURE_PAIRS}"
            )
        moments[i] = math.fsum(samples) / counts[i]

    t_end = float(times[-1])
    window = (4.0 * spacing, t_end / 8.0)
    mask = (lags >= window[0] - 1e-12) & (lags <= window[1] + 1e-12) & (moments > 0)
    slope = float('nan')
    if np.count_nonzero(mask) >= 2:
        slope = float(np.polyfit(np.log(lags[mask]), np.log(moments[mask]), 1)[0])
    else:
        logger.info("Structure function: fewer than two lags in the fit window %s", window)
    return StructureFunction(
        lags=lags, moments=moments, pair_counts=counts, order=order,
        norm=norm, slope=slope, fit_window=window
    )
