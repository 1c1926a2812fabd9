"""
Multi-path studies: uniqueness, Galerkin convergence, invariant measure,
moment sweeps, semigroup and strong-order checks

Paths are independent work units keyed by path index. They run on a
thread pool (LLB_THREADS) and results are always ordered by index, so the
worker count never changes a reported number.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.stats import ks_2samp

from config.settings import RunConfig, apply_overrides, thread_count
from models.domain_model import DomainSpec
from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis
from models.report_model import (
    ConvergenceReport, ConvergenceRow, FellerReport, InvariantMeasureReport,
    StrongOrderReport, UniquenessReport, UniquenessRun
)
from models.trajectory_model import SeedInfo, TimeGrid, Trajectory
from services import llb_model
from services.diagnostics import mean_stderr, moment_report, time_integral
from services.integrators import couple_resolutions, generate_increments, simulate_path
from services.spectral_core import (
    get_space, grad_norm_sq, linf_norm, mode_field, project, random_field, sobolev_norm
)
from utils.errors import BlowUpError, ConfigurationError, StatisticsError
from utils.file_operations import FileOperations

logger = logging.getLogger(__name__)

T = TypeVar('T')

# Empirical Gronwall constant; only the shape of the envelope is checked
GRONWALL_CONSTANT = 1.0
DEFAULT_BURN_IN = 0.1


@dataclass
class Setup:
    """Everything a run needs, materialized from a RunConfig"""

    domain: DomainSpec
    params: ModelParams
    noise: NoiseBasis
    grid: TimeGrid
    u0: SpectralField
    scheme: str = 'heun'
    stride: int = 1
    master_seed: int = 0
    n_paths: int = 1
    fingerprint: str = ""


def build_noise_from_config(config: RunConfig, domain: DomainSpec) -> NoiseBasis:
    noise = config.section('noise')
    if noise['fields_file'] is None:
        return llb_model.build_default_noise(domain, noise['k'], noise['amplitude'], noise['decay'])
    data = FileOperations.safe_read_json(noise['fields_file'])
    if data is None:
        raise ConfigurationError(f"cannot read noise fields from {noise['fields_file']}",
                                 key="noise.fields_file")
    stored = llb_model.project_noise(NoiseBasis.from_dict(data), domain)
    return llb_model.build_noise(stored.fields, recipe={'kind': 'file', 'file': noise['fields_file']})


def build_initial(config: RunConfig, domain: DomainSpec) -> SpectralField:
    """Initial condition from the named preset or a coefficient file"""
    init = config.section('initial')
    kind = init['kind']
    if kind == 'zero':
        return SpectralField.zeros(domain)
    if kind == 'constant':
        u0 = SpectralField.zeros(domain)
        # e_0 = 1 / sqrt(|D|)
        u0.coeffs[:, 0] = np.asarray(init['value']) * math.sqrt(domain.volume)
        return u0
    if kind == 'mode':
        return mode_field(domain, init['mode'], init['component'], init['amplitude'])
    if kind == 'random':
        rng = np.random.default_rng(init['seed'])
        return random_field(domain, rng, h1_radius=init['h1_radius'], decay=init['decay'])
    data = FileOperations.safe_read_json(init['file'])
    if data is None:
        raise ConfigurationError(f"cannot read initial condition from {init['file']}",
                                 key="initial.file")
    return project(SpectralField.from_dict(data), domain)


def build_setup(config: RunConfig) -> Setup:
    domain = config.domain
    return Setup(
        domain=domain,
        params=config.params,
        noise=build_noise_from_config(config, domain),
        grid=config.grid,
        u0=build_initial(config, domain),
        scheme=config.scheme,
        stride=config.stride,
        master_seed=config.master_seed,
        n_paths=config.n_paths,
        fingerprint=config.fingerprint
    )


def map_paths(task: Callable[[int], T], n_paths: int, threads: Optional[int] = None) -> List[T]:
    """task(i) for i in range(n_paths), in index order"""
    workers = threads if threads is not None else thread_count()
    if workers <= 1 or n_paths <= 1:
        return [task(i) for i in range(n_paths)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(n_paths)))


@dataclass
class BatchResult:
    """Finished trajectories plus the indices of paths that blew up"""

    trajectories: List[Trajectory] = field(default_factory=list)
    blown_up: List[int] = field(default_factory=list)
    n_paths: int = 0

    @property
    def blow_up_fraction(self) -> float:
        return len(self.blown_up) / self.n_paths if self.n_paths else 0.0


def simulate_batch(u0: SpectralField, grid: TimeGrid, scheme: str, nb: NoiseBasis,
                   p: ModelParams, master_seed: int = 0, n_paths: int = 1, stride: int = 1,
                   record_ledger: bool = True, threads: Optional[int] = None,
                   fingerprint: str = "") -> BatchResult:
    def task(i: int) -> Optional[Trajectory]:
        try:
            return simulate_path(u0, grid, scheme, nb, p, seed=SeedInfo(master_seed, i),
                                 stride=stride, record_ledger=record_ledger,
                                 fingerprint=fingerprint)
        except BlowUpError as e:
            logger.warning("Path %d discarded: %s", i, e)
            return None

    results = map_paths(task, n_paths, threads)
    batch = BatchResult(
        trajectories=[r for r in results if r is not None],
        blown_up=[i for i, r in enumerate(results) if r is None],
        n_paths=n_paths
    )
    if batch.blown_up:
        logger.warning("%d of %d paths blew up", len(batch.blown_up), n_paths)
    return batch


# Pathwise uniqueness

def gronwall_weight(u1: SpectralField, u2: SpectralField) -> float:
    """Phi(s) of the uniqueness estimate, d = 1 or d = 2"""
    s1, s2 = linf_norm(u1), linf_norm(u2)
    g = grad_norm_sq(u2)
    base = s2 * (s1 + s2)
    if u2.domain.dimension == 1:
        return base + g + g ** 2
    h2 = sobolev_norm(u2, 1.0)
    return base + g * h2 ** 2 + math.sqrt(g) * h2


def _cumulative(times: np.ndarray, rates: np.ndarray) -> np.ndarray:
    out = np.zeros(len(times))
    out[1:] = np.cumsum(rates[:-1] * np.diff(times))
    return out


def _compare(base: Trajectory, perturbed: Trajectory, delta: float, path_index: int) -> UniquenessRun:
    diff = perturbed.coeff_array() - base.coeff_array()
    v_sq = np.sum(diff ** 2, axis=(1, 2))
    phi = np.array([gronwall_weight(a, b) for a, b in zip(base.states, perturbed.states)])
    integral = _cumulative(base.times, phi)
    v0 = v_sq[0]
    if v0 > 0:
        amplification = float(np.max(v_sq) / v0)
        positive = v_sq > 0
        log_ratio = np.log(v_sq[positive] / v0)
        ratio = float(np.max(log_ratio / (1.0 + integral[positive])))
        within = bool(np.all(log_ratio <= GRONWALL_CONSTANT * integral[positive] + 1e-12))
    else:
        amplification = 0.0 if not np.any(v_sq) else float('inf')
        ratio = float('nan')
        within = not np.any(v_sq)
    return UniquenessRun(
        delta=delta, path_index=path_index, v_sq=v_sq, phi_integral=integral,
        amplification=amplification, gronwall_ratio=ratio, within_envelope=within
    )


def snapshot_times(grid: TimeGrid, stride: int) -> np.ndarray:
    """Times kept by simulate_path at this stride"""
    times = grid.times()
    kept = times[::stride]
    if grid.n_steps % stride:
        kept = np.append(kept, times[-1])
    return kept


def run_uniqueness(u0: SpectralField, perturbations: Sequence[Tuple[float, SpectralField]],
                   grid: TimeGrid, nb: NoiseBasis, p: ModelParams, master_seed: int = 0,
                   n_paths: int = 1, scheme: str = 'heun', stride: int = 1,
                   threads: Optional[int] = None) -> UniquenessReport:
    """Two solutions from nearby data driven by the same Wiener path"""
    directions = []
    for delta, direction in perturbations:
        norm = sobolev_norm(direction, 0.5)
        if norm == 0.0:
            raise ConfigurationError("perturbation direction is zero", key="uniqueness")
        directions.append((float(delta), direction * (1.0 / norm)))

    def task(i: int) -> List[UniquenessRun]:
        seed = SeedInfo(master_seed, i)
        increments = generate_increments(seed, grid.n_steps, nb.size, grid.dt)
        try:
            base = simulate_path(u0, grid, scheme, nb, p, seed=seed, stride=stride,
                                 record_ledger=False, increments=increments)
            runs = []
            for delta, direction in directions:
                perturbed = simulate_path(u0 + delta * direction, grid, scheme, nb, p, seed=seed,
                                          stride=stride, record_ledger=False, increments=increments)
                runs.append(_compare(base, perturbed, delta, i))
            return runs
        except BlowUpError as e:
            logger.warning("Uniqueness path %d discarded: %s", i, e)
            return []

    results = map_paths(task, n_paths, threads)
    report = UniquenessReport(
        times=snapshot_times(grid, stride),
        runs=[run for runs in results for run in runs],
        gronwall_constant=GRONWALL_CONSTANT,
        dimension=u0.domain.dimension
    )
    logger.info("Uniqueness: %d runs over %d deltas", len(report.runs), len(directions))
    return report


# Galerkin convergence

def _sup_and_integral(times: np.ndarray, coarse: Trajectory, ref: Trajectory) -> Tuple[float, float]:
    spec = ref.domain
    weights = 1.0 + get_space(spec).eigenvalues
    diffs = np.stack([project(s, spec).coeffs for s in coarse.states]) - ref.coeff_array()
    l2 = np.sqrt(np.sum(diffs ** 2, axis=(1, 2)))
    h1_sq = np.sum(weights * diffs ** 2, axis=(1, 2))
    return float(np.max(l2)), time_integral(times, h1_sq)


def run_galerkin_convergence(u0: SpectralField, grid: TimeGrid, nb: NoiseBasis, p: ModelParams,
                             master_seed: int = 0, n_paths: int = 1,
                             n_list: Sequence[int] = (16, 32, 64, 128), scheme: str = 'heun',
                             stride: int = 1, threads: Optional[int] = None) -> ConvergenceReport:
    """Errors of each truncation against the finest one on common noise"""
    n_list = sorted(set(int(n) for n in n_list))
    reference = n_list[-1]

    def task(i: int) -> List[ConvergenceRow]:
        try:
            trajs = couple_resolutions(u0, grid, nb, p, SeedInfo(master_seed, i), n_list,
                                       scheme=scheme, stride=stride)
        except BlowUpError as e:
            logger.warning("Convergence path %d discarded: %s", i, e)
            return []
        ref = trajs[-1]
        rows = []
        for n, traj in zip(n_list[:-1], trajs[:-1]):
            sup_l2, int_h1 = _sup_and_integral(ref.times, traj, ref)
            rows.append(ConvergenceRow(n_modes=n, path_index=i, sup_l2=sup_l2, int_h1_sq=int_h1))
        return rows

    results = map_paths(task, n_paths, threads)
    report = ConvergenceReport(reference_modes=reference,
                               rows=[row for rows in results for row in rows])
    logger.info("Galerkin convergence medians: %s", report.medians())
    return report


# Invariant measure

def _horizon_statistics(times: np.ndarray, h1_sq: np.ndarray, h2_sq: np.ndarray,
                        horizon: float, radii: np.ndarray) -> Tuple[float, float, np.ndarray]:
    mask = times <= horizon * (1 + 1e-12)
    t = times[mask]
    span = t[-1]
    if span <= 0:
        raise StatisticsError(f"horizon {horizon} shorter than one snapshot interval")
    weights = np.diff(t)
    h1 = h1_sq[mask][:-1]
    m2 = float(np.sum(h1 * weights) / span)
    mh2 = float(np.sum(h2_sq[mask][:-1] * weights) / span)
    above = np.sqrt(h1)[:, np.newaxis] > radii[np.newaxis, :]
    occupation = np.sum(above * weights[:, np.newaxis], axis=0) / span
    return m2, mh2, occupation


def window_bounds(horizon: float, burn_in: float) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Dyadic windows [T, 2T] and [2T, 4T], each without its first burn_in*T"""
    skip = burn_in * horizon
    return (horizon + skip, 2.0 * horizon), (2.0 * horizon + skip, 4.0 * horizon)


def _window_values(series: Sequence[Tuple[np.ndarray, np.ndarray]],
                   bounds: Tuple[float, float]) -> np.ndarray:
    lo, hi = bounds
    tol = 1e-12 * hi
    return np.sort(np.concatenate([v[(t >= lo - tol) & (t <= hi + tol)] for t, v in series]))


def run_invariant_measure(u0: SpectralField, horizons: Sequence[float], grid: TimeGrid,
                          nb: NoiseBasis, p: ModelParams, master_seed: int = 0,
                          n_paths: int = 1, radii: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0),
                          scheme: str = 'heun', stride: int = 1,
                          burn_in: float = DEFAULT_BURN_IN,
                          threads: Optional[int] = None) -> InvariantMeasureReport:
    """Time averages of ||u||_{H^1} laws along horizons, one long run per path

    Each path runs to 4 max(T). Moments and occupation fractions average
    over [0, T]. The stabilization metric for horizon T is the
    Kolmogorov-Smirnov distance between the values of ||u||_{H^1} over
    [T, 2T] and [2T, 4T], pooled over paths, each window dropping its
    first burn_in*T.
    """
    if not 0.0 <= burn_in < 1.0:
        raise ConfigurationError("burn_in must lie in [0, 1)", key="invariant.burn_in")
    horizons = np.asarray(sorted(horizons), dtype=float)
    radii = np.asarray(sorted(radii), dtype=float)
    t_max = 4.0 * float(horizons[-1])
    long_grid = TimeGrid(t_max, max(1, int(round(t_max / grid.dt))))
    batch = simulate_batch(u0, long_grid, scheme, nb, p, master_seed, n_paths, stride,
                           record_ledger=False, threads=threads)
    if not batch.trajectories:
        raise StatisticsError("every path blew up")

    lam = get_space(u0.domain).eigenvalues
    m2 = np.zeros((len(batch.trajectories), len(horizons)))
    mh2 = np.zeros_like(m2)
    occupation = np.zeros((len(batch.trajectories), len(horizons), len(radii)))
    series = []
    for a, traj in enumerate(batch.trajectories):
        coeffs = traj.coeff_array()
        h1_sq = np.sum((1.0 + lam) * coeffs ** 2, axis=(1, 2))
        h2_sq = np.sum((1.0 + lam) ** 2 * coeffs ** 2, axis=(1, 2))
        series.append((traj.times, np.sqrt(h1_sq)))
        for j, T in enumerate(horizons):
            m2[a, j], mh2[a, j], occupation[a, j] = _horizon_statistics(
                traj.times, h1_sq, h2_sq, T, radii
            )

    ks = np.full(len(horizons), np.nan)
    windows = []
    for j, T in enumerate(horizons):
        early, late = window_bounds(T, burn_in)
        first, second = _window_values(series, early), _window_values(series, late)
        windows.append((first, second))
        if first.size and second.size:
            ks[j] = ks_2samp(first, second).statistic

    def across(values: np.ndarray) -> np.ndarray:
        return np.array([math.fsum(col) / values.shape[0] for col in values.T])

    report = InvariantMeasureReport(
        horizons=horizons,
        radii=radii,
        h1_sq_average=across(m2),
        h2_sq_average=across(mh2),
        occupation=np.stack([across(occupation[:, j, :]) for j in range(len(horizons))]),
        ks_distance=ks,
        window_samples=windows,
        n_paths=len(batch.trajectories),
        burn_in_fraction=burn_in,
        blow_up_fraction=batch.blow_up_fraction
    )
    logger.info("Invariant measure: KS distances %s", report.ks_distance)
    return report


# Moment sweeps

def moment_sweep(config: RunConfig) -> List[List[str]]:
    """Override lists for the (n, n_steps, K) product named in [moments]"""
    moments = config.section('moments')
    axes = []
    for key, target in (('sweep_modes', 'domain.n_modes'), ('sweep_steps', 'time.n_steps'),
                        ('sweep_k', 'noise.k')):
        if moments[key]:
            axes.append([f"{target}={v}" for v in moments[key]])
    if not axes:
        return []
    return [list(cell) for cell in itertools.product(*axes)]


def run_moment_study(config: RunConfig, cells: Optional[Sequence[Sequence[str]]] = None,
                     threads: Optional[int] = None) -> List[dict]:
    """moment_report over every sweep cell, tagged with the cell fingerprint"""
    if cells is None:
        cells = moment_sweep(config)
    rows = []
    for overrides in cells:
        cell = apply_overrides(config, overrides)
        setup = build_setup(cell)
        batch = simulate_batch(setup.u0, setup.grid, setup.scheme, setup.noise, setup.params,
                               setup.master_seed, setup.n_paths, setup.stride,
                               record_ledger=True, threads=threads, fingerprint=setup.fingerprint)
        if not batch.trajectories:
            logger.warning("Moment cell %s: every path blew up", setup.fingerprint)
            continue
        estimates = moment_report(batch.trajectories, cell.get('moments', 'exponents'),
                                  r=cell.get('moments', 'r'),
                                  windows=cell.get('moments', 'windows'))
        for estimate in estimates:
            row = estimate.to_dict()
            row.update({
                'fingerprint': setup.fingerprint,
                'n_modes': setup.domain.n_modes[0],
                'n_steps': setup.grid.n_steps,
                'k': setup.noise.size,
                'blow_up_fraction': batch.blow_up_fraction
            })
            rows.append(row)
        logger.info("Moment cell %s done (%d paths)", setup.fingerprint, len(batch.trajectories))
    return rows


# Transition semigroup and Feller property

def l2_gaussian(u: SpectralField) -> float:
    """phi(u) = exp(-||u||^2_{L^2}), bounded and weakly continuous on H^1"""
    return math.exp(-float(np.sum(u.coeffs ** 2)))


def _final_values(u0: SpectralField, grid: TimeGrid, nb: NoiseBasis, p: ModelParams,
                  phi: Callable[[SpectralField], float], master_seed: int, n_paths: int,
                  scheme: str, threads: Optional[int]) -> List[Optional[float]]:
    def task(i: int) -> Optional[float]:
        try:
            traj = simulate_path(u0, grid, scheme, nb, p, seed=SeedInfo(master_seed, i),
                                 stride=grid.n_steps, record_ledger=False)
        except BlowUpError as e:
            logger.warning("Semigroup path %d discarded: %s", i, e)
            return None
        return phi(traj.final)

    return map_paths(task, n_paths, threads)


def estimate_semigroup(u0: SpectralField, phi: Callable[[SpectralField], float], grid: TimeGrid,
                       nb: NoiseBasis, p: ModelParams, master_seed: int = 0, n_paths: int = 1,
                       scheme: str = 'heun', threads: Optional[int] = None) -> Tuple[float, float]:
    """Monte Carlo P_t phi(u0) = E phi(u(t; u0)) at t = grid.t_end, with standard error"""
    values = [v for v in _final_values(u0, grid, nb, p, phi, master_seed, n_paths, scheme, threads)
              if v is not None]
    return mean_stderr(values)


def run_feller_check(u0: SpectralField, modes: Sequence[int], grid: TimeGrid, nb: NoiseBasis,
                     p: ModelParams, master_seed: int = 0, n_paths: int = 1,
                     scheme: str = 'heun', threads: Optional[int] = None,
                     phi: Callable[[SpectralField], float] = l2_gaussian) -> FellerReport:
    """P_t phi along u0 + e_m / sqrt(1 + lambda_m), which tends to u0 weakly in H^1"""
    lam = get_space(u0.domain).eigenvalues
    base = _final_values(u0, grid, nb, p, phi, master_seed, n_paths, scheme, threads)
    usable = [v for v in base if v is not None]
    base_mean, base_err = mean_stderr(usable)
    report = FellerReport(t=grid.t_end, modes=list(modes), base_value=base_mean,
                          base_stderr=base_err)
    for m in modes:
        if not 0 < m < len(lam):
            raise ConfigurationError(f"mode {m} outside 1..{len(lam) - 1}", key="feller.modes")
        shifted = u0.copy()
        shifted.coeffs[0, m] += 1.0 / math.sqrt(1.0 + lam[m])
        values = _final_values(shifted, grid, nb, p, phi, master_seed, n_paths, scheme, threads)
        paired = [(v, b) for v, b in zip(values, base) if v is not None and b is not None]
        mean, _ = mean_stderr([v for v, _ in paired])
        diff_mean, diff_err = mean_stderr([v - b for v, b in paired])
        report.values.append(mean)
        report.differences.append(abs(diff_mean))
        report.stderrs.append(diff_err)
    return report


# Strong order

def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def run_strong_order(u0: SpectralField, grid: TimeGrid, nb: NoiseBasis, p: ModelParams,
                     master_seed: int = 0, n_paths: int = 1, scheme: str = 'em',
                     levels: Sequence[int] = (1, 2, 4, 8), reference_factor: int = 64,
                     threads: Optional[int] = None) -> StrongOrderReport:
    """E||u_h(T) - u_ref(T)||_{L^2} against a finer run on the same refined Wiener path"""
    levels = sorted(int(k) for k in levels)
    if not all(_is_power_of_two(k) for k in levels) or not _is_power_of_two(reference_factor):
        raise ConfigurationError("levels and reference_factor must be powers of two",
                                 key="strong_order")
    if levels[-1] >= reference_factor:
        raise ConfigurationError("reference must be finer than every level", key="strong_order")
    n_ref = grid.n_steps * reference_factor
    ref_grid = TimeGrid(grid.t_end, n_ref)

    def task(i: int) -> Optional[List[float]]:
        seed = SeedInfo(master_seed, i)
        increments = generate_increments(seed, n_ref, nb.size, ref_grid.dt)
        try:
            ref = simulate_path(u0, ref_grid, scheme, nb, p, seed=seed, stride=n_ref,
                                record_ledger=False, increments=increments)
            errors = []
            for level in levels:
                n = grid.n_steps * level
                coarse = increments
                while coarse.n_steps > n:
                    coarse = coarse.coarsen()
                traj = simulate_path(u0, TimeGrid(grid.t_end, n), scheme, nb, p, seed=seed,
                                     stride=n, record_ledger=False, increments=coarse)
                errors.append(float(np.sqrt(np.sum((traj.final.coeffs - ref.final.coeffs) ** 2))))
            return errors
        except BlowUpError as e:
            logger.warning("Strong-order path %d discarded: %s", i, e)
            return None

    results = [r for r in map_paths(task, n_paths, threads) if r is not None]
    if not results:
        raise StatisticsError("every path blew up")
    errors = np.array([math.fsum(col) / len(results) for col in zip(*results)])
    dts = np.array([grid.t_end / (grid.n_steps * k) for k in levels])
    order = float('nan')
    if np.all(errors > 0) and len(levels) >= 2:
        order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    logger.info("Strong order (%s): %.3f", scheme, order)
    return StrongOrderReport(scheme=scheme, dts=dts, errors=errors, order=order,
                             reference_dt=ref_grid.dt, n_paths=len(results))
