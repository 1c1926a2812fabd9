"""
Subcommand dispatch for the batch front-end

Every subcommand writes its artifacts below the configured output
directory, then a manifest, then prints one summary line with the
configuration fingerprint. Errors map to the exit code of their category.
"""

import logging
import sys
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np

from config.settings import RunConfig, load_config, thread_count
from services import diagnostics, experiments
from services.data_manager import DataManager
from services.spectral_core import build_basis, random_field
from utils.errors import LLBError, OutputError, UnknownCommandError
from utils.report_formatter import ReportFormatter

logger = logging.getLogger(__name__)

formatter = ReportFormatter()

Handler = Callable[[RunConfig, DataManager, Optional[int]], Dict[str, Any]]


def cmd_spectrum(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Eigenvalue table of the truncation"""
    basis = build_basis(config.domain)
    rows = [
        {'index': i, 'mode': tuple(int(k) for k in multi), 'lambda': float(lam)}
        for i, (multi, lam) in enumerate(zip(basis.mode_index, basis.eigenvalues))
    ]
    print(formatter.format_table(rows, ['index', 'mode', 'lambda']))
    data.write_csv('spectrum.csv', [
        {'index': r['index'], 'mode': ' '.join(map(str, r['mode'])), 'lambda': r['lambda']}
        for r in rows
    ])
    return {'modes': basis.size, 'lambda_max': basis.lambda_max}


def cmd_simulate(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Trajectory checkpoints and ledger CSVs for every path"""
    setup = experiments.build_setup(config)
    batch = experiments.simulate_batch(
        setup.u0, setup.grid, setup.scheme, setup.noise, setup.params, setup.master_seed,
        setup.n_paths, setup.stride, record_ledger=config.get('run', 'record_ledger'),
        threads=threads, fingerprint=setup.fingerprint
    )
    for traj in batch.trajectories:
        i = traj.seed.path_index
        data.save_trajectory(f"paths/path_{i:04d}.llb", traj, setup.params)
        if traj.ledger is not None:
            data.save_ledger(f"ledgers/ledger_{i:04d}.csv", traj.ledger)
    finals = [float(np.sum(t.final.coeffs ** 2)) for t in batch.trajectories]
    return {
        'paths': len(batch.trajectories),
        'blown_up': len(batch.blown_up),
        'mean_final_l2_sq': float(np.mean(finals)) if finals else float('nan')
    }


def cmd_energy_check(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """L^2 and H^1 balance residuals at full resolution"""
    setup = experiments.build_setup(config)
    batch = experiments.simulate_batch(
        setup.u0, setup.grid, setup.scheme, setup.noise, setup.params, setup.master_seed,
        setup.n_paths, stride=1, record_ledger=True, threads=threads,
        fingerprint=setup.fingerprint
    )
    max_l2, max_h1 = 0.0, 0.0
    for traj in batch.trajectories:
        l2 = diagnostics.l2_energy_residual(traj, setup.noise, setup.params)
        h1 = diagnostics.h1_energy_residual(traj, setup.noise, setup.params)
        max_l2 = max(max_l2, float(np.max(np.abs(l2))))
        max_h1 = max(max_h1, float(np.max(np.abs(h1))))
        rows = [
            {'time': float(t), 'l2_residual': float(a), 'h1_residual': float(b)}
            for t, a, b in zip(traj.times, l2, h1)
        ]
        data.write_csv(f"energy/residual_{traj.seed.path_index:04d}.csv", rows)
    return {
        'paths': len(batch.trajectories),
        'max_l2_residual': max_l2,
        'max_h1_residual': max_h1
    }


def _auto_lags(spacing: float, snapshots: int, n_paths: int) -> List[float]:
    lags = []
    step = 1
    while step < snapshots and n_paths * (snapshots - step) >= diagnostics.MIN_STRUCTURE_PAIRS:
        lags.append(step * spacing)
        step *= 2
    return lags


def cmd_moments(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Moment table, martingale proxy, structure function and optional sweep"""
    setup = experiments.build_setup(config)
    moments = config.section('moments')
    batch = experiments.simulate_batch(
        setup.u0, setup.grid, setup.scheme, setup.noise, setup.params, setup.master_seed,
        setup.n_paths, setup.stride, record_ledger=True, threads=threads,
        fingerprint=setup.fingerprint
    )
    trajs = batch.trajectories
    estimates = diagnostics.moment_report(trajs, moments['exponents'], r=moments['r'],
                                          windows=moments['windows'])
    data.write_csv('moments.csv', [e.to_dict() for e in estimates])
    proxy = diagnostics.martingale_proxy(trajs)
    data.write_csv('martingale.csv', [e.to_dict() for e in proxy])

    times = trajs[0].times
    spacing = float(times[1] - times[0])
    lags = moments['lags'] or _auto_lags(spacing, len(times), len(trajs))
    structure = diagnostics.holder_structure(trajs, lags, norm=moments['norm'])
    data.write_csv('structure.csv', structure.to_rows())

    sweep = experiments.run_moment_study(config, threads=threads)
    if sweep:
        data.write_csv('moment_study.csv', sweep)
    return {
        'paths': len(trajs),
        'blown_up': len(batch.blown_up),
        'structure_slope': structure.slope,
        'sweep_rows': len(sweep)
    }


def cmd_converge(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Galerkin truncation errors against the finest truncation"""
    setup = experiments.build_setup(config)
    report = experiments.run_galerkin_convergence(
        setup.u0, setup.grid, setup.noise, setup.params, setup.master_seed, setup.n_paths,
        config.get('convergence', 'n_list'), scheme=setup.scheme, stride=setup.stride,
        threads=threads
    )
    data.write_csv('convergence.csv', report.to_rows(),
                   fieldnames=['n_modes', 'path_index', 'sup_l2', 'int_h1_sq'])
    return {
        'reference': report.reference_modes,
        'medians': list(report.medians().values()),
        'monotone': report.monotone
    }


def cmd_uniqueness(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Perturbation growth against the Gronwall weight"""
    setup = experiments.build_setup(config)
    section = config.section('uniqueness')
    rng = np.random.default_rng(section['direction_seed'])
    direction = random_field(setup.domain, rng)
    report = experiments.run_uniqueness(
        setup.u0, [(delta, direction) for delta in section['deltas']], setup.grid, setup.noise,
        setup.params, setup.master_seed, setup.n_paths, scheme=setup.scheme,
        stride=setup.stride, threads=threads
    )
    data.write_csv('uniqueness.csv', report.to_rows())
    worst = [r.gronwall_ratio for r in report.runs if np.isfinite(r.gronwall_ratio)]
    return {
        'runs': len(report.runs),
        'max_gronwall_ratio': max(worst) if worst else float('nan'),
        'within_envelope': all(r.within_envelope for r in report.runs)
    }


def cmd_invariant(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Time-averaged moments, occupation fractions and window KS distances"""
    setup = experiments.build_setup(config)
    section = config.section('invariant')
    report = experiments.run_invariant_measure(
        setup.u0, section['horizons'], setup.grid, setup.noise, setup.params,
        setup.master_seed, setup.n_paths, radii=section['radii'], scheme=setup.scheme,
        stride=setup.stride, burn_in=section['burn_in'], threads=threads
    )
    data.write_csv('invariant.csv', report.to_rows())
    data.write_csv('invariant_cdf.csv', report.cdf_rows(),
                   fieldnames=['horizon', 'window', 'value', 'cdf'])
    return {
        'h2_sq_average': list(report.h2_sq_average),
        'ks_distance': list(report.ks_distance),
        'chebyshev': report.chebyshev_holds()
    }


def cmd_feller(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Semigroup values along weakly convergent initial data"""
    setup = experiments.build_setup(config)
    report = experiments.run_feller_check(
        setup.u0, config.get('feller', 'modes'), setup.grid, setup.noise, setup.params,
        setup.master_seed, setup.n_paths, scheme=setup.scheme, threads=threads
    )
    data.write_csv('feller.csv', report.to_rows())
    return {'base_value': report.base_value, 'differences': report.differences}


def cmd_strong_order(config: RunConfig, data: DataManager, threads: Optional[int]) -> Dict[str, Any]:
    """Strong error against a fine reference on the same Wiener path"""
    setup = experiments.build_setup(config)
    section = config.section('strong_order')
    report = experiments.run_strong_order(
        setup.u0, setup.grid, setup.noise, setup.params, setup.master_seed, setup.n_paths,
        scheme=setup.scheme, levels=section['levels'],
        reference_factor=section['reference_factor'], threads=threads
    )
    data.write_csv('strong_order.csv', report.to_rows())
    return {'scheme': report.scheme, 'order': report.order}


COMMANDS: Dict[str, Handler] = {
    'spectrum': cmd_spectrum,
    'simulate': cmd_simulate,
    'energy-check': cmd_energy_check,
    'moments': cmd_moments,
    'converge': cmd_converge,
    'uniqueness': cmd_uniqueness,
    'invariant': cmd_invariant,
    'feller': cmd_feller,
    'strong-order': cmd_strong_order,
}


def dispatch(command: str, config: RunConfig, threads: Optional[int] = None) -> int:
    """Run one subcommand; returns the process exit status"""
    try:
        handler = COMMANDS.get(command)
        if handler is None:
            raise UnknownCommandError(
                f"unknown subcommand '{command}', expected one of {', '.join(COMMANDS)}"
            )
        data = DataManager(config.output_dir)
        fields = handler(config, data, threads)
        data.write_manifest(command, config, extra={'summary': fields})
        print(formatter.summary_line(command, config.fingerprint, **fields))
        return 0
    except LLBError as e:
        logger.error("%s failed: %s", command, e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error("%s failed: %s", command, e)
        print(f"error: {e}", file=sys.stderr)
        return OutputError.exit_code


def execute(command: str, config_path: Optional[str] = None, overrides: Iterable[str] = (),
            threads: Optional[int] = None) -> int:
    """Load the configuration, then dispatch"""
    try:
        config = load_config(config_path, list(overrides))
        if threads is None:
            threads = thread_count()
    except LLBError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return dispatch(command, config, threads)
