"""
Time stepping of the Galerkin system and Wiener path generation

Schemes:
  em    Euler-Maruyama on the Ito form (drift includes the Stratonovich correction)
  heun  stochastic Heun on the Stratonovich form
  imex  Euler-Maruyama with the k1 Laplacian treated implicitly
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis
from models.trajectory_model import (
    TimeGrid, SeedInfo, WienerIncrements, Trajectory, EnergyLedger, SCHEMES
)
from services import llb_model
from services.diagnostics import LedgerRecorder
from services.spectral_core import get_space, project
from utils.errors import BlowUpError, ConfigurationError, OutputError
from utils.file_operations import FileOperations

logger = logging.getLogger(__name__)


def _level_generator(seed: SeedInfo, level: int) -> np.random.Generator:
    if seed.master_seed < 0 or seed.path_index < 0:
        raise ConfigurationError("seeds must be non-negative", key="run.master_seed")
    return np.random.default_rng(
        np.random.SeedSequence([int(seed.master_seed), int(seed.path_index), int(level)])
    )


def generate_increments(seed: SeedInfo, n_steps: int, n_noise: int, dt: float) -> WienerIncrements:
    """Wiener increments with dyadic refinement consistency

    n_steps = b * 2^r with b odd: level 0 draws b coarse increments, each
    further level bisects every interval with a Brownian-bridge midpoint.
    Step counts that differ by a power of two therefore share one path.
    """
    if n_steps < 1:
        raise ConfigurationError(f"n_steps must be positive, got {n_steps}", key="time.n_steps")
    levels = (n_steps & -n_steps).bit_length() - 1
    base = n_steps >> levels
    h = dt * (1 << levels)
    increments = _level_generator(seed, 0).standard_normal((base, n_noise)) * np.sqrt(h)
    for level in range(1, levels + 1):
        z = _level_generator(seed, level).standard_normal(increments.shape)
        first = 0.5 * increments + 0.5 * np.sqrt(h) * z
        second = increments - first
        refined = np.empty((2 * increments.shape[0], n_noise))
        refined[0::2] = first
        refined[1::2] = second
        increments = refined
        h *= 0.5
    return WienerIncrements(increments=increments, dt=dt, seed=seed)


def _checked(u: SpectralField, step_index: Optional[int]) -> SpectralField:
    if not u.is_finite:
        raise BlowUpError(step=step_index)
    return u


def step_em_ito(u: SpectralField, dt: float, dW_row: np.ndarray, nb: NoiseBasis,
                p: ModelParams, step_index: Optional[int] = None) -> SpectralField:
    """u + dt F_n(u) + sum_k G_k(u) dW_k"""
    drift = llb_model.drift_ito(u, nb, p).total
    noise = llb_model.noise_increment(u, nb, p, dW_row)
    return _checked(u.like(u.coeffs + dt * drift.coeffs + noise), step_index)


def step_heun_strat(u: SpectralField, dt: float, dW_row: np.ndarray, nb: NoiseBasis,
                    p: ModelParams, step_index: Optional[int] = None) -> SpectralField:
    """Predictor-corrector on the Stratonovich drift and diffusion"""
    f0 = llb_model.drift_strat(u, p).coeffs
    g0 = llb_model.noise_increment(u, nb, p, dW_row)
    predicted = u.like(u.coeffs + dt * f0 + g0)
    f1 = llb_model.drift_strat(predicted, p).coeffs
    g1 = llb_model.noise_increment(predicted, nb, p, dW_row)
    return _checked(u.like(u.coeffs + 0.5 * dt * (f0 + f1) + 0.5 * (g0 + g1)), step_index)


def step_imex(u: SpectralField, dt: float, dW_row: np.ndarray, nb: NoiseBasis,
              p: ModelParams, step_index: Optional[int] = None) -> SpectralField:
    """(1 + dt k1 lambda_i) u+ = u + dt (F_n(u) + k1 lambda_i u) + noise"""
    lam = get_space(u.domain).eigenvalues
    drift = llb_model.drift_ito(u, nb, p).total
    explicit = drift.coeffs + p.kappa1 * lam * u.coeffs
    noise = llb_model.noise_increment(u, nb, p, dW_row)
    updated = (u.coeffs + dt * explicit + noise) / (1.0 + dt * p.kappa1 * lam)
    return _checked(u.like(updated), step_index)


STEPPERS: Dict[str, Callable[..., SpectralField]] = {
    'em': step_em_ito,
    'heun': step_heun_strat,
    'imex': step_imex,
}


def stability_number(u0: SpectralField, dt: float, p: ModelParams) -> float:
    """dt k1 lambda_max, the explicit stability indicator"""
    return dt * p.kappa1 * get_space(u0.domain).lambda_max


def simulate_path(
    u0: SpectralField,
    grid: TimeGrid,
    scheme: str,
    nb: NoiseBasis,
    p: ModelParams,
    seed: SeedInfo = SeedInfo(),
    stride: int = 1,
    record_ledger: bool = True,
    increments: Optional[WienerIncrements] = None,
    fingerprint: str = ""
) -> Trajectory:
    """One path; a deterministic function of its declared inputs"""
    if scheme not in STEPPERS:
        raise ConfigurationError(f"unknown scheme '{scheme}', expected one of {SCHEMES}",
                                 key="run.scheme")
    if stride < 1:
        raise ConfigurationError(f"stride must be positive, got {stride}", key="run.stride")
    ok, message = u0.validate()
    if not ok:
        raise ConfigurationError(f"initial condition: {message}", key="initial")
    if nb.size and nb.domain != u0.domain:
        raise ConfigurationError("noise basis and initial condition differ in truncation",
                                 key="noise")
    dt = grid.dt
    if scheme != 'imex' and stability_number(u0, dt, p) > 1.0:
        logger.warning(
            "explicit scheme '%s' beyond its stability bound: dt*k1*lambda_max = %.3g",
            scheme, stability_number(u0, dt, p)
        )
    if increments is None:
        increments = generate_increments(seed, grid.n_steps, nb.size, dt)
    if increments.increments.shape != (grid.n_steps, nb.size):
        raise ConfigurationError(
            f"increments shape {increments.increments.shape} != {(grid.n_steps, nb.size)}",
            key="time"
        )

    step = STEPPERS[scheme]
    recorder = LedgerRecorder(nb, p, stride) if record_ledger else None
    u = u0.copy()
    times = [0.0]
    states = [u]
    if recorder:
        recorder.start(u)

    dW = increments.increments
    for i in range(grid.n_steps):
        u_next = step(u, dt, dW[i], nb, p, step_index=i + 1)
        t_next = (i + 1) * dt
        keep = (i + 1) % stride == 0 or i + 1 == grid.n_steps
        if recorder:
            recorder.advance(u, dW[i], dt, u_next, t_next, keep)
        if keep:
            times.append(t_next)
            states.append(u_next)
        u = u_next

    return Trajectory(
        times=np.asarray(times),
        states=states,
        ledger=recorder.finish() if recorder else None,
        fingerprint=fingerprint,
        stride=stride,
        dt=dt,
        scheme=scheme,
        seed=seed
    )


def couple_resolutions(
    u0: SpectralField,
    grid: TimeGrid,
    nb: NoiseBasis,
    p: ModelParams,
    seed: SeedInfo,
    n_list: Sequence[int],
    scheme: str = 'heun',
    stride: int = 1,
    record_ledger: bool = False
) -> List[Trajectory]:
    """Same Wiener increments through several Galerkin truncations"""
    if not n_list:
        return []
    base = u0.domain
    specs = {n: base.with_modes(n) for n in n_list}
    noises = {}
    for n in sorted(n_list):
        noises[n] = llb_model.project_noise(nb, specs[n])
    increments = generate_increments(seed, grid.n_steps, nb.size, grid.dt)
    trajectories = []
    for n in n_list:
        trajectories.append(simulate_path(
            project(u0, specs[n]), grid, scheme, noises[n], p, seed=seed,
            stride=stride, record_ledger=record_ledger, increments=increments
        ))
    return trajectories


def save_trajectory(traj: Trajectory, p: ModelParams, path: Union[str, Path]) -> Path:
    """Binary checkpoint in the LLB1 format"""
    return FileOperations.write_checkpoint(
        path,
        domain=traj.domain.to_dict(),
        params=p.to_dict(),
        stride=traj.stride,
        times=traj.times,
        coeffs=traj.coeff_array()
    )


def load_trajectory(path: Union[str, Path]) -> tuple[Trajectory, ModelParams]:
    """Inverse of save_trajectory (ledger and seed metadata are not stored)"""
    from models.domain_model import DomainSpec

    record = FileOperations.read_checkpoint(path)
    domain = DomainSpec.from_dict(record['domain'])
    params = ModelParams.from_dict(record['params'])
    states = [SpectralField(c.copy(), domain) for c in record['coeffs']]
    times = record['times']
    dt = float(times[1] - times[0]) / record['stride'] if len(times) > 1 else 0.0
    traj = Trajectory(times=times, states=states, stride=record['stride'], dt=dt)
    return traj, params


def export_ledger_csv(ledger: EnergyLedger, path: Union[str, Path]) -> Path:
    """One row per snapshot with a documented header"""
    if not FileOperations.export_to_csv(ledger.to_rows(), path, fieldnames=ledger.columns):
        raise OutputError(f"cannot write ledger {path}")
    return Path(path)
