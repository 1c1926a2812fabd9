import math

import numpy as np
import pytest

from models.domain_model import DomainSpec
from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis
from models.trajectory_model import SeedInfo, TimeGrid, Trajectory
from services.diagnostics import (
    cross_term_ratios, h1_energy_residual, holder_structure, interpolation_ratios, ito_rates,
    l2_energy_residual, ledger_terms, martingale_proxy, mean_stderr, moment_report,
    r_remainder, remainder_sum, time_integral, window_edges
)
from services.integrators import simulate_path
from services.llb_model import build_default_noise, build_noise, strat_correction
from services.spectral_core import grad_norm_sq, mode_field, random_field
from utils.errors import ConfigurationError, DimensionError, LedgerError, StatisticsError

from conftest import constant_field


def _final_residual(traj, nb, p, which):
    residual = l2_energy_residual(traj, nb, p) if which == 'l2' else h1_energy_residual(traj, nb, p)
    return float(np.max(np.abs(residual)))


def test_zero_field_has_zero_residuals(spec1d, params, no_noise):
    traj = simulate_path(SpectralField.zeros(spec1d), TimeGrid(0.1, 10), 'em', no_noise, params)
    assert np.all(l2_energy_residual(traj, no_noise, params) == 0.0)
    assert np.all(h1_energy_residual(traj, no_noise, params) == 0.0)


def test_l2_residual_is_first_order_for_logistic():
    """ Euler leaves 1/2 dt^2 a^2 ||u||^2 per step in the L^2 balance """
    spec = DomainSpec.create(1, n_modes=4)
    p = ModelParams()
    nb = NoiseBasis(domain=spec)
    u0 = constant_field(spec, (1.0, 0.0, 0.0))
    errors = []
    for n_steps in (100, 200):
        traj = simulate_path(u0, TimeGrid(1.0, n_steps), 'em', nb, p)
        errors.append(_final_residual(traj, nb, p, 'l2'))
    order = math.log2(errors[0] / errors[1])
    assert errors[0] > 0
    assert 0.85 < order < 1.15


@pytest.mark.parametrize('which', ['l2', 'h1'])
def test_heat_flow_residuals_are_first_order(heat_params, which):
    spec = DomainSpec.create(1, n_modes=4)
    nb = NoiseBasis(domain=spec)
    u0 = mode_field(spec, (1,), component=1)
    errors = []
    for n_steps in (100, 200):
        traj = simulate_path(u0, TimeGrid(0.1, n_steps), 'em', nb, heat_params)
        errors.append(_final_residual(traj, nb, heat_params, which))
    order = math.log2(errors[0] / errors[1])
    assert 0.85 < order < 1.15


def test_residuals_need_full_ledger(spec1d, params, no_noise):
    u0 = SpectralField.zeros(spec1d)
    strided = simulate_path(u0, TimeGrid(0.1, 10), 'em', no_noise, params, stride=2)
    with pytest.raises(LedgerError):
        l2_energy_residual(strided, no_noise, params)
    bare = simulate_path(u0, TimeGrid(0.1, 10), 'em', no_noise, params, record_ledger=False)
    with pytest.raises(LedgerError):
        h1_energy_residual(bare, no_noise, params)


def test_residual_rejects_foreign_noise(spec1d, params, no_noise):
    traj = simulate_path(SpectralField.zeros(spec1d), TimeGrid(0.1, 4), 'em', no_noise, params)
    other = build_default_noise(DomainSpec.create(1, n_modes=6), 2)
    with pytest.raises(DimensionError):
        l2_energy_residual(traj, other, params)


def test_noisy_ledger_is_consistent(spec1d, params, rng):
    nb = build_default_noise(spec1d, 4)
    traj = simulate_path(random_field(spec1d, rng), TimeGrid(0.1, 100), 'heun', nb, params,
                         seed=SeedInfo(2, 0))
    assert traj.ledger.validate() == (True, "")
    assert len(traj.ledger.times) == 101
    assert traj.ledger.stoch_l2[0] == 0.0
    assert np.all(np.isfinite(l2_energy_residual(traj, nb, params)))


def test_remainder_vanishes_for_constant_noise(spec1d, params, rng):
    h = constant_field(spec1d, (0.2, 0.1, 0.0))
    nb = build_noise([h])
    u = random_field(spec1d, rng)
    assert r_remainder(u, 0, nb, params) == pytest.approx(0.0, abs=1e-14)


def test_remainder_at_zero_field(spec1d):
    """ R(0, h) = k1^2 / 2 ||grad h||^2 """
    p = ModelParams(kappa1=1.7, gamma=0.4)
    nb = build_default_noise(spec1d, 5)
    u = SpectralField.zeros(spec1d)
    for k in range(nb.size):
        expected = 0.5 * p.kappa1 ** 2 * grad_norm_sq(nb.fields[k])
        np.testing.assert_allclose(r_remainder(u, k, nb, p), expected, rtol=1e-10)


@pytest.mark.parametrize('dimension, modes', [(1, 8), (2, (4, 4))])
def test_ito_rates_match_closed_forms(dimension, modes, rng):
    """ full correction: L^2 rate is k1^2/2 sum ||h_k||^2, H^1 rate is sum_k R(u, h_k) """
    spec = DomainSpec.create(dimension, n_modes=modes)
    p = ModelParams(kappa1=1.5, kappa2=1.0, gamma=0.7, mu=1.0)
    nb = build_default_noise(spec, 4)
    u = random_field(spec, rng, h1_radius=2.0)
    l2_rate, h1_rate = ito_rates(u, nb, p)
    expected_l2 = 0.5 * p.kappa1 ** 2 * float(np.sum(nb.coeff_stack ** 2))
    np.testing.assert_allclose(l2_rate, expected_l2, rtol=1e-9)
    np.testing.assert_allclose(h1_rate, remainder_sum(u, nb, p), rtol=1e-9)


def test_ito_rates_without_noise(spec1d, params, no_noise, rng):
    assert ito_rates(random_field(spec1d, rng), no_noise, params) == (0.0, 0.0)


def test_ledger_terms(spec1d, params, rng):
    u = random_field(spec1d, rng)
    terms = ledger_terms(u, NoiseBasis(domain=spec1d), params)
    np.testing.assert_allclose(terms['grad_sq'], grad_norm_sq(u))
    np.testing.assert_allclose(terms['half_l2'], 0.5 * terms['l2_sq'])
    assert terms['quartic'] >= terms['l2_sq'] * (1.0 - 1e-12)
    # unit box: (int f)^2 <= int f^2
    assert terms['pairing_sq'] <= terms['u_dot_grad_sq'] * (1.0 + 1e-12)


def test_mean_stderr():
    mean, err = mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert mean == pytest.approx(2.5)
    assert err == pytest.approx(math.sqrt(5.0 / 3.0 / 4.0))
    assert mean_stderr([3.0]) == (3.0, 0.0)
    with pytest.raises(StatisticsError):
        mean_stderr([])


def test_time_integral_is_left_point():
    times = np.array([0.0, 0.5, 1.0])
    assert time_integral(times, np.array([1.0, 2.0, 100.0])) == pytest.approx(1.5)
    assert time_integral(times[:1], np.array([4.0])) == 0.0


def test_moments_of_heat_flow(heat_params):
    """ int ||grad u||^2 for u = e^(-pi^2 t) e_1 """
    spec = DomainSpec.create(1, n_modes=4)
    nb = NoiseBasis(domain=spec)
    u0 = mode_field(spec, (1,), component=0)
    traj = simulate_path(u0, TimeGrid(0.1, 1000), 'heun', nb, heat_params, stride=10)
    rows = moment_report([traj, traj], p_exponents=(1.0, 2.0), r=1.2)
    assert len(rows) == 15
    table = {(row.name, row.exponent): row for row in rows}
    expected = (1.0 - math.exp(-2.0 * math.pi ** 2 * 0.1)) / 2.0
    np.testing.assert_allclose(table['int_grad_sq', 1.0].mean, expected, rtol=1e-2)
    assert table['int_grad_sq', 1.0].stderr == 0.0
    assert table['sup_l2_sq', 2.0].mean == pytest.approx(1.0)
    assert table['int_lap_sq', 1.0].mean > table['int_grad_sq', 1.0].mean
    assert table['int_cubic_sq', 1.0].n_paths == 2


def test_windowed_moments_of_heat_flow(heat_params):
    spec = DomainSpec.create(1, n_modes=4)
    u0 = mode_field(spec, (1,), component=0)
    traj = simulate_path(u0, TimeGrid(0.1, 1000), 'heun', NoiseBasis(domain=spec), heat_params,
                         stride=10)
    rows = moment_report([traj, traj], r=1.2, windows=2)
    assert len(rows) == 8 + 2 * 4
    assert all(row.t_start is None for row in rows[:8])
    early, late = rows[8:12], rows[12:16]
    assert [row.name for row in late] == ['int_grad_sq', 'int_quartic', 'int_lap_sq', 'sup_grad_sq']
    assert (early[0].t_start, early[0].t_end) == (0.0, pytest.approx(0.05))
    assert (late[0].t_start, late[0].t_end) == (pytest.approx(0.05), pytest.approx(0.1))
    k = 2.0 * math.pi ** 2
    np.testing.assert_allclose(late[0].mean, (math.exp(-k * 0.05) - math.exp(-k * 0.1)) / 2.0,
                               rtol=1e-2)
    cumulative = next(row for row in rows if row.name == 'int_grad_sq')
    assert early[0].mean + late[0].mean == pytest.approx(cumulative.mean)
    np.testing.assert_allclose(late[3].mean, math.pi ** 2 * math.exp(-k * 0.05), rtol=1e-3)
    assert early[3].mean == pytest.approx(math.pi ** 2)


def test_window_edges():
    np.testing.assert_array_equal(window_edges(101, 2), [0, 50, 100])
    np.testing.assert_array_equal(window_edges(11, 4), [0, 2, 5, 8, 10])
    with pytest.raises(StatisticsError):
        window_edges(3, 3)


def test_moment_report_errors(spec1d, params, no_noise):
    traj = simulate_path(SpectralField.zeros(spec1d), TimeGrid(0.1, 4), 'em', no_noise, params)
    with pytest.raises(ConfigurationError):
        moment_report([traj], r=4.0 / 3.0)
    with pytest.raises(StatisticsError):
        moment_report([])
    bare = simulate_path(SpectralField.zeros(spec1d), TimeGrid(0.1, 4), 'em', no_noise, params,
                         record_ledger=False)
    with pytest.raises(LedgerError):
        moment_report([bare])


def test_martingale_proxy_is_centred(spec1d, params, rng):
    nb = build_default_noise(spec1d, 4)
    u0 = random_field(spec1d, rng)
    batch = [
        simulate_path(u0, TimeGrid(0.1, 50), 'heun', nb, params, seed=SeedInfo(17, i))
        for i in range(40)
    ]
    rows = martingale_proxy(batch)
    assert [row.name for row in rows] == ['stoch_l2', 'stoch_h1']
    for row in rows:
        assert row.stderr > 0
        assert abs(row.mean) < 4.0 * row.stderr


def test_interpolation_ratio_1d(spec1d):
    """ e_1 sampled at the first midpoint: sqrt(2) cos(pi/2M) / (1 + pi^2)^(1/4) """
    M = spec1d.quad_points[0]
    expected = math.sqrt(2) * math.cos(math.pi / (2 * M)) / (1.0 + math.pi ** 2) ** 0.25
    e1 = mode_field(spec1d, (1,), component=0)
    np.testing.assert_allclose(interpolation_ratios([e1]), expected, rtol=1e-9)
    constant = constant_field(spec1d, (0.0, 0.0, 2.0))
    np.testing.assert_allclose(interpolation_ratios([constant]), 1.0, rtol=1e-12)
    assert interpolation_ratios([SpectralField.zeros(spec1d)]) == 0.0
    with pytest.raises(DimensionError):
        interpolation_ratios([e1], d=2)


def test_interpolation_ratio_2d(spec2d, rng):
    samples = [random_field(spec2d, rng) for _ in range(5)]
    ratio = interpolation_ratios(samples)
    assert 0.0 < ratio < 10.0


def test_cross_term_ratios(spec1d, rng):
    samples = [random_field(spec1d, rng) for _ in range(5)]
    assert cross_term_ratios(samples) > 0.0
    assert cross_term_ratios([SpectralField.zeros(spec1d)]) == 0.0
    # constants have zero Laplacian
    assert cross_term_ratios([constant_field(spec1d, (1.0, 0.0, 0.0))]) == pytest.approx(0.0)


def _frozen(spec, n_snapshots):
    state = mode_field(spec, (1,), component=0)
    times = np.linspace(0.0, 1.0, n_snapshots)
    return Trajectory(times=times, states=[state] * n_snapshots)


def test_structure_of_frozen_path(spec1d):
    result = holder_structure([_frozen(spec1d, 33)], [1 / 32, 2 / 32])
    np.testing.assert_array_equal(result.moments, 0.0)
    np.testing.assert_array_equal(result.pair_counts, [32, 31])
    assert math.isnan(result.slope)


def test_structure_input_errors(spec1d):
    with pytest.raises(StatisticsError):
        holder_structure([_frozen(spec1d, 5)], [0.25])
    with pytest.raises(ConfigurationError):
        holder_structure([_frozen(spec1d, 33)], [0.01])
    with pytest.raises(ConfigurationError):
        holder_structure([_frozen(spec1d, 33)], [1 / 32], norm='H1')
    with pytest.raises(ConfigurationError):
        holder_structure([_frozen(spec1d, 33), _frozen(spec1d, 17)], [1 / 16])
    with pytest.raises(StatisticsError):
        holder_structure([], [1 / 32])


def test_structure_of_additive_noise_is_linear(spec1d):
    """ for short lags E||u(t + tau) - u(t)||^2 grows like tau """
    p = ModelParams(kappa1=1.0, kappa2=1.0, gamma=0.0, mu=1.0)
    nb = build_default_noise(spec1d, 4)
    u0 = SpectralField.zeros(spec1d)
    batch = [
        simulate_path(u0, TimeGrid(0.01, 100), 'em', nb, p, seed=SeedInfo(23, i),
                      record_ledger=False)
        for i in range(20)
    ]
    dt = 1e-4
    result = holder_structure(batch, [dt, 2 * dt, 4 * dt, 8 * dt])
    assert 1.6 < result.moments[1] / result.moments[0] < 2.4
    assert result.fit_window == pytest.approx((4 * dt, 0.01 / 8))
    assert 0.7 < result.slope < 1.2
    rough = holder_structure(batch, [dt, 2 * dt], norm='L3/2')
    assert np.all(rough.moments > 0)


def test_noisy_l2_residual_shrinks_with_dt():
    """ dt and dt/2 share each Brownian path; median observed order over paths """
    spec = DomainSpec.create(1, n_modes=9)
    p = ModelParams()
    nb = build_default_noise(spec, 8)
    u0 = random_field(spec, np.random.default_rng(3), h1_radius=2.0)
    orders = []
    for path in range(5):
        errors = []
        for n_steps in (100, 200):
            traj = simulate_path(u0, TimeGrid(0.1, n_steps), 'em', nb, p, seed=SeedInfo(7, path))
            errors.append(_final_residual(traj, nb, p, 'l2'))
        orders.append(math.log2(errors[0] / errors[1]))
    assert float(np.median(orders)) >= 0.4


def test_ito_rate_depends_on_correction_factor(spec1d, rng):
    nb = build_default_noise(spec1d, 4)
    u = random_field(spec1d, rng, h1_radius=2.0)
    full = ModelParams(kappa1=1.5, gamma=0.7)
    plain = ModelParams(kappa1=1.5, gamma=0.7, strat_gamma=False)
    l2_full, _ = ito_rates(u, nb, full)
    l2_plain, _ = ito_rates(u, nb, plain)
    # the correction scales as g/2 against 1/2
    pairing = float(np.sum(u.coeffs * strat_correction(u, nb, full).coeffs))
    assert abs(pairing) > 1e-8
    np.testing.assert_allclose(l2_plain - l2_full, (1.0 / full.gamma - 1.0) * pairing, rtol=1e-9)


def test_ledger_records_the_plain_correction(spec1d, rng):
    nb = build_default_noise(spec1d, 4)
    u0 = random_field(spec1d, rng)
    ledgers = {}
    for strat_gamma in (True, False):
        p = ModelParams(gamma=0.7, strat_gamma=strat_gamma)
        traj = simulate_path(u0, TimeGrid(0.05, 50), 'em', nb, p, seed=SeedInfo(4, 0))
        ledgers[strat_gamma] = traj.ledger
        assert np.all(np.isfinite(l2_energy_residual(traj, nb, p)))
    assert not np.allclose(ledgers[True].ito_l2[1:], ledgers[False].ito_l2[1:])
    np.testing.assert_allclose(ledgers[True].ito_l2[0], ledgers[False].ito_l2[0])
