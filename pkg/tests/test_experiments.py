import math

import numpy as np
import pytest

from config.settings import parse_config
from models.domain_model import DomainSpec
from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis
from models.trajectory_model import TimeGrid
from services.experiments import (
    build_setup, estimate_semigroup, gronwall_weight, l2_gaussian, map_paths, moment_sweep,
    run_feller_check, run_galerkin_convergence, run_invariant_measure, run_moment_study,
    run_strong_order, run_uniqueness, simulate_batch, snapshot_times, window_bounds
)
from services.llb_model import build_default_noise, build_noise
from services.spectral_core import mode_field, random_field
from utils.errors import ConfigurationError

from conftest import constant_field


def test_map_paths_keeps_index_order():
    assert map_paths(lambda i: i * i, 10, threads=4) == [i * i for i in range(10)]
    assert map_paths(lambda i: i, 0, threads=4) == []


def test_batch_does_not_depend_on_threads(spec1d, params, rng):
    nb = build_default_noise(spec1d, 3)
    u0 = random_field(spec1d, rng)
    grid = TimeGrid(0.05, 25)
    serial = simulate_batch(u0, grid, 'heun', nb, params, master_seed=4, n_paths=5, threads=1)
    pooled = simulate_batch(u0, grid, 'heun', nb, params, master_seed=4, n_paths=5, threads=3)
    assert serial.blow_up_fraction == 0.0
    for a, b in zip(serial.trajectories, pooled.trajectories):
        np.testing.assert_array_equal(a.coeff_array(), b.coeff_array())
        np.testing.assert_array_equal(a.ledger.stoch_l2, b.ledger.stoch_l2)


def test_snapshot_times():
    np.testing.assert_allclose(snapshot_times(TimeGrid(1.0, 10), 4), [0.0, 0.4, 0.8, 1.0])
    np.testing.assert_allclose(snapshot_times(TimeGrid(1.0, 4), 2), [0.0, 0.5, 1.0])


def test_gronwall_weight_of_zero(spec1d, spec2d):
    assert gronwall_weight(SpectralField.zeros(spec1d), SpectralField.zeros(spec1d)) == 0.0
    e1 = mode_field(spec2d, (1, 0), component=0)
    assert gronwall_weight(e1, e1) > 0.0


def test_uniqueness_without_perturbation(spec1d, params, rng):
    nb = build_default_noise(spec1d, 4)
    u0 = random_field(spec1d, rng)
    direction = random_field(spec1d, rng)
    report = run_uniqueness(u0, [(0.0, direction)], TimeGrid(0.05, 50), nb, params, n_paths=2)
    assert len(report.runs) == 2
    for run in report.runs:
        assert np.all(run.v_sq == 0.0)
        assert run.amplification == 0.0
        assert run.within_envelope


def test_uniqueness_is_linear_for_small_delta(spec1d, params, rng):
    nb = build_default_noise(spec1d, 4)
    u0 = random_field(spec1d, rng)
    direction = random_field(spec1d, rng, h1_radius=3.0)
    report = run_uniqueness(u0, [(1e-6, direction), (1e-7, direction)], TimeGrid(0.1, 100),
                            nb, params, master_seed=5, n_paths=2, stride=10)
    assert report.validate() == (True, "")
    assert report.deltas == [1e-7, 1e-6]
    np.testing.assert_allclose(report.times, np.linspace(0.0, 0.1, 11))
    for big, small in zip(report.for_delta(1e-6), report.for_delta(1e-7)):
        assert big.path_index == small.path_index
        # directions are normalized in H^1
        assert big.v_sq[0] <= 1e-12 * (1 + 1e-9)
        np.testing.assert_allclose(big.sup_v / 1e-6, small.sup_v / 1e-7, rtol=1e-3)
        np.testing.assert_allclose(big.amplification, small.amplification, rtol=1e-3)
    summary = report.summary()
    assert set(summary) == {1e-7, 1e-6}
    assert len(summary[1e-6]['amplification']) == 3


def test_uniqueness_2d(spec2d, params, rng):
    nb = build_default_noise(spec2d, 2)
    u0 = random_field(spec2d, rng)
    report = run_uniqueness(u0, [(1e-4, random_field(spec2d, rng))], TimeGrid(0.05, 50),
                            nb, params)
    assert report.dimension == 2
    assert report.validate() == (True, "")
    assert math.isfinite(report.runs[0].amplification)
    with pytest.raises(ConfigurationError):
        run_uniqueness(u0, [(1e-4, SpectralField.zeros(spec2d))], TimeGrid(0.05, 5), nb, params)


def test_heat_flow_has_no_truncation_error(heat_params):
    spec = DomainSpec.create(1, n_modes=16)
    u0 = mode_field(spec, (1,), component=0)
    report = run_galerkin_convergence(u0, TimeGrid(0.05, 200), NoiseBasis(domain=spec),
                                      heat_params, n_list=(16, 4, 8))
    assert report.reference_modes == 16
    assert [row.n_modes for row in report.rows] == [4, 8]
    for row in report.rows:
        assert row.sup_l2 < 1e-14
        assert row.int_h1_sq < 1e-26


def test_galerkin_errors_shrink(params, rng):
    spec = DomainSpec.create(1, n_modes=16)
    nb = build_default_noise(spec, 2)
    u0 = random_field(spec, rng)
    report = run_galerkin_convergence(u0, TimeGrid(0.02, 100), nb, params, master_seed=3,
                                      n_paths=2, n_list=(4, 8, 16))
    assert len(report.rows) == 4
    medians = report.medians()
    assert list(medians) == [4, 8]
    assert report.monotone
    assert all(row.sup_l2 > 0 for row in report.rows)


def test_invariant_measure_without_noise(params, rng):
    spec = DomainSpec.create(1, n_modes=4)
    u0 = random_field(spec, rng, h1_radius=2.0)
    report = run_invariant_measure(u0, (4.0, 1.0, 2.0), TimeGrid(1.0, 200), NoiseBasis(domain=spec),
                                   params, n_paths=2)
    np.testing.assert_array_equal(report.horizons, [1.0, 2.0, 4.0])
    assert report.validate() == (True, "")
    assert report.chebyshev_holds()
    assert np.all(np.diff(report.h1_sq_average) < 0)
    assert np.all((report.ks_distance >= 0) & (report.ks_distance <= 1))
    assert report.blow_up_fraction == 0.0
    assert report.tail_products().shape == (3, 5)
    rows = report.to_rows()
    assert len(rows) == 3
    assert 'occupation_R0.5' in rows[0]


def test_invariant_measure_with_noise(params, rng):
    spec = DomainSpec.create(1, n_modes=4)
    nb = build_default_noise(spec, 3)
    report = run_invariant_measure(random_field(spec, rng), (1.0, 2.0), TimeGrid(1.0, 200), nb,
                                   params, master_seed=1, n_paths=3, stride=5)
    assert report.n_paths == 3
    assert report.chebyshev_holds()
    assert np.all(report.h1_sq_average > 0)


def test_window_bounds():
    assert window_bounds(2.0, 0.0) == ((2.0, 4.0), (4.0, 8.0))
    early, late = window_bounds(2.0, 0.25)
    assert early == pytest.approx((2.5, 4.0))
    assert late == pytest.approx((4.5, 8.0))


def test_burn_in_changes_window_statistics(params, rng):
    spec = DomainSpec.create(1, n_modes=4)
    nb = build_default_noise(spec, 3)
    u0 = random_field(spec, rng)

    def run(burn_in):
        return run_invariant_measure(u0, (1.0,), TimeGrid(1.0, 128), nb, params,
                                     master_seed=5, n_paths=2, burn_in=burn_in)

    full, trimmed = run(0.0), run(0.5)
    # dt = 1/128: [1, 2] holds 129 snapshots per path, [2, 4] holds 257
    assert [s.size for s in full.window_samples[0]] == [258, 514]
    assert [s.size for s in trimmed.window_samples[0]] == [130, 386]
    np.testing.assert_array_equal(full.h1_sq_average, trimmed.h1_sq_average)
    assert full.ks_distance[0] != trimmed.ks_distance[0]
    early = full.window_samples[0][0]
    assert full.window_cdf(0, 0, early[-1]) == 1.0
    assert full.window_cdf(0, 0, early[0] - 1.0) == 0.0
    rows = trimmed.cdf_rows()
    assert len(rows) == 130 + 386
    assert rows[129]['cdf'] == 1.0
    assert trimmed.to_rows()[0]['early_samples'] == 130


def test_moment_sweep_cells():
    assert moment_sweep(parse_config("")) == []
    config = parse_config("", ["moments.sweep_modes=4, 8", "moments.sweep_k=1, 2"])
    cells = moment_sweep(config)
    assert cells == [
        ["domain.n_modes=4", "noise.k=1"], ["domain.n_modes=4", "noise.k=2"],
        ["domain.n_modes=8", "noise.k=1"], ["domain.n_modes=8", "noise.k=2"],
    ]


def test_moment_study_rows():
    config = parse_config("", [
        "domain.n_modes=4", "noise.k=2", "time.t_end=0.05", "time.n_steps=20",
        "run.n_paths=2", "moments.sweep_modes=4, 6"
    ])
    rows = run_moment_study(config, threads=1)
    # per cell: 15 cumulative rows, 4 windows x 4 functionals x 2 exponents
    assert len(rows) == 2 * (15 + 32)
    assert sum(row['t_start'] is None for row in rows) == 30
    fingerprints = {row['fingerprint'] for row in rows}
    assert len(fingerprints) == 2
    assert {row['n_modes'] for row in rows} == {4, 6}
    assert all(row['n_paths'] == 2 for row in rows)
    assert run_moment_study(parse_config(""), threads=1) == []


def test_build_setup_presets():
    setup = build_setup(parse_config("", ["domain.n_modes=8", "noise.k=2",
                                          "initial.kind=constant", "initial.value=0, 0, 2"]))
    assert setup.u0.coeffs[2, 0] == pytest.approx(2.0)
    assert np.count_nonzero(setup.u0.coeffs) == 1
    assert setup.noise.size == 2
    assert setup.fingerprint == parse_config("", ["domain.n_modes=8", "noise.k=2",
                                                  "initial.kind=constant",
                                                  "initial.value=0, 0, 2"]).fingerprint
    mode = build_setup(parse_config("", ["domain.n_modes=8", "noise.k=2", "initial.kind=mode",
                                         "initial.mode=3", "initial.component=1"]))
    assert mode.u0.coeffs[1, 3] == 1.0


def test_semigroup_of_zero_without_noise(spec1d, params):
    value, err = estimate_semigroup(SpectralField.zeros(spec1d), l2_gaussian, TimeGrid(0.1, 20),
                                    NoiseBasis(domain=spec1d), params, n_paths=3)
    assert value == 1.0
    assert err == 0.0


def test_feller_differences_decay_with_mode(spec1d, params):
    report = run_feller_check(SpectralField.zeros(spec1d), (1, 2, 4), TimeGrid(0.05, 100),
                              NoiseBasis(domain=spec1d), params, n_paths=2)
    assert report.base_value == 1.0
    assert len(report.differences) == 3
    assert report.differences[0] > report.differences[1] > report.differences[2] > 0
    assert report.stderrs == [0.0, 0.0, 0.0]
    assert len(report.to_rows()) == 3
    with pytest.raises(ConfigurationError):
        run_feller_check(SpectralField.zeros(spec1d), (0,), TimeGrid(0.05, 4),
                         NoiseBasis(domain=spec1d), params)


def test_strong_order_of_euler():
    spec = DomainSpec.create(1, n_modes=2)
    nb = build_noise([constant_field(spec, (0.5, 0.0, 0.0)), constant_field(spec, (0.0, 0.5, 0.0))])
    u0 = constant_field(spec, (0.0, 0.0, 1.0))
    report = run_strong_order(u0, TimeGrid(1.0, 16), nb, ModelParams(), master_seed=2, n_paths=16,
                              scheme='em', levels=(1, 2, 4, 8), reference_factor=32)
    assert report.n_paths == 16
    assert report.reference_dt == pytest.approx(1.0 / 512)
    np.testing.assert_allclose(report.dts, [1 / 16, 1 / 32, 1 / 64, 1 / 128])
    assert report.errors[0] > report.errors[-1]
    assert 0.3 < report.order < 1.1


def test_strong_order_rejects_bad_levels(spec1d, params, no_noise):
    u0 = SpectralField.zeros(spec1d)
    with pytest.raises(ConfigurationError):
        run_strong_order(u0, TimeGrid(1.0, 4), no_noise, params, levels=(1, 3))
    with pytest.raises(ConfigurationError):
        run_strong_order(u0, TimeGrid(1.0, 4), no_noise, params, levels=(1, 8), reference_factor=8)
