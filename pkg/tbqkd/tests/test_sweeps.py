import math

import numpy as np
import pytest

from tbqkd import finitekey, sweeps
from tbqkd.montecarlo import McConfig
from tbqkd.settings import SystemParams
from tbqkd.sweeps import SweepSpec
from tbqkd.utils import ParameterError


@pytest.fixture(scope='session')
def distance_result():
    return sweeps.distance_sweep(SweepSpec.distance())


@pytest.fixture(scope='session')
def table():
    return sweeps.table1_reproduction()


class TestSweepSpec(object):
    def test_distance_defaults(self):
        spec = SweepSpec.distance()
        grid = spec.grid('distance_km')
        assert len(grid) == 201
        assert (grid[0], grid[-1]) == (0.0, 200.0)
        assert spec.n_sum == sweeps.N_SUM_SWEEP

    def test_grid_must_increase(self):
        with pytest.raises(ParameterError):
            SweepSpec({'distance_km': [0.0, 10.0, 5.0]})

    def test_requires_variables(self):
        with pytest.raises(ParameterError):
            SweepSpec({})

    def test_unknown_grid(self):
        with pytest.raises(ParameterError):
            SweepSpec.distance().grid('g2')

    def test_baseline_hash(self):
        a = SweepSpec.distance().baseline_hash()
        assert a == SweepSpec.distance().baseline_hash()
        assert a != SweepSpec.distance(system=SystemParams(g2=0.02)).baseline_hash()


class TestDistanceSweep(object):
    def test_columns_and_rows(self, distance_result):
        assert distance_result.columns == sweeps.DISTANCE_COLUMNS
        assert len(distance_result) == 201
        np.testing.assert_allclose(distance_result.column('L_km'), np.linspace(0, 200, 201))

    def test_qber_and_rate_trends(self, distance_result):
        e_x = distance_result.column('e_x')[:100]
        rates = distance_result.column('skb_per_pulse')
        assert np.all(np.diff(e_x) > 0)
        assert np.all(np.diff(rates) <= 0)

    def test_zero_key_persists(self, distance_result):
        status = list(distance_result.column('status'))
        assert status[0] == finitekey.STATUS_POSITIVE
        first = next(i for i, s in enumerate(status) if s != finitekey.STATUS_POSITIVE)
        assert all(s != finitekey.STATUS_POSITIVE for s in status[first:])
        assert all(r == 0.0 for r in distance_result.column('skb_per_pulse')[first:])

    def test_crossing_of_eleven_percent(self, distance_result):
        e_x = distance_result.column('e_x')
        lengths = distance_result.column('L_km')
        crossing = lengths[np.argmax(e_x >= 0.11)]
        assert 92.0 <= crossing <= 96.0

    def test_parallel_matches_serial(self):
        serial = sweeps.distance_sweep(SweepSpec.distance(0, 80, 5))
        parallel = sweeps.distance_sweep(SweepSpec.distance(0, 80, 5, n_workers=2))
        assert serial.rows == parallel.rows

    def test_negative_distance(self):
        with pytest.raises(ParameterError):
            sweeps.distance_sweep(SweepSpec({'distance_km': [-1.0, 1.0]}))


class TestMaxTolerableDistance(object):
    def test_model_crossing(self):
        assert sweeps.max_tolerable_distance(SweepSpec.distance()) == pytest.approx(93.6, abs=1.0)

    def test_resolution(self):
        spec = SweepSpec.distance()
        length = sweeps.max_tolerable_distance(spec, resolution=0.01)
        below = sweeps.model_qber(spec.system.replace(length_km=length - 0.01), spec.security, spec.split,
                                  spec.n_sum).e_x
        above = sweeps.model_qber(spec.system.replace(length_km=length + 0.01), spec.security, spec.split,
                                  spec.n_sum).e_x
        assert below < 0.11 <= above

    def test_threshold_already_reached(self):
        assert sweeps.max_tolerable_distance(SweepSpec.distance(), qber_threshold=0.01) == 0.0

    def test_unreachable_threshold(self):
        spec = SweepSpec.distance(system=SystemParams(p_dc=0.0, p_mis_x=0.001))
        assert math.isnan(sweeps.max_tolerable_distance(spec, qber_threshold=0.3))

    def test_threshold_domain(self):
        with pytest.raises(ParameterError):
            sweeps.max_tolerable_distance(SweepSpec.distance(), qber_threshold=0.6)


class TestGainGrids(object):
    def test_brightness_purity_grid(self):
        result = sweeps.brightness_purity_sweep(SweepSpec.brightness_purity(3))
        assert result.columns == sweeps.GRID_COLUMNS
        assert len(result) == 9
        gains = result.column('gain')
        assert np.all(np.isfinite(gains)) and np.all(gains >= 0)
        assert result.metadata['baseline_rate_bps'] > 0

    def test_brighter_pure_source_gains(self):
        spec = SweepSpec({'mean_photon_number': [2.89e-3, 2.89e-2], 'g2': [0.0]})
        gains = sweeps.brightness_purity_sweep(spec).column('gain')
        assert gains[1] > gains[0] > 1.0

    def test_invalid_cells_flagged(self):
        spec = SweepSpec({'mean_photon_number': [2.89e-3], 'g2': [0.0085, 1.5]})
        rows = sweeps.brightness_purity_sweep(spec).rows
        assert rows[0][3] == finitekey.STATUS_POSITIVE
        assert rows[1][3] == finitekey.STATUS_INVALID
        assert math.isnan(rows[1][2])

    def test_reprate_baseline_has_unit_gain(self):
        spec = SweepSpec({'f_rep_hz': [75.947e6, 1e9], 'lifetime_tau_s': [100e-12, 1018e-12]})
        rows = {(x, y): (gain, status) for x, y, gain, status in sweeps.reprate_lifetime_sweep(spec).rows}
        assert rows[(75.947e6, 1018e-12)][0] == 1.0
        assert rows[(1e9, 100e-12)][0] > 1.0
        assert rows[(1e9, 1018e-12)] == (0.0, finitekey.STATUS_ZERO)

    def test_overlap_model(self):
        overlap = sweeps.ExponentialTailOverlap()
        short = overlap.misalignment(1e9, 50e-12)
        long = overlap.misalignment(1e9, 1500e-12)
        assert short[0] < long[0] and short[1] < long[1]
        assert overlap.misalignment(1e9, 0.0) == (0.0, 0.0)
        system = overlap.apply(SystemParams(), 2e9, 1500e-12)
        assert system.f_rep_hz == 2e9
        assert system.p_mis_z <= 0.5 and system.p_mis_x <= 0.5

    def test_reprate_linear_without_overlap(self):
        spec = SweepSpec({'f_rep_hz': [75.947e6, 151.894e6, 303.788e6], 'lifetime_tau_s': [1e-15]})
        gains = sweeps.reprate_lifetime_sweep(spec).column('gain')
        assert gains[1] / gains[0] == pytest.approx(2.0, rel=1e-9)
        assert gains[2] / gains[0] == pytest.approx(4.0, rel=1e-9)
        # the baseline carries the overlap penalty of its 1018 ps lifetime
        assert gains[0] > 1.0

    def test_reprate_gain_falls_with_lifetime(self):
        taus = np.linspace(50e-12, 1500e-12, 8)
        spec = SweepSpec({'f_rep_hz': [75.947e6, 1e9], 'lifetime_tau_s': taus})
        gains = sweeps.reprate_lifetime_sweep(spec).column('gain').reshape(2, len(taus))
        assert np.all(np.isfinite(gains))
        assert np.all(np.diff(gains, axis=1) <= 0)

    def test_multiphoton_penalty_at_high_brightness(self):
        g2s = [0.0, 0.025, 0.05, 0.075, 0.1]
        spec = SweepSpec({'mean_photon_number': [0.01, 0.5], 'g2': g2s})
        dim, bright = sweeps.brightness_purity_sweep(spec).column('gain').reshape(2, len(g2s))
        assert np.all(np.diff(bright) < 0)
        assert bright[-1] / bright[0] < dim[-1] / dim[0]


class TestTableReproduction(object):
    def test_rows(self, table):
        assert table.columns == sweeps.TABLE1_COLUMNS
        np.testing.assert_array_equal(table.column('L_km'), [0.0, 40.0, 80.0, 120.0])
        assert table.metadata['ec_model'] == 'shannon'

    def test_zero_km(self, table):
        assert table.column('skb_per_pulse')[0] == pytest.approx(2.18e-4, rel=3e-2)

    def test_close_to_measured(self, table):
        ratio = table.column('skb_per_pulse') / table.column('skb_reference')
        assert np.all(ratio > 0.5) and np.all(ratio < 2.0)
        assert np.all(np.diff(table.column('skb_per_pulse')) < 0)

    def test_deterministic(self, table):
        assert sweeps.table1_reproduction().rows == table.rows


#: One-minute blocks where the shot-noise model is above the measured spread.
MODEL_ABOVE_MEASURED = {(0.0, 'e_z0'), (0.0, 'e_z1'), (40.0, 'e_z1'), (80.0, 'e_z0'), (80.0, 'e_z1')}


class TestStatisticalSigma(object):
    def test_short_link(self):
        sigma = sweeps.statistical_sigma(SystemParams(), 4.56e9)
        assert sigma['e_z0'] == pytest.approx(1.335e-4, rel=0.05)
        assert sigma['e_z1'] == pytest.approx(1.219e-4, rel=0.05)
        assert sigma['e_x0'] == pytest.approx(1.817e-4, rel=0.05)

    def test_longest_link(self):
        sigma = sweeps.statistical_sigma(SystemParams(length_km=120.0), 9.12e10)
        assert sigma['e_z0'] == pytest.approx(0.0016, rel=0.1)
        assert sigma['e_z1'] == pytest.approx(0.00145, rel=0.1)
        assert sigma['e_x0'] == pytest.approx(0.0016, rel=0.1)
        measured = sweeps.TABLE1_SIGMA[120.0]
        assert all(s <= m for s, m in zip((sigma['e_z0'], sigma['e_z1'], sigma['e_x0']), measured))

    def test_against_measured_spread(self):
        above, ratios = set(), []
        for length, n_sum, *_ in sweeps.TABLE1:
            sigma = sweeps.statistical_sigma(SystemParams(length_km=length), n_sum)
            for name, measured in zip(('e_z0', 'e_z1', 'e_x0'), sweeps.TABLE1_SIGMA[length]):
                ratios.append(sigma[name] / measured)
                if sigma[name] > measured:
                    above.add((length, name))
        assert above == MODEL_ABOVE_MEASURED
        assert not any(name == 'e_x0' for _, name in above)
        assert max(ratios) < 1.5

    def test_scales_with_block_size(self):
        small = sweeps.statistical_sigma(SystemParams(), 1e8)
        large = sweeps.statistical_sigma(SystemParams(), 4e8)
        for name in small:
            assert large[name] == pytest.approx(small[name] / 2)


class TestStability(object):
    @pytest.fixture(scope='class')
    def stability(self):
        system = SystemParams(mean_photon_number=0.05)
        return sweeps.stability_run(system, McConfig(mode='pheno', seed=8), 30, 2 * 10**5)

    def test_series(self, stability):
        assert len(stability.series) == 30
        assert len(stability.rows) == 30
        assert stability.rows[0][0] == 0

    def test_summary(self, stability):
        summary = stability.summary
        assert summary['statistical_only'] is True
        assert summary['scaling'] == pytest.approx(sweeps.N_SUM_MINUTE / 2e5)
        assert summary['projected_std_e_x0'] == pytest.approx(summary['std_e_x0'] / math.sqrt(summary['scaling']))

    def test_spread_matches_shot_noise(self, stability):
        summary = stability.summary
        assert summary['projected_std_e_x0'] == pytest.approx(summary['analytic_std_e_x0'], rel=0.4)

    def test_deterministic(self, stability):
        again = sweeps.stability_run(SystemParams(mean_photon_number=0.05), McConfig(mode='pheno', seed=8), 30,
                                     2 * 10**5)
        assert again.rows == stability.rows

    def test_long_run_mean(self):
        result = sweeps.stability_run(SystemParams(), McConfig(mode='pheno', seed=360), 360, 10**5)
        summary = result.summary
        e_z = np.array([q.e_z for q in result.series], dtype=float)
        e_z = e_z[np.isfinite(e_z)]
        assert e_z.size > 350
        assert summary['mean_e_z'] == pytest.approx(e_z.mean())
        assert abs(summary['mean_e_z'] - 0.010) <= 5 * summary['std_e_z'] / math.sqrt(e_z.size)

    def test_requires_two_blocks(self):
        with pytest.raises(ParameterError):
            sweeps.stability_run(SystemParams(), McConfig(), 1, 1000)
