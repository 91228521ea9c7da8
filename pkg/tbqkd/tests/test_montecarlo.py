import math
from dataclasses import replace

import numpy as np
import pytest

from tbqkd import montecarlo, optics, photostats
from tbqkd.montecarlo import EncodingSequence, HistogramSet, McConfig
from tbqkd.settings import SystemParams
from tbqkd.utils import ConfigError, ParameterError


@pytest.fixture(scope='session')
def seq():
    return EncodingSequence()


@pytest.fixture(scope='session')
def system_40km():
    return SystemParams(length_km=40.0)


@pytest.fixture(scope='session')
def pheno_40km(system_40km, seq):
    cfg = McConfig(mode='pheno', seed=1234, n_pulses=10**7)
    return montecarlo.simulate_block(system_40km, seq, cfg)


@pytest.fixture(scope='session')
def noiseless():
    return SystemParams(p_dc=0.0, p_mis_z=0.0, p_mis_x=0.0, mean_photon_number=0.5, g2=0.0)


class TestEncodingSequence(object):
    def test_default_sequence(self, seq):
        assert len(seq) == 16
        assert seq.counts() == {'Z0': 5, 'Z1': 6, 'X0': 5}
        assert seq.basis_shares()['Z'] == pytest.approx(11 / 16)

    def test_unknown_symbol(self):
        with pytest.raises(ParameterError):
            EncodingSequence(('Z0', 'Y0'))

    def test_empty(self):
        with pytest.raises(ParameterError):
            EncodingSequence(())

    def test_window_roles(self):
        assert montecarlo.window_roles('Z0') == (2, 0)
        assert montecarlo.window_roles('Z1') == (0, 2)
        assert montecarlo.window_roles('X0') == (None, 1)


class TestMcConfig(object):
    def test_alias(self):
        assert McConfig(mode='pheno').mode == 'phenomenological'

    def test_unknown_mode(self):
        with pytest.raises(ConfigError) as e:
            McConfig(mode='exact')
        assert e.value.key == 'mode'

    def test_zero_pulses(self):
        with pytest.raises(ConfigError) as e:
            McConfig(n_pulses=0)
        assert e.value.key == 'n_pulses'


class TestHistogramSet(object):
    def test_merge(self):
        a = HistogramSet(np.ones((16, 3)), np.full(16, 10))
        b = a.merge(a)
        assert b.total_clicks == 96
        assert b.total_pulses == 320

    def test_merge_mismatch(self):
        with pytest.raises(ParameterError):
            HistogramSet.empty(16).merge(HistogramSet.empty(8))


class TestSimulation(object):
    def test_deterministic(self, system_40km, seq):
        cfg = McConfig(mode='matrix', seed=99, n_pulses=200000)
        assert montecarlo.simulate_block(system_40km, seq, cfg) == montecarlo.simulate_block(system_40km, seq, cfg)

    def test_seed_changes_histogram(self):
        system = SystemParams(mean_photon_number=0.2, g2=0.0)
        a = montecarlo.simulate_block(system, cfg=McConfig(mode='matrix', seed=1, n_pulses=100000))
        b = montecarlo.simulate_block(system, cfg=McConfig(mode='matrix', seed=2, n_pulses=100000))
        assert a != b

    def test_partition_independent(self, system_40km, seq):
        cfg = McConfig(mode='pheno', seed=5, n_pulses=300000, chunk_pulses=65536)
        serial = montecarlo.simulate_block(system_40km, seq, cfg)
        parallel = montecarlo.simulate_block(system_40km, seq, replace(cfg, n_workers=2))
        assert serial == parallel

    def test_counts_bounded_by_pulses(self, pheno_40km):
        assert pheno_40km.total_pulses == 10**7
        assert pheno_40km.total_clicks <= pheno_40km.total_pulses
        assert np.all(pheno_40km.counts >= 0)
        np.testing.assert_array_equal(pheno_40km.pulses_per_bit, np.full(16, 10**7 // 16))

    def test_click_fraction_matches_model(self, pheno_40km, seq, system_40km):
        fractions = montecarlo.click_fraction(pheno_40km, seq)
        for basis in ('Z', 'X'):
            p_click, _, z_gates, _ = fractions[basis]
            expected = photostats.basis_probs(system_40km, basis).p_click
            sigma = math.sqrt(expected * (1 - expected) / z_gates)
            assert abs(p_click - expected) <= 5 * sigma

    def test_error_fraction_matches_model(self, pheno_40km, seq, system_40km):
        fractions = montecarlo.click_fraction(pheno_40km, seq)
        for basis in ('Z', 'X'):
            _, p_error, _, gates = fractions[basis]
            expected = photostats.basis_probs(system_40km, basis).p_error
            assert abs(p_error - expected) <= 5 * math.sqrt(expected / gates)

    def test_sifted_qber_matches_model(self, pheno_40km, seq, system_40km):
        qber = montecarlo.sift_and_qber(pheno_40km, seq)
        for estimate, basis in (('e_z', 'Z'), ('e_x0', 'X')):
            expected = photostats.basis_probs(system_40km, basis).qber
            assert abs(getattr(qber, estimate) - expected) <= 5 * qber.stderr[estimate]

    def test_matrix_window_fractions(self, noiseless, seq):
        hist = montecarlo.simulate_block(noiseless, seq, McConfig(mode='matrix', seed=12, n_pulses=16 * 10**5))
        for i, symbol in enumerate(seq.symbols):
            p = optics.window_probabilities(optics.NOMINAL_PHASES[symbol], optics.THETA2_X0).as_array()
            p[p < montecarlo.ZERO_TOL] = 0.0
            p = p / p.sum()
            clicks = hist.counts[i].sum()
            assert clicks > 0
            for window in range(3):
                sigma = math.sqrt(p[window] * (1 - p[window]) / clicks)
                assert abs(hist.counts[i, window] / clicks - p[window]) <= 5 * sigma

    def test_sifted_qber_pheno_zero_km(self, seq):
        cfg = McConfig(mode='pheno', seed=7, n_pulses=16 * 10**6)
        qber = montecarlo.sift_and_qber(montecarlo.simulate_block(SystemParams(), seq, cfg), seq)
        assert qber.e_z == pytest.approx(0.01147, abs=0.008)
        assert qber.e_x0 == pytest.approx(0.02146, abs=0.0155)
        assert qber.undefined == ()

    def test_matrix_noiseless_has_no_errors(self, noiseless, seq):
        hist = montecarlo.simulate_block(noiseless, seq, McConfig(mode='matrix', seed=3, n_pulses=100000))
        qber = montecarlo.sift_and_qber(hist, seq)
        assert (qber.e_z0, qber.e_z1, qber.e_x0) == (0.0, 0.0, 0.0)
        assert qber.raw_counts['Z'] > 0

    def test_matrix_phase_offset_raises_x_errors(self, noiseless, seq):
        cfg = McConfig(mode='matrix', seed=3, n_pulses=100000, phase_offset=0.5)
        qber = montecarlo.sift_and_qber(montecarlo.simulate_block(noiseless, seq, cfg), seq)
        assert qber.e_x0 > 0.01
        assert qber.e_z0 == 0.0

    def test_matrix_misalignment(self, seq):
        system = SystemParams(p_dc=0.0, p_mis_z=0.05, p_mis_x=0.0, mean_photon_number=0.5, g2=0.0)
        qber = montecarlo.sift_and_qber(
            montecarlo.simulate_block(system, seq, McConfig(mode='matrix', seed=11, n_pulses=400000)), seq)
        assert qber.e_z == pytest.approx(0.05, abs=5 * qber.stderr['e_z'])

    def test_dead_time_vetoes_clicks(self, noiseless, seq):
        cfg = McConfig(mode='matrix', seed=4, n_pulses=200000)
        free = montecarlo.simulate_block(noiseless, seq, cfg)
        gated = montecarlo.simulate_block(noiseless, seq, replace(cfg, dead_time_enabled=True))
        assert gated.total_clicks < free.total_clicks
        assert np.all(gated.counts <= free.counts)
        np.testing.assert_array_equal(gated.pulses_per_bit, free.pulses_per_bit)

    def test_apply_dead_time(self):
        sim = montecarlo.PulseSimulation(SystemParams(), cfg=McConfig(n_pulses=10))
        keep = sim.apply_dead_time(np.array([0, 1, 2, 3, 10]), np.array([0, 0, 0, 0, 2]))
        np.testing.assert_array_equal(keep, [True, False, False, True, True])


class TestSifting(object):
    def test_empty_histogram_undefined(self, seq):
        qber = montecarlo.sift_and_qber(HistogramSet.empty(16), seq)
        assert math.isnan(qber.e_z0) and math.isnan(qber.e_x0)
        assert set(qber.undefined) == {'e_z0', 'e_z1', 'e_x0'}

    def test_hand_built_histogram(self, seq):
        counts = np.zeros((16, 3))
        for i, symbol in enumerate(seq.symbols):
            counts[i] = {'Z0': (1, 5, 99), 'Z1': (98, 5, 2), 'X0': (45, 10, 55)}[symbol]
        qber = montecarlo.sift_and_qber(HistogramSet(counts, np.full(16, 1000)), seq)
        assert qber.e_z0 == pytest.approx(0.01)
        assert qber.e_z1 == pytest.approx(0.02)
        assert qber.e_z == pytest.approx(0.015)
        assert qber.e_x0 == pytest.approx(0.1)
        assert qber.raw_counts['Z0'] == 500

    def test_length_mismatch(self, seq):
        with pytest.raises(ParameterError):
            montecarlo.sift_and_qber(HistogramSet.empty(8), seq)


class TestEmpiricalG2(object):
    def test_recovers_source_g2(self):
        system = SystemParams(mean_photon_number=0.1, g2=0.2)
        estimate = montecarlo.empirical_g2(system, McConfig(seed=21, n_pulses=2 * 10**6))
        assert estimate == pytest.approx(0.2, rel=0.15)

    def test_pure_source_has_no_coincidences(self):
        system = SystemParams(mean_photon_number=0.1, g2=0.0)
        assert montecarlo.empirical_g2(system, McConfig(seed=22, n_pulses=2 * 10**6)) == 0.0

    @pytest.mark.parametrize('g2, n_pulses', [(0.0085, 10**8), (0.5, 10**7)])
    def test_within_shot_noise(self, g2, n_pulses):
        system = SystemParams(mean_photon_number=0.1, g2=g2)
        p_two = photostats.photon_number_dist(0.1, g2).p2
        sigma = g2 * math.sqrt(1 / (n_pulses * p_two) + 4 / (n_pulses * 0.1))
        estimate = montecarlo.empirical_g2(system, McConfig(seed=23, n_pulses=n_pulses))
        assert abs(estimate - g2) <= 5 * sigma

    def test_requires_large_block(self):
        with pytest.raises(ParameterError):
            montecarlo.empirical_g2(SystemParams(), McConfig(n_pulses=1000))
