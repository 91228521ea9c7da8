"""
Named invariant checks of every module, run by ``tbqkd validate``.

Each check returns ``(passed, detail)``. Checks are registered in the
order they are defined and are quick enough to run on every invocation.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from tbqkd import finitekey, montecarlo, optics, photostats, sweeps
from tbqkd.settings import BasisSplit, SecurityParams, SystemParams

logger = logging.getLogger(__name__)

_REGISTRY = []


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ''


def invariant(name):
    """Register the decorated function as the check ``name``."""

    def register(function):
        _REGISTRY.append((name, function))
        return function

    return register


def _phase_grid(n=25):
    return np.linspace(-2 * math.pi, 2 * math.pi, n)


@invariant('optics.encode_norm')
def check_encode_norm():
    worst = max(abs(optics.encode(t).norm2 - 0.5) for t in _phase_grid())
    return worst <= 1e-12, 'max |norm^2 - 1/2| = {:.2e}'.format(worst)


@invariant('optics.decode_halves_norm')
def check_decode_norm():
    worst = 0.0
    for t1 in _phase_grid(9):
        qubit = optics.encode(t1)
        for t2 in _phase_grid(9):
            worst = max(worst, abs(optics.decode(qubit, t2).norm2 - qubit.norm2 / 2))
    return worst <= 1e-12, 'max deviation {:.2e}'.format(worst)


@invariant('optics.window_sum')
def check_window_sum():
    worst = 0.0
    for t1 in _phase_grid(15):
        for t2 in _phase_grid(15):
            p = optics.window_probabilities(t1, t2)
            worst = max(worst, abs(p.total - (2 + math.sin(t1) * math.sin(t2)) / 8))
    return worst <= 1e-12, 'max deviation {:.2e}'.format(worst)


@invariant('optics.closed_forms')
def check_closed_forms():
    worst = 0.0
    for t1 in np.linspace(0, 2 * math.pi, 100):
        for t2 in np.linspace(-math.pi, math.pi, 100):
            a = optics.window_probabilities(t1, t2).as_array()
            b = optics.window_probabilities_closed_form(t1, t2).as_array()
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst <= 1e-12, 'max deviation {:.2e} on a 100 x 100 grid'.format(worst)


@invariant('optics.beam_splitter_unitary')
def check_unitary():
    deviation = float(np.max(np.abs(optics.BS_MATRIX.conj().T @ optics.BS_MATRIX - np.eye(2))))
    return deviation <= 1e-15, 'max |U^H U - I| = {:.2e}'.format(deviation)


@invariant('optics.decoder_convention')
def check_convention():
    worst = 0.0
    for t1 in _phase_grid(13):
        state = optics.decode(optics.encode(t1), math.pi / 2).as_array()
        s, c = math.sin(t1 / 2), math.cos(t1 / 2)
        expected = np.exp(0.5j * t1) / (2 * math.sqrt(2)) * np.array([-1j * s, s, c, 1j * c])
        worst = max(worst, float(np.max(np.abs(state - expected))))
    return worst <= 1e-12, 'max amplitude deviation {:.2e}'.format(worst)


@invariant('optics.global_phase_insensitive')
def check_global_phase():
    worst = 0.0
    for phase in _phase_grid(7):
        a = optics.window_probabilities(math.pi / 3, 0.4).as_array()
        b = optics.window_probabilities(math.pi / 3, 0.4, channel_phase=phase).as_array()
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst <= 1e-15, 'max deviation {:.2e}'.format(worst)


@invariant('optics.destructive_interference')
def check_destructive():
    p_w2 = optics.window_probabilities(math.pi / 2, -math.pi / 2).p_w2
    return p_w2 <= 1e-12, 'p_w2(pi/2, -pi/2) = {:.2e}'.format(p_w2)


@invariant('photostats.distribution_normalized')
def check_distribution():
    worst = 0.0
    for n_bar in np.geomspace(1e-4, 0.9, 9):
        for g2 in np.linspace(0, 1, 5):
            d = photostats.photon_number_dist(n_bar, g2)
            worst = max(worst, abs(d.p0 + d.p1 + d.p2 - 1), abs(d.mean - n_bar))
    return worst <= 1e-12, 'max deviation {:.2e}'.format(worst)


@invariant('photostats.thinning_closure')
def check_thinning():
    worst = 0.0
    for n_bar in (1e-3, 0.1, 0.8):
        for g2 in (0.0, 0.0085, 0.5):
            for eta in (0.0, 0.3, 1.0):
                a = photostats.thin(photostats.photon_number_dist(n_bar, g2), eta).as_array()
                b = photostats.photon_number_dist(n_bar * eta, g2).as_array() if eta > 0 else np.array([1, 0, 0])
                worst = max(worst, float(np.max(np.abs(a - b))))
    return worst <= 1e-12, 'max deviation {:.2e}'.format(worst)


@invariant('photostats.loss_ordering')
def check_loss_ordering():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        n, g2 = rng.uniform(1e-4, 0.05), rng.uniform(0, 0.05)
        eta_b, eta_d, eta_f = rng.uniform(0.1, 1, 3)
        p_dc, p_mis = rng.uniform(0, 1e-4), rng.uniform(0, 0.05)
        folded = photostats.click_error_probs(photostats.photon_number_dist(n * eta_b * eta_d, g2), eta_f, p_dc,
                                              p_mis, 'standard')
        direct = photostats.click_error_probs(photostats.photon_number_dist(n, g2), eta_f * eta_b * eta_d, p_dc,
                                              p_mis, 'standard')
        worst = max(worst, abs(folded.p_click / direct.p_click - 1), abs(folded.p_error / direct.p_error - 1))
    return worst <= 1e-12, 'max relative deviation {:.2e}'.format(worst)


@invariant('photostats.qber_limit')
def check_qber_limit():
    dist = photostats.photon_number_dist(0.01, 0.0085)
    probs = photostats.click_error_probs(dist, 1.0, 0.0, 0.03)
    return abs(probs.qber - 0.03) <= 1e-12, 'p_e/p_c = {:.6g}'.format(probs.qber)


@invariant('finitekey.chernoff_monotone')
def check_chernoff():
    eps = 2e-10 / 3
    xs = np.geomspace(1, 1e9, 30)
    bounds = [finitekey.chernoff_upper(x, eps) for x in xs]
    ok = all(b > x for b, x in zip(bounds, xs)) and all(np.diff(bounds) > 0)
    ok = ok and finitekey.chernoff_upper(1e4, 1e-5) < finitekey.chernoff_upper(1e4, 1e-10)
    return ok, 'bound above expectation, increasing in x, decreasing in eps'


def _quantile_by_summation(target, n, p):
    k = np.arange(n + 1)
    log_pmf = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1) + k * math.log(p) + (
        n - k) * math.log1p(-p)
    return min(int(np.searchsorted(np.cumsum(np.exp(log_pmf)), target, side='left')), n)


@invariant('finitekey.inverse_binomial_cdf')
def check_inverse_cdf():
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        n, p, target = int(rng.integers(1, 10**4 + 1)), rng.uniform(1e-3, 1 - 1e-3), rng.uniform()
        if finitekey.inv_binomial_cdf(target, n, p) != _quantile_by_summation(target, n, p):
            mismatches += 1
    return mismatches == 0, '{} mismatches against exhaustive summation in 1000 draws, n <= 10^4'.format(mismatches)


@invariant('finitekey.key_rate_bounds')
def check_key_rate():
    security, split = SecurityParams(), BasisSplit()
    counts = finitekey.expected_counts(SystemParams(length_km=40), security, split, 1e10)
    reports = [finitekey.secure_key_rate(counts, security, e_x_override=e) for e in np.linspace(0.0, 0.2, 11)]
    rates = [r.r_secure for r in reports]
    ok = all(np.diff(rates) <= 0) and all(r <= counts.n_nmp_z / counts.n_sum for r in rates)
    ok = ok and finitekey.secure_key_rate(counts, security) == finitekey.secure_key_rate(counts, security)
    return ok, 'non-increasing in E_X, below N_nmp^Z / N_sum, deterministic'


@invariant('montecarlo.partition_independent')
def check_partition():
    system = SystemParams(length_km=10)
    cfg = montecarlo.McConfig(mode='matrix', seed=3, n_pulses=40000, chunk_pulses=5000)
    a = montecarlo.simulate_block(system, cfg=cfg)
    chunks = [montecarlo._simulate_chunk(montecarlo.PulseSimulation(system, cfg=cfg).plan, *c)[1]
              for c in reversed(montecarlo.chunk_layout(cfg.n_pulses, cfg.chunk_pulses))]
    b = montecarlo.HistogramSet.empty(16)
    for hist in chunks:
        b = b.merge(hist)
    return a == b, 'chunk merge order does not change the histogram'


@invariant('montecarlo.noiseless_sifting')
def check_noiseless():
    system = SystemParams(p_dc=0.0, p_mis_z=0.0, p_mis_x=0.0, mean_photon_number=0.5, g2=0.0)
    hist = montecarlo.simulate_block(system, cfg=montecarlo.McConfig(mode='matrix', seed=1, n_pulses=20000))
    q = montecarlo.sift_and_qber(hist)
    return q.e_z0 == 0 and q.e_z1 == 0 and q.e_x0 == 0, 'E_Z0={} E_Z1={} E_X0={}'.format(q.e_z0, q.e_z1, q.e_x0)


@invariant('sweeps.table_reproduction')
def check_table():
    result = sweeps.table1_reproduction()
    rates = result.column('skb_per_pulse')
    reference = result.column('skb_reference')
    ok = bool(np.all(np.diff(rates) < 0) and np.all(rates > 0) and np.all(np.abs(np.log(rates / reference)) <=
                                                                          math.log(3)))
    return ok, 'SKB/pulse ' + ', '.join('{:.3g}'.format(r) for r in rates)


@invariant('sweeps.distance_monotone')
def check_distance():
    result = sweeps.distance_sweep(sweeps.SweepSpec.distance(0, 120, 25))
    e_x, rates = result.column('e_x'), result.column('skb_per_pulse')
    status = list(result.column('status'))
    first_zero = status.index(finitekey.STATUS_ZERO) if finitekey.STATUS_ZERO in status else len(status)
    ok = bool(np.all(np.diff(e_x) >= 0) and np.all(np.diff(rates) <= 0))
    ok = ok and all(s != finitekey.STATUS_POSITIVE for s in status[first_zero:])
    return ok, 'E_X non-decreasing, SKB non-increasing, zero key persists'


def run_invariants(names=None):
    """Run the registered checks (or those in ``names``) and return their results."""
    results = []
    for name, function in _REGISTRY:
        if names and name not in names:
            continue
        try:
            passed, detail = function()
        except Exception as e:
            logger.exception(e)
            passed, detail = False, 'raised {}: {}'.format(type(e).__name__, e)
        results.append(CheckResult(name, bool(passed), detail))
        logger.debug('{}: {}'.format(name, 'PASS' if passed else 'FAIL'))
    return results


def check_names():
    return [name for name, _ in _REGISTRY]
