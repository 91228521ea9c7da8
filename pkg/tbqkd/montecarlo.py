"""
Pulse-by-pulse Monte Carlo of the time-bin link producing per-bit
correlation histograms, followed by sifting and QBER extraction.

Two modes are available:

``matrix``
    photons are drawn from the source distribution, thinned by the channel
    and assigned to W1/W2/W3 from the interferometer model, with a classical
    misalignment flip and per-window dark counts.
``phenomenological``
    every gated pulse clicks and errs with exactly the analytic click/error
    probabilities of the basis.

Pulses are simulated in fixed-size chunks. Chunk ``c`` always draws from the
substream ``(seed, c)``, so a block is bit-identical however its chunks are
distributed over workers.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from tbqkd import optics, photostats
from tbqkd.utils import CHUNK_PULSES, ConfigError, ParameterError, chunk_layout, substream

logger = logging.getLogger(__name__)

SYMBOLS = ('Z0', 'Z1', 'X0')
DEFAULT_SEQUENCE = ('X0', 'Z1', 'Z0', 'X0', 'Z0', 'Z1', 'X0', 'Z1', 'Z0', 'X0', 'Z0', 'Z1', 'X0', 'Z0', 'Z1', 'Z1')
MODES = ('matrix', 'phenomenological')
MODE_ALIASES = {'pheno': 'phenomenological', 'matrix': 'matrix', 'phenomenological': 'phenomenological'}

#: Window index meaning "no click".
NO_CLICK = 3
#: Probabilities below this are taken as exact zeros of the interference model.
ZERO_TOL = 1e-15


@dataclass(frozen=True)
class EncodingSequence:
    """Repeating sequence of logical states sent by the encoder."""
    symbols: tuple = DEFAULT_SEQUENCE

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if not symbols:
            raise ParameterError("sequence must not be empty", key='sequence')
        bad = [s for s in symbols if s not in SYMBOLS]
        if bad:
            raise ParameterError("unknown symbols {}".format(bad), key='sequence')
        object.__setattr__(self, 'symbols', symbols)

    def __len__(self):
        return len(self.symbols)

    def counts(self):
        return {s: self.symbols.count(s) for s in SYMBOLS}

    def basis(self, index):
        return self.symbols[index][0]

    def indices(self, symbol):
        return np.array([i for i, s in enumerate(self.symbols) if s == symbol], dtype=int)

    def basis_shares(self):
        """Fraction of Z and X symbols."""
        n_z = sum(1 for s in self.symbols if s[0] == 'Z')
        return {'Z': n_z / len(self), 'X': 1 - n_z / len(self)}


@dataclass
class HistogramSet:
    """Window counts per sequence position.

    Attributes
    ----------
    counts : np.ndarray
        ``(L, 3)`` clicks in W1, W2, W3 per bit index.
    pulses_per_bit : np.ndarray
        ``(L,)`` pulses sent per bit index.
    gates : np.ndarray
        ``(L, 2)`` pulses measured with the decoder in the Z and X setting
        (phenomenological mode only, zeros otherwise).
    """
    counts: np.ndarray
    pulses_per_bit: np.ndarray
    gates: np.ndarray = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.pulses_per_bit = np.asarray(self.pulses_per_bit, dtype=np.int64)
        if self.gates is None:
            self.gates = np.zeros((len(self.pulses_per_bit), 2), dtype=np.int64)
        self.gates = np.asarray(self.gates, dtype=np.int64)

    @classmethod
    def empty(cls, n_bits):
        return cls(np.zeros((n_bits, 3)), np.zeros(n_bits), np.zeros((n_bits, 2)))

    @property
    def n_bits(self):
        return len(self.pulses_per_bit)

    @property
    def total_clicks(self):
        return int(self.counts.sum())

    @property
    def total_pulses(self):
        return int(self.pulses_per_bit.sum())

    def merge(self, other):
        """Sum of two histograms over the same sequence."""
        if other.n_bits != self.n_bits:
            raise ParameterError("cannot merge histograms of {} and {} bits".format(self.n_bits, other.n_bits),
                                 key='histogram')
        return HistogramSet(self.counts + other.counts, self.pulses_per_bit + other.pulses_per_bit,
                            self.gates + other.gates)

    def __eq__(self, other):
        if not isinstance(other, HistogramSet):
            return NotImplemented
        return (np.array_equal(self.counts, other.counts) and np.array_equal(self.pulses_per_bit, other.pulses_per_bit)
                and np.array_equal(self.gates, other.gates))


@dataclass(frozen=True)
class QberEstimates:
    """Sifted QBERs of one histogram set with binomial standard errors.

    ``raw_counts`` holds the sifted denominators per state and per basis;
    estimates with a zero denominator are NaN and listed in ``undefined``.
    """
    e_z0: float
    e_z1: float
    e_z: float
    e_x0: float
    raw_counts: dict
    stderr: dict
    undefined: tuple = ()

    def as_dict(self):
        return dict(e_z0=self.e_z0, e_z1=self.e_z1, e_z=self.e_z, e_x0=self.e_x0, raw_counts=dict(self.raw_counts),
                    stderr=dict(self.stderr), undefined=list(self.undefined))


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run configuration.

    Parameters
    ----------
    mode : {'matrix', 'phenomenological'}
    seed : int
        64-bit seed of the block.
    n_pulses : int
        Pulses in the block.
    dead_time_enabled : bool
        Veto clicks within the detector dead time of the previous click.
    n_workers : int
        Worker processes; 1 runs in-process.
    phase_offset : float
        Residual decoder phase added to the nominal -pi/2 (matrix mode).
    chunk_pulses : int
        Pulses per random substream.
    """
    mode: str = 'phenomenological'
    seed: int = 0
    n_pulses: int = 1000000
    dead_time_enabled: bool = False
    n_workers: int = 1
    phase_offset: float = 0.0
    chunk_pulses: int = CHUNK_PULSES

    def __post_init__(self):
        if self.mode not in MODE_ALIASES:
            raise ConfigError('mode', "must be one of {}, got {!r}".format(MODES, self.mode))
        object.__setattr__(self, 'mode', MODE_ALIASES[self.mode])
        if int(self.n_pulses) < 1:
            raise ConfigError('n_pulses', "must be at least 1, got {}".format(self.n_pulses))
        if int(self.n_workers) < 1:
            raise ConfigError('n_workers', "must be at least 1, got {}".format(self.n_workers))
        if int(self.chunk_pulses) < 1:
            raise ConfigError('chunk_pulses', "must be at least 1, got {}".format(self.chunk_pulses))
        if not math.isfinite(self.phase_offset):
            raise ConfigError('phase_offset', "must be finite")


@dataclass(frozen=True)
class _ChunkPlan:
    """Everything a worker needs to simulate a chunk, precomputed per bit index."""
    mode: str
    seed: int
    n_bits: int
    source_cdf: np.ndarray
    eta: float
    p_dc: float
    p_basis_bob: float
    window_cdf: np.ndarray = None
    is_z: np.ndarray = None
    p_mis: np.ndarray = None
    p_click: np.ndarray = None
    p_error: np.ndarray = None
    error_window: np.ndarray = None
    correct_window: np.ndarray = None
    keep_records: bool = False


def window_roles(symbol):
    """Correct and error window of a logical state, read off the interferometer model.

    Returns
    -------
    correct, error : int
        Window indices (0, 1, 2 for W1, W2, W3). The correct window of the X
        state is ``None``: its photons leave through the unmonitored port.
    """
    theta1 = optics.NOMINAL_PHASES[symbol]
    probs = optics.window_probabilities(theta1, optics.THETA2_X0).as_array()
    if symbol[0] == 'Z':
        correct = 0 if probs[0] > probs[2] else 2
        return correct, 2 - correct
    return None, 1


def sample_photon_numbers(rng, n, cdf):
    """Photon number (0, 1 or 2) of ``n`` pulses from the cumulative ``(p0, p0 + p1)``."""
    u = rng.random(n)
    return (u >= cdf[0]).astype(np.int64) + (u >= cdf[1]).astype(np.int64)


def _sample_windows(rng, bits, window_cdf):
    u = rng.random(len(bits))
    cdf = window_cdf[bits]
    return (u >= cdf[:, 0]).astype(np.int64) + (u >= cdf[:, 1]).astype(np.int64)


def _simulate_matrix(plan, rng, bits):
    n = len(bits)
    photons = sample_photon_numbers(rng, n, plan.source_cdf)
    survivors = rng.binomial(photons, plan.eta)
    first = _sample_windows(rng, bits, plan.window_cdf)
    second = _sample_windows(rng, bits, plan.window_cdf)
    window = np.where(survivors >= 1, first, NO_CLICK)
    # threshold detector: the earliest photon fires
    window = np.where(survivors == 2, np.minimum(first, second), window)

    flip = (rng.random(n) < plan.p_mis[bits]) & (window != NO_CLICK)
    coin = rng.random(n) < 0.5
    z_bits = plan.is_z[bits]
    outer = (window == 0) | (window == 2)
    window = np.where(flip & z_bits & outer, 2 - window, window)
    window = np.where(flip & ~z_bits & outer, 1, np.where(flip & ~z_bits & (window == 1), np.where(coin, 0, 2),
                                                          window))

    dark = rng.random((n, 3)) < plan.p_dc
    dark_window = np.where(dark.any(axis=1), np.argmax(dark, axis=1), NO_CLICK)
    return np.minimum(window, dark_window), None


def _simulate_phenomenological(plan, rng, bits):
    n = len(bits)
    z_gate = rng.random(n) < plan.p_basis_bob
    u = rng.random(n)
    coin = rng.random(n) < 0.5
    click = u < plan.p_click[bits]
    error = u < plan.p_error[bits]
    z_bits = plan.is_z[bits]

    window = np.full(n, NO_CLICK, dtype=np.int64)
    # decoder in Z: time of arrival resolves the state
    zz = z_gate & z_bits & click
    window[zz] = np.where(error[zz], plan.error_window[bits[zz]], plan.correct_window[bits[zz]])
    zx = z_gate & ~z_bits & click
    window[zx] = np.where(coin[zx], 0, 2)
    # decoder in X: Z states split evenly over the two ports, X errors light W2
    xz = ~z_gate & z_bits & click & coin
    window[xz] = 1
    xx = ~z_gate & ~z_bits & error
    window[xx] = 1

    gates = np.stack([z_gate, ~z_gate], axis=1)
    return window, gates


def _simulate_chunk(plan, chunk_index, start, n):
    """Simulate pulses ``start .. start + n`` from the substream of ``chunk_index``.

    Returns
    -------
    chunk_index : int
    histogram : HistogramSet
    records : tuple of np.ndarray or None
        Pulse index and window of every click when ``plan.keep_records``.
    """
    rng = substream(plan.seed, chunk_index)
    pulses = start + np.arange(n, dtype=np.int64)
    bits = pulses % plan.n_bits
    if plan.mode == 'matrix':
        window, gates = _simulate_matrix(plan, rng, bits)
    else:
        window, gates = _simulate_phenomenological(plan, rng, bits)

    clicked = window != NO_CLICK
    counts = np.bincount(bits[clicked] * 3 + window[clicked], minlength=3 * plan.n_bits).reshape(plan.n_bits, 3)
    pulses_per_bit = np.bincount(bits, minlength=plan.n_bits)
    if gates is None:
        gate_counts = np.zeros((plan.n_bits, 2), dtype=np.int64)
    else:
        gate_counts = np.stack([np.bincount(bits[gates[:, k]], minlength=plan.n_bits) for k in (0, 1)], axis=1)
    records = (pulses[clicked], window[clicked]) if plan.keep_records else None
    return chunk_index, HistogramSet(counts, pulses_per_bit, gate_counts), records


class PulseSimulation(object):
    """Monte Carlo of a block of pulses sent through the link.

    Parameters
    ----------
    system : SystemParams
    seq : EncodingSequence, optional
        Defaults to the 16-bit experimental sequence.
    cfg : McConfig, optional
    p_basis_bob : float, default=0.5
        Decoder probability of the Z setting (phenomenological mode).

    Examples
    --------
    >>> sim = PulseSimulation(SystemParams(length_km=40), cfg=McConfig(n_pulses=10**6, seed=7))
    >>> hist = sim.run()
    >>> qber = sift_and_qber(hist, sim.seq)
    """

    def __init__(self, system, seq=None, cfg=None, p_basis_bob=0.5):
        self.system = system
        self.seq = seq if seq is not None else EncodingSequence()
        self.cfg = cfg if cfg is not None else McConfig()
        self.p_basis_bob = p_basis_bob
        self.plan = self._build_plan()

    def _build_plan(self):
        system, seq, cfg = self.system, self.seq, self.cfg
        channel = photostats.ChannelDetParams.from_system(system)
        is_z = np.array([s[0] == 'Z' for s in seq.symbols])
        common = dict(mode=cfg.mode, seed=cfg.seed, n_bits=len(seq), p_dc=system.p_dc, p_basis_bob=self.p_basis_bob,
                      is_z=is_z, keep_records=cfg.dead_time_enabled)

        if cfg.mode == 'matrix':
            source = photostats.photon_number_dist(system.mean_photon_number, system.g2)
            window_cdf = np.zeros((len(seq), 2))
            for i, symbol in enumerate(seq.symbols):
                theta2 = optics.THETA2_X0 + cfg.phase_offset
                probs = optics.window_probabilities(optics.NOMINAL_PHASES[symbol], theta2, system.channel_phase)
                p = probs.as_array()
                p[p < ZERO_TOL] = 0.0
                p = p / p.sum()
                window_cdf[i] = [p[0], p[0] + p[1]]
            p_mis = np.where(is_z, system.p_mis_z, system.p_mis_x)
            return _ChunkPlan(source_cdf=np.array([source.p0, source.p0 + source.p1]), eta=channel.eta_total,
                              window_cdf=window_cdf, p_mis=p_mis, **common)

        probs = {b: photostats.basis_probs(system, b) for b in ('Z', 'X')}
        p_click = np.array([probs[s[0]].p_click for s in seq.symbols])
        p_error = np.array([probs[s[0]].p_error for s in seq.symbols])
        roles = [window_roles(s) for s in seq.symbols]
        correct = np.array([c if c is not None else NO_CLICK for c, _ in roles])
        error = np.array([e for _, e in roles])
        return _ChunkPlan(source_cdf=np.array([1.0, 1.0]), eta=channel.eta_fiber, p_click=p_click, p_error=p_error,
                          correct_window=correct, error_window=error, **common)

    def window_times(self):
        """Arrival time offset of W1, W2, W3 within a pulse period."""
        return np.arange(3) * self.system.window_s

    def apply_dead_time(self, pulses, windows):
        """Keep only clicks at least one dead time after the previous registered click.

        Clicks must be in pulse order.
        """
        times = pulses / self.system.f_rep_hz + self.window_times()[windows]
        keep = np.zeros(len(times), dtype=bool)
        last = -np.inf
        for i, t in enumerate(times):
            if t - last >= self.system.dead_time_s:
                keep[i] = True
                last = t
        logger.info('Dead time vetoed {} of {} clicks'.format(int((~keep).sum()), len(times)))
        return keep

    def run(self):
        """Simulate the block.

        Returns
        -------
        hist : HistogramSet
        """
        chunks = chunk_layout(self.cfg.n_pulses, self.cfg.chunk_pulses)
        logger.info('Simulating {} pulses in {} chunks ({} mode, {} workers)'.format(
            self.cfg.n_pulses, len(chunks), self.cfg.mode, self.cfg.n_workers))
        results = {}
        if self.cfg.n_workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=self.cfg.n_workers) as executor:
                futures = [executor.submit(_simulate_chunk, self.plan, *chunk) for chunk in chunks]
                for future in as_completed(futures):
                    index, hist, records = future.result()
                    results[index] = (hist, records)
        else:
            for chunk in chunks:
                index, hist, records = _simulate_chunk(self.plan, *chunk)
                results[index] = (hist, records)
                logger.debug('Chunk {} done: {} clicks'.format(index, hist.total_clicks))

        total = HistogramSet.empty(len(self.seq))
        for index in sorted(results):
            total = total.merge(results[index][0])
        if not self.cfg.dead_time_enabled:
            return total

        pulses = np.concatenate([results[i][1][0] for i in sorted(results)])
        windows = np.concatenate([results[i][1][1] for i in sorted(results)])
        keep = self.apply_dead_time(pulses, windows)
        bits = pulses[keep] % len(self.seq)
        counts = np.bincount(bits * 3 + windows[keep], minlength=3 * len(self.seq)).reshape(len(self.seq), 3)
        return HistogramSet(counts, total.pulses_per_bit, total.gates)


def simulate_block(system, seq=None, cfg=None):
    """Per-bit window histograms of one Monte Carlo block.

    Parameters
    ----------
    system : SystemParams
    seq : EncodingSequence, optional
    cfg : McConfig, optional

    Returns
    -------
    hist : HistogramSet
    """
    return PulseSimulation(system, seq, cfg).run()


def _ratio(numerator, denominator):
    if denominator <= 0:
        return float('nan'), float('nan')
    value = min(numerator / denominator, 1.0)
    return value, math.sqrt(value * (1 - value) / denominator)


def sift_and_qber(hist, seq=None):
    """Sifted QBERs of a histogram set.

    For each Z state the counts in its error window are divided by the counts
    in W1 and W3 of the same bits. For X0 the W2 counts are divided by the W1
    plus W3 counts of the X bits, since half the decoder settings are Z.

    Parameters
    ----------
    hist : HistogramSet
    seq : EncodingSequence, optional

    Returns
    -------
    estimates : QberEstimates
    """
    seq = seq if seq is not None else EncodingSequence()
    if hist.n_bits != len(seq):
        raise ParameterError("histogram has {} bits, sequence {}".format(hist.n_bits, len(seq)), key='histogram')

    values, errors, raw, undefined = {}, {}, {}, []
    for symbol in SYMBOLS:
        rows = hist.counts[seq.indices(symbol)]
        _, error_window = window_roles(symbol)
        sifted = int(rows[:, 0].sum() + rows[:, 2].sum())
        values[symbol], errors[symbol] = _ratio(int(rows[:, error_window].sum()), sifted)
        raw[symbol] = sifted
        if sifted == 0:
            undefined.append('e_{}'.format(symbol.lower()))
            logger.warning('No sifted counts for {}: estimate undefined'.format(symbol))

    e_z = 0.5 * (values['Z0'] + values['Z1'])
    raw['Z'] = raw['Z0'] + raw['Z1']
    raw['X'] = raw['X0']
    stderr = dict(e_z0=errors['Z0'], e_z1=errors['Z1'], e_x0=errors['X0'],
                  e_z=0.5 * math.sqrt(errors['Z0']**2 + errors['Z1']**2))
    return QberEstimates(values['Z0'], values['Z1'], e_z, values['X0'], raw, stderr, tuple(undefined))


def click_fraction(hist, seq=None):
    """Empirical click and error probability per decoder gate and basis (phenomenological mode).

    Returns
    -------
    fractions : dict
        ``{basis: (p_click, p_error, clicks_gates, error_gates)}`` with the
        gate counts the estimates were taken over.
    """
    seq = seq if seq is not None else EncodingSequence()
    out = {}
    for basis in ('Z', 'X'):
        idx = np.array([i for i, s in enumerate(seq.symbols) if s[0] == basis], dtype=int)
        rows = hist.counts[idx]
        z_gates = int(hist.gates[idx, 0].sum())
        clicks = int(rows[:, 0].sum() + rows[:, 2].sum())
        if basis == 'Z':
            errors = sum(int(hist.counts[i, window_roles(seq.symbols[i])[1]]) for i in idx)
            error_gates = z_gates
        else:
            errors = int(rows[:, 1].sum())
            error_gates = int(hist.gates[idx, 1].sum())
        out[basis] = (clicks / z_gates if z_gates else float('nan'),
                      errors / error_gates if error_gates else float('nan'), z_gates, error_gates)
    return out


def empirical_g2(system, cfg=None):
    """g2(0) estimate ``2 P(n=2) / <n>^2`` from the photon-number sampler.

    Parameters
    ----------
    system : SystemParams
    cfg : McConfig, optional
        ``n_pulses`` must be at least 10**6.
    """
    cfg = cfg if cfg is not None else McConfig()
    if cfg.n_pulses < 10**6:
        raise ParameterError("at least 10**6 pulses are needed, got {}".format(cfg.n_pulses), key='n_pulses')
    source = photostats.photon_number_dist(system.mean_photon_number, system.g2)
    cdf = np.array([source.p0, source.p0 + source.p1])
    tallies = np.zeros(3, dtype=np.int64)
    for index, _, n in chunk_layout(cfg.n_pulses, cfg.chunk_pulses):
        tallies += np.bincount(sample_photon_numbers(substream(cfg.seed, index), n, cdf), minlength=3)
    p_two = tallies[2] / cfg.n_pulses
    mean = (tallies[1] + 2 * tallies[2]) / cfg.n_pulses
    if mean == 0:
        return 0.0
    return float(2 * p_two / mean**2)
