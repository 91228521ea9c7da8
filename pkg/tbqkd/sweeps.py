"""
Experiment drivers: distance sweeps, brightness x purity and repetition rate
x lifetime gain grids, the table reproduction preset and Monte Carlo
stability runs.

All drivers are pure functions of their inputs. Grid cells may be evaluated
by worker processes; rows are always assembled in grid order.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from tbqkd import finitekey, montecarlo, photostats
from tbqkd.settings import BasisSplit, SecurityParams, SystemParams
from tbqkd.utils import ParameterError, derive_seed, monotone_grid, stable_hash

logger = logging.getLogger(__name__)

#: Received block size of the simulated curves.
N_SUM_SWEEP = 1e11
#: Pulses sent in one minute at the experimental repetition rate.
N_SUM_MINUTE = 4.56e9

#: Measured operating points: fiber length, block size, E_Z, E_X0, secure bits per pulse, raw rate.
TABLE1 = (
    (0.0, 4.56e9, 0.0098, 0.0314, 1.59e-4, 2.23e-4),
    (40.0, 4.56e9, 0.0119, 0.0312, 3.04e-5, 4.33e-5),
    (80.0, 4.56e9, 0.0302, 0.0490, 3.54e-6, 6.87e-6),
    (120.0, 9.12e10, 0.0685, 0.0960, 1.99e-7, 1.34e-6),
)
#: Measured standard deviations of E_Z0, E_Z1, E_X0 over one-minute blocks.
TABLE1_SIGMA = {
    0.0: (0.0001, 0.0001, 0.0054),
    40.0: (0.0008, 0.0003, 0.0056),
    80.0: (0.0013, 0.0014, 0.0052),
    120.0: (0.0060, 0.0056, 0.0058),
}

DISTANCE_COLUMNS = ('L_km', 'e_x', 'e_z', 'skb_per_pulse', 'status')
GRID_COLUMNS = ('x', 'y', 'gain', 'status')
STABILITY_COLUMNS = ('block_index', 'e_z0', 'e_z1', 'e_x0')
TABLE1_COLUMNS = ('L_km', 'n_sum', 'e_z', 'e_x', 'skb_per_pulse', 'r_raw', 'skb_reference', 'status')


class OverlapModel(object):
    """Extra misalignment caused by temporal overlap of neighbouring emissions.

    Subclasses return the additive misalignment of the Z and X basis for a
    repetition rate and emitter lifetime.
    """

    def misalignment(self, f_rep, tau):
        raise NotImplementedError

    def apply(self, system, f_rep, tau):
        """``system`` at repetition rate ``f_rep`` and lifetime ``tau`` with the overlap penalty added."""
        add_z, add_x = self.misalignment(f_rep, tau)
        return system.replace(f_rep_hz=f_rep, lifetime_tau_s=tau, p_mis_z=min(system.p_mis_z + add_z, 0.5),
                              p_mis_x=min(system.p_mis_x + add_x, 0.5))


class ExponentialTailOverlap(OverlapModel):
    """Exponential decay tail leaking out of its window.

    The window is a third of the period, so a fraction ``exp(-W / tau)`` of
    the emission lands in the next window; half of it is an error in either
    basis. The Sagnac modulation slots are half a period apart and the tail
    ``exp(-delta / tau)`` crossing into the other slot is an X error half the
    time.
    """

    def misalignment(self, f_rep, tau):
        if tau <= 0:
            return 0.0, 0.0
        window = 1.0 / (3.0 * f_rep)
        delta = 1.0 / (2.0 * f_rep)
        leak = math.exp(-window / tau)
        return 0.5 * leak, 0.5 * leak + 0.5 * math.exp(-delta / tau)


@dataclass(frozen=True)
class SweepSpec:
    """Parameter ranges and the baseline they are swept around.

    Parameters
    ----------
    variables : dict
        Grid name mapped to a strictly increasing sequence of values, e.g.
        ``{'distance_km': ...}``, ``{'mean_photon_number': ..., 'g2': ...}``
        or ``{'f_rep_hz': ..., 'lifetime_tau_s': ...}``.
    system, security, split
        Baseline parameter bundles.
    n_sum : float
        Block size in pulses.
    distance_km : float
        Fiber length of the gain grids.
    n_workers : int
        Worker processes for cell evaluation.
    overlap : OverlapModel
        Temporal-overlap model of the repetition-rate grid.
    """
    variables: dict
    system: SystemParams = SystemParams()
    security: SecurityParams = SecurityParams()
    split: BasisSplit = BasisSplit()
    n_sum: float = N_SUM_SWEEP
    distance_km: float = 40.0
    n_workers: int = 1
    overlap: OverlapModel = field(default_factory=ExponentialTailOverlap)

    def __post_init__(self):
        if not self.variables:
            raise ParameterError("at least one swept variable is required", key='variables')
        grids = {name: tuple(monotone_grid(name, values)) for name, values in self.variables.items()}
        object.__setattr__(self, 'variables', grids)
        if not self.n_sum > 0:
            raise ParameterError("must be positive, got {}".format(self.n_sum), key='n_sum')

    def grid(self, name):
        if name not in self.variables:
            raise ParameterError("not swept by this spec", key=name)
        return np.asarray(self.variables[name])

    @classmethod
    def distance(cls, start=0.0, stop=200.0, resolution=201, **kwargs):
        return cls({'distance_km': np.linspace(start, stop, resolution)}, **kwargs)

    @classmethod
    def brightness_purity(cls, resolution=11, n_range=(1e-3, 0.5), g2_range=(0.0, 0.1), **kwargs):
        return cls({'mean_photon_number': np.geomspace(n_range[0], n_range[1], resolution),
                    'g2': np.linspace(g2_range[0], g2_range[1], resolution)}, **kwargs)

    @classmethod
    def reprate_lifetime(cls, resolution=11, f_range=(50e6, 2e9), tau_range=(50e-12, 1500e-12), **kwargs):
        return cls({'f_rep_hz': np.geomspace(f_range[0], f_range[1], resolution),
                    'lifetime_tau_s': np.linspace(tau_range[0], tau_range[1], resolution)}, **kwargs)

    def baseline_hash(self):
        return stable_hash(dict(system=asdict(self.system), security=asdict(self.security),
                                split=asdict(self.split), n_sum=self.n_sum, distance_km=self.distance_km,
                                overlap=type(self.overlap).__name__))


@dataclass(frozen=True)
class SweepResult:
    """Rows of a sweep in grid order, with their column names and provenance."""
    kind: str
    columns: tuple
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows], dtype=float if name != 'status' else object)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class StabilityResult:
    """Per-block QBER series of a stability run and its statistical-only summary."""
    series: tuple
    summary: dict

    @property
    def rows(self):
        return tuple((i, q.e_z0, q.e_z1, q.e_x0) for i, q in enumerate(self.series))


def _metadata(kind, spec):
    return dict(kind=kind, baseline_hash=spec.baseline_hash(), n_sum=spec.n_sum)


def _evaluate(cells, function, n_workers):
    """Apply ``function`` to every cell, keeping the order of ``cells``."""
    if n_workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as executor:
            return list(executor.map(function, cells))
    return [function(cell) for cell in cells]


def _distance_cell(cell):
    system, security, split, n_sum = cell
    counts = finitekey.expected_counts(system, security, split, n_sum)
    qber = finitekey.qber_model(counts)
    report = finitekey.secure_key_rate(counts, security, f_rep_hz=system.f_rep_hz)
    return (system.length_km, qber.e_x, qber.e_z, report.r_secure, report.status)


def _rate_cell(cell):
    """Secure bits per second of one parameter point, or ``None`` when the point is invalid."""
    changes, spec_parts = cell
    system, security, split, n_sum, overlap = spec_parts
    try:
        if 'overlap' in changes:
            f_rep, tau = changes['overlap']
            system = overlap.apply(system, f_rep, tau)
        else:
            system = system.replace(**changes)
        report = finitekey.analyze(system, security, split, n_sum)
    except ParameterError as e:
        logger.warning('Invalid sweep cell {}: {}'.format(changes, e))
        return None
    return report.r_secure * system.f_rep_hz


def model_qber(system, security, split, n_sum):
    """Model ``(e_x, e_z)`` of ``system`` for a block of ``n_sum`` pulses."""
    return finitekey.qber_model(finitekey.expected_counts(system, security, split, n_sum))


def distance_sweep(spec):
    """Model QBERs and secure bits per pulse over fiber length.

    Parameters
    ----------
    spec : SweepSpec
        Must sweep ``distance_km``.

    Returns
    -------
    result : SweepResult
        Rows ``(L_km, e_x, e_z, skb_per_pulse, status)``.
    """
    distances = spec.grid('distance_km')
    if distances[0] < 0:
        raise ParameterError("distances must be non-negative", key='distance_km')
    cells = [(spec.system.replace(length_km=float(d)), spec.security, spec.split, spec.n_sum) for d in distances]
    logger.info('Distance sweep over {} points ({:.1f} to {:.1f} km)'.format(len(cells), distances[0], distances[-1]))
    rows = _evaluate(cells, _distance_cell, spec.n_workers)
    return SweepResult('distance', DISTANCE_COLUMNS, tuple(rows), _metadata('distance', spec))


def max_tolerable_distance(spec, qber_threshold=0.11, lo=0.0, hi=200.0, resolution=0.01):
    """Fiber length at which the model X-basis QBER reaches ``qber_threshold``.

    Bisection on the length in ``[lo, hi]``. Returns ``lo`` when the QBER at
    ``lo`` already reaches the threshold and NaN (with a warning) when it is
    not reached within ``hi``.
    """
    if not 0.0 < qber_threshold < 0.5:
        raise ParameterError("must lie in (0, 0.5), got {}".format(qber_threshold), key='qber_threshold')

    def e_x(length):
        return model_qber(spec.system.replace(length_km=length), spec.security, spec.split, spec.n_sum).e_x

    if e_x(lo) >= qber_threshold:
        if e_x(lo) > qber_threshold:
            logger.warning('E_X at {} km already exceeds {}'.format(lo, qber_threshold))
        return lo
    if not e_x(hi) >= qber_threshold:
        logger.warning('E_X threshold {} not reached within {} km'.format(qber_threshold, hi))
        return float('nan')
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if e_x(mid) >= qber_threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _gain_grid(kind, spec, xname, yname, cell_changes):
    xs, ys = spec.grid(xname), spec.grid(yname)
    system = spec.system.replace(length_km=spec.distance_km)
    parts = (system, spec.security, spec.split, spec.n_sum, spec.overlap)
    baseline = _rate_cell((cell_changes(None, None), parts))
    cells = [(cell_changes(float(x), float(y)), parts) for x in xs for y in ys]
    logger.info('{} grid: {} x {} cells at {} km'.format(kind, len(xs), len(ys), spec.distance_km))
    rates = _evaluate(cells, _rate_cell, spec.n_workers)

    rows = []
    for (x, y), rate in zip(((x, y) for x in xs for y in ys), rates):
        if rate is None:
            rows.append((float(x), float(y), float('nan'), finitekey.STATUS_INVALID))
        elif not baseline:
            rows.append((float(x), float(y), float('nan'), finitekey.STATUS_ZERO))
        else:
            gain = rate / baseline
            status = finitekey.STATUS_POSITIVE if gain > 0 else finitekey.STATUS_ZERO
            rows.append((float(x), float(y), gain, status))
    metadata = _metadata(kind, spec)
    metadata['baseline_rate_bps'] = baseline
    return SweepResult(kind, GRID_COLUMNS, tuple(rows), metadata)


def brightness_purity_sweep(spec):
    """Gain of the secure key rate over mean photon number (x) and g2 (y).

    Gains are relative to the baseline ``spec.system`` at ``spec.distance_km``.
    Cells outside the two-photon truncation are flagged ``invalid``.
    """
    base = spec.system

    def changes(x, y):
        if x is None:
            return dict(mean_photon_number=base.mean_photon_number, g2=base.g2)
        return dict(mean_photon_number=x, g2=y)

    return _gain_grid('brightness', spec, 'mean_photon_number', 'g2', changes)


def reprate_lifetime_sweep(spec):
    """Gain of the secure key rate over repetition rate (x) and emitter lifetime (y).

    The baseline cell is ``spec.system``'s repetition rate and lifetime with
    the same overlap penalty applied, so it has a gain of exactly one.
    """
    base = spec.system

    def changes(x, y):
        if x is None:
            return dict(overlap=(base.f_rep_hz, base.lifetime_tau_s))
        return dict(overlap=(x, y))

    return _gain_grid('reprate', spec, 'f_rep_hz', 'lifetime_tau_s', changes)


def table1_reproduction(system=None, security=None, split=None):
    """Secure bits per pulse at the measured operating points.

    The measured QBERs replace the model values and each distance uses its
    measured block size.

    Returns
    -------
    result : SweepResult
        Rows ``(L_km, n_sum, e_z, e_x, skb_per_pulse, r_raw, skb_reference, status)``.
    """
    system = system if system is not None else SystemParams()
    security = security if security is not None else SecurityParams()
    split = split if split is not None else BasisSplit()
    rows = []
    for length, n_sum, e_z, e_x, skb, _ in TABLE1:
        report = finitekey.analyze(system.replace(length_km=length), security, split, n_sum, e_z_override=e_z,
                                   e_x_override=e_x)
        rows.append((length, n_sum, e_z, e_x, report.r_secure, report.r_raw, skb, report.status))
    metadata = dict(kind='table1', ec_model=security.ec_model)
    return SweepResult('table1', TABLE1_COLUMNS, tuple(rows), metadata)


def statistical_sigma(system, n_pulses, seq=None, p_basis_bob=0.5):
    """Shot-noise standard deviation of E_Z0, E_Z1 and E_X0 for a block of ``n_pulses``.

    Uses the analytic click/error probabilities and the number of sifted
    counts each estimate is taken over.
    """
    seq = seq if seq is not None else montecarlo.EncodingSequence()
    counts = seq.counts()
    sigma = {}
    for symbol in montecarlo.SYMBOLS:
        probs = photostats.basis_probs(system, symbol[0])
        sifted = n_pulses * counts[symbol] / len(seq) * p_basis_bob * probs.p_click
        rate = min(probs.qber, 1.0)
        sigma['e_' + symbol.lower()] = math.sqrt(rate * (1 - rate) / sifted) if sifted > 0 else float('nan')
    return sigma


def stability_run(system, cfg, n_blocks, block_pulses, seq=None, reference_pulses=N_SUM_MINUTE):
    """Monte Carlo QBER series over ``n_blocks`` independent blocks.

    Every block emulates one minute of operation with ``block_pulses``
    pulses. When ``block_pulses`` is scaled down from ``reference_pulses``
    the scaling is recorded and the standard deviations are also projected
    to the reference block size. Standard deviations are statistical only.

    Returns
    -------
    result : StabilityResult
    """
    n_blocks = int(n_blocks)
    if n_blocks < 2:
        raise ParameterError("at least two blocks are needed, got {}".format(n_blocks), key='n_blocks')
    seq = seq if seq is not None else montecarlo.EncodingSequence()
    series = []
    for index in range(n_blocks):
        block_cfg = replace(cfg, seed=derive_seed(cfg.seed, index), n_pulses=int(block_pulses))
        hist = montecarlo.simulate_block(system, seq, block_cfg)
        series.append(montecarlo.sift_and_qber(hist, seq))
        logger.info('Block {}/{}: E_Z={:.4g} E_X0={:.4g}'.format(index + 1, n_blocks, series[-1].e_z,
                                                               series[-1].e_x0))

    scaling = reference_pulses / block_pulses
    summary = dict(n_blocks=n_blocks, block_pulses=int(block_pulses), reference_pulses=reference_pulses,
                   scaling=scaling, statistical_only=True)
    for name in ('e_z0', 'e_z1', 'e_z', 'e_x0'):
        values = np.array([getattr(q, name) for q in series], dtype=float)
        values = values[np.isfinite(values)]
        mean = float(values.mean()) if values.size else float('nan')
        std = float(values.std(ddof=1)) if values.size > 1 else float('nan')
        summary['mean_' + name] = mean
        summary['std_' + name] = std
        summary['projected_std_' + name] = std / math.sqrt(scaling)
    analytic = statistical_sigma(system, reference_pulses, seq)
    for name, value in analytic.items():
        summary['analytic_std_' + name] = value
    return StabilityResult(tuple(series), summary)
