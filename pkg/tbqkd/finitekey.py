"""
Finite-key security analysis: expected count bookkeeping, the multiplicative
Chernoff bound, the phase-error upper bound, error-correction leakage and
the secure key rate.

Expected counts stay real valued until the final floor of the secret length.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from scipy import special

from tbqkd import photostats
from tbqkd.settings import SystemParams
from tbqkd.utils import ParameterError

logger = logging.getLogger(__name__)

STATUS_POSITIVE = 'positive'
STATUS_ZERO = 'zero_clamped'
STATUS_INVALID = 'invalid'

#: Phase-error estimate substituted for zero observed X errors; the
#: phase-error bound is singular at exactly zero.
PHI_FLOOR = 1e-12


@dataclass(frozen=True)
class BlockCounts:
    """Sent pulses and the expected sifted, error and non-multiphoton counts per basis.

    ``flags`` lists the consistency problems found while building the counts,
    e.g. ``'nmp_nonpositive_Z'`` when no single-photon key can be certified.
    """
    n_sum: float
    n_r_z: float
    n_r_x: float
    m_r_z: float
    m_r_x: float
    n_nmp_z: float
    n_nmp_x: float
    flags: tuple = ()

    @property
    def r_raw(self):
        """Sifted Z counts per sent pulse."""
        return self.n_r_z / self.n_sum if self.n_sum > 0 else 0.0

    def basis(self, name):
        """``(n_r, m_r, n_nmp)`` of basis ``'Z'`` or ``'X'``."""
        if name == 'Z':
            return self.n_r_z, self.m_r_z, self.n_nmp_z
        return self.n_r_x, self.m_r_x, self.n_nmp_x

    def as_dict(self):
        values = asdict(self)
        values['flags'] = list(self.flags)
        return values


class QberPair(NamedTuple):
    """Model QBERs and whether either was clamped to [0, 0.5] or undefined."""
    e_x: float
    e_z: float
    status: str = 'ok'


@dataclass(frozen=True)
class KeyRateReport:
    """Result of the finite-key analysis of one block."""
    r_secure: float
    skr_bps: float
    e_z: float
    e_x: float
    phi_z_bar: float
    lambda_ec: float
    status: str
    r_raw: float = 0.0
    n_sum: float = 0.0
    secret_length: float = 0.0
    flags: tuple = field(default=())

    def as_dict(self):
        values = asdict(self)
        values['flags'] = list(self.flags)
        values['skb_per_pulse'] = self.r_secure
        return values


def binary_entropy(x):
    """Binary Shannon entropy in bits.

    Parameters
    ----------
    x : float
        Probability in [0, 1].

    Returns
    -------
    h : float
        ``h(0) = h(1) = 0``.
    """
    if not 0.0 <= x <= 1.0:
        raise ParameterError("entropy argument must lie in [0, 1], got {}".format(x), key='x')
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def chernoff_upper(x_star, eps):
    """Upper Chernoff bound on a count with expectation ``x_star``.

    Parameters
    ----------
    x_star : float
        Expected count, non-negative.
    eps : float
        Failure probability.

    Returns
    -------
    x_bar : float
        ``(1 + delta_U) x_star`` with
        ``delta_U = (beta + sqrt(8 beta x_star + beta^2)) / (2 x_star)`` and
        ``beta = -ln(eps)``. At ``x_star = 0`` the limit ``beta`` is returned.
    """
    if x_star < 0:
        raise ParameterError("must be non-negative, got {}".format(x_star), key='x_star')
    if not 0.0 < eps < 1.0:
        raise ParameterError("must lie in (0, 1), got {}".format(eps), key='eps')
    beta = -math.log(eps)
    if x_star == 0:
        return beta
    delta_u = (beta + math.sqrt(8 * beta * x_star + beta**2)) / (2 * x_star)
    return (1 + delta_u) * x_star


def gamma_upper(n, k, lam, eps_prime):
    """Finite-size correction of the phase-error rate.

    Parameters
    ----------
    n, k : float
        Sizes of the test and key samples.
    lam : float
        Observed error rate of the test sample, in (0, 1).
    eps_prime : float
        Failure probability of the estimate.

    Returns
    -------
    gamma : float
    """
    if not (n > 0 and k > 0):
        raise ParameterError("sample sizes must be positive, got n={} k={}".format(n, k), key='n')
    if not 0.0 < lam < 1.0:
        raise ParameterError("must lie in (0, 1), got {}".format(lam), key='lam')
    if not 0.0 < eps_prime < 1.0:
        raise ParameterError("must lie in (0, 1), got {}".format(eps_prime), key='eps_prime')
    total = n + k
    a = max(n, k)
    g = total / (n * k) * math.log(total / (2 * math.pi * n * k * lam * (1 - lam) * eps_prime**2))
    ratio = a**2 * g / total**2
    numerator = (1 - 2 * lam) * a * g / total + math.sqrt(a**2 * g**2 / total**2 + 4 * lam * (1 - lam) * g)
    return numerator / (2 + 2 * ratio)


def inv_binomial_cdf(target, n, p):
    """Smallest ``k`` with ``P(X <= k) >= target`` for ``X ~ Binomial(n, p)``.

    The CDF is evaluated through the regularized incomplete beta function
    (`scipy.special.bdtr`) and the quantile found by bisection on ``k``.
    """
    n = int(n)
    if n < 1:
        raise ParameterError("must be at least 1, got {}".format(n), key='n')
    if not 0.0 <= p <= 1.0:
        raise ParameterError("must lie in [0, 1], got {}".format(p), key='p')
    if target <= 0.0 or p == 0.0:
        return 0
    if target >= 1.0 or p == 1.0:
        return n
    if special.bdtr(0, n, p) >= target:
        return 0
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if special.bdtr(mid, n, p) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def lambda_ec(n_r_z, e_z, eps_cor):
    """Error-correction leakage bound from the inverse binomial CDF, clamped at zero.

    Parameters
    ----------
    n_r_z : float
        Sifted Z counts, rounded to the nearest integer.
    e_z : float
        Z-basis bit error rate, in [0, 1).
    eps_cor : float
        Correctness failure probability.
    """
    n = int(round(n_r_z))
    if n < 1:
        raise ParameterError("must be at least 1, got {}".format(n_r_z), key='n_r_z')
    if not 0.0 <= e_z < 1.0:
        raise ParameterError("must lie in [0, 1), got {}".format(e_z), key='e_z')
    target = eps_cor * (1 + 1 / math.sqrt(n))
    quantile = inv_binomial_cdf(target, n, 1 - e_z)
    return max(n * (1 - e_z) - quantile - 1, 0.0)


def ec_leakage(n_r_z, e_z, security):
    """Bits disclosed by error correction under ``security.ec_model``.

    ``'binomial'`` is `lambda_ec`; ``'shannon'`` is ``f_ec * n * h(e_z)``.
    """
    if security.ec_model == 'binomial':
        return lambda_ec(n_r_z, e_z, security.eps_cor)
    return security.f_ec * n_r_z * binary_entropy(min(max(e_z, 0.0), 0.5))


def expected_counts(system, security, split, n_sum):
    """Expected sifted, error and non-multiphoton counts of a block of ``n_sum`` pulses.

    Parameters
    ----------
    system : SystemParams
    security : SecurityParams
    split : BasisSplit
    n_sum : float
        Pulses sent.

    Returns
    -------
    counts : BlockCounts
    """
    if not n_sum > 0:
        raise ParameterError("must be positive, got {}".format(n_sum), key='n_sum')
    dist = photostats.photon_number_dist(system.mean_photon_after_receiver, system.g2)
    values, flags = {}, []
    for basis in ('Z', 'X'):
        probs = photostats.basis_probs(system, basis)
        share = n_sum * split.alice(basis) * split.p_basis_bob
        n_r = share * probs.p_click
        n_nmp = n_r - chernoff_upper(share * dist.p2, security.eps_pe)
        if n_nmp <= 0:
            flags.append('nmp_nonpositive_{}'.format(basis))
            logger.warning('Non-multiphoton lower bound of the {} basis is {:.4g}: no key can be certified'.format(
                basis, n_nmp))
        values[basis] = (n_r, share * probs.p_error, n_nmp)
    return BlockCounts(n_sum, values['Z'][0], values['X'][0], values['Z'][1], values['X'][1], values['Z'][2],
                       values['X'][2], tuple(flags))


def qber_model(counts):
    """Model QBERs ``E_X = M_R^X / N_nmp^X`` and ``E_Z = M_R^Z / N_nmp^Z``.

    Values outside [0, 0.5] are clamped with status ``'clamped'``; a
    non-positive denominator gives NaN with status ``'invalid'``.
    """
    rates, status = {}, 'ok'
    for basis in ('X', 'Z'):
        _, m_r, n_nmp = counts.basis(basis)
        if n_nmp <= 0:
            rates[basis] = float('nan')
            status = 'invalid'
            continue
        rate = m_r / n_nmp
        if rate < 0.0 or rate > 0.5:
            logger.warning('{} basis QBER {:.4g} clamped to [0, 0.5]'.format(basis, rate))
            rate = min(max(rate, 0.0), 0.5)
            if status == 'ok':
                status = 'clamped'
        rates[basis] = rate
    return QberPair(rates['X'], rates['Z'], status)


def secure_key_rate(counts, security, e_z_override=None, e_x_override=None, f_rep_hz=SystemParams.f_rep_hz):
    """Secure key bits per pulse of a block.

    Parameters
    ----------
    counts : BlockCounts
    security : SecurityParams
    e_z_override, e_x_override : float, optional
        Measured QBERs in [0, 0.5] replacing the model values.
    f_rep_hz : float
        Repetition rate used for the key rate in bits per second.

    Returns
    -------
    report : KeyRateReport
    """
    for name, value in (('e_z_override', e_z_override), ('e_x_override', e_x_override)):
        if value is not None and not 0.0 <= value <= 0.5:
            raise ParameterError("must lie in [0, 0.5], got {}".format(value), key=name)

    model = qber_model(counts)
    e_x = model.e_x if e_x_override is None else float(e_x_override)
    e_z = model.e_z if e_z_override is None else float(e_z_override)
    base = dict(r_raw=counts.r_raw, n_sum=counts.n_sum, flags=counts.flags)

    if counts.n_nmp_z <= 0 or counts.n_nmp_x <= 0 or counts.n_r_z < 1 or math.isnan(e_x) or math.isnan(e_z):
        return KeyRateReport(0.0, 0.0, e_z, e_x, float('nan'), 0.0, STATUS_INVALID, **base)

    phi_z = e_x
    if phi_z >= 0.5:
        return KeyRateReport(0.0, 0.0, e_z, e_x, 0.5, 0.0, STATUS_ZERO, **base)
    phi_z_bar = phi_z + gamma_upper(counts.n_nmp_x, counts.n_nmp_z, max(phi_z, PHI_FLOOR), security.eps_sec / 6)

    # E_Z of the leakage term is relative to all sifted Z counts
    e_z_ec = e_z if e_z_override is not None else counts.m_r_z / counts.n_r_z
    leak = ec_leakage(counts.n_r_z, e_z_ec, security)

    if phi_z_bar >= 0.5:
        return KeyRateReport(0.0, 0.0, e_z, e_x, 0.5, leak, STATUS_ZERO, **base)

    length = math.floor(counts.n_nmp_z * (1 - binary_entropy(phi_z_bar)) - leak -
                        2 * math.log2(1 / (2 * security.eps_pa)) - math.log2(2 / security.eps_cor))
    r_secure = max(length, 0) / counts.n_sum
    status = STATUS_POSITIVE if length > 0 else STATUS_ZERO
    return KeyRateReport(r_secure, r_secure * f_rep_hz, e_z, e_x, phi_z_bar, leak, status,
                         secret_length=float(max(length, 0)), r_raw=counts.r_raw, n_sum=counts.n_sum,
                         flags=counts.flags)


def analyze(system, security, split, n_sum, e_z_override=None, e_x_override=None):
    """Expected counts, model QBERs and the secure key rate of ``system`` in one call."""
    counts = expected_counts(system, security, split, n_sum)
    report = secure_key_rate(counts, security, e_z_override, e_x_override, system.f_rep_hz)
    logger.debug('L={} km N_sum={:.3g}: r_secure={:.4g} ({})'.format(system.length_km, n_sum, report.r_secure,
                                                                   report.status))
    return report
