"""
Photon-number statistics of the sub-Poissonian source and the analytic
click/error probability model of source, fiber and detector.
"""
import logging
from dataclasses import dataclass

import numpy as np

from tbqkd.utils import ParameterError, check_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceStats:
    """Mean photon number before the channel and g2(0) of the source."""
    mean_photon_number: float
    g2: float

    def __post_init__(self):
        check_fraction('mean_photon_number', self.mean_photon_number, open_lower=True)
        check_fraction('g2', self.g2)

    @classmethod
    def from_system(cls, system):
        return cls(system.mean_photon_number, system.g2)


@dataclass(frozen=True)
class PhotonNumberDist:
    """Truncated photon-number distribution of one pulse."""
    p0: float
    p1: float
    p2: float

    @property
    def mean(self):
        return self.p1 + 2 * self.p2

    def as_array(self):
        return np.array([self.p0, self.p1, self.p2])


@dataclass(frozen=True)
class ChannelDetParams:
    """Fiber, decoder and detector parameters of the link."""
    alpha: float
    length_km: float
    eta_encoder: float
    eta_decoder: float
    eta_detector: float
    p_dc: float
    p_mis_z: float
    p_mis_x: float
    tau_w: float
    tau_dt: float

    def __post_init__(self):
        for name in ('eta_encoder', 'eta_decoder', 'eta_detector', 'p_mis_z', 'p_mis_x'):
            check_fraction(name, getattr(self, name))
        check_fraction('p_dc', self.p_dc, open_upper=True)
        check_fraction('alpha', self.alpha, upper=np.inf)
        check_fraction('length_km', self.length_km, upper=np.inf)

    @classmethod
    def from_system(cls, system):
        return cls(system.alpha_db_per_km, system.length_km, system.eta_encoder, system.eta_decoder,
                   system.eta_detector, system.p_dc, system.p_mis_z, system.p_mis_x, system.window_s,
                   system.dead_time_s)

    @property
    def eta_fiber(self):
        return fiber_transmittance(self.alpha, self.length_km)

    @property
    def eta_total(self):
        """End-to-end transmittance of fiber, decoder and detector."""
        return self.eta_fiber * self.eta_decoder * self.eta_detector

    def p_mis(self, basis):
        return self.p_mis_z if basis == 'Z' else self.p_mis_x


@dataclass(frozen=True)
class ClickErrorProbs:
    """Click and error probability per gated pulse."""
    p_click: float
    p_error: float

    @property
    def qber(self):
        return self.p_error / self.p_click if self.p_click > 0 else float('nan')


def photon_number_dist(n_bar, g2):
    """Photon-number distribution truncated at two photons.

    Parameters
    ----------
    n_bar : float
        Mean photon number per pulse.
    g2 : float
        Second-order autocorrelation at zero delay.

    Returns
    -------
    dist : PhotonNumberDist

    Raises
    ------
    ParameterError
        If the source is too bright for the truncation (negative p1 or p0).
    """
    if not n_bar > 0:
        raise ParameterError("must be positive, got {}".format(n_bar), key='n_bar')
    if not g2 >= 0:
        raise ParameterError("must be non-negative, got {}".format(g2), key='g2')
    p2 = n_bar**2 * g2 / 2
    p1 = n_bar - 2 * p2
    p0 = 1 - p1 - p2
    if p1 < 0 or p0 < 0:
        raise ParameterError(
            "source too bright for two-photon truncation (n_bar={}, g2={}: p0={}, p1={})".format(n_bar, g2, p0, p1),
            key='n_bar')
    return PhotonNumberDist(p0, p1, p2)


def thin(dist, eta):
    """Binomial loss with transmittance ``eta`` applied to every photon."""
    check_fraction('eta', eta)
    p2 = dist.p2 * eta**2
    p1 = dist.p1 * eta + 2 * dist.p2 * eta * (1 - eta)
    return PhotonNumberDist(1 - p1 - p2, p1, p2)


def g2_of(dist):
    """g2(0) estimator ``2 p2 / mean^2`` of a truncated distribution."""
    mean = dist.mean
    if mean == 0:
        return 0.0
    return 2 * dist.p2 / mean**2


def fiber_transmittance(alpha, length_km):
    """Transmittance ``10**(-alpha L / 10)`` of a fiber of ``length_km``."""
    if alpha < 0 or length_km < 0:
        raise ParameterError("alpha and length must be non-negative, got {} and {}".format(alpha, length_km),
                             key='fiber')
    return 10**(-alpha * length_km / 10)


def dark_count_probability(dark_rate_hz, tau_w):
    """Dark count probability per window from the system dark count rate."""
    return dark_rate_hz * tau_w


def click_error_probs(dist, eta_total, p_dc, p_mis, variant='printed'):
    """Click and error probabilities per gated pulse.

    Parameters
    ----------
    dist : PhotonNumberDist
    eta_total : float
        Transmittance applied to each photon of ``dist``.
    p_dc : float
        Dark count probability.
    p_mis : float
        Misalignment error probability of the basis.
    variant : {'printed', 'standard'}
        ``'printed'`` multiplies the whole click bracket of a non-vacuum pulse
        by ``p_mis``. ``'standard'`` takes dark clicks as erroneous with
        probability ``p_dc`` and photon clicks with probability ``p_mis``.

    Returns
    -------
    probs : ClickErrorProbs
    """
    p = dist.as_array()
    n = np.arange(3)
    no_photon = (1 - eta_total)**n
    bracket = 1 - (1 - p_dc) * no_photon
    p_click = float(np.sum(p * bracket))
    if variant == 'printed':
        p_error = float(p[0] * p_dc + np.sum(p[1:] * bracket[1:]) * p_mis)
    elif variant == 'standard':
        p_none = float(np.sum(p * no_photon))
        p_error = float(p_dc * p_none + p_mis * (1 - p_none))
    else:
        raise ParameterError("unknown variant {!r}".format(variant), key='pe_variant')
    return ClickErrorProbs(p_click, p_error)


def mean_photon_after_receiver(system):
    """Mean photon number with decoder transmission and detector efficiency folded in."""
    return system.mean_photon_after_receiver


def basis_probs(system, basis):
    """Click and error probability of ``basis`` ('Z' or 'X') for ``system``.

    Decoder and detector losses are folded into the photon-number
    distribution, so only the fiber transmittance enters the click model.
    """
    channel = ChannelDetParams.from_system(system)
    dist = photon_number_dist(system.mean_photon_after_receiver, system.g2)
    return click_error_probs(dist, channel.eta_fiber, system.p_dc, channel.p_mis(basis), system.pe_variant)
