"""
Linear-algebraic model of the time-bin encoder (circulator, Sagnac loop and
AMZI1) and decoder (AMZI2).

Amplitudes keep their global phases so the state of every stage can be
compared term by term; probability level functions are phase blind.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from tbqkd.utils import ParameterError, check_positive

logger = logging.getLogger(__name__)

#: 50:50 beam splitter, reflection picks up a phase of ``i``.
BS_MATRIX = np.array([[1j, 1], [1, 1j]], dtype=complex) / math.sqrt(2)

#: Encoder phases of the logical states, in units of pi: 0, V_pi/2, V_pi.
NOMINAL_PHASES = {'Z0': 0.0, 'X0': math.pi / 2, 'Z1': math.pi}

#: Decoder phase used while X0 is sent; W2 is dark for an ideal X0.
THETA2_X0 = -math.pi / 2


@dataclass(frozen=True)
class PhaseSetting:
    """Encoder phase ``theta1`` and decoder phase-shifter phase ``theta2`` (radians)."""
    theta1: float
    theta2: float = THETA2_X0

    def __post_init__(self):
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2)):
            raise ParameterError("phases must be finite", key='theta')

    @classmethod
    def for_state(cls, label, theta2=THETA2_X0):
        return cls(NOMINAL_PHASES[label], theta2)

    @classmethod
    def from_volts(cls, v, v_pi, theta2=THETA2_X0):
        return cls(volts_to_phase(v, v_pi), theta2)


@dataclass(frozen=True)
class TimeBinQubit:
    """Amplitudes over the early and late time bins."""
    amp_e: complex
    amp_l: complex

    @property
    def norm2(self):
        return abs(self.amp_e)**2 + abs(self.amp_l)**2

    def as_array(self):
        return np.array([self.amp_e, self.amp_l], dtype=complex)

    def scaled(self, factor):
        return TimeBinQubit(self.amp_e * factor, self.amp_l * factor)


@dataclass(frozen=True)
class JointState:
    """Amplitudes over time bin (e, l) times decoder path (S, L)."""
    amp_eS: complex
    amp_eL: complex
    amp_lS: complex
    amp_lL: complex

    @property
    def norm2(self):
        return sum(abs(a)**2 for a in self.as_array())

    def as_array(self):
        return np.array([self.amp_eS, self.amp_eL, self.amp_lS, self.amp_lL], dtype=complex)


@dataclass(frozen=True)
class WindowProbs:
    """Per-photon probabilities of a click in W1, W2, W3, and of leaving through unused ports."""
    p_w1: float
    p_w2: float
    p_w3: float

    @property
    def p_discard(self):
        return 1.0 - self.p_w1 - self.p_w2 - self.p_w3

    @property
    def total(self):
        return self.p_w1 + self.p_w2 + self.p_w3

    def as_array(self):
        return np.array([self.p_w1, self.p_w2, self.p_w3])

    def normalized(self):
        """Window distribution conditioned on the photon reaching the detector."""
        return self.as_array() / self.total


@dataclass(frozen=True)
class TimingParams:
    """Repetition rate, Sagnac delay, AMZI delay (window width) and QD lifetime, SI units."""
    f_rep: float = 75.947e6
    delta: float = 6.5e-9
    delta1: float = 4.3e-9
    lifetime_tau: float = 1018e-12

    def __post_init__(self):
        for name in ('f_rep', 'delta', 'delta1', 'lifetime_tau'):
            check_positive(name, getattr(self, name))

    @classmethod
    def from_system(cls, system):
        return cls(system.f_rep_hz, system.delta_s, system.delta1_s, system.lifetime_tau_s)

    @property
    def period(self):
        return 1.0 / self.f_rep

    def validate(self, rtol=0.05):
        """Check the Sagnac delay is half a period and three windows fit in a period.

        Raises
        ------
        ParameterError
            If either timing constraint is violated by more than ``rtol``.
        """
        half_period = 0.5 * self.period
        if abs(self.delta - half_period) > rtol * half_period:
            raise ParameterError("{:.4g} s is not half the pulse period {:.4g} s".format(self.delta, half_period),
                                 key='delta')
        third_period = self.period / 3.0
        if self.delta1 > (1.0 + rtol) * third_period:
            raise ParameterError("{:.4g} s exceeds a third of the pulse period {:.4g} s".format(
                self.delta1, third_period), key='delta1')
        return self


def volts_to_phase(v, v_pi):
    """Phase imprinted by the modulator at drive voltage ``v``.

    Parameters
    ----------
    v : float
        Drive voltage, volts.
    v_pi : float
        Half-wave voltage, volts.

    Returns
    -------
    phase : float
        ``pi * v / v_pi`` radians.
    """
    if not v_pi > 0:
        raise ParameterError("must be positive, got {}".format(v_pi), key='v_pi')
    return math.pi * v / v_pi


def phase_shifter(theta2):
    """Phase shifter acting on the short arm of AMZI2."""
    return np.array([[np.exp(1j * theta2), 0], [0, 1]], dtype=complex)


def sni_state(theta1):
    """Path state (short, long) leaving the Sagnac loop for encoder phase ``theta1``."""
    prefactor = 1j * np.exp(0.5j * theta1)
    return prefactor * np.array([-math.sin(theta1 / 2), math.cos(theta1 / 2)], dtype=complex)


def encode(theta1):
    """Time-bin state from the used output port of BS2.

    The long path becomes the late bin, the short path the early bin and
    picks up the reflection phase ``i``. One port carries half the norm.

    Parameters
    ----------
    theta1 : float
        Encoder phase, radians.

    Returns
    -------
    qubit : TimeBinQubit
    """
    if not math.isfinite(theta1):
        raise ParameterError("must be finite", key='theta1')
    amp_s, amp_l = sni_state(theta1)
    return TimeBinQubit(complex(1j * amp_s / math.sqrt(2)), complex(amp_l / math.sqrt(2)))


def decode(qubit, theta2, channel_phase=0.0):
    """Propagate a time-bin qubit through AMZI2 to the used BS4 output port.

    Parameters
    ----------
    qubit : TimeBinQubit
    theta2 : float
        Decoder phase-shifter phase, radians.
    channel_phase : float, default=0.0
        Global phase accumulated in the quantum channel.

    Returns
    -------
    state : JointState
        Amplitudes over |e,S>, |e,L>, |l,S>, |l,L>; norm is half the input norm.
    """
    if qubit.norm2 > 1.0 + 1e-12:
        raise ParameterError("qubit norm^2 exceeds 1: {}".format(qubit.norm2), key='qubit')
    time_bins = qubit.as_array() * np.exp(1j * channel_phase)
    # photon enters AMZI2 in a single input port
    path = phase_shifter(theta2) @ BS_MATRIX @ np.array([1, 0], dtype=complex)
    # used BS4 port: S arm is reflected
    path = path * np.array([1j, 1]) / math.sqrt(2)
    amps = np.kron(time_bins, path)
    return JointState(*(complex(a) for a in amps))


def window_probabilities(theta1, theta2, channel_phase=0.0):
    """Detection probabilities in the three time windows.

    W1 holds the early photon through the short arm, W3 the late photon
    through the long arm. In W2 the early-long and late-short amplitudes
    interfere coherently.

    Returns
    -------
    probs : WindowProbs
    """
    state = decode(encode(theta1), theta2, channel_phase)
    return WindowProbs(
        abs(state.amp_eS)**2,
        abs(state.amp_eL + state.amp_lS)**2,
        abs(state.amp_lL)**2,
    )


def window_probabilities_closed_form(theta1, theta2):
    """Closed forms of `window_probabilities`."""
    return WindowProbs(
        math.sin(theta1 / 2)**2 / 8,
        (1 + math.sin(theta1) * math.sin(theta2)) / 8,
        math.cos(theta1 / 2)**2 / 8,
    )


def state_label(theta1, atol=1e-9):
    """Logical state label of a nominal encoder phase, or ``None``."""
    for label, phase in NOMINAL_PHASES.items():
        if abs(theta1 - phase) <= atol:
            return label
    return None
