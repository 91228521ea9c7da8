"""
Parameter bundles of the QKD link and the `Settings` loader that builds
them from a flat YAML (or ``key = value``) configuration document.

Every default below is the value of the experimental system-parameter table.
"""
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, fields

import yaml

from tbqkd.utils import ConfigError, ParameterError, check_fraction, check_positive

logger = logging.getLogger(__name__)

PE_VARIANTS = ('printed', 'standard')
EC_MODELS = ('shannon', 'binomial')


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the source, channel, decoder and detector.

    Parameters
    ----------
    f_rep_hz : float
        Excitation repetition rate.
    mean_photon_number : float
        Mean photon number per pulse before the quantum channel.
    g2 : float
        Second-order autocorrelation at zero delay of the source.
    eta_encoder, eta_decoder, eta_detector : float
        Transmission of encoder, decoder and detection efficiency. The encoder
        transmission is informational only.
    alpha_db_per_km : float
        Fiber attenuation.
    length_km : float
        Fiber length.
    dead_time_s, window_s : float
        Detector dead time and detection window width.
    p_dc : float
        Dark count probability per window.
    p_mis_z, p_mis_x : float
        Misalignment error probability per basis.
    lifetime_tau_s : float
        Quantum-dot radiative lifetime.
    delta_s, delta1_s : float
        Sagnac arm delay and AMZI delay (equal to the window width).
    v_pi : float
        Half-wave voltage of the phase modulator.
    channel_phase : float
        Global phase picked up between encoder and decoder, radians.
    pe_variant : str
        ``'printed'`` error-probability model, or ``'standard'`` where only the
        photon induced click share is scaled by the misalignment.
    """
    f_rep_hz: float = 75.947e6
    mean_photon_number: float = 2.89e-3
    g2: float = 0.0085
    eta_encoder: float = 0.1011
    eta_decoder: float = 0.417
    eta_detector: float = 0.74
    alpha_db_per_km: float = 0.1956
    length_km: float = 0.0
    dead_time_s: float = 35.8e-9
    window_s: float = 4.3e-9
    p_dc: float = 1.33e-6
    p_mis_z: float = 0.01
    p_mis_x: float = 0.02
    lifetime_tau_s: float = 1018e-12
    delta_s: float = 6.5e-9
    delta1_s: float = 4.3e-9
    v_pi: float = 3.2
    channel_phase: float = 0.0
    pe_variant: str = 'printed'

    def __post_init__(self):
        for name in ('f_rep_hz', 'window_s', 'lifetime_tau_s', 'delta_s', 'delta1_s', 'v_pi'):
            check_positive(name, getattr(self, name))
        check_fraction('mean_photon_number', self.mean_photon_number, open_lower=True)
        check_fraction('g2', self.g2)
        for name in ('eta_encoder', 'eta_decoder', 'eta_detector', 'p_mis_z', 'p_mis_x'):
            check_fraction(name, getattr(self, name))
        check_fraction('p_dc', self.p_dc, open_upper=True)
        check_fraction('alpha_db_per_km', self.alpha_db_per_km, upper=math.inf)
        check_fraction('length_km', self.length_km, upper=math.inf)
        check_fraction('dead_time_s', self.dead_time_s, upper=math.inf)
        if not math.isfinite(self.channel_phase):
            raise ParameterError("must be finite", key='channel_phase')
        if self.pe_variant not in PE_VARIANTS:
            raise ParameterError("must be one of {}, got {!r}".format(PE_VARIANTS, self.pe_variant), key='pe_variant')

    @property
    def mean_photon_after_receiver(self):
        """Mean photon number folded with decoder transmission and detector efficiency."""
        return self.mean_photon_number * self.eta_decoder * self.eta_detector

    def replace(self, **changes):
        """Return a copy with ``changes`` applied (and re-validated)."""
        params = asdict(self)
        params.update(changes)
        return SystemParams(**params)


@dataclass(frozen=True)
class SecurityParams:
    """Failure-probability budget of the finite-key analysis.

    ``eps_sec`` has no value in the experimental table; 1e-10 is a documented
    default. ``ec_model`` selects the error-correction leakage estimate and
    ``f_ec`` is the reconciliation inefficiency of the ``'shannon'`` model.
    """
    eps_pe: float = 2e-10 / 3
    eps_ec: float = 1e-10 / 6
    eps_pa: float = 1e-10 / 6
    eps_cor: float = 1e-15
    eps_sec: float = 1e-10
    ec_model: str = 'shannon'
    f_ec: float = 1.0

    def __post_init__(self):
        for name in ('eps_pe', 'eps_ec', 'eps_pa', 'eps_cor', 'eps_sec'):
            check_fraction(name, getattr(self, name), open_lower=True, open_upper=True)
        check_fraction('f_ec', self.f_ec, lower=1.0, upper=math.inf)
        if self.ec_model not in EC_MODELS:
            raise ParameterError("must be one of {}, got {!r}".format(EC_MODELS, self.ec_model), key='ec_model')

    @property
    def beta(self):
        """Chernoff exponent ``-ln(eps_pe)``."""
        return -math.log(self.eps_pe)

    def replace(self, **changes):
        params = asdict(self)
        params.update(changes)
        return SecurityParams(**params)


@dataclass(frozen=True)
class BasisSplit:
    """Basis choice probabilities of encoder and decoder."""
    p_z_alice: float = 11 / 16
    p_x_alice: float = 5 / 16
    p_basis_bob: float = 0.5

    def __post_init__(self):
        check_fraction('p_z_alice', self.p_z_alice)
        check_fraction('p_x_alice', self.p_x_alice)
        check_fraction('p_basis_bob', self.p_basis_bob, open_lower=True, open_upper=True)
        if abs(self.p_z_alice + self.p_x_alice - 1.0) > 1e-12:
            raise ParameterError("p_z_alice + p_x_alice must equal 1, got {}".format(self.p_z_alice +
                                                                                  self.p_x_alice),
                                 key='p_z_alice')

    def alice(self, basis):
        """Encoder probability of ``basis`` ('Z' or 'X')."""
        return self.p_z_alice if basis == 'Z' else self.p_x_alice


#: Config keys mapped to the bundle that owns them.
_OWNERS = {f.name: SystemParams for f in fields(SystemParams)}
_OWNERS.update({f.name: SecurityParams for f in fields(SecurityParams)})
_OWNERS.update({f.name: BasisSplit for f in fields(BasisSplit)})
_STRING_KEYS = ('pe_variant', 'ec_model')


class Settings(object):
    """
    Parses a flat configuration document into the parameter bundles used by
    the analysis and simulation drivers.

    Parameters
    ----------
    config : str or None
        Path to a configuration file, or the document itself. ``None`` (or an
        empty document) yields the table defaults.

    Examples
    --------
    >>> settings = Settings('alpha_db_per_km = 0.2')
    >>> settings.system.alpha_db_per_km
    0.2
    """

    def __init__(self, config=None):
        config = Settings.load_yaml(config)
        config = Settings.set_Parameters(config)
        self.config = config
        self.system = config['system']
        self.security = config['security']
        self.split = config['split']

    @staticmethod
    def load_yaml(yaml_config):
        """
        Reads the configuration and returns the key/value pairs as a dict.
        ``key = value`` lines are accepted alongside YAML ``key: value``.
        """
        if yaml_config is None:
            return {}
        text = yaml_config
        if os.path.isfile(yaml_config):
            try:
                with open(yaml_config, 'r') as stream:
                    text = stream.read()
            except IOError as e:
                logger.error("Unable to open file: {}".format(yaml_config))
                raise ConfigError('<file>', "unable to read {}: {}".format(yaml_config, e))
        text = Settings.normalize_lines(text)
        try:
            config = yaml.safe_load(text)
        except yaml.YAMLError as e:
            where = '<document>'
            if hasattr(e, 'problem_mark'):
                mark = e.problem_mark
                where = 'line {} column {}'.format(mark.line + 1, mark.column + 1)
            raise ConfigError(where, 'YAML parsing error')
        if config is None:
            return {}
        if not isinstance(config, dict):
            raise ConfigError('<document>', 'expected flat key/value pairs')
        return config

    @staticmethod
    def normalize_lines(text):
        """Rewrite ``key = value`` lines into YAML ``key: value`` form."""
        lines = []
        for line in text.splitlines():
            body = line.split('#', 1)[0]
            if '=' in body and ':' not in body.split('=', 1)[0]:
                key, value = body.split('=', 1)
                line = '{}: {}'.format(key.strip(), value.strip())
            lines.append(line)
        return '\n'.join(lines)

    @staticmethod
    def set_Values(config):
        """Reject unknown keys and coerce every value to its target type."""
        values = {}
        for key, raw in config.items():
            key = str(key)
            if key not in _OWNERS:
                raise ConfigError(key, 'unknown configuration key')
            if isinstance(raw, (dict, list)):
                raise ConfigError(key, 'expected a scalar value, got {!r}'.format(raw))
            if key in _STRING_KEYS:
                values[key] = str(raw).strip().lower()
                continue
            if isinstance(raw, bool):
                raise ConfigError(key, 'expected a number, got boolean {!r}'.format(raw))
            try:
                values[key] = float(raw)
            except (TypeError, ValueError):
                raise ConfigError(key, 'unparsable value {!r}'.format(raw))
        return values

    @staticmethod
    def set_Bundle(values, cls):
        """Build one parameter bundle from the keys it owns; missing keys take table defaults."""
        kwargs = {k: v for k, v in values.items() if _OWNERS[k] is cls}
        try:
            return cls(**kwargs)
        except ParameterError as e:
            raise ConfigError(e.key or cls.__name__, e.message)

    @staticmethod
    def set_Parameters(config):
        """
        MAIN execution function for validating the config and building the bundles.
        """
        try:
            values = Settings.set_Values(config)
            parsed = dict(values=values)
            parsed['system'] = Settings.set_Bundle(values, SystemParams)
            parsed['security'] = Settings.set_Bundle(values, SecurityParams)
            parsed['split'] = Settings.set_Bundle(values, BasisSplit)
        except ConfigError as e:
            logger.error(str(e))
            raise e
        return parsed

    def asDict(self):
        return dict(system=asdict(self.system), security=asdict(self.security), split=asdict(self.split))

    def asYAML(self):
        return yaml.safe_dump(self.asDict(), sort_keys=True)

    def asJSON(self, pprint=False):
        if pprint:
            return json.dumps(self.asDict(), sort_keys=True, indent=2)
        return json.dumps(self.asDict(), sort_keys=True)


def load_config(path=None):
    """Load the parameter bundle from ``path`` (or table defaults when ``None``).

    Returns
    -------
    system : SystemParams
    security : SecurityParams
    split : BasisSplit

    Raises
    ------
    ConfigError
        Naming the offending key for unknown keys, unparsable values or
        invariant violations.
    """
    if path is not None and not os.path.isfile(path):
        raise ConfigError('<file>', 'no such configuration file: {}'.format(path))
    settings = Settings(path)
    return settings.system, settings.security, settings.split
