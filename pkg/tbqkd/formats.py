"""
Output formats: the level-aware log formatter, the fixed CSV column
schemas and the JSON run report.
"""
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from tbqkd import reporters

HISTOGRAM_COLUMNS = ('bit_index', 'symbol', 'w1', 'w2', 'w3', 'pulses')


######################
#  REPORTER FORMATS  #
######################
class LoggerFormatter(logging.Formatter):
    """
    Formats the output of the `logging.Logger` object per level. Adds the
    custom level 'REPORT', used for result lines, which is printed without
    any decoration.

    Examples
    --------
    >>> from tbqkd import reporters
    >>> from tbqkd.formats import LoggerFormatter
    >>> import logging, sys
    >>> logger = logging.getLogger(__name__)
    >>> handler = logging.StreamHandler(stream=sys.stderr)
    >>> handler.setFormatter(LoggerFormatter())
    >>> logger.addHandler(handler)
    >>> logger.report('E_X crosses 11% at 93.6 km')
        E_X crosses 11% at 93.6 km
    >>> logger.info('Distance sweep over 201 points')
        INFO: Distance sweep over 201 points
    """

    dbg_fmt = "%(levelname)s: [%(module)s.%(funcName)s] %(message)s"
    info_fmt = "%(levelname)s: %(message)s"
    rep_fmt = "%(message)s"

    def __init__(self):
        super().__init__(fmt="%(levelname)s: %(msg)s", datefmt="%H:%M:%S", style='%')
        reporters.addLoggingLevel('REPORT', logging.WARNING - 5)

    def format(self, record):
        format_orig = self._style._fmt

        if record.levelno in (logging.DEBUG, logging.ERROR, logging.CRITICAL):
            self._style._fmt = LoggerFormatter.dbg_fmt
        elif record.levelno in (logging.INFO, logging.WARNING):
            self._style._fmt = LoggerFormatter.info_fmt
        elif record.levelno == logging.REPORT:
            self._style._fmt = LoggerFormatter.rep_fmt

        result = logging.Formatter.format(self, record)
        self._style._fmt = format_orig
        return result


def format_value(value):
    """Deterministic text of a CSV cell; floats use the shortest round-trip form."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def histogram_rows(hist, seq):
    """CSV rows of a histogram set; bit indices count from 1 as in the pulse sequence."""
    rows = []
    for i, symbol in enumerate(seq.symbols):
        w1, w2, w3 = (int(c) for c in hist.counts[i])
        rows.append((i + 1, symbol, w1, w2, w3, int(hist.pulses_per_bit[i])))
    return rows


def _plain(value):
    """Convert numpy scalars, arrays and tuples into JSON native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class RunReport:
    """Structured result document of one command."""
    command: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    status: str = 'ok'
    seed: int = None
    version: str = ''

    def as_dict(self):
        return _plain(asdict(self))

    def to_json(self, pprint=True):
        if pprint:
            return json.dumps(self.as_dict(), sort_keys=True, indent=2)
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))
