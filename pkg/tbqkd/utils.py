"""
Provides a host of utility functions and the exception types shared by
the tbqkd modules.

Authors: tbqkd developers
"""

import hashlib
import json
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

#: Pulses simulated per Monte Carlo chunk. Fixed so that the chunk layout, and
#: therefore every random substream, depends only on ``n_pulses``.
CHUNK_PULSES = 1 << 20


class ParameterError(ValueError):
    """Raised when a physical or numerical parameter is outside its domain.

    Parameters
    ----------
    message : str
        Description of the violated constraint.
    key : str, optional
        Name of the offending parameter, prefixed to the message.
    """

    def __init__(self, message, key=None):
        self.key = key
        self.message = message
        if key:
            message = "{}: {}".format(key, message)
        super().__init__(message)


class ConfigError(ParameterError):
    """Raised when a configuration document cannot be turned into parameters.

    Parameters
    ----------
    key : str
        The configuration key that caused the failure.
    message : str
        Human readable description of the problem.
    """

    def __init__(self, key, message):
        super().__init__(message, key=key)


class UsageError(Exception):
    """Raised by the command line front end when a precondition on the
    arguments is violated."""


def check_fraction(name, value, lower=0.0, upper=1.0, open_lower=False, open_upper=False):
    """Validate that ``value`` lies in the interval between ``lower`` and ``upper``.

    Parameters
    ----------
    name : str
        Parameter name used in the error message.
    value : float
    lower, upper : float
        Interval bounds.
    open_lower, open_upper : bool, default=False
        Exclude the corresponding bound.

    Returns
    -------
    value : float

    Raises
    ------
    ParameterError
        If the value is not finite or outside the interval.
    """
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError("must be finite, got {}".format(value), key=name)
    low_ok = value > lower if open_lower else value >= lower
    high_ok = value < upper if open_upper else value <= upper
    if not (low_ok and high_ok):
        lb = '(' if open_lower else '['
        ub = ')' if open_upper else ']'
        raise ParameterError("must lie in {}{}, {}{}, got {}".format(lb, lower, upper, ub, value), key=name)
    return value


def check_positive(name, value):
    """Validate that ``value`` is a finite, strictly positive number."""
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError("must be positive, got {}".format(value), key=name)
    return value


def chunk_layout(n_pulses, chunk_pulses=CHUNK_PULSES):
    """Split a block of pulses into fixed size chunks.

    Parameters
    ----------
    n_pulses : int
        Total number of pulses in the block.
    chunk_pulses : int, default=CHUNK_PULSES
        Pulses per chunk. The last chunk holds the remainder.

    Returns
    -------
    chunks : list of tuple
        ``(chunk_index, first_pulse, n)`` for each chunk, in pulse order.
    """
    n_pulses = int(n_pulses)
    chunks = []
    for index, start in enumerate(range(0, n_pulses, chunk_pulses)):
        chunks.append((index, start, min(chunk_pulses, n_pulses - start)))
    return chunks


def substream(seed, *key):
    """Return the random generator for the substream addressed by ``key``.

    The generator depends only on ``seed`` and ``key``, never on which worker
    evaluates it.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, index):
    """Deterministic 64-bit seed for the ``index``-th child of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(0x5EED, int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stable_hash(payload):
    """Short SHA-256 digest of a JSON-serialisable payload (keys sorted)."""
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


def monotone_grid(name, values):
    """Return ``values`` as a float array, checking it is non-empty and strictly increasing."""
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("grid must be a non-empty 1-D sequence", key=name)
    if not np.all(np.isfinite(grid)):
        raise ParameterError("grid contains non-finite values", key=name)
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ParameterError("grid must be strictly increasing", key=name)
    return grid
