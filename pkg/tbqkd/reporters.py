"""
Logging setup and the writers that put sweep, histogram, stability and
run-report results on disk or on standard output.
"""
import csv
import io
import logging
import sys

from tbqkd import formats
from tbqkd.sweeps import STABILITY_COLUMNS


def addLoggingLevel(levelName, levelNum, methodName=None):
    """
    Adds a new logging level to the `logging` module and the currently
    configured logging class.

    `levelName` becomes an attribute of the `logging` module with the value
    `levelNum`. `methodName` becomes a convenience method for both `logging`
    itself and the class returned by `logging.getLoggerClass()`. If
    `methodName` is not specified, `levelName.lower()` is used. Adding a level
    that already exists with the same number is a no-op.

    Parameters
    ----------
    levelName : str
        The new level name to be added to the `logging` module.
    levelNum : int
        The level number indicated for the logging module.
    methodName : str, default=None
        The method to call on the logging module for the new level name.

    Example
    -------
    >>> addLoggingLevel('REPORT', logging.WARNING - 5)
    >>> logging.getLogger(__name__).report('that worked')
    """
    if not methodName:
        methodName = levelName.lower()

    if getattr(logging, levelName, None) == levelNum and hasattr(logging.getLoggerClass(), methodName):
        return
    if hasattr(logging, levelName):
        raise AttributeError('{} already defined in logging module'.format(levelName))

    def logForLevel(self, message, *args, **kwargs):
        if self.isEnabledFor(levelNum):
            self._log(levelNum, message, args, **kwargs)

    def logToRoot(message, *args, **kwargs):
        logging.log(levelNum, message, *args, **kwargs)

    logging.addLevelName(levelNum, levelName)
    setattr(logging, levelName, levelNum)
    setattr(logging.getLoggerClass(), methodName, logForLevel)
    setattr(logging, methodName, logToRoot)


def init_logger(logger, level=logging.WARNING, stream=True, outfname=None):
    """Initialize the Logger module with the given level and optional log file.

    Parameters
    ----------
    logger : logging.Logger
        Usually the root logger.
    level : int or str
        DEBUG, INFO, REPORT, WARNING, ERROR or CRITICAL.
    stream : bool, default=True
        Stream log records to ``sys.stderr``; standard output is reserved for
        results.
    outfname : str, optional
        Path prefix of a ``.log`` file that receives the same records.

    Returns
    -------
    logger : logging.Logger
        The logger with the handlers attached.
    """
    fmt = formats.LoggerFormatter()
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())

    if stream:
        stderr_handler = logging.StreamHandler(stream=sys.stderr)
        stderr_handler.setFormatter(fmt)
        logger.addHandler(stderr_handler)

    if outfname:
        fh = logging.FileHandler(outfname + '.log')
        fh.setFormatter(fmt)
        logger.addHandler(fh)

    logger.addHandler(logging.NullHandler())
    logger.setLevel(level)
    return logger


def csv_text(columns, rows):
    """Render rows as CSV with a header line and ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([formats.format_value(v) for v in row])
    return buffer.getvalue()


def write_text(text, out=None):
    """Write ``text`` to the file ``out`` or to standard output."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, 'w', newline='') as handle:
        handle.write(text)
    logging.getLogger(__name__).info('Wrote {}'.format(out))


def write_csv(columns, rows, out=None):
    write_text(csv_text(columns, rows), out)


def write_sweep(result, out=None):
    """Write a `SweepResult` as CSV in its fixed column order."""
    write_csv(result.columns, result.rows, out)


def write_histogram(hist, seq, out=None):
    """Write a histogram set as ``bit_index,symbol,w1,w2,w3,pulses``."""
    write_csv(formats.HISTOGRAM_COLUMNS, formats.histogram_rows(hist, seq), out)


def write_stability(result, out=None):
    """Write the per-block QBER series of a stability run."""
    write_csv(STABILITY_COLUMNS, result.rows, out)


def write_report(report, out=None):
    """Write a `RunReport` as JSON."""
    write_text(report.to_json() + '\n', out)
