import logging

import numpy as np
import pytest

from tbqkd import formats, reporters
from tbqkd.formats import RunReport
from tbqkd.montecarlo import EncodingSequence, HistogramSet


@pytest.fixture(scope='session')
def hist():
    counts = np.arange(48).reshape(16, 3)
    return HistogramSet(counts, np.full(16, 1000))


class TestLogging(object):
    def test_report_level(self):
        reporters.addLoggingLevel('REPORT', logging.WARNING - 5)
        assert logging.REPORT == logging.WARNING - 5
        assert hasattr(logging.getLogger(__name__), 'report')

    def test_conflicting_level(self):
        reporters.addLoggingLevel('REPORT', logging.WARNING - 5)
        with pytest.raises(AttributeError):
            reporters.addLoggingLevel('REPORT', logging.INFO - 1)

    def test_formatter(self):
        fmt = formats.LoggerFormatter()
        report = logging.LogRecord('tbqkd', logging.REPORT, __file__, 1, 'E_X 0.11', None, None)
        info = logging.LogRecord('tbqkd', logging.INFO, __file__, 1, 'sweep', None, None)
        assert fmt.format(report) == 'E_X 0.11'
        assert fmt.format(info) == 'INFO: sweep'

    def test_init_logger_file(self, tmpdir):
        logger = logging.getLogger('tbqkd.test_init_logger')
        outfname = str(tmpdir.join('run'))
        reporters.init_logger(logger, level='INFO', stream=False, outfname=outfname)
        logger.info('hello')
        for handler in logger.handlers:
            handler.flush()
        assert 'INFO: hello' in tmpdir.join('run.log').read()
        assert logger.level == logging.INFO


class TestWriters(object):
    def test_format_value(self):
        assert formats.format_value(0.1) == '0.1'
        assert formats.format_value(np.float64(2.5e-7)) == '2.5e-07'
        assert formats.format_value(np.int64(3)) == '3'
        assert formats.format_value(True) == 'True'
        assert formats.format_value('positive') == 'positive'

    def test_histogram_csv(self, hist, tmpdir):
        out = str(tmpdir.join('hist.csv'))
        reporters.write_histogram(hist, EncodingSequence(), out)
        lines = open(out).read().splitlines()
        assert lines[0] == 'bit_index,symbol,w1,w2,w3,pulses'
        assert lines[1] == '1,X0,0,1,2,1000'
        assert len(lines) == 17

    def test_csv_to_stdout(self, capsys):
        reporters.write_csv(('a', 'b'), [(1, 0.5)])
        assert capsys.readouterr().out == 'a,b\n1,0.5\n'

    def test_csv_is_reproducible(self, hist):
        rows = formats.histogram_rows(hist, EncodingSequence())
        assert reporters.csv_text(formats.HISTOGRAM_COLUMNS, rows) == reporters.csv_text(
            formats.HISTOGRAM_COLUMNS, rows)


class TestRunReport(object):
    def test_round_trip(self):
        report = RunReport('keyrate', inputs={'n_sum': 4.56e9, 'e_z': None},
                           outputs={'skb_per_pulse': np.float64(2.18e-4), 'flags': ()}, status='positive',
                           version='0.1.0')
        restored = RunReport.from_json(report.to_json())
        assert restored.as_dict() == report.as_dict()
        assert restored.outputs['skb_per_pulse'] == 2.18e-4

    def test_sorted_keys(self):
        text = RunReport('validate', outputs={'b': 1, 'a': 2}).to_json(pprint=False)
        assert text.index('"a"') < text.index('"b"')
