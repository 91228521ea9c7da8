import numpy as np
import pytest

from tbqkd import utils
from tbqkd.utils import ConfigError, ParameterError


class TestValidation(object):
    def test_check_fraction(self):
        assert utils.check_fraction('p', 0.3) == 0.3
        with pytest.raises(ParameterError) as e:
            utils.check_fraction('p', 1.2)
        assert e.value.key == 'p'
        assert str(e.value).startswith('p: ')

    def test_open_bounds(self):
        with pytest.raises(ParameterError):
            utils.check_fraction('eps', 0.0, open_lower=True)
        with pytest.raises(ParameterError):
            utils.check_fraction('eps', 1.0, open_upper=True)

    def test_nan_rejected(self):
        with pytest.raises(ParameterError):
            utils.check_positive('f_rep_hz', float('nan'))

    def test_config_error_is_parameter_error(self):
        error = ConfigError('g2', 'must lie in [0, 1]')
        assert isinstance(error, ParameterError)
        assert error.key == 'g2'

    def test_monotone_grid(self):
        np.testing.assert_array_equal(utils.monotone_grid('x', [1, 2, 3]), [1.0, 2.0, 3.0])
        with pytest.raises(ParameterError):
            utils.monotone_grid('x', [1, 1])
        with pytest.raises(ParameterError):
            utils.monotone_grid('x', [])


class TestSeeding(object):
    def test_chunk_layout(self):
        assert utils.chunk_layout(10, 4) == [(0, 0, 4), (1, 4, 4), (2, 8, 2)]
        assert sum(n for _, _, n in utils.chunk_layout(3 * utils.CHUNK_PULSES + 5)) == 3 * utils.CHUNK_PULSES + 5

    def test_substream_reproducible(self):
        a = utils.substream(42, 3).random(5)
        b = utils.substream(42, 3).random(5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, utils.substream(42, 4).random(5))

    def test_derive_seed(self):
        assert utils.derive_seed(7, 0) == utils.derive_seed(7, 0)
        assert utils.derive_seed(7, 0) != utils.derive_seed(7, 1)
        assert 0 <= utils.derive_seed(7, 0) < 2**64

    def test_stable_hash(self):
        assert utils.stable_hash({'b': 1, 'a': 2}) == utils.stable_hash({'a': 2, 'b': 1})
        assert len(utils.stable_hash({})) == 16
