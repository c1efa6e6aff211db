import logging
import pytest
from qr_graphons.loggers import configure_logging, log_elapsed


def test_log_elapsed(caplog):
    caplog.set_level(logging.INFO, logger='qr_graphons')
    with log_elapsed(logging.getLogger('qr_graphons.cli'), 'count'):
        pass

    record = caplog.records[-1]
    assert record.levelno == logging.INFO
    assert record.command == 'count'
    assert record.seconds >= 0.0
    assert record.getMessage().startswith('count finished in ')


def test_log_elapsed_on_error(caplog):
    caplog.set_level(logging.INFO, logger='qr_graphons')
    with pytest.raises(ValueError):
        with log_elapsed(logging.getLogger('qr_graphons.cli'), 'qr'):
            raise ValueError()
    assert caplog.records[-1].command == 'qr'


def test_invalid_log_format():
    with pytest.raises(RuntimeError):
        configure_logging(format='xml')
