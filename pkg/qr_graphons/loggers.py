import logging
import os
import sys
import time
import atexit
from contextlib import contextmanager
from logging.handlers import QueueHandler, QueueListener
from queue import Queue
from typing import Iterator, Optional

APP_LOG_LEVEL = os.environ.get('APP_LOG_LEVEL', 'warning')
APP_LOG_FORMAT = os.environ.get('APP_LOG_FORMAT', 'text')
APP_ASSOCIATED_LOGGERS = os.environ.get('APP_ASSOCIATED_LOGGERS', '').split()
APP_ASSOCIATED_LOGGERS.append('__main__')

LOG_FORMATS = ('text', 'json')
_TEXT_FORMAT = '%(asctime)s:%(levelname)s:%(name)s:%(message)s'
_JSON_FORMAT = '%(asctime)s %(levelname)s %(name)s %(message)s'

_listener: Optional[QueueListener] = None


def _excepthook(exc_type, exc_value, traceback):  # pragma: nocover
    logging.error("Uncaught exception occured",
                  exc_info=(exc_type, exc_value, traceback))


def _make_formatter(format: str) -> logging.Formatter:
    if format == 'text':
        return logging.Formatter(_TEXT_FORMAT, datefmt="%Y-%m-%d %H:%M:%S%z")
    if format == 'json':
        # Fields passed with `extra=` (command, seconds) become JSON keys.
        from pythonjsonlogger import jsonlogger
        return jsonlogger.JsonFormatter(
            _JSON_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S%z")
    raise RuntimeError(f'invalid log format: {format}')


def _start_listener(handler: logging.Handler) -> QueueHandler:
    """Replace the running listener thread (if any) with a new one."""
    global _listener

    if _listener is not None:
        _listener.stop()
        atexit.unregister(_listener.stop)

    log_queue: Queue[logging.LogRecord] = Queue()
    _listener = QueueListener(log_queue, handler)
    atexit.register(_listener.stop)
    _listener.start()
    return QueueHandler(log_queue)


def configure_logging(
        level: str = APP_LOG_LEVEL,
        format: str = APP_LOG_FORMAT,
        associated_loggers: list[str] = APP_ASSOCIATED_LOGGERS,
) -> None:
    """Send log records to the standard error, through a queue drained by
    a background thread.

    The standard output is reserved for reports. May be called more than
    once; every call replaces the previous configuration.
    """
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(_make_formatter(format))

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.WARNING)
    for h in list(root_logger.handlers):
        root_logger.removeHandler(h)
    root_logger.addHandler(_start_listener(console_handler))

    app_logger = logging.getLogger('qr_graphons')
    app_logger.setLevel(level.upper())
    app_level = app_logger.getEffectiveLevel()
    for qualname in associated_loggers:
        logging.getLogger(qualname).setLevel(app_level)

    # Third party libraries must not be more verbose than the app.
    if app_level > root_logger.getEffectiveLevel():
        root_logger.setLevel(app_level)

    sys.excepthook = _excepthook


@contextmanager
def log_elapsed(logger: logging.Logger, command: str) -> Iterator[None]:
    """Log the wall time spent in a block, at info level."""
    started = time.perf_counter()
    try:
        yield
    finally:
        seconds = time.perf_counter() - started
        logger.info('%s finished in %.3f s', command, seconds,
                    extra={'command': command, 'seconds': round(seconds, 6)})
