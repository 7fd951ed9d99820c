import contextlib
import logging
import os
import sys
import threading
import time

from tqdm import tqdm


LOGGER_NAME = 'hexplore'
NO_STAGE = '-'

_current = threading.local()


def current_stage():
    r"""Name of the protocol stage entered last on this thread, :data:`NO_STAGE` outside any stage."""
    stages = getattr(_current, 'stages', None)
    return stages[-1] if stages else NO_STAGE


@contextlib.contextmanager
def log_stage(name):
    r"""Tags every record logged on this thread with `name` until the block exits; stages nest."""
    if not hasattr(_current, 'stages'):
        _current.stages = []
    _current.stages.append(name)
    try:
        yield name
    finally:
        _current.stages.pop()


class StageFilter(logging.Filter):
    r"""Adds the `stage` attribute used by the formatters; never drops a record."""
    def filter(self, record):
        if not hasattr(record, 'stage'):
            record.stage = current_stage()
        return True


class ProgressFilter(logging.Filter):
    r"""Keeps only progress records (`progress=True`) or only the others (`progress=False`)."""
    def __init__(self, progress):
        super(ProgressFilter, self).__init__()
        self.progress = progress

    def filter(self, record):
        return getattr(record, 'progress', False) == self.progress


class LevelBelowFilter(logging.Filter):
    r"""Keeps records strictly below `level`."""
    def __init__(self, level):
        super(LevelBelowFilter, self).__init__()
        self.level = level

    def filter(self, record):
        return record.levelno < self.level


def _attach(logger, handler, level, formatter, *filters):
    handler.setLevel(level)
    handler.setFormatter(formatter)
    handler.addFilter(StageFilter())
    for f in filters:
        handler.addFilter(f)
    logger.addHandler(handler)
    return handler


def log_paths(run_dir, command, stamp=None):
    r"""Paths of the log files written by one `command` run under `run_dir/log`.

    Returns
    -------
    dict[str, str]
        Keys `log`, `errors` and `progress`.
    """
    stamp = time.strftime('%y_%m_%d-%H_%M_%S') if stamp is None else stamp
    base = os.path.join(run_dir, 'log', '{}-{}'.format(command, stamp))
    return {'log': base + '.log', 'errors': base + '.err', 'progress': base + '.progress'}


def create_logger(run_dir, command='hexplore', level=logging.INFO):
    r"""Configures the `hexplore` logger for one command run.

    Records below ERROR go to stdout, ERROR and above to stderr. Every non-progress record is also written to the `.log`
    file, errors to the `.err` file, and progress bar updates only to the `.progress` file. Each line carries the
    protocol stage it was logged in.

    Parameters
    ----------
    run_dir : str
    command : str
        Sub-command name, prefixed to the log file names.
    level : int
        Level of the stdout stream; the `.log` file always records DEBUG.

    Returns
    -------
    logging.Logger
    """
    paths = log_paths(run_dir, command)
    os.makedirs(os.path.dirname(paths['log']), exist_ok=True)

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter('{asctime} {levelname:<8s} [{stage}] {module}:{lineno} {message}', style='{')
    terse = logging.Formatter('{asctime} [{stage}] {message}', style='{')

    _attach(logger, logging.StreamHandler(sys.stdout), level, formatter,
            ProgressFilter(False), LevelBelowFilter(logging.ERROR))
    _attach(logger, logging.StreamHandler(sys.stderr), logging.ERROR, formatter, ProgressFilter(False))
    _attach(logger, logging.FileHandler(paths['log']), logging.DEBUG, formatter, ProgressFilter(False))
    _attach(logger, logging.FileHandler(paths['errors']), logging.ERROR, formatter, ProgressFilter(False))
    _attach(logger, logging.FileHandler(paths['progress']), logging.DEBUG, terse, ProgressFilter(True))

    logger.debug('Logging {} to {}'.format(command, os.path.dirname(paths['log'])))
    return logger


class ProgressBar(tqdm):
    r"""tqdm bar over `total` work items of a protocol stage; :meth:`report` also logs to the `.progress` file.

    Parameters
    ----------
    total : int
    stage : str
    unit : str
        What one step is, e.g. `batch` or `ciphertext`.
    disable : bool
    """
    def __init__(self, total, stage='', unit='batch', disable=False):
        super(ProgressBar, self).__init__(range(total), desc=stage, unit=unit, disable=disable, leave=False)
        self.stage = stage
        self.unit_name = unit
        self.logger = logging.getLogger(LOGGER_NAME)

    def report(self, step, **values):
        r"""Shows `values` next to the bar and logs them as a progress record of this stage."""
        self.set_postfix(values, refresh=False)
        message = '{} {}/{}'.format(self.unit_name, step + 1, self.total)
        if values:
            message += ' ' + ' '.join('{}={}'.format(k, v) for k, v in values.items())
        self.logger.debug(message, extra={'progress': True, 'stage': self.stage})
