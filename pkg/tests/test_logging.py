import logging
import os

import pytest

from hexplore import _logging


@pytest.fixture
def logger(tmp_path):
    logger = _logging.create_logger(str(tmp_path), command='evaluate', level=logging.DEBUG)
    yield logger
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


def _read(tmp_path, suffix):
    log_dir = tmp_path / 'log'
    (name,) = [f for f in os.listdir(str(log_dir)) if f.endswith(suffix)]
    assert name.startswith('evaluate-')
    return (log_dir / name).read_text()


def test_log_stage_nests():
    assert _logging.current_stage() == _logging.NO_STAGE
    with _logging.log_stage('Packing'):
        with _logging.log_stage('Half-BTS'):
            assert _logging.current_stage() == 'Half-BTS'
        assert _logging.current_stage() == 'Packing'
    assert _logging.current_stage() == _logging.NO_STAGE


def test_records_carry_stage(logger, tmp_path):
    with _logging.log_stage('Private Threshold 1'):
        logger.info('indicators summed')
    logger.error('decoding failed')

    log = _read(tmp_path, '.log')
    assert '[Private Threshold 1]' in log and 'indicators summed' in log
    assert '[-]' in log
    errors = _read(tmp_path, '.err')
    assert 'decoding failed' in errors and 'indicators summed' not in errors


def test_progress_goes_to_its_own_file(logger, tmp_path):
    bar = _logging.ProgressBar(3, stage='repack', unit='batch', disable=True)
    for step in bar:
        bar.report(step, inputs=16)

    progress = _read(tmp_path, '.progress')
    assert '[repack] batch 3/3 inputs=16' in progress
    assert 'batch 1/3' not in _read(tmp_path, '.log')


def test_log_paths():
    paths = _logging.log_paths('runs/a', 'keygen', stamp='stamp')
    assert paths['log'] == os.path.join('runs/a', 'log', 'keygen-stamp.log')
    assert paths['errors'].endswith('keygen-stamp.err')
    assert paths['progress'].endswith('keygen-stamp.progress')
