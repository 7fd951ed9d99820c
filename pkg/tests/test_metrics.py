import math

import pytest

from hexplore import metrics


def test_stage_timer():
    timer = metrics.StageTimer()
    with timer.time('Half-BTS'):
        pass
    timer.accumulate('Half-BTS', 1.5)
    timer.accumulate('Private Threshold 2', 0.5)

    assert timer.calls == {'Half-BTS': 2, 'Private Threshold 2': 1}
    assert timer.totals['Half-BTS'] >= 1.5
    assert list(timer.result()) == ['Half-BTS', 'Private Threshold 2']

    timer.reset_state()
    assert timer.result() == {}


def test_precision():
    precision = metrics.Precision()
    assert precision.result() == math.inf

    precision.accumulate([1., 2.], [1., 2. + 2 ** -10])
    precision.accumulate([0.], [2 ** -12])
    assert precision.result() == pytest.approx(10.)
    assert precision.count == 3
    assert str(precision) == '10.00 bits'


def test_handler():
    handler = metrics.Handler(timings=metrics.StageTimer(), precision=metrics.Precision())
    handler.accumulate(timings=('Half-BTS', 2.), precision=([1., 3.], [1., 3. + 2 ** -8]))
    results = handler.result()
    assert results['timings'] == {'Half-BTS': 2.}
    assert results['precision'] == pytest.approx(8.)
    assert 'precision' in handler.results_as_json_dict()

    handler.add_metrics(collections='owner', precision=metrics.Precision())
    assert list(handler['owner']) == ['precision']
    with pytest.raises(ValueError):
        handler['missing']


def test_bench_report():
    timings = {'Scientist Generation': 4., 'Private Function & Packing': 2., 'Half-BTS': 6.,
               'Private Threshold 1': 2., 'Private Threshold 2': 1.}
    report = metrics.BenchReport(timings, rows=1000, key_sizes={'repack': 1024}, counts={'Half-BTS': 4})

    assert report.total == 15.
    assert report.amortized == pytest.approx(0.01)
    assert [stage for stage, _, _ in report.stage_rows()] == [
        'Scientist Generation', 'Private Function & Packing', 'Half-BTS', 'Private Threshold 1', 'Private Threshold 2']

    table = report.as_table()
    assert table.splitlines()[0].startswith('Operation')
    assert '10.000 ms' in table.splitlines()[-1]

    text = report.as_key_values()
    assert 'size.repack=1024' in text
    assert 'count.half_bts=4' in text
    rows, parsed, amortized = metrics.BenchReport.parse_key_values(text)
    assert rows == 1000
    assert parsed['private_function_packing'] == 2.
    assert parsed['half_bts'] == 6.
    assert amortized == pytest.approx(10.)


def test_bench_report_tensorboard():
    class Writer(object):
        def __init__(self):
            self.scalars = {}

        def add_scalar(self, tag, value, global_step=None):
            self.scalars[tag] = value

    writer = Writer()
    metrics.BenchReport({'Half-BTS': 3.}, rows=3).write_tensorboard(writer)
    assert writer.scalars == {'time/half_bts': 3., 'time/amortized_ms_per_row': pytest.approx(1e3)}
