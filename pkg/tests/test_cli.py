import json
import os

import pytest

from hexplore import cli
from hexplore import data
from hexplore import metrics
from hexplore import protocol


@pytest.fixture
def common(tmp_path):
    return ['--experiments_base', str(tmp_path / 'runs'), '--key_dir', str(tmp_path / 'keys'), '--no-progress']


def test_gen_dataset(tmp_path, common):
    output = str(tmp_path / 'db.csv')
    assert cli.main(['gen-dataset', '--rows', '10', '--attributes', '3', '--output', output] + common) == 0

    db = data.load_database(output)
    assert (db.rows, db.attributes) == (10, 3)

    with open(str(tmp_path / 'runs' / 'gen-dataset' / 'config.json')) as f:
        config = json.load(f)
    assert config['rows'] == 10
    assert config['resolved_profile']['name'] == 'tiny'


def test_sizes(capsys, common):
    assert cli.main(['sizes', '--profile', 'full-analytic', '--num_functions', '4'] + common) == 0
    out = capsys.readouterr().out
    for name in ('Ring Packing', 'Ring Merging', 'Bootstrapping', 'Total'):
        assert name in out


def build(argv):
    args = cli.ExplorationBuilder.get_args(argv)
    return cli.ExplorationBuilder(args.pop('command'), **args)


def test_sidecar_selects_profile(tmp_path, common):
    sidecar = tmp_path / 'db.sidecar'
    sidecar.write_text('profile=toy\n')
    builder = build(['sizes', '--sidecar', str(sidecar)] + common)
    assert builder.profile.name == 'toy'

    overrides = ['--profile', 'tiny', '--profile_overrides', "{'scale_bits': 40}"]
    builder = build(['sizes', '--sidecar', str(sidecar)] + overrides + common)
    assert builder.profile.name == 'tiny'
    assert builder.profile.scale_bits == 40


@pytest.mark.parametrize('argv, message', [
    (['query-gen', '--rows', '4'], 'needs --t0'),
    (['query-gen', '--rows', '0', '--t0', '1', '--t1', '1'], '--rows'),
    (['sizes', '--threads', '0'], '--threads'),
    (['sizes', '--profile_overrides', "{'colour': 1}"], 'colour'),
    (['evaluate', '--database', 'missing.csv'], 'missing.csv'),
    (['decrypt', '--result', 'missing.ct'], 'secret.key'),
])
def test_errors_exit_with_one(capsys, common, argv, message):
    assert cli.main(argv + common) == 1
    err = capsys.readouterr().err
    assert err.startswith('hexplore {}: error:'.format(argv[0]))
    assert message in err


def test_unknown_profile_is_a_usage_error(common):
    with pytest.raises(SystemExit):
        cli.main(['sizes', '--profile', 'huge'] + common)


@pytest.mark.slow
def test_scientist_and_owner_commands(tmp_path, capsys, common):
    database = str(tmp_path / 'db.csv')
    functions = str(tmp_path / 'functions.json')
    query = str(tmp_path / 'query.bin')
    result = str(tmp_path / 'result.ct')

    db = data.gen_dataset(4, 2, seed=3, path=database)
    specs = data.random_functions(2, 16, seed=4, levels=4)
    data.save_functions(specs, functions)
    expected, _, _ = protocol.plaintext_explore(db.values, protocol.SelectionMatrix.identity(2), specs, 2, 2)

    assert cli.main(['keygen', '--seed', '9'] + common) == 0
    assert os.path.exists(str(tmp_path / 'keys' / cli.KEYS_FILE))
    assert cli.main(['query-gen', '--seed', '9', '--rows', '4', '--functions', functions, '--t0', '2', '--t1', '2',
                     '--output', query] + common) == 0
    assert cli.main(['evaluate', '--database', database, '--query', query, '--output', result] + common) == 0
    capsys.readouterr()

    assert cli.main(['decrypt', '--result', result] + common) == 0
    lines = capsys.readouterr().out.splitlines()
    assert 'result={}'.format(expected) in lines


@pytest.mark.slow
def test_bench(tmp_path, capsys, common):
    assert cli.main(['bench', '--rows', '4', '--attributes', '2', '--num_functions', '2', '--function_levels', '4',
                     '--no-tensorboard'] + common) == 0
    out = capsys.readouterr().out
    assert 'Half-BTS' in out

    with open(str(tmp_path / 'runs' / 'bench' / 'bench_4.txt')) as f:
        rows, timings, amortized = metrics.BenchReport.parse_key_values(f.read())
    assert rows == 4
    assert 'half_bts' in timings
    assert amortized > 0
