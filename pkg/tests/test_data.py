import numpy as np
import pytest

from hexplore import data
from hexplore import protocol


def test_gen_dataset(tmp_path):
    path = str(tmp_path / 'db.csv')
    db = data.gen_dataset(50, 3, seed=4, path=path)
    assert (db.rows, db.attributes) == (50, 3)
    assert db.names == ['x0', 'x1', 'x2']
    assert np.all(db.values >= 0.) and np.all(db.values < 2.)

    np.testing.assert_array_equal(data.gen_dataset(50, 3, seed=4).values, db.values)
    assert not np.array_equal(data.gen_dataset(50, 3, seed=5).values, db.values)

    loaded = data.load_database(path, db.bounds)
    np.testing.assert_array_equal(loaded.values, db.values)

    with pytest.raises(ValueError):
        data.gen_dataset(0, 3, seed=0)


@pytest.mark.parametrize('text, row, col', [
    ('a,b\n1,2\n3\n', 3, 2),
    ('a,b\n1,2\n3,x\n', 3, 2),
    ('a,b\n1,2\n0.5,2.5\n', 3, 2),
])
def test_malformed_database(tmp_path, text, row, col):
    path = tmp_path / 'bad.csv'
    path.write_text(text)
    with pytest.raises(data.DataFormatError) as info:
        data.load_database(str(path), {'a': (0., 1.5), 'b': (0., 2.5)})
    assert (info.value.row, info.value.col) == (row, col)
    assert 'bad.csv' in str(info.value)


def test_empty_database(tmp_path):
    path = tmp_path / 'empty.csv'
    path.write_text('')
    with pytest.raises(data.DataFormatError, match='empty'):
        data.load_database(str(path))
    path.write_text('a,b\n')
    with pytest.raises(data.DataFormatError, match='no rows'):
        data.load_database(str(path))


def test_sidecar(tmp_path):
    path = tmp_path / 'db.sidecar'
    path.write_text('# exploration fixture\n'
                    'profile=toy\n'
                    'n=64\n'
                    'threshold1.beta=10  # coarser\n'
                    't0=80\n'
                    'bounds.age=0,120\n')
    config, bounds = data.load_sidecar(str(path))
    assert config == {'profile': 'toy', 'n': 64, 'threshold1': {'beta': 10}, 't0': 80}
    assert bounds == {'age': (0., 120.)}

    profile = data.profile_from_config(config)
    assert profile.name == 'toy'
    assert profile.small_degree == 64
    assert profile.threshold1 == {'beta': 10, 'degrees': [15, 15, 15, 15]}


@pytest.mark.parametrize('line', ['just words', 'bounds.age=3'])
def test_malformed_sidecar(tmp_path, line):
    path = tmp_path / 'bad.sidecar'
    path.write_text('profile=tiny\n' + line + '\n')
    with pytest.raises(data.DataFormatError) as info:
        data.load_sidecar(str(path))
    assert info.value.row == 2


def test_profile_from_config_default():
    assert data.profile_from_config({}).name == 'tiny'
    assert data.profile_from_config({}, default='toy').name == 'toy'
    assert data.profile_from_config({'delta_bits': 40}).scale_bits == 40


def test_functions_round_trip(tmp_path):
    specs = data.random_functions(3, 16, seed=1, levels=4)
    assert [spec.name for spec in specs] == ['f0', 'f1', 'f2']
    assert all(set(np.unique(spec.table)) <= {0, 1, 2, 3} for spec in specs)

    path = str(tmp_path / 'functions.json')
    data.save_functions(specs, path)
    loaded = data.load_functions(path)
    for spec, back in zip(specs, loaded):
        assert (back.name, back.lower, back.upper) == (spec.name, spec.lower, spec.upper)
        np.testing.assert_array_equal(back.table, spec.table)


def test_load_selection(tmp_path):
    assert data.load_selection(None, 3).shape == (3, 3)

    path = tmp_path / 'selection.csv'
    path.write_text('1,0\n0,0\n0,1\n')
    selection = data.load_selection(str(path))
    assert isinstance(selection, protocol.SelectionMatrix)
    np.testing.assert_array_equal(selection.matrix, [[1, 0], [0, 0], [0, 1]])

    path.write_text('1,x\n')
    with pytest.raises(data.DataFormatError):
        data.load_selection(str(path))
