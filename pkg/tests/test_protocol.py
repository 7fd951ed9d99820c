import numpy as np
import pytest

from hexplore import ckks
from hexplore import metrics
from hexplore import pfe
from hexplore import profiles
from hexplore import protocol
from hexplore import repack
from hexplore import ring
from hexplore import rlwe
from hexplore import serialization

# Cells of 1/8 on [0, 2): 0.5 -> 1, 1.0 -> 2, 1.5 -> 3, 0.1 -> 0, 1.9 -> 3.
TABLE = np.arange(16) // 4
VALUES = np.array([[1.5, 0.1],
                   [0.5, 1.0],
                   [0.1, 0.5],
                   [1.9, 1.5]])
SCORES = [3, 3, 1, 6]


@pytest.fixture(scope='module')
def tiny():
    return profiles.get_profile('tiny')


@pytest.fixture(scope='module')
def specs():
    return [pfe.FunctionSpec(0., 2., TABLE, name='f{}'.format(j)) for j in range(2)]


@pytest.fixture(scope='module')
def db():
    return protocol.Database(VALUES, ['age', 'dose'], {'age': (0., 2.), 'dose': (0., 2.)})


def test_database_checks():
    with pytest.raises(ValueError):
        protocol.Database(np.zeros((0, 2)))
    with pytest.raises(ValueError, match='names'):
        protocol.Database(np.zeros((2, 2)), ['a'])
    with pytest.raises(ValueError, match='unknown'):
        protocol.Database(np.zeros((2, 2)), bounds={'z': (0, 1)})

    with pytest.raises(pfe.DomainError) as info:
        protocol.Database([[0., 1.], [0., np.nan]])
    assert (info.value.row, info.value.col) == (1, 1)

    with pytest.raises(pfe.DomainError) as info:
        protocol.Database([[0., 1.], [2., 0.5]], bounds={'x0': (0., 2.)})
    assert (info.value.row, info.value.col) == (1, 0)


def test_database_partitions(db):
    top, bottom = db.split_rows(2)
    assert (top.rows, bottom.rows) == (2, 2)
    np.testing.assert_array_equal(bottom.values, VALUES[2:])

    dose = db.take_columns([1])
    assert dose.names == ['dose']
    assert dose.bounds == {'dose': (0., 2.)}
    np.testing.assert_array_equal(dose.values[:, 0], VALUES[:, 1])


def test_selection_matrix():
    values = np.arange(6.).reshape(2, 3)
    np.testing.assert_array_equal(protocol.SelectionMatrix.identity(3).apply(values), values)

    select = protocol.SelectionMatrix.select(3, [2, 0])
    assert select.shape == (3, 2)
    np.testing.assert_array_equal(select.apply(values), values[:, [2, 0]])

    with pytest.raises(ValueError, match='expects 2'):
        protocol.SelectionMatrix(np.ones((2, 1))).apply(values)
    with pytest.raises(ValueError):
        protocol.SelectionMatrix(np.ones((2, 0)))
    with pytest.raises(ValueError):
        protocol.SelectionMatrix([[np.inf]])


@pytest.mark.parametrize('rows, expected', [(1, 1), (256, 1), (257, 2), (1024, 4)])
def test_half_bts_count(rows, expected):
    assert protocol.half_bts_count(rows, 256) == expected


def test_plaintext_explore(db, specs):
    selection = protocol.SelectionMatrix.identity(2)
    bit, count, scores = protocol.plaintext_explore(db.values, selection, specs, 3, 3)
    np.testing.assert_array_equal(scores, SCORES)
    assert (bit, count) == (1, 3)

    assert protocol.plaintext_explore(db.values, selection, specs, 3, 4)[:2] == (0, 3)
    assert protocol.plaintext_explore(db.values, selection, specs, 4, 1)[:2] == (1, 1)
    assert protocol.plaintext_explore(db.values, selection, specs, 6, 2)[:2] == (0, 1)

    only_first = protocol.SelectionMatrix.select(2, [0])
    assert protocol.plaintext_explore(db.values, only_first, specs[:1], 3, 3)[:2] == (0, 2)


def test_plan_thresholds(tiny, specs):
    chain1, chain2 = protocol.plan_thresholds(specs, 3, 2, tiny, rows=4)
    assert chain1.params.alpha == 4
    assert chain2.params.alpha == 4
    assert chain1.achieved_beta >= 12
    assert chain1.levels_needed + chain2.levels_needed <= protocol.output_level(tiny)


@pytest.mark.parametrize('t0, t1, match', [(0.5, 1, 't0'), (7, 1, 't0'), (3, 0, 't1'), (3, 5, 't1')])
def test_plan_thresholds_ranges(tiny, specs, t0, t1, match):
    with pytest.raises(ring.ParameterError, match=match):
        protocol.plan_thresholds(specs, t0, t1, tiny, rows=4)


def test_plan_thresholds_rejects(tiny, specs):
    with pytest.raises(ring.ParameterError, match='bootstrapping'):
        protocol.plan_thresholds(specs, 3, 1, profiles.get_profile('set1-only'), rows=4)
    with pytest.raises(ring.ParameterError, match='At least one'):
        protocol.plan_thresholds([], 3, 1, tiny, rows=4)
    with pytest.raises(ring.ParameterError, match='n = 16'):
        protocol.plan_thresholds([pfe.FunctionSpec(0., 2., np.arange(32))], 3, 1, tiny, rows=4)
    with pytest.raises(ring.ParameterError, match='non-negative'):
        protocol.plan_thresholds([pfe.FunctionSpec(0., 2., TABLE - 1)], 1, 1, tiny, rows=4)
    with pytest.raises(ring.ParameterError, match='row'):
        protocol.plan_thresholds(specs, 3, 1, tiny, rows=0)

    with pytest.raises(ring.LevelError):
        protocol.plan_thresholds(specs, 3, 1, tiny.with_overrides(prime_bits=[45] * 30), rows=4)


def test_key_set_check(small_params):
    gadget = rlwe.GadgetVector(small_params)
    keys = protocol.EvalKeySet(repack.RepackKeySet(rlwe.GaloisKeySet(), gadget), {},
                               ckks.EvaluationKeys(galois=rlwe.GaloisKeySet()))
    assert keys.manifest() == {'galois': [], 'repack': [], 'merge': [], 'relin': False}
    keys.check({'galois': [], 'relin': False})
    with pytest.raises(rlwe.MissingKeyError, match='galois 5.*relinearization'):
        keys.check({'galois': [5], 'relin': True})


def test_partition_merge_errors(small_params):
    ct = rlwe.Ciphertext.zero(small_params, 0, 2. ** 30)
    with pytest.raises(protocol.PartitionError):
        protocol.merge_horizontal([])
    with pytest.raises(protocol.PartitionError):
        protocol.merge_vertical([])
    with pytest.raises(protocol.PartitionError, match='align'):
        protocol.merge_vertical([protocol.PackedScores([ct], 4), protocol.PackedScores([ct], 3)])
    with pytest.raises(ring.LevelError):
        protocol.merge_horizontal([protocol.PackedScores([ct], 4),
                                   protocol.PackedScores([rlwe.Ciphertext.zero(small_params, 1, 2. ** 30)], 4)])
    with pytest.raises(rlwe.ScaleMismatchError):
        protocol.merge_horizontal([protocol.PackedScores([ct], 4),
                                   protocol.PackedScores([rlwe.Ciphertext.zero(small_params, 0, 2. ** 31)], 4)])

    merged = protocol.merge_horizontal([protocol.PackedScores([ct], 4), protocol.PackedScores([ct, ct], 20)])
    assert (len(merged), merged.rows) == (3, 24)


def test_analytic_sizes():
    sizes = protocol.analytic_sizes(profiles.get_profile('full-analytic'), functions=16)
    assert set(sizes) == {'Ring Packing', 'Ring Merging', 'Bootstrapping', 'RLWE(f_i)', 'RLWE(t_i)', 'Total'}
    assert sizes['Total'] == sum(v for k, v in sizes.items() if k != 'Total')
    # 16 test vectors of two 2^12-coefficient polynomials over one prime.
    assert sizes['RLWE(f_i)'] == 16 * 2 * 2 ** 12 * 8

    set1 = protocol.analytic_sizes(profiles.get_profile('set1-only'), functions=4)
    assert set1['Bootstrapping'] == 0
    assert set1['Ring Merging'] == 0
    assert set1['RLWE(t_i)'] == 0


@pytest.fixture(scope='module')
def scientist_keys(tiny):
    return protocol.scientist_keygen(tiny, seed=101)


def run_exploration(scientist_keys, tiny, db, specs, t0, t1, threads=1):
    sk, small_sk, keys = scientist_keys
    query = protocol.make_query(sk, small_sk, keys.manifest(), specs, t0, t1, tiny, seed=202, rows=db.rows)
    ct = protocol.explore(db, protocol.SelectionMatrix.identity(2), query, keys, threads=threads)
    return protocol.decrypt_result(sk, ct)


@pytest.mark.slow
@pytest.mark.parametrize('t0, t1', [(3, 3), (3, 4), (4, 1), (6, 1), (6, 2), (2, 4)])
def test_explore_matches_plaintext(scientist_keys, tiny, db, specs, t0, t1):
    expected, _, _ = protocol.plaintext_explore(db.values, protocol.SelectionMatrix.identity(2), specs, t0, t1)
    bit, value = run_exploration(scientist_keys, tiny, db, specs, t0, t1)
    assert bit == expected
    assert abs(value - expected) < 0.25


@pytest.mark.slow
def test_explore_threads(scientist_keys, tiny, db, specs):
    assert run_exploration(scientist_keys, tiny, db, specs, 3, 3, threads=2)[0] == 1


@pytest.mark.slow
def test_query_is_deterministic(scientist_keys, tiny, specs):
    sk, small_sk, keys = scientist_keys
    queries = [protocol.make_query(sk, small_sk, keys.manifest(), specs, 3, 2, tiny, seed=5, rows=4)
               for _ in range(2)]
    assert serialization.dumps(queries[0]) == serialization.dumps(queries[1])


@pytest.mark.slow
def test_query_rows_must_match(scientist_keys, tiny, db, specs):
    sk, small_sk, keys = scientist_keys
    query = protocol.make_query(sk, small_sk, keys.manifest(), specs, 3, 2, tiny, seed=5, rows=8)
    with pytest.raises(protocol.StageError) as info:
        protocol.explore(db, protocol.SelectionMatrix.identity(2), query, keys)
    assert info.value.stage == 'Database Owner Generation'


@pytest.mark.slow
def test_key_sizes_match_analytic(scientist_keys, tiny):
    actual = scientist_keys[2].sizes()
    analytic = protocol.analytic_sizes(tiny, functions=2)
    assert analytic['Ring Packing'] == actual['Ring Packing']
    assert analytic['Ring Merging'] == actual['Ring Merging']
    assert analytic['Bootstrapping'] >= actual['Bootstrapping']


@pytest.fixture(scope='module')
def scientist(tiny, specs):
    return protocol.Scientist(tiny, specs, t0=3, t1=3, rows=4, seed=303, timer=metrics.StageTimer()).setup()


def owners_for(scientist, parts):
    return [protocol.DatabaseOwner(part, selection).receive(scientist.query_bytes(), scientist.key_bytes())
            for part, selection in parts]


@pytest.mark.slow
def test_scientist_and_owner_exchange_bytes(scientist, db):
    timer = metrics.StageTimer()
    owner = protocol.DatabaseOwner(db, protocol.SelectionMatrix.identity(2), timer=timer)
    result = owner.receive(scientist.query_bytes(), scientist.key_bytes()).explore()

    assert len(result) == serialization.ciphertext_size(scientist.sk.params, serialization.loads(result).level)
    assert scientist.decrypt(result)[0] == scientist.expected(db, owner.selection)[0] == 1
    assert set(timer.totals) == set(metrics.STAGES) - {'Scientist Generation'}
    assert 'Scientist Generation' in scientist.timer.totals


@pytest.mark.slow
def test_horizontal_partition(scientist, db):
    identity = protocol.SelectionMatrix.identity(2)
    owners = owners_for(scientist, [(part, identity) for part in db.split_rows(2)])
    partials = [owner.pack() for owner in owners]
    result = owners[0].finish(partials, mode='horizontal')
    assert scientist.decrypt(result)[0] == 1


@pytest.mark.slow
def test_vertical_partition(scientist, db):
    identity = protocol.SelectionMatrix.identity(1)
    owners = owners_for(scientist, [(db.take_columns([j]), identity) for j in range(2)])
    partials = [owner.pack(columns=[j]) for j, owner in enumerate(owners)]
    result = owners[1].finish(partials, mode='vertical')
    assert scientist.decrypt(result)[0] == 1

    with pytest.raises(protocol.StageError, match='diagonal'):
        owners[0].finish(partials, mode='diagonal')


def test_owner_needs_query(db):
    owner = protocol.DatabaseOwner(db, protocol.SelectionMatrix.identity(2))
    with pytest.raises(RuntimeError):
        owner.explore()
