import numpy as np
import pytest

from hexplore import ckks
from hexplore import pfe
from hexplore import rlwe
from hexplore import serialization
from hexplore import threshold

SCALE = 2. ** 30


@pytest.fixture(scope='module')
def ct(secret):
    sk, _ = secret
    return ckks.encrypt_slots(sk, np.arange(8) / 4., SCALE, level=1, seed=5)


def test_ciphertext_round_trip(secret, ct):
    sk, _ = secret
    data = serialization.dumps(ct)
    assert data[:4] == serialization.MAGIC
    back = serialization.loads(data, expected='ciphertext')

    assert back.params == ct.params
    assert back.level == ct.level
    assert back.scale == ct.scale
    assert back.domain == ct.domain
    assert all(a == b for a, b in zip(back.parts, ct.parts))
    np.testing.assert_allclose(ckks.decrypt_slots(sk, back, 8).real, np.arange(8) / 4., atol=1e-6)


def test_ciphertext_size_is_exact(small_params, ct):
    assert len(serialization.dumps(ct)) == serialization.ciphertext_size(small_params, ct.level)

    zero = rlwe.Ciphertext.zero(small_params, 2, SCALE)
    assert len(serialization.dumps(zero)) == serialization.ciphertext_size(small_params, 2)


def test_keys_round_trip(secret, small_params):
    sk, pk = secret
    back = serialization.loads(serialization.dumps(sk), expected='secret_key')
    assert back.key_id == sk.key_id
    np.testing.assert_array_equal(back.values, sk.values)

    back_pk = serialization.loads(serialization.dumps(pk), expected='public_key')
    assert back_pk.b == pk.b and back_pk.a == pk.a

    gadget = rlwe.GadgetVector(small_params)
    keys = ckks.EvaluationKeys.generate(sk, gadget, [1, 2], seed=7, conjugation=True)
    back_keys = serialization.loads(serialization.dumps(keys), expected='evaluation_keys')
    assert sorted(back_keys.galois) == sorted(keys.galois)
    np.testing.assert_array_equal(back_keys.relin.key0, keys.relin.key0)
    np.testing.assert_array_equal(back_keys.relin.key1, keys.relin.key1)
    assert back_keys.relin.gadget.digit_count(2) == gadget.digit_count(2)


def test_merge_keys_round_trip(small_params, noise):
    sk = rlwe.keygen(small_params, noise, seed=3)[0]
    swk = rlwe.switch_key_gen(sk, sk, rlwe.GadgetVector(small_params), seed=4)
    data = serialization.dumps({64: swk})
    back = serialization.loads(data, expected='merge_keys')
    assert list(back) == [64]
    np.testing.assert_array_equal(back[64].key0, swk.key0)


def test_test_vector_round_trip(small_params, noise):
    spec = pfe.FunctionSpec(0., 1., np.arange(64) % 5, name='mod5')
    sk = rlwe.keygen(small_params, noise, seed=11)[0]
    tv = pfe.build_test_vector(spec, sk, SCALE, seed=12)
    back = serialization.loads(serialization.dumps(tv), expected='test_vector')
    assert (back.lower, back.upper, back.name, back.n) == (0., 1., 'mod5', 64)
    assert all(a == b for a, b in zip(back.ct.parts, tv.ct.parts))


def test_chain_round_trip():
    params = threshold.ThresholdParams(5, 8, [15, 15, 15])
    chain = threshold.build_chain(params)
    back = serialization.loads(serialization.dumps(chain), expected='chain')
    assert back.params.to_dict() == params.to_dict()
    np.testing.assert_allclose(back.errors, chain.errors)
    x = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(back(x), chain(x))

    single = threshold.ThresholdParams(2, 2, [15])
    assert serialization.loads(serialization.dumps(single)).degrees == [15]


def test_ring_round_trip(small_params):
    assert serialization.loads(serialization.dumps(small_params), expected='ring') == small_params


def test_file_round_trip(tmp_path, ct):
    path = str(tmp_path / 'ct.bin')
    serialization.save(path, ct)
    assert serialization.load(path, expected='ciphertext').scale == ct.scale


def test_bad_magic(ct):
    data = b'XXXX' + serialization.dumps(ct)[4:]
    with pytest.raises(serialization.SerializationError, match='magic'):
        serialization.loads(data)


def test_unsupported_version(ct):
    data = bytearray(serialization.dumps(ct))
    data[4] = serialization.VERSION + 1
    with pytest.raises(serialization.SerializationError, match='version'):
        serialization.loads(bytes(data))


def test_unknown_kind(ct):
    data = bytearray(serialization.dumps(ct))
    data[6] = 250
    with pytest.raises(serialization.SerializationError, match='kind'):
        serialization.loads(bytes(data))


def test_kind_mismatch(ct):
    with pytest.raises(serialization.SerializationError, match='Expected a secret_key'):
        serialization.loads(serialization.dumps(ct), expected='secret_key')


def test_truncated_and_trailing(ct):
    data = serialization.dumps(ct)
    with pytest.raises(serialization.SerializationError, match='Truncated'):
        serialization.loads(data[:-1])
    with pytest.raises(serialization.SerializationError, match='Truncated'):
        serialization.loads(data[:5])
    with pytest.raises(serialization.SerializationError, match='trailing'):
        serialization.loads(data + b'\0')


def test_unserializable_objects():
    with pytest.raises(serialization.SerializationError):
        serialization.dumps(object())
    with pytest.raises(ValueError):
        serialization.register('matrix', object, None, None)
