import numpy as np
import pytest

from hexplore import ring
from hexplore import rlwe

DELTA = 2. ** 30


def encode(params, values, level):
    return ring.Poly.from_integers(params, np.asarray(values, dtype=np.int64) * int(DELTA), level)


def decoded(sk, ct):
    return np.rint(np.array([float(v) for v in rlwe.decrypt(sk, ct).to_bigint()]) / ct.scale).astype(np.int64)


@pytest.fixture(scope='module')
def message(small_params):
    return np.random.default_rng(0).integers(-8, 8, size=small_params.degree)


@pytest.mark.parametrize('use_public', [False, True])
def test_encrypt_decrypt(small_params, secret, message, use_public):
    sk, pk = secret
    key = pk if use_public else sk
    ct = rlwe.encrypt(key, encode(small_params, message, 2), DELTA, seed=1)

    assert ct.level == 2
    assert np.array_equal(decoded(sk, ct), message)
    assert rlwe.measure_noise(sk, ct, message * int(DELTA)) < 2 ** 12


def test_encrypt_rejects_foreign_ring(small_params, secret):
    sk, _ = secret
    other = small_params.subring(32)
    with pytest.raises(ring.ParameterError):
        rlwe.encrypt(sk, ring.Poly.zero(other, 0), DELTA, seed=0)


def test_add_checks_scale_and_domain(small_params, secret, message):
    sk, _ = secret
    ct = rlwe.encrypt(sk, encode(small_params, message, 1), DELTA, seed=2)

    assert np.array_equal(decoded(sk, rlwe.add(ct, ct)), 2 * message)
    assert np.array_equal(decoded(sk, rlwe.sub(ct, ct)), np.zeros_like(message))

    with pytest.raises(rlwe.ScaleMismatchError):
        rlwe.add(ct, ct.with_parts(ct.parts, scale=2 * DELTA))
    with pytest.raises(rlwe.DomainTagError):
        rlwe.add(ct, ct.with_parts(ct.parts, domain=rlwe.SLOTS_DOMAIN))


def test_zero_ciphertext_decrypts_to_zero(small_params, secret):
    sk, _ = secret
    zero = rlwe.Ciphertext.zero(small_params, 1, DELTA)

    assert all(v == 0 for v in rlwe.decrypt(sk, zero).to_bigint())


@pytest.mark.parametrize('gadget_kwargs', [{}, {'base2': 20}])
def test_key_switch(small_params, noise, secret, message, gadget_kwargs):
    sk, _ = secret
    target, _ = rlwe.keygen(small_params, noise, seed=11)
    gadget = rlwe.GadgetVector(small_params, **gadget_kwargs)
    swk = rlwe.switch_key_gen(sk, target, gadget, seed=12)

    ct = rlwe.encrypt(sk, encode(small_params, message, 2), DELTA, seed=3)
    u0, u1 = rlwe.switch_key(ct.parts[1].to_coeffs(), swk)
    switched = ct.with_parts([ct.parts[0] + u0, u1])

    assert np.array_equal(decoded(target, switched), message)


def test_gadget_digit_counts(small_params):
    assert rlwe.GadgetVector(small_params).digit_count() == 3
    assert rlwe.GadgetVector(small_params, primes_per_digit=2).digit_count() == 2
    assert rlwe.GadgetVector(small_params, primes_per_digit=2).digit_count(level=0) == 1
    with pytest.raises(ring.ParameterError):
        rlwe.GadgetVector(small_params, base2=10, primes_per_digit=2)


def test_tensor_and_relinearize(small_params, secret):
    sk, _ = secret
    gadget = rlwe.GadgetVector(small_params)
    rlk = rlwe.relin_key_gen(sk, gadget, seed=4)

    m0 = np.zeros(small_params.degree, dtype=np.int64)
    m1 = np.zeros(small_params.degree, dtype=np.int64)
    m0[:2] = [3, -2]
    m1[0] = 5
    ct0 = rlwe.encrypt(sk, ring.Poly.from_integers(small_params, m0 * 2 ** 20, 2), 2. ** 20, seed=5)
    ct1 = rlwe.encrypt(sk, ring.Poly.from_integers(small_params, m1 * 2 ** 20, 2), 2. ** 20, seed=6)

    product = rlwe.tensor(ct0, ct1)
    assert product.degree == 2
    relin = rlwe.relinearize(product, rlk)
    assert relin.degree == 1

    result = decoded(sk, relin)
    assert list(result[:3]) == [15, -10, 0]


def test_galois_automorphism(small_params, secret, message):
    sk, _ = secret
    gadget = rlwe.GadgetVector(small_params)
    keys = rlwe.galois_key_gen(sk, [5, 2 * small_params.degree - 1], gadget, seed=7)
    ct = rlwe.encrypt(sk, encode(small_params, message, 2), DELTA, seed=8)

    for g in (5, 2 * small_params.degree - 1):
        expected = ring.automorphism_apply(ring.Poly.from_integers(small_params, message, 2), g).to_bigint()
        assert list(decoded(sk, rlwe.apply_galois(ct, g, keys))) == expected

    with pytest.raises(rlwe.MissingKeyError):
        rlwe.apply_galois(ct, 3, keys)


def test_split_then_merge(small_params, noise, secret, message):
    sk, _ = secret
    small = small_params.subring(small_params.degree // 2)
    small_sk, _ = rlwe.keygen(small, noise, seed=9)
    gadget = rlwe.GadgetVector(small_params)

    split_key = rlwe.switch_key_gen(sk, small_sk.embed_square(small_params), gadget, seed=10)
    merge_keys = rlwe.gen_merge_keys([small_sk, sk], {small_params.degree: gadget}, seed=11)

    ct = rlwe.encrypt(sk, encode(small_params, message, 2), DELTA, seed=12)
    even, odd = rlwe.ring_split(ct, split_key)

    assert even.params == small
    assert np.array_equal(decoded(small_sk, even), message[0::2])
    assert np.array_equal(decoded(small_sk, odd), message[1::2])

    merged = rlwe.ring_merge(even, odd, merge_keys[small_params.degree])
    assert np.array_equal(decoded(sk, merged), message)


def test_merge_tree_layout(small_params, noise):
    degrees = [16, 32, 64]
    secrets = [rlwe.keygen(small_params.subring(d), noise if d > 16 else ring.NoiseParams(8), seed=d)[0]
               for d in degrees]
    gadgets = {d: rlwe.GadgetVector(small_params.subring(d)) for d in degrees[1:]}
    keys = rlwe.gen_merge_keys(secrets, gadgets, seed=13)

    inputs = [np.arange(16) + 100 * j for j in range(4)]
    cts = [rlwe.encrypt(secrets[0], encode(secrets[0].params, m, 1), DELTA, seed=j) for j, m in enumerate(inputs)]
    merged = rlwe.merge_tree(cts, keys)

    result = decoded(secrets[-1], merged)
    for j, m in enumerate(inputs):
        assert np.array_equal(result[j::4], m)

    with pytest.raises(rlwe.MissingKeyError):
        rlwe.merge_tree(cts, {})
    with pytest.raises(ValueError):
        rlwe.merge_tree(cts[:3], keys)


def test_key_size_bytes_nests(small_params, secret):
    sk, _ = secret
    swk = rlwe.relin_key_gen(sk, rlwe.GadgetVector(small_params), seed=0)

    assert rlwe.key_size_bytes({1: swk, 2: [swk, swk]}) == 3 * swk.size_bytes()
    assert swk.size_bytes() == 2 * 3 * 4 * small_params.degree * 8
