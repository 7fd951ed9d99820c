import mpmath
import numpy as np
import pytest

from hexplore import ckks
from hexplore import ring
from hexplore import rlwe
from hexplore import utils

SCALE = 2. ** 40


@pytest.fixture(scope='module')
def params():
    return ring.RingParams.from_bit_sizes(64, [50] + [40] * 6, [50])


@pytest.fixture(scope='module')
def sk(params, noise):
    return rlwe.keygen(params, noise, seed=21)[0]


@pytest.fixture(scope='module')
def keys(params, sk):
    gadget = rlwe.GadgetVector(params)
    return ckks.EvaluationKeys.generate(sk, gadget, rotations=[1, 2, 4, 8, 16], seed=22, conjugation=True)


@pytest.fixture(scope='module')
def values():
    rng = np.random.default_rng(23)
    return rng.uniform(-1, 1, size=32) + 1j * rng.uniform(-1, 1, size=32)


def encrypt(sk, values, level=None, seed=0):
    level = sk.params.max_level if level is None else level
    return ckks.encrypt_slots(sk, values, SCALE, level, seed)


def test_encoder_round_trip():
    tables = ckks.encoder_tables(16)
    z = np.random.default_rng(0).normal(size=16) + 1j

    assert np.allclose(tables.forward(tables.inverse(z)), z)
    assert np.allclose(tables.matrix() @ tables.inverse_matrix(), np.eye(16))
    assert np.allclose(tables.forward(z), tables.matrix() @ z)


def test_encoder_matches_extended_precision_matrix():
    n = 16
    with mpmath.workdps(40):
        exact = [[complex(mpmath.expjpi(mpmath.mpf(pow(5, j, 4 * n) * k) / (2 * n))) for k in range(n)]
                 for j in range(n)]
    tables = ckks.encoder_tables(n)

    np.testing.assert_allclose(tables.matrix(), exact, atol=1e-13)
    np.testing.assert_allclose(np.column_stack([tables.forward(e) for e in np.eye(n)]), exact, atol=1e-12)


def test_special_fourier_factors_compose_to_transform():
    n = 16
    tables = ckks.encoder_tables(n)
    w = np.random.default_rng(1).normal(size=n) + 1j * np.random.default_rng(2).normal(size=n)
    rev = utils.bit_reverse_permutation(n)

    forward = np.linalg.multi_dot(ckks.special_fourier_factors(n, inverse=False)[::-1])
    assert np.allclose(forward @ w[rev], tables.forward(w))

    inverse = ckks.grouped_factors(ckks.special_fourier_factors(n, inverse=True), 1)[0]
    assert np.allclose((inverse @ tables.forward(w))[rev], w)


def test_grouped_factors_rejects_too_many_groups():
    with pytest.raises(ValueError):
        ckks.grouped_factors(ckks.special_fourier_factors(4), 3)


def test_encode_slots_round_trip(params, values):
    m = ckks.encode_slots(params, values, SCALE, 2)

    assert np.allclose(ckks.decode_slots(m, SCALE), values, atol=1e-9)


def test_encoding_overflow(params):
    with pytest.raises(ckks.EncodingError):
        ckks.encode_coeffs(params, [2. ** 60], 2. ** 40, 0)
    with pytest.raises(ckks.EncodingError):
        ckks.encode_slots(params, np.zeros(64), SCALE, 0)


def test_encode_coeffs_sparse_layout(params):
    m = ckks.encode_coeffs(params, [1., -2., 3., 0.5], 2. ** 10, 0)
    coeffs = m.to_bigint()

    assert coeffs[0::16] == [1024, -2048, 3072, 512]
    assert np.allclose(ckks.decode_coeffs(m, 2. ** 10, n=4), [1., -2., 3., 0.5])


def test_encrypt_decrypt_slots(sk, values):
    ct = encrypt(sk, values)

    assert ct.domain == rlwe.SLOTS_DOMAIN
    assert np.allclose(ckks.decrypt_slots(sk, ct), values, atol=1e-6)


def test_add_and_scalar_ops(sk, values):
    ct = encrypt(sk, values)

    assert np.allclose(ckks.decrypt_slots(sk, ckks.eval_add(ct, ct)), 2 * values, atol=1e-6)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.eval_add(ct, 0.25)), values + 0.25, atol=1e-6)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.eval_sub(ct, values)), 0, atol=1e-6)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.mul_by_i(ct)), 1j * values, atol=1e-6)


def test_add_aligns_levels(sk, values):
    high = encrypt(sk, values, seed=1)
    low = encrypt(sk, values, level=3, seed=2)

    total = ckks.eval_add(high, low)
    assert total.level == 3
    assert np.allclose(ckks.decrypt_slots(sk, total), 2 * values, atol=1e-6)


def test_mul_and_rescale(sk, keys, values):
    ct = encrypt(sk, values)
    top = ct.level

    product = ckks.eval_rescale(ckks.eval_mul(ct, ct, rlk=keys.relin))
    assert product.level == top - 1
    assert np.allclose(ckks.decrypt_slots(sk, product), values ** 2, atol=1e-5)

    plain = ckks.eval_rescale(ckks.mul_plain(ct, np.full(32, 0.5)))
    assert plain.scale == pytest.approx(SCALE)
    assert np.allclose(ckks.decrypt_slots(sk, plain), values / 2, atol=1e-6)


def test_mul_const_lands_on_target_scale(sk, values):
    ct = encrypt(sk, values)
    result = ckks.mul_const(ct, 3., target_scale=2. ** 35)

    assert result.scale == 2. ** 35
    assert result.level == ct.level - 1
    assert np.allclose(ckks.decrypt_slots(sk, result), 3 * values, atol=1e-5)


def test_exhausted_ciphertext(sk, values):
    ct = encrypt(sk, values, level=0)

    with pytest.raises(ckks.ExhaustedCiphertextError):
        ckks.eval_rescale(ct)
    with pytest.raises(ring.LevelError):
        ckks.mul_const(ct, 2.)


def test_rotation_and_conjugation(sk, keys, values):
    ct = encrypt(sk, values)

    assert np.allclose(ckks.decrypt_slots(sk, ckks.rotate(ct, 1, keys)), np.roll(values, -1), atol=1e-5)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.conjugate(ct, keys)), np.conj(values), atol=1e-5)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.real_part(ct, keys)), values.real, atol=1e-5)
    assert np.allclose(ckks.decrypt_slots(sk, ckks.imag_part(ct, keys)), values.imag, atol=1e-5)

    with pytest.raises(rlwe.MissingKeyError):
        ckks.rotate(ct, 3, keys)


def test_inner_sum(sk, keys, values):
    ct = encrypt(sk, values.real)
    total = ckks.inner_sum(ct, 32, keys)

    assert np.allclose(ckks.decrypt_slots(sk, total), np.sum(values.real), atol=1e-4)


def test_inner_sum_sparse_slots(sk, keys):
    values = np.arange(8, dtype=np.float64) / 8
    ct = ckks.encrypt_slots(sk, values, SCALE, 2, seed=3)
    total = ckks.inner_sum(ct, 8, keys)

    assert np.allclose(ckks.decrypt_slots(sk, total, slots=8), values.sum(), atol=1e-5)


def test_linear_transform(params, sk, noise):
    rng = np.random.default_rng(24)
    matrix = rng.normal(size=(32, 32)) / 8
    plan = ckks.LinearTransformPlan.from_matrix(params, matrix, params.max_level)
    keys = ckks.EvaluationKeys.generate(sk, rlwe.GadgetVector(params), plan.rotations, seed=25)

    v = rng.uniform(-1, 1, size=32)
    result = ckks.linear_transform(encrypt(sk, v), plan, keys)

    assert result.level == params.max_level - 1
    assert np.allclose(ckks.decrypt_slots(sk, result).real, matrix @ v, atol=1e-4)


def test_bsgs_rotations_cover_all_offsets():
    rotations = ckks.bsgs_rotations(range(16), 16, ratio=4)

    assert rotations == [1, 2, 3, 4, 8, 12]


@pytest.mark.parametrize('degree', [3, 7, 15])
def test_eval_poly_matches_chebval(sk, keys, degree):
    coeffs = np.random.default_rng(degree).uniform(-0.5, 0.5, size=degree + 1)
    x = np.linspace(-1, 1, 32)
    ct = encrypt(sk, x)

    result = ckks.eval_poly(ct, coeffs, keys)

    assert result.level == ct.level - ckks.poly_depth(degree)
    assert result.scale == pytest.approx(SCALE, rel=1e-9)
    assert np.allclose(ckks.decrypt_slots(sk, result).real, np.polynomial.chebyshev.chebval(x, coeffs), atol=1e-4)


def test_eval_poly_power_basis_and_interval(sk, keys):
    x = np.linspace(0, 2, 32)
    ct = encrypt(sk, x)

    result = ckks.eval_poly(ct, [1., 0., 0.5], keys, basis='power')
    assert np.allclose(ckks.decrypt_slots(sk, result).real, 1 + 0.5 * x ** 2, atol=1e-4)

    coeffs = ckks.chebyshev_interpolant(np.exp, 5, interval=(0., 2.))
    result = ckks.eval_poly(ct, coeffs, keys, interval=(0., 2.))
    assert np.allclose(ckks.decrypt_slots(sk, result).real, np.exp(x), atol=1e-2)


def test_eval_poly_needs_levels(sk, keys):
    ct = encrypt(sk, np.zeros(32), level=1)

    with pytest.raises(ring.LevelError):
        ckks.eval_poly(ct, np.ones(16), keys)


def test_poly_depth():
    assert ckks.poly_depth(0) == 0
    assert ckks.poly_depth(1) == 1
    assert ckks.poly_depth(15) == 5
    assert ckks.poly_depth(31) == 6
    assert ckks.chebyshev_depth([2.]) == 0
    assert ckks.chebyshev_depth([0., 0., 1., 0., 0.]) == 2
