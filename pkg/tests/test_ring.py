import numpy as np
import pytest
import sympy

from hexplore import ring
from hexplore import utils


def negacyclic_product(a, b):
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += int(a[i]) * int(b[j])
            else:
                out[k - n] -= int(a[i]) * int(b[j])
    return out


def test_generate_primes_are_ntt_friendly():
    primes = ring.generate_primes(256, 45, 3)

    assert len(set(primes)) == 3
    for q in primes:
        assert sympy.isprime(q)
        assert (q - 1) % 512 == 0
        assert abs(q.bit_length() - 45) <= 1


def test_generate_primes_rejects_large_bits():
    with pytest.raises(ring.ParameterError):
        ring.generate_primes(64, 60, 1)


def test_params_validation():
    with pytest.raises(ring.ParameterError):
        ring.RingParams(48, [97])
    with pytest.raises(ring.ParameterError):
        ring.RingParams(64, [2 ** 40 + 1, 2 ** 40 + 1], special_moduli_count=1)


def test_subring_shares_primes(small_params):
    sub = small_params.subring(16, levels=1)

    assert sub.degree == 16
    assert sub.q == small_params.q[:1]
    assert sub.p == small_params.p
    assert sub.max_level == 0
    assert small_params.subring(16, levels=1) is sub


def test_ntt_round_trip(small_params):
    p = ring.sample('uniform', small_params, seed=3, extended=True)

    assert p.to_eval().to_coeffs() == p


def test_ntt_product_is_negacyclic(small_params):
    rng = np.random.default_rng(4)
    a = rng.integers(-50, 50, size=small_params.degree)
    b = rng.integers(-50, 50, size=small_params.degree)

    pa = ring.Poly.from_integers(small_params, a, small_params.max_level).to_eval()
    pb = ring.Poly.from_integers(small_params, b, small_params.max_level).to_eval()

    assert (pa * pb).to_bigint() == negacyclic_product(a, b)


def test_crt_reconstruct_centres():
    moduli = [97, 193]
    rows = np.array([[(-5) % 97, 7], [(-5) % 193, 7]])

    assert ring.crt_reconstruct(rows, moduli) == [-5, 7]
    assert ring.crt_reconstruct(rows, moduli, centre=False) == [97 * 193 - 5, 7]


def test_monomial_mul_wraps_with_sign(small_params):
    n = small_params.degree
    values = np.zeros(n, dtype=np.int64)
    values[n - 1] = 3
    p = ring.Poly.from_integers(small_params, values, 1)

    shifted = p.monomial_mul(2).to_bigint()
    assert shifted[1] == -3
    assert sum(abs(v) for v in shifted) == 3

    assert p.monomial_mul(n).to_bigint() == [-v for v in p.to_bigint()]


def test_automorphism_inverse(small_params):
    two_n = 2 * small_params.degree
    p = ring.sample('gaussian', small_params, seed=5, level=1)

    g = 5
    back = ring.automorphism_apply(ring.automorphism_apply(p, g), pow(g, -1, two_n))
    assert back == p

    with pytest.raises(ring.InvalidAutomorphismError):
        ring.automorphism_apply(p, 4)


def test_automorphism_maps_x_to_x_power(small_params):
    n = small_params.degree
    values = np.zeros(n, dtype=np.int64)
    values[1] = 1
    x = ring.Poly.from_integers(small_params, values, 0)

    image = ring.automorphism_apply(x, 2 * n - 1).to_bigint()
    # X^(2N-1) = -X^(N-1)
    assert image[n - 1] == -1
    assert sum(abs(v) for v in image) == 1


def test_rescale_round_divides_by_top_prime(small_params):
    top = small_params.q[2]
    values = np.array([7, -3, 0, 12] + [0] * (small_params.degree - 4), dtype=object)
    lifted = [v * top + (top // 2 - 1 if i == 0 else 0) for i, v in enumerate(values)]
    p = ring.Poly.from_integers(small_params, np.array(lifted, dtype=object), 2)

    rescaled = ring.rescale_round(p)

    assert rescaled.level == 1
    assert rescaled.to_bigint()[:4] == [7, -3, 0, 12]

    with pytest.raises(ring.LevelError):
        ring.rescale_round(ring.Poly.zero(small_params, 0))


def test_mod_down_inverts_raise(small_params):
    p = ring.sample('uniform', small_params, seed=6, level=1)

    assert ring.mod_down(ring.raise_to_extended(p)) == p


def test_sample_ternary_weight(small_params):
    s = ring.sample('ternary', small_params, seed=7, hamming_weight=10)
    values = np.array(s.to_bigint())

    assert np.count_nonzero(values) == 10
    assert set(np.unique(values)) <= {-1, 0, 1}


def test_sample_gaussian_tail_cut(small_params):
    e = ring.sample('gaussian', small_params, seed=8, sigma=3.2)

    assert e.infinity_norm() <= ring.TAIL_CUT * 3.2


def test_sample_is_deterministic(small_params):
    a = ring.sample('uniform', small_params, seed=9)
    b = ring.sample('uniform', small_params, seed=9)

    assert a == b


def test_bit_reverse_permutation_is_involution():
    perm = utils.bit_reverse_permutation(32)

    assert np.array_equal(perm[perm], np.arange(32))
