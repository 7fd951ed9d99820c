r"""Ring repacking: the constant coefficients of up to n RLWE ciphertexts gathered into one ciphertext.

Each of the :math:`\log n` rounds halves the number of live ciphertexts with
:math:`c_j \leftarrow c_j + c_{j+t} X^t + \phi_g(c_j - c_{j+t} X^t)`, which doubles the coefficients that are kept and
cancels the others. Inputs are multiplied by :math:`n^{-1} \bmod Q` first so the doublings restore the original scale.
"""
from concurrent import futures
import logging

import numpy as np

from hexplore import _logging
from hexplore import ring
from hexplore import rlwe
from hexplore import utils


logger = logging.getLogger('hexplore')


def repack_exponents(degree):
    r"""Galois exponents used by the repacking rounds, in round order: :math:`2N - 1`, then :math:`5^{2^{i-1}}`."""
    rounds = utils.log2_int(degree)
    two_n = 2 * degree
    return [two_n - 1] + [pow(5, 2 ** (i - 1), two_n) for i in range(1, rounds)]


class RepackKeySet(object):
    r"""The :math:`\log n` Galois keys needed by :func:`repack`.

    Parameters
    ----------
    keys : hexplore.rlwe.GaloisKeySet
    gadget : hexplore.rlwe.GadgetVector
    """
    def __init__(self, keys, gadget):
        self.keys = keys
        self.gadget = gadget

    @property
    def params(self):
        return self.gadget.params

    @property
    def exponents(self):
        return sorted(self.keys)

    def __len__(self):
        return len(self.keys)

    def size_bytes(self):
        return self.keys.size_bytes()


def gen_repack_keys(sk, gadget, seed, noise=None):
    r"""Generates the repacking keys :math:`\phi_g(s) \to s` for every round of :func:`repack`.

    Parameters
    ----------
    sk : hexplore.rlwe.SecretKey
        Secret of the small ring the inputs are encrypted in.
    gadget : hexplore.rlwe.GadgetVector
    seed : int or np.random.Generator
    noise : hexplore.ring.NoiseParams, optional

    Returns
    -------
    RepackKeySet
    """
    exponents = repack_exponents(sk.params.degree)
    keys = rlwe.galois_key_gen(sk, exponents, gadget, seed, noise=noise)
    logger.info('Generated {} repacking keys ({:.2f} MB)'.format(len(keys), keys.size_bytes() / 2 ** 20))
    return RepackKeySet(keys, gadget)


def _scale_by_inverse(ct, n):
    tab = ct.params.tables(ct.level)
    inverses = [pow(n, -1, q) for q in tab.moduli]
    return ct.with_parts([p.mul_row_scalars(inverses) for p in ct.parts])


def repack(cts, keys):
    r"""Packs the constant coefficients of up to n ciphertexts into one.

    Parameters
    ----------
    cts : list[hexplore.rlwe.Ciphertext or None]
        At most n degree-1 ciphertexts of the degree-n ring, all at the same level and scale. Missing entries (and
        `None`) are zero.
    keys : RepackKeySet

    Returns
    -------
    hexplore.rlwe.Ciphertext
        Encryption of :math:`\sum_i m_i[0] X^i`, coefficients domain, same level and scale as the inputs.
    """
    live = [ct for ct in cts if ct is not None]
    if not live:
        raise ValueError('repack needs at least one ciphertext')

    n = live[0].params.degree
    if len(cts) > n:
        raise ValueError('Cannot repack {} ciphertexts into degree {}, use repack_batches'.format(len(cts), n))
    for ct in live:
        if ct.params != live[0].params:
            raise ring.ParameterError('Repacked ciphertexts must share a ring')
        if ct.level != live[0].level:
            raise ring.LevelError('Cannot repack ciphertexts at levels {} and {}'.format(ct.level, live[0].level))
        if abs(ct.scale - live[0].scale) > rlwe.SCALE_RTOL * live[0].scale:
            raise rlwe.ScaleMismatchError('Repacked ciphertexts must share a scale')

    # None marks a noiseless zero; rounds skip pairs where both sides are zero.
    work = [None if ct is None else _scale_by_inverse(ct.to_eval(), n) for ct in cts]
    work += [None] * (n - len(work))

    automorphisms = 0
    for i, exponent in enumerate(repack_exponents(n)):
        t = n // 2 ** (i + 1)
        for j in range(t):
            c_j, c_jt = work[j], work[j + t]
            if c_j is None and c_jt is None:
                continue

            if c_jt is None:
                plus = minus = c_j
            else:
                shifted = rlwe.monomial_mul(c_jt, t)
                plus = shifted if c_j is None else rlwe.add(c_j, shifted)
                minus = rlwe.negate(shifted) if c_j is None else rlwe.sub(c_j, shifted)

            work[j] = rlwe.add(plus, rlwe.apply_galois(minus, exponent, keys.keys))
            automorphisms += 1

    logger.debug('Repacked {} ciphertexts of degree {} with {} automorphisms'.format(len(live), n, automorphisms))
    return work[0].with_parts(work[0].parts, domain=rlwe.COEFFS_DOMAIN)


def repack_batches(cts, keys, threads=1, progress=False):
    r"""Splits `cts` into batches of n and repacks each batch.

    Parameters
    ----------
    cts : list[hexplore.rlwe.Ciphertext]
    keys : RepackKeySet
    threads : int
        Batches are independent and are repacked concurrently when `threads > 1`.
    progress : bool
        Whether to show a progress bar.

    Returns
    -------
    list[hexplore.rlwe.Ciphertext]
        :math:`\lceil len(cts) / n \rceil` ciphertexts, the last one zero-padded.
    """
    n = keys.params.degree
    batches = [cts[start:start + n] for start in range(0, len(cts), n)]

    if threads > 1:
        with futures.ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda batch: repack(batch, keys), batches))

    packed = []
    bar = _logging.ProgressBar(len(batches), stage='repack', unit='batch', disable=not progress)
    for b in bar:
        packed.append(repack(batches[b], keys))
        bar.report(b, inputs=len(batches[b]))
    return packed


def simulate_repack(messages, degree):
    r"""Plaintext simulation of :func:`repack` on integer coefficient vectors, dividing by n at the end.

    Parameters
    ----------
    messages : list[array-like]
        Up to `degree` integer coefficient vectors of length `degree`.
    degree : int

    Returns
    -------
    list[int]
        The packed coefficient vector.
    """
    two_n = 2 * degree
    work = [None] * degree
    for i, m in enumerate(messages):
        work[i] = [int(v) for v in m]

    def monomial(u, k):
        out = [0] * degree
        for e, c in enumerate(u):
            power = (e + k) % two_n
            out[power % degree] += -c if power >= degree else c
        return out

    def automorphism(u, g):
        out = [0] * degree
        for e, c in enumerate(u):
            power = (e * g) % two_n
            out[power % degree] += -c if power >= degree else c
        return out

    zero = [0] * degree
    for i, exponent in enumerate(repack_exponents(degree)):
        t = degree // 2 ** (i + 1)
        for j in range(t):
            c_j = work[j] or zero
            shifted = monomial(work[j + t] or zero, t)
            plus = [a + b for a, b in zip(c_j, shifted)]
            minus = automorphism([a - b for a, b in zip(c_j, shifted)], exponent)
            work[j] = [a + b for a, b in zip(plus, minus)]

    result = work[0] or zero
    if any(v % degree for v in result):
        raise ArithmeticError('Repacking butterflies left a non-multiple of n: {}'.format(result))
    return [v // degree for v in result]


def noiseless_ciphertext(params, values, scale, level=0):
    r"""Trivial encryption of an integer coefficient vector, used for zero padding and tests."""
    m = ring.Poly.from_integers(params, np.asarray(values, dtype=np.int64), level)
    return rlwe.Ciphertext.trivial(m.to_eval(), scale, rlwe.COEFFS_DOMAIN)
