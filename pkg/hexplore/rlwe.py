r"""RLWE keys, encryption and keyswitching.

Keyswitching is hybrid: the input is decomposed into one digit per RNS prime (optionally split further into
`base2`-bit pieces), each digit multiplies an encryption of :math:`P \cdot w_i \cdot s_{from}` over
:math:`Q_\ell P`, and the sum is divided by :math:`P`. The same machinery gives relinearization, Galois automorphisms
and the ring split/merge maps between degrees N and N/2.
"""
import logging
import math

import numpy as np

from hexplore import ring
from hexplore import utils


logger = logging.getLogger('hexplore')

COEFFS_DOMAIN = 'coeffs'
SLOTS_DOMAIN = 'slots'
DOMAINS = (COEFFS_DOMAIN, SLOTS_DOMAIN)

MAX_CIPHERTEXT_DEGREE = 2
SCALE_RTOL = 2. ** -20


class DomainTagError(ValueError):
    r"""Raised when ciphertexts carrying different encodings (coeffs vs slots) are combined."""


class ScaleMismatchError(ValueError):
    r"""Raised when adding ciphertexts whose scaling factors differ beyond :data:`SCALE_RTOL`."""


class MissingKeyError(KeyError):
    r"""Raised when an evaluation key needed by an operation was never generated."""


class SecretKey(object):
    r"""Ternary secret, kept both as small integers and in evaluation form over :math:`Q_L P`.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    values : np.ndarray[int64], shape (N,) or None
        Small signed coefficients. None for derived keys such as :math:`s^2` which only exist as ring elements.
    poly : hexplore.ring.Poly, optional
        Extended, max-level polynomial. Built from `values` when not given.
    key_id : str
        Label used in switching-key manifests and logs.
    """
    def __init__(self, params, values=None, poly=None, key_id='s'):
        if values is None and poly is None:
            raise ValueError('A secret needs either its coefficients or its ring element')

        if values is not None:
            values = np.asarray(values, dtype=np.int64)
            if values.shape != (params.degree,):
                raise ValueError('Secret has {} coefficients, ring degree is {}'.format(values.shape, params.degree))
        if poly is None:
            poly = ring.Poly.from_integers(params, values, params.max_level, extended=True).to_eval()

        self.params = params
        self.values = values
        self.poly = poly.to_eval()
        self.key_id = key_id

    @property
    def hamming_weight(self):
        return int(np.count_nonzero(self.values)) if self.values is not None else None

    def at(self, level, extended=False):
        return self.poly.restrict(level, extended)

    def square(self):
        return SecretKey(self.params, poly=self.poly * self.poly, key_id='{}^2'.format(self.key_id))

    def automorphism(self, exponent):
        r"""The secret :math:`\phi_g(s) = s(X^g)`."""
        dest, negate = ring.automorphism_permutation(self.params.degree, exponent)
        values = np.empty_like(self.values)
        values[dest] = np.where(negate, -self.values, self.values)
        return SecretKey(self.params, values, key_id='phi_{}({})'.format(exponent % (2 * self.params.degree),
                                                                         self.key_id))

    def embed_square(self, big_params):
        r"""The secret :math:`s(X^2)` living in the ring of twice the degree."""
        if big_params.degree != 2 * self.params.degree:
            raise ring.ParameterError('Cannot embed degree {} into degree {}'.format(
                self.params.degree, big_params.degree))
        values = np.zeros(big_params.degree, dtype=np.int64)
        values[0::2] = self.values
        return SecretKey(big_params, values, key_id='{}(X^2)'.format(self.key_id))


class PublicKey(object):
    r"""Encryption of zero :math:`(-a s + e, a)` at the top level, evaluation form."""
    def __init__(self, b, a, key_id='s'):
        self.b = b
        self.a = a
        self.key_id = key_id

    @property
    def params(self):
        return self.b.params


class Ciphertext(object):
    r"""Degree-k RLWE ciphertext.

    Parameters
    ----------
    parts : list[hexplore.ring.Poly]
        :math:`c_0, \dots, c_k`, decrypting to :math:`\sum_i c_i s^i`.
    scale : float
        Scaling factor :math:`\Delta` of the encoded message.
    domain : str
        :data:`COEFFS_DOMAIN` or :data:`SLOTS_DOMAIN`.
    """
    def __init__(self, parts, scale, domain=COEFFS_DOMAIN):
        if not 2 <= len(parts) <= MAX_CIPHERTEXT_DEGREE + 1:
            raise ValueError('Ciphertext degree must be 1 or 2, got {}'.format(len(parts) - 1))
        if scale <= 0:
            raise ValueError('Scaling factor must be positive, got {}'.format(scale))
        if domain not in DOMAINS:
            raise DomainTagError('Unknown domain {}'.format(domain))

        first = parts[0]
        for part in parts[1:]:
            if part.level != first.level or part.form != first.form or part.extended or part.params != first.params:
                raise ring.LevelError('Ciphertext parts must share ring, level and form')
        if first.extended:
            raise ring.LevelError('Ciphertexts never carry the special primes')

        self.parts = list(parts)
        self.scale = float(scale)
        self.domain = domain

    @classmethod
    def trivial(cls, m, scale, domain=COEFFS_DOMAIN):
        r"""Noiseless encryption :math:`(m, 0)`, valid under every secret."""
        return cls([m, ring.Poly.zero(m.params, m.level, form=m.form)], scale, domain)

    @classmethod
    def zero(cls, params, level, scale, domain=COEFFS_DOMAIN):
        return cls.trivial(ring.Poly.zero(params, level, form=ring.EVAL), scale, domain)

    @property
    def params(self):
        return self.parts[0].params

    @property
    def level(self):
        return self.parts[0].level

    @property
    def degree(self):
        return len(self.parts) - 1

    @property
    def is_ntt(self):
        return self.parts[0].form == ring.EVAL

    def with_parts(self, parts, scale=None, domain=None):
        return Ciphertext(parts, self.scale if scale is None else scale, self.domain if domain is None else domain)

    def copy(self):
        return self.with_parts([p.copy() for p in self.parts])

    def to_eval(self):
        return self.with_parts([p.to_eval() for p in self.parts])

    def to_coeffs(self):
        return self.with_parts([p.to_coeffs() for p in self.parts])

    def drop_to(self, level):
        return self.with_parts([p.drop_to(level) for p in self.parts])

    def size_bytes(self):
        return sum(p.coeffs.size for p in self.parts) * 8

    def __repr__(self):
        return 'Ciphertext(N={}, degree={}, level={}, log scale={:.2f}, domain={})'.format(
            self.params.degree, self.degree, self.level, math.log2(self.scale), self.domain)


def keygen(params, noise, seed):
    r"""Samples a ternary secret of Hamming weight `noise.secret_hamming_weight` and its public key.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    noise : hexplore.ring.NoiseParams
    seed : int or np.random.Generator

    Returns
    -------
    SecretKey
    PublicKey
    """
    noise.validate(params)
    rng = utils.as_generator(seed)

    s_poly = ring.sample('ternary', params, rng, hamming_weight=noise.secret_hamming_weight)
    values = utils.centred(s_poly.coeffs[0], params.moduli[0]).astype(np.int64)
    sk = SecretKey(params, values)

    a = ring.sample('uniform', params, rng).to_eval()
    e = ring.sample('gaussian', params, rng, sigma=noise.gaussian_sigma).to_eval()
    pk = PublicKey(e - a * sk.at(params.max_level), a, key_id=sk.key_id)

    logger.debug('Generated secret {} with h = {} for {}'.format(sk.key_id, sk.hamming_weight, params))
    return sk, pk


def encrypt(key, m, scale, seed, domain=COEFFS_DOMAIN, noise=None):
    r"""Encrypts a plaintext polynomial under a secret or public key.

    Parameters
    ----------
    key : SecretKey or PublicKey
    m : hexplore.ring.Poly
        Plaintext at the target level (not extended).
    scale : float
        Scaling factor the message was encoded with.
    seed : int or np.random.Generator
    domain : str
    noise : hexplore.ring.NoiseParams, optional
        Only the Gaussian width is used; defaults to :data:`hexplore.ring.DEFAULT_SIGMA`.

    Returns
    -------
    Ciphertext
        Degree 1, evaluation form.
    """
    if m.extended:
        raise ring.LevelError('Plaintexts are encrypted without the special primes')
    if key.params != m.params:
        raise ring.ParameterError('Key and plaintext live in different rings')

    rng = utils.as_generator(seed)
    sigma = ring.DEFAULT_SIGMA if noise is None else noise.gaussian_sigma
    params, level = m.params, m.level
    m = m.to_eval()

    if isinstance(key, SecretKey):
        a = ring.sample('uniform', params, rng, level=level).to_eval()
        e = ring.sample('gaussian', params, rng, level=level, sigma=sigma).to_eval()
        c0 = e + m - a * key.at(level)
        return Ciphertext([c0, a], scale, domain)

    u = ring.sample('ternary', params, rng, level=level, hamming_weight=params.degree // 2).to_eval()
    e0 = ring.sample('gaussian', params, rng, level=level, sigma=sigma).to_eval()
    e1 = ring.sample('gaussian', params, rng, level=level, sigma=sigma).to_eval()
    c0 = u * key.b.drop_to(level) + e0 + m
    c1 = u * key.a.drop_to(level) + e1
    return Ciphertext([c0, c1], scale, domain)


def decrypt(sk, ct):
    r"""Evaluates :math:`\sum_i c_i s^i`, returning a coefficient-form polynomial at the ciphertext level."""
    if sk.params != ct.params:
        raise ring.ParameterError('Secret and ciphertext live in different rings')

    s = sk.at(ct.level)
    parts = [p.to_eval() for p in ct.parts]
    acc = parts[-1]
    for part in reversed(parts[:-1]):
        acc = acc * s + part

    return acc.to_coeffs()


def measure_noise(sk, ct, expected):
    r"""Largest coefficient of :math:`\mathrm{Dec}(ct) - expected`, with `expected` an integer coefficient vector."""
    decrypted = decrypt(sk, ct).to_bigint()
    return max(abs(d - int(e)) for d, e in zip(decrypted, expected))


class GadgetVector(object):
    r"""Hybrid RNS gadget: ciphertext primes are grouped `primes_per_digit` at a time, one digit per group.

    The digit of group :math:`g` is :math:`[d]_{Q_g}` brought onto the other primes by fast base conversion. Its gadget
    entry is :math:`P \hat{Q}_g [\hat{Q}_g^{-1}]_{Q_g}`, which is :math:`P` on the rows of the group and zero on every
    other row, so the multiple of :math:`Q_g` that the conversion may add cancels exactly.

    With one prime per digit the centred residue can be split further into balanced `base2`-bit pieces, digit `(g, k)`
    then carrying an extra factor :math:`2^{k \cdot base2}`.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    base2 : int, optional
        Bit width of the sub-digits, only with `primes_per_digit = 1`.
    primes_per_digit : int
        Number of ciphertext primes grouped in one digit.
    """
    def __init__(self, params, base2=None, primes_per_digit=1):
        if base2 is not None and not 1 <= base2 <= ring.MAX_PRIME_BITS:
            raise ring.ParameterError('base2 must be in [1, {}], got {}'.format(ring.MAX_PRIME_BITS, base2))
        if primes_per_digit < 1:
            raise ring.ParameterError('primes_per_digit must be positive, got {}'.format(primes_per_digit))
        if base2 is not None and primes_per_digit != 1:
            raise ring.ParameterError('base2 refinement needs one prime per digit')

        self.params = params
        self.base2 = base2
        self.primes_per_digit = primes_per_digit

        num_q = len(params.q)
        self.groups = [list(range(start, min(start + primes_per_digit, num_q)))
                       for start in range(0, num_q, primes_per_digit)]

        group_bits = max(sum(params.q[i].bit_length() for i in group) for group in self.groups)
        if params.P.bit_length() < min(group_bits, base2 or group_bits):
            logger.warning('Special modulus ({} bits) is smaller than a digit ({} bits), keyswitch noise will grow'
                           .format(params.P.bit_length(), min(group_bits, base2 or group_bits)))

        self.digits = []
        for g, group in enumerate(self.groups):
            count = 1 if base2 is None else math.ceil(params.q[group[0]].bit_length() / base2)
            self.digits.extend((g, k) for k in range(count))

    def digit_count(self, level=None):
        r"""Number of gadget components used by an input at `level`."""
        level = self.params.max_level if level is None else level
        return sum(1 for g, _ in self.digits if self.groups[g][0] <= level)

    def weight_residue(self, digit, row):
        r"""Residue of gadget entry `digit = (g, k)` on ciphertext prime `row` (zero outside the group)."""
        g, k = digit
        if row not in self.groups[g]:
            return 0
        modulus = self.params.q[row]
        shift = 0 if self.base2 is None else k * self.base2
        return (self.params.P * pow(2, shift, modulus)) % modulus

    def decompose(self, d):
        r"""Digits of a polynomial at level l, lifted onto the primes of :math:`Q_\ell P`.

        Parameters
        ----------
        d : hexplore.ring.Poly
            Not extended.

        Returns
        -------
        np.ndarray[int64], shape (digit_count(l), rows, N)
            Coefficient-form residues, rows laid out like `params.tables(l, extended=True)`.
        """
        d = d.to_coeffs()
        level = d.level
        tab = self.params.tables(level, extended=True)
        q, qf = tab.col(1)

        lifted = []
        for g, group in enumerate(self.groups):
            group = [i for i in group if i <= level]
            if not group:
                break

            if len(group) == 1:
                i = group[0]
                residue = utils.centred(d.coeffs[i], tab.moduli[i]).astype(np.int64)
                if self.base2 is None:
                    lifted.append(np.mod(residue[None, :], q))
                    continue

                radix = 1 << self.base2
                half = radix >> 1
                count = sum(1 for gg, _ in self.digits if gg == g)
                for _ in range(count):
                    digit = np.mod(residue + half, radix) - half
                    lifted.append(np.mod(digit[None, :], q))
                    residue = (residue - digit) >> self.base2
                continue

            # Fast base conversion of [d]_{Q_g}; the result may be off by a small multiple of Q_g.
            group_modulus = math.prod(tab.moduli[i] for i in group)
            conv = np.zeros((len(tab.moduli), self.params.degree), dtype=np.int64)
            for i in group:
                qi = tab.moduli[i]
                hat = group_modulus // qi
                v = ring.mulmod(d.coeffs[i], np.int64(pow(hat, -1, qi)), np.int64(qi))
                v = utils.centred(v, qi).astype(np.int64)
                hat_mod = np.array([hat % m for m in tab.moduli], dtype=np.int64)[:, None]
                conv = conv + ring.mulmod(np.mod(v[None, :], q), hat_mod, q, qf)
                conv = np.where(conv >= q, conv - q, conv)
            lifted.append(conv)

        return np.stack(lifted)

    def __eq__(self, other):
        return (isinstance(other, GadgetVector) and self.params == other.params and self.base2 == other.base2
                and self.primes_per_digit == other.primes_per_digit)


class SwitchingKey(object):
    r"""Gadget encryptions :math:`(-a_j s_{to} + e_j + w_j s_{from}, a_j)` over :math:`Q_L P`, evaluation form.

    Attributes
    ----------
    key0, key1 : np.ndarray[int64], shape (digit_count, rows, N)
        Both halves of every gadget component, rows covering all ciphertext primes then the special primes.
    """
    def __init__(self, gadget, key0, key1, source_id, target_id):
        self.gadget = gadget
        self.key0 = key0
        self.key1 = key1
        self.source_id = source_id
        self.target_id = target_id

    @property
    def params(self):
        return self.gadget.params

    def restricted(self, level):
        r"""Key arrays holding the digits and rows needed at `level`."""
        rows = self.params.row_indices(level, extended=True)
        count = self.gadget.digit_count(level)
        return self.key0[:count][:, rows], self.key1[:count][:, rows]

    def size_bytes(self):
        return (self.key0.size + self.key1.size) * 8

    def __repr__(self):
        return 'SwitchingKey({} -> {}, {} digits)'.format(self.source_id, self.target_id, self.key0.shape[0])


class GaloisKeySet(dict):
    r"""Switching keys :math:`\phi_g(s) \to s` indexed by the exponent `g` modulo 2N."""
    def __missing__(self, exponent):
        raise MissingKeyError('No Galois key for exponent {}'.format(exponent))

    def size_bytes(self):
        return sum(key.size_bytes() for key in self.values())


def switch_key_gen(s_from, s_to, gadget, seed, noise=None):
    r"""Generates a switching key from `s_from` to `s_to`, both over the same ring.

    Parameters
    ----------
    s_from : SecretKey
    s_to : SecretKey
    gadget : GadgetVector
    seed : int or np.random.Generator
    noise : hexplore.ring.NoiseParams, optional

    Returns
    -------
    SwitchingKey
    """
    params = gadget.params
    if s_from.params != params or s_to.params != params:
        raise ring.ParameterError('Switching keys need both secrets over {}'.format(params))

    rng = utils.as_generator(seed)
    sigma = ring.DEFAULT_SIGMA if noise is None else noise.gaussian_sigma
    tab = params.tables(params.max_level, extended=True)
    q, qf = tab.col(1)
    source = s_from.at(params.max_level, extended=True).coeffs
    target = s_to.at(params.max_level, extended=True)

    key0, key1 = [], []
    for digit in gadget.digits:
        a = ring.sample('uniform', params, rng, extended=True).to_eval()
        e = ring.sample('gaussian', params, rng, extended=True, sigma=sigma).to_eval()
        b = e - a * target

        weights = np.array([gadget.weight_residue(digit, row) if row <= params.max_level else 0
                            for row in range(len(tab.moduli))], dtype=np.int64)[:, None]
        total = b.coeffs + ring.mulmod(source, weights, q, qf)
        key0.append(np.where(total >= q, total - q, total))
        key1.append(a.coeffs)

    logger.debug('Generated switching key {} -> {} with {} digits'.format(s_from.key_id, s_to.key_id,
                                                                          len(gadget.digits)))
    return SwitchingKey(gadget, np.stack(key0), np.stack(key1), s_from.key_id, s_to.key_id)


def switch_key(d, swk, gadget=None):
    r"""Turns :math:`d \cdot s_{from}` into a ciphertext under :math:`s_{to}`.

    Parameters
    ----------
    d : hexplore.ring.Poly
        At level l, not extended.
    swk : SwitchingKey
    gadget : GadgetVector, optional
        Defaults to the key's own gadget.

    Returns
    -------
    tuple[hexplore.ring.Poly, hexplore.ring.Poly]
        Evaluation-form pair at level l decrypting to :math:`d \cdot s_{from} + e_{ks}` under :math:`s_{to}`.
    """
    gadget = swk.gadget if gadget is None else gadget
    if d.extended:
        raise ring.LevelError('Keyswitch input must not carry the special primes')
    if d.params != swk.params:
        raise ring.ParameterError('Keyswitch input and key live in different rings')

    level = d.level
    params = d.params
    tab = params.tables(level, extended=True)
    q, qf = tab.col(1)

    lifted = ring.ntt_rows(gadget.decompose(d), tab, 'forward')
    key0, key1 = swk.restricted(level)

    acc0 = np.zeros_like(lifted[0])
    acc1 = np.zeros_like(lifted[0])
    for j in range(lifted.shape[0]):
        acc0 = acc0 + ring.mulmod(lifted[j], key0[j], q, qf)
        acc1 = acc1 + ring.mulmod(lifted[j], key1[j], q, qf)
        acc0 = np.where(acc0 >= q, acc0 - q, acc0)
        acc1 = np.where(acc1 >= q, acc1 - q, acc1)

    u0 = ring.mod_down(ring.Poly(params, acc0, form=ring.EVAL, extended=True))
    u1 = ring.mod_down(ring.Poly(params, acc1, form=ring.EVAL, extended=True))
    return u0, u1


def relin_key_gen(sk, gadget, seed, noise=None):
    return switch_key_gen(sk.square(), sk, gadget, seed, noise=noise)


def galois_key_gen(sk, exponents, gadget, seed, noise=None):
    r"""Switching keys :math:`\phi_g(s) \to s` for every `g` in `exponents`."""
    two_n = 2 * sk.params.degree
    keys = GaloisKeySet()
    for exponent, rng in zip(exponents, utils.spawn(seed, len(exponents))):
        exponent %= two_n
        if exponent not in keys:
            keys[exponent] = switch_key_gen(sk.automorphism(exponent), sk, gadget, rng, noise=noise)
    return keys


def add(ct0, ct1):
    r"""Sums two ciphertexts of equal level and domain; the result keeps `ct0`'s scale."""
    if ct0.domain != ct1.domain:
        raise DomainTagError('Cannot add {} and {} ciphertexts'.format(ct0.domain, ct1.domain))
    if abs(ct0.scale - ct1.scale) > SCALE_RTOL * ct0.scale:
        raise ScaleMismatchError('Scales differ: 2^{:.6f} vs 2^{:.6f}'.format(
            math.log2(ct0.scale), math.log2(ct1.scale)))
    if ct0.level != ct1.level:
        raise ring.LevelError('Cannot add ciphertexts at levels {} and {}'.format(ct0.level, ct1.level))

    a, b = list(ct0.parts), list(ct1.parts)
    zero = ring.Poly.zero(ct0.params, ct0.level, form=ring.EVAL)
    while len(a) < len(b):
        a.append(zero)
    while len(b) < len(a):
        b.append(zero)

    return ct0.with_parts([x.to_eval() + y.to_eval() for x, y in zip(a, b)])


def negate(ct):
    return ct.with_parts([-p for p in ct.parts])


def sub(ct0, ct1):
    return add(ct0, negate(ct1))


def mul_poly(ct, m, scale=1.):
    r"""Multiplies by a plaintext polynomial; the scale is multiplied by the plaintext's `scale`."""
    m = m.to_eval()
    if m.level != ct.level:
        m = m.drop_to(ct.level)
    return ct.with_parts([p.to_eval() * m for p in ct.parts], scale=ct.scale * scale)


def mul_int(ct, value):
    r"""Multiplies by an integer, leaving the scale unchanged."""
    return ct.with_parts([p * int(value) for p in ct.parts])


def monomial_mul(ct, k):
    r"""Multiplies by the monomial :math:`X^k`; a coefficient rotation with sign flips, no keys involved."""
    return ct.with_parts([p.monomial_mul(k) for p in ct.parts])


def tensor(ct0, ct1):
    r"""Degree-2 product of two degree-1 ciphertexts at the same level, scale :math:`\Delta_0 \Delta_1`."""
    if ct0.degree != 1 or ct1.degree != 1:
        raise ValueError('Only degree-1 ciphertexts can be multiplied, got degrees {} and {}'.format(
            ct0.degree, ct1.degree))
    if ct0.domain != ct1.domain:
        raise DomainTagError('Cannot multiply {} and {} ciphertexts'.format(ct0.domain, ct1.domain))
    if ct0.level != ct1.level:
        raise ring.LevelError('Cannot multiply ciphertexts at levels {} and {}'.format(ct0.level, ct1.level))

    a0, a1 = (p.to_eval() for p in ct0.parts)
    b0, b1 = (p.to_eval() for p in ct1.parts)
    return Ciphertext([a0 * b0, a0 * b1 + a1 * b0, a1 * b1], ct0.scale * ct1.scale, ct0.domain)


def relinearize(ct, rlk):
    r"""Reduces a degree-2 ciphertext to degree 1 with the key :math:`s^2 \to s`."""
    if ct.degree != 2:
        raise ValueError('relinearize expects a degree-2 ciphertext, got degree {}'.format(ct.degree))

    u0, u1 = switch_key(ct.parts[2].to_coeffs(), rlk)
    return ct.with_parts([ct.parts[0].to_eval() + u0, ct.parts[1].to_eval() + u1])


def apply_galois(ct, exponent, swk_gal):
    r"""Homomorphically applies :math:`\phi_g` to the message.

    Parameters
    ----------
    ct : Ciphertext
        Degree 1.
    exponent : int
        Odd, taken modulo 2N.
    swk_gal : SwitchingKey or GaloisKeySet
        Key :math:`\phi_g(s) \to s`, or a key set containing it.

    Returns
    -------
    Ciphertext
    """
    if ct.degree != 1:
        raise ValueError('Relinearize before applying an automorphism')

    two_n = 2 * ct.params.degree
    exponent %= two_n
    if exponent == 1:
        return ct.copy()

    swk = swk_gal[exponent] if isinstance(swk_gal, dict) else swk_gal
    c0, c1 = (ring.automorphism_apply(p, exponent) for p in ct.parts)
    u0, u1 = switch_key(c1.to_coeffs(), swk)
    return ct.with_parts([c0.to_eval() + u0, u1])


def ring_split(ct, swk):
    r"""Splits a degree-N ciphertext into two degree-N/2 ciphertexts.

    Parameters
    ----------
    ct : Ciphertext
        Degree 1 over the ring of degree N, under :math:`s(X)`.
    swk : SwitchingKey
        From :math:`s(X)` to :math:`s'(X^2)`, with :math:`s'` a secret of the half-degree ring.

    Returns
    -------
    tuple[Ciphertext, Ciphertext]
        Encryptions under :math:`s'` of :math:`m_0, m_1` with :math:`m(X) = m_0(X^2) + X m_1(X^2)`.
    """
    params = ct.params
    if params.degree // 2 < ring.MIN_DEGREE:
        raise ring.ParameterError('Cannot split a degree-{} ring below degree {}'.format(
            params.degree, ring.MIN_DEGREE))

    c0, c1 = ct.parts
    u0, u1 = switch_key(c1.to_coeffs(), swk)
    parts = [(c0.to_eval() + u0).to_coeffs(), u1.to_coeffs()]

    small = params.subring(params.degree // 2)
    even = [ring.Poly(small, p.coeffs[:, 0::2], form=ring.COEFFS) for p in parts]
    odd = [ring.Poly(small, p.coeffs[:, 1::2], form=ring.COEFFS) for p in parts]
    return Ciphertext(even, ct.scale, ct.domain), Ciphertext(odd, ct.scale, ct.domain)


def _interleave(p0, p1, big_params):
    rows = np.empty((p0.coeffs.shape[0], big_params.degree), dtype=np.int64)
    rows[:, 0::2] = p0.to_coeffs().coeffs
    rows[:, 1::2] = p1.to_coeffs().coeffs
    return ring.Poly(big_params, rows, form=ring.COEFFS)


def ring_merge(ct_0, ct_1, swk):
    r"""Merges two degree-N/2 ciphertexts into one degree-N ciphertext of :math:`m_0(X^2) + X m_1(X^2)`.

    Parameters
    ----------
    ct_0, ct_1 : Ciphertext
        Degree 1, same level, under the half-degree secret :math:`s'`.
    swk : SwitchingKey
        From :math:`s'(X^2)` to the degree-N secret.

    Returns
    -------
    Ciphertext
    """
    if ct_0.level != ct_1.level:
        raise ring.LevelError('Cannot merge ciphertexts at levels {} and {}'.format(ct_0.level, ct_1.level))
    if ct_0.params != ct_1.params:
        raise ring.ParameterError('Merged ciphertexts must share a ring')
    if abs(ct_0.scale - ct_1.scale) > SCALE_RTOL * ct_0.scale:
        raise ScaleMismatchError('Merged ciphertexts must share a scale')

    big = swk.params
    c0 = _interleave(ct_0.parts[0], ct_1.parts[0], big)
    c1 = _interleave(ct_0.parts[1], ct_1.parts[1], big)

    u0, u1 = switch_key(c1, swk)
    return Ciphertext([c0.to_eval() + u0, u1], ct_0.scale, ct_0.domain)


def gen_merge_keys(secrets, gadgets, seed, noise=None):
    r"""Merge keys along a chain of secrets of doubling degree.

    Parameters
    ----------
    secrets : list[SecretKey]
        Secrets of degree n, 2n, ..., N.
    gadgets : dict[int, GadgetVector]
        Gadget per target degree.

    Returns
    -------
    dict[int, SwitchingKey]
        Key :math:`s_k(X^2) \to s_{2k}` indexed by the target degree 2k.
    """
    keys = {}
    rngs = utils.spawn(seed, max(len(secrets) - 1, 1))
    for small, big, rng in zip(secrets[:-1], secrets[1:], rngs):
        embedded = small.embed_square(big.params)
        keys[big.params.degree] = switch_key_gen(embedded, big, gadgets[big.params.degree], rng, noise=noise)
    return keys


def merge_tree(cts, merge_keys):
    r"""Merges a power-of-two number of ciphertexts of degree n into one of degree n * len(cts).

    Coefficient i of input j lands at position `i * len(cts) + j` of the result.
    """
    if not utils.is_power_of_two(len(cts)):
        raise ValueError('merge_tree needs a power-of-two number of inputs, got {}'.format(len(cts)))
    if len(cts) == 1:
        return cts[0]

    evens = merge_tree(cts[0::2], merge_keys)
    odds = merge_tree(cts[1::2], merge_keys)
    target = 2 * evens.params.degree
    if target not in merge_keys:
        raise MissingKeyError('No merge key into degree {}'.format(target))
    return ring_merge(evens, odds, merge_keys[target])


def key_size_bytes(keys):
    r"""Total size of a switching key or of any nesting of keys in lists and dicts."""
    if isinstance(keys, SwitchingKey):
        return keys.size_bytes()
    if isinstance(keys, dict):
        return sum(key_size_bytes(k) for k in keys.values())
    if isinstance(keys, (list, tuple)):
        return sum(key_size_bytes(k) for k in keys)
    return 0
