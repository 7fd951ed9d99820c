r"""Approximate (CKKS) arithmetic on top of :mod:`hexplore.rlwe`.

Messages are either coefficient-encoded real vectors or slot-encoded complex vectors. A vector of `n` slots lives in
the subring :math:`Y = X^{N/2n}`; slot `j` is the evaluation of the message at :math:`\zeta^{5^j}` with :math:`\zeta` a
primitive `4n`-th root of unity, so the automorphism :math:`X \mapsto X^{5^k}` rotates the slots by `k` and
:math:`X \mapsto X^{2N - 1}` conjugates them.
"""
import functools
import logging
import math

import numpy as np
from numpy.polynomial import chebyshev

from hexplore import ring
from hexplore import rlwe
from hexplore import utils


logger = logging.getLogger('hexplore')

CONJUGATION = -1


class ExhaustedCiphertextError(ring.LevelError):
    r"""Raised when a ciphertext has no prime left to rescale by."""


class EncodingError(ValueError):
    r"""Raised for vectors that do not fit the plaintext space."""


@functools.lru_cache(maxsize=None)
def encoder_tables(slots):
    return EncoderTables(slots)


class EncoderTables(object):
    r"""Roots and index maps of the special Fourier transform on `slots` complex values.

    :math:`SF_n[j][k] = \zeta^{k 5^j}`, and :math:`SF_n^{-1} = \frac{1}{n} \overline{SF_n}^T`.
    """
    def __init__(self, slots):
        if not utils.is_power_of_two(slots):
            raise EncodingError('Slot count must be a power of two, got {}'.format(slots))

        n = slots
        self.slots = n
        self.rot_group = np.array([pow(5, j, 4 * n) for j in range(n)], dtype=np.int64)
        self.fft_index = ((self.rot_group - 1) // 4) % n
        self.twist = np.exp(1j * np.pi * np.arange(n) / (2 * n))
        self.bit_reverse = utils.bit_reverse_permutation(n)

    def forward(self, w):
        r"""Computes :math:`SF_n w` (coefficients to slots)."""
        n = self.slots
        return n * np.fft.ifft(np.asarray(w, dtype=np.complex128) * self.twist)[self.fft_index]

    def inverse(self, z):
        r"""Computes :math:`SF_n^{-1} z` (slots to coefficients)."""
        y = np.empty(self.slots, dtype=np.complex128)
        y[self.fft_index] = z
        return np.fft.fft(y) * np.conj(self.twist) / self.slots

    def matrix(self):
        n = self.slots
        exponents = (self.rot_group[:, None] * np.arange(n)[None, :]) % (4 * n)
        return np.exp(1j * np.pi * exponents / (2 * n))

    def inverse_matrix(self):
        return np.conj(self.matrix()).T / self.slots


def special_fourier_factors(slots, inverse=True):
    r"""Butterfly factors of the special Fourier transform, in the order they are applied to a vector.

    :math:`SF_n = F_\nu \cdots F_1 R` with `R` the bit-reversal permutation and :math:`F_l` block-diagonal with blocks
    :math:`\begin{pmatrix} I & D \\ I & -D \end{pmatrix}` of size :math:`2^l`. The inverse factors omit `R`, so their
    product maps slots to the coefficient vector in bit-reversed order.
    """
    n = slots
    stages = utils.log2_int(n)
    factors = []
    for level in range(1, stages + 1):
        size = 2 ** level
        half = size // 2
        roots = np.exp(1j * np.pi * np.array([pow(5, j, 4 * size) for j in range(half)]) / (2 * size))
        block = np.zeros((size, size), dtype=np.complex128)
        eye = np.eye(half)
        if inverse:
            block[:half, :half] = eye / 2
            block[:half, half:] = eye / 2
            block[half:, :half] = np.diag(1. / roots) / 2
            block[half:, half:] = -np.diag(1. / roots) / 2
        else:
            block[:half, :half] = eye
            block[:half, half:] = np.diag(roots)
            block[half:, :half] = eye
            block[half:, half:] = -np.diag(roots)
        factors.append(np.kron(np.eye(n // size), block))

    # Forward: F_1 acts first (after R). Inverse: F_nu^{-1} acts first.
    return factors[::-1] if inverse else factors


def grouped_factors(factors, groups):
    r"""Multiplies consecutive factors into `groups` matrices (each costing one level when applied)."""
    if not 1 <= groups <= len(factors):
        raise ValueError('Cannot split {} factors into {} groups'.format(len(factors), groups))

    sizes = [len(factors) // groups + (1 if i < len(factors) % groups else 0) for i in range(groups)]
    grouped, start = [], 0
    for size in sizes:
        matrix = np.eye(factors[0].shape[0], dtype=np.complex128)
        for factor in factors[start:start + size]:
            matrix = factor @ matrix
        grouped.append(matrix)
        start += size
    return grouped


def _to_integers(values):
    r"""Rounds reals to integers, switching to Python ints when int64 would overflow."""
    rounded = utils.round_half_away(values)
    if rounded.size == 0 or np.max(np.abs(rounded)) < 2. ** 62:
        return rounded.astype(np.int64)
    return np.array([utils.round_half_away_int(v) for v in np.asarray(values, dtype=np.float64)], dtype=object)


def _check_bound(integers, params, level):
    bound = params.modulus_at(level) // 2
    largest = max((abs(int(v)) for v in integers), default=0)
    if largest >= bound:
        raise EncodingError('Encoded coefficient 2^{:.1f} overflows Q_{} / 2 = 2^{:.1f}'.format(
            math.log2(largest), level, math.log2(bound)))


def encode_coeffs(params, values, scale, level):
    r"""Encodes `n` reals as :math:`\sum_i \lfloor \Delta v_i \rceil Y^i` with :math:`Y = X^{N/n}`.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    values : array-like, shape (n,)
        `n` must be a power of two dividing N.
    scale : float
    level : int

    Returns
    -------
    hexplore.ring.Poly
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if not utils.is_power_of_two(n) or params.degree % n != 0:
        raise EncodingError('Cannot place {} coefficients in degree {}'.format(n, params.degree))

    integers = _to_integers(values * scale)
    _check_bound(integers, params, level)
    coeffs = np.zeros(params.degree, dtype=integers.dtype)
    coeffs[::params.degree // n] = integers
    return ring.Poly.from_integers(params, coeffs, level)


def decode_coeffs(p, scale, n=None):
    r"""Inverse of :func:`encode_coeffs`."""
    n = p.degree if n is None else n
    values = p.to_bigint()[::p.degree // n]
    return np.array([float(v) for v in values]) / scale


def encode_slots(params, values, scale, level):
    r"""Encodes `n <= N/2` complex values into the slots of a plaintext.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    values : array-like, shape (n,)
    scale : float
    level : int

    Returns
    -------
    hexplore.ring.Poly
    """
    values = np.asarray(values, dtype=np.complex128)
    n = values.shape[0]
    if n > params.degree // 2:
        raise EncodingError('At most N/2 = {} slots, got {}'.format(params.degree // 2, n))

    w = encoder_tables(n).inverse(values)
    integers = _to_integers(np.concatenate([w.real, w.imag]) * scale)
    _check_bound(integers, params, level)

    coeffs = np.zeros(params.degree, dtype=integers.dtype)
    coeffs[::params.degree // (2 * n)] = integers
    return ring.Poly.from_integers(params, coeffs, level)


def decode_slots(p, scale, slots=None):
    r"""Inverse of :func:`encode_slots`, returning a complex vector."""
    n = p.degree // 2 if slots is None else slots
    values = p.to_bigint()[::p.degree // (2 * n)]
    values = np.array([float(v) for v in values]) / scale
    return encoder_tables(n).forward(values[:n] + 1j * values[n:])


def encrypt_slots(key, values, scale, level, seed):
    m = encode_slots(key.params, values, scale, level)
    return rlwe.encrypt(key, m, scale, seed, domain=rlwe.SLOTS_DOMAIN)


def encrypt_coeffs(key, values, scale, level, seed):
    m = encode_coeffs(key.params, values, scale, level)
    return rlwe.encrypt(key, m, scale, seed, domain=rlwe.COEFFS_DOMAIN)


def decrypt_slots(sk, ct, slots=None):
    return decode_slots(rlwe.decrypt(sk, ct), ct.scale, slots)


def decrypt_coeffs(sk, ct, n=None):
    return decode_coeffs(rlwe.decrypt(sk, ct), ct.scale, n)


class EvaluationKeys(object):
    r"""Relinearization key and Galois keys of one secret.

    Parameters
    ----------
    relin : hexplore.rlwe.SwitchingKey
    galois : hexplore.rlwe.GaloisKeySet
    """
    def __init__(self, relin=None, galois=None):
        self.relin = relin
        self.galois = rlwe.GaloisKeySet() if galois is None else galois

    @classmethod
    def generate(cls, sk, gadget, rotations, seed, conjugation=False, extra_exponents=(), noise=None):
        r"""Generates the relinearization key and the Galois keys for the given slot rotations.

        `extra_exponents` are raw Galois exponents (e.g. for trace maps) added to the rotation set.
        """
        relin_rng, galois_rng = utils.spawn(seed, 2)
        exponents = [rotation_exponent(sk.params, k) for k in sorted(set(rotations))
                     if k % (sk.params.degree // 2)]
        if conjugation:
            exponents.append(2 * sk.params.degree + CONJUGATION)
        exponents.extend(extra_exponents)

        relin = rlwe.relin_key_gen(sk, gadget, relin_rng, noise=noise)
        galois = rlwe.galois_key_gen(sk, exponents, gadget, galois_rng, noise=noise)
        logger.info('Generated relinearization key and {} Galois keys ({:.1f} MB)'.format(
            len(galois), (relin.size_bytes() + galois.size_bytes()) / 2 ** 20))
        return cls(relin, galois)

    def size_bytes(self):
        return (self.relin.size_bytes() if self.relin is not None else 0) + self.galois.size_bytes()


def rotation_exponent(params, k):
    r"""Galois exponent :math:`5^k \bmod 2N` rotating slots left by `k`."""
    two_n = 2 * params.degree
    return pow(5, k % (params.degree // 2), two_n)


def _align(ct0, ct1):
    level = min(ct0.level, ct1.level)
    return drop_level(ct0, level), drop_level(ct1, level)


def drop_level(ct, level):
    r"""Moves a ciphertext down to `level` without changing its scale."""
    if level > ct.level:
        raise ring.LevelError('Cannot raise level {} to {}'.format(ct.level, level))
    return ct if level == ct.level else ct.drop_to(level)


def match_levels(ct0, ct1):
    return _align(ct0, ct1)


def add_scalar(ct, value):
    r"""Adds a real constant to every slot (slots domain) or to the constant coefficient (coeffs domain)."""
    constant = ring.Poly.constant(ct.params, utils.round_half_away_int(value * ct.scale), ct.level)
    return ct.with_parts([ct.parts[0].to_eval() + constant.to_eval()] + [p.to_eval() for p in ct.parts[1:]])


def add_plain(ct, values):
    r"""Adds a plaintext vector encoded at the ciphertext's scale and level."""
    if ct.domain == rlwe.SLOTS_DOMAIN:
        m = encode_slots(ct.params, values, ct.scale, ct.level)
    else:
        m = encode_coeffs(ct.params, values, ct.scale, ct.level)
    return ct.with_parts([ct.parts[0].to_eval() + m.to_eval()] + [p.to_eval() for p in ct.parts[1:]])


def eval_add(ct, other):
    r"""Adds a ciphertext, a plaintext vector or a scalar. Ciphertexts are first brought to a common level."""
    if isinstance(other, rlwe.Ciphertext):
        return rlwe.add(*_align(ct, other))
    if np.isscalar(other):
        return add_scalar(ct, float(other))
    return add_plain(ct, other)


def eval_sub(ct, other):
    if isinstance(other, rlwe.Ciphertext):
        return rlwe.sub(*_align(ct, other))
    if np.isscalar(other):
        return add_scalar(ct, -float(other))
    return add_plain(ct, -np.asarray(other))


def negate(ct):
    return rlwe.negate(ct)


def _check_mul_capacity(ct, scale):
    if ct.level == 0 or scale >= ct.params.modulus_at(ct.level):
        raise ExhaustedCiphertextError('Ciphertext at level {} (log scale {:.1f}) cannot absorb another product'
                                       .format(ct.level, math.log2(ct.scale)))


def eval_mul(ct, other, rlk=None):
    r"""Multiplies by a ciphertext or a plaintext vector; the result is not rescaled.

    Parameters
    ----------
    ct : hexplore.rlwe.Ciphertext
    other : hexplore.rlwe.Ciphertext or array-like
        Plaintext vectors are encoded with scale :math:`q_\ell`, so a following rescale restores `ct.scale`.
    rlk : hexplore.rlwe.SwitchingKey, optional
        If given, the degree-2 product is relinearized.

    Returns
    -------
    hexplore.rlwe.Ciphertext
        Scale :math:`\Delta_0 \Delta_1`.
    """
    if isinstance(other, rlwe.Ciphertext):
        ct, other = _align(ct, other)
        _check_mul_capacity(ct, ct.scale * other.scale)
        product = rlwe.tensor(ct, other)
        return rlwe.relinearize(product, rlk) if rlk is not None else product

    return mul_plain(ct, other)


def mul_plain(ct, values, scale=None):
    r"""Multiplies by a plaintext vector encoded at `scale` (default :math:`q_\ell`); not rescaled."""
    scale = ct.params.q[ct.level] if scale is None else scale
    _check_mul_capacity(ct, ct.scale * scale)
    if ct.domain == rlwe.SLOTS_DOMAIN:
        m = encode_slots(ct.params, values, scale, ct.level)
    else:
        m = encode_coeffs(ct.params, values, scale, ct.level)
    return rlwe.mul_poly(ct, m, scale=scale)


def eval_rescale(ct):
    r"""Divides by the top prime, dropping one level; the scale is divided by that prime."""
    if ct.level == 0:
        raise ExhaustedCiphertextError('Cannot rescale a ciphertext at level 0')
    prime = ct.params.q[ct.level]
    return ct.with_parts([ring.rescale_round(p) for p in ct.parts], scale=ct.scale / prime)


def mul_const(ct, value, target_scale=None):
    r"""Multiplies by a real constant and rescales, landing exactly on `target_scale` (default: unchanged).

    Consumes one level.
    """
    target_scale = ct.scale if target_scale is None else target_scale
    prime = ct.params.q[ct.level]
    if ct.level == 0:
        raise ExhaustedCiphertextError('Cannot multiply by a constant at level 0')

    factor = utils.round_half_away_int(value * target_scale * prime / ct.scale)
    scaled = rlwe.mul_int(ct, factor)
    scaled = scaled.with_parts(scaled.parts, scale=target_scale * prime)
    return eval_rescale(scaled)


def mul_int(ct, value):
    return rlwe.mul_int(ct, value)


def mul_by_i(ct):
    r"""Multiplies every slot by the imaginary unit (the monomial :math:`X^{N/2}`), free of noise and levels."""
    return rlwe.monomial_mul(ct, ct.params.degree // 2)


def rotate(ct, k, keys):
    r"""Rotates the slots left by `k`."""
    return rlwe.apply_galois(ct, rotation_exponent(ct.params, k), keys.galois)


def conjugate(ct, keys):
    return rlwe.apply_galois(ct, 2 * ct.params.degree + CONJUGATION, keys.galois)


def real_part(ct, keys):
    r"""Ciphertext of the real parts of the slots, obtained as :math:`z + \bar{z}` tagged with twice the scale."""
    total = rlwe.add(ct, conjugate(ct, keys))
    return total.with_parts(total.parts, scale=2 * ct.scale)


def imag_part(ct, keys):
    r"""Ciphertext of the imaginary parts of the slots, :math:`-i (z - \bar{z})` tagged with twice the scale."""
    diff = rlwe.sub(ct, conjugate(ct, keys))
    result = negate(mul_by_i(diff))
    return result.with_parts(result.parts, scale=2 * ct.scale)


def inner_sum(ct, n, keys):
    r"""Puts the sum of the first `n` slots in every slot, with :math:`\log_2 n` rotations (slots repeat with period n).
    """
    utils.log2_int(n)
    result = ct
    step = 1
    while step < n:
        result = rlwe.add(result, rotate(result, step, keys))
        step *= 2
    return result


def default_ratio(num_diagonals):
    r"""Baby-step count: the power of two closest to the square root of the number of diagonals."""
    if num_diagonals <= 1:
        return 1
    return 2 ** int(round(math.log2(math.sqrt(num_diagonals))))


def bsgs_rotations(offsets, slots, ratio=None):
    r"""Rotations used by a baby-step giant-step transform with nonzero diagonals at `offsets`."""
    offsets = sorted({d % slots for d in offsets})
    ratio = default_ratio(len(offsets)) if ratio is None else ratio
    babies = {d % ratio for d in offsets} - {0}
    giants = {d - d % ratio for d in offsets} - {0}
    return sorted(babies | giants)


class LinearTransformPlan(object):
    r"""Baby-step giant-step evaluation of a slot matrix.

    :math:`M v = \sum_g \rho_{g r} \left( \sum_b \rho_{-g r}(\mathrm{diag}_{g r + b}) \odot \rho_b(v) \right)`,
    with :math:`\rho_k` the left rotation by `k`.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    diagonals : dict[int, np.ndarray]
        Nonzero generalized diagonals, :math:`\mathrm{diag}_d[j] = M[j, (j + d) \bmod n]`.
    level : int
        Level of the ciphertexts the plan is applied to.
    scale : float
        Scale of the encoded diagonals; the output scale is `input_scale * scale / q_level`.
    ratio : int, optional
        Baby-step count, defaults to :func:`default_ratio`.

    Attributes
    ----------
    rotations : list[int]
        Every rotation the plan performs.
    """
    def __init__(self, params, diagonals, level, scale=None, ratio=None):
        if not diagonals:
            raise ValueError('A linear transform needs at least one nonzero diagonal')

        first = next(iter(diagonals.values()))
        self.slots = len(first)
        self.params = params
        self.level = level
        self.scale = float(params.q[level]) if scale is None else float(scale)
        self.ratio = default_ratio(len(diagonals)) if ratio is None else ratio

        n, r = self.slots, self.ratio
        self.groups = {}
        for d, diagonal in sorted(diagonals.items()):
            g, b = divmod(d % n, r)
            # Pre-rotated right by g*r so the giant-step rotation lines it up again.
            shifted = np.roll(np.asarray(diagonal, dtype=np.complex128), g * r)
            pt = encode_slots(params, shifted, self.scale, level).to_eval()
            self.groups.setdefault(g, {})[b] = pt

        self.rotations = bsgs_rotations(diagonals, n, r)

    @classmethod
    def from_matrix(cls, params, matrix, level, scale=None, ratio=None, tol=1e-12):
        matrix = np.asarray(matrix, dtype=np.complex128)
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise ValueError('Expected a square matrix, got shape {}'.format(matrix.shape))

        rows = np.arange(n)
        threshold = tol * max(np.max(np.abs(matrix)), 1e-300)
        diagonals = {}
        for d in range(n):
            diagonal = matrix[rows, (rows + d) % n]
            if np.max(np.abs(diagonal)) > threshold:
                diagonals[d] = diagonal

        return cls(params, diagonals, level, scale=scale, ratio=ratio)

    def output_scale(self, input_scale):
        return input_scale * self.scale / self.params.q[self.level]


def linear_transform(ct, plan, keys):
    r"""Applies one plan (one level) or a list of plans (one level each) to a slots-domain ciphertext.

    Parameters
    ----------
    ct : hexplore.rlwe.Ciphertext
    plan : LinearTransformPlan or list[LinearTransformPlan]
    keys : EvaluationKeys
        Must hold the rotation keys listed in `plan.rotations`.

    Returns
    -------
    hexplore.rlwe.Ciphertext
    """
    if isinstance(plan, (list, tuple)):
        for p in plan:
            ct = linear_transform(ct, p, keys)
        return ct

    if ct.domain != rlwe.SLOTS_DOMAIN:
        raise rlwe.DomainTagError('Linear transforms act on slots-domain ciphertexts')
    if ct.level < plan.level:
        raise ring.LevelError('Plan prepared for level {}, ciphertext is at level {}'.format(plan.level, ct.level))
    ct = drop_level(ct, plan.level)
    _check_mul_capacity(ct, ct.scale * plan.scale)

    babies = {0: ct}
    for group in plan.groups.values():
        for b in group:
            if b not in babies:
                babies[b] = rotate(ct, b, keys)

    result = None
    for g, group in sorted(plan.groups.items()):
        inner = None
        for b, pt in sorted(group.items()):
            term = rlwe.mul_poly(babies[b], pt, scale=plan.scale)
            inner = term if inner is None else rlwe.add(inner, term)
        if g:
            inner = rotate(inner, g * plan.ratio, keys)
        result = inner if result is None else rlwe.add(result, inner)

    return eval_rescale(result)


def baby_steps(degree):
    r"""Number of baby-step powers used for a polynomial of the given degree."""
    if degree < 8:
        return 2 ** math.ceil(math.log2(degree + 1))
    return 2 ** math.ceil(math.log2(degree + 1) / 2)


def poly_depth(degree):
    r"""Levels consumed by :func:`eval_poly` for a dense polynomial of the given degree."""
    if degree <= 0:
        return 0
    return _ChebyshevEvaluator.depth(np.ones(degree + 1), baby_steps(degree))


def chebyshev_depth(coeffs):
    r"""Levels consumed by :func:`eval_poly` for these Chebyshev coefficients; zero coefficients may save a level."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=np.float64), 'b')
    if coeffs.size <= 1:
        return 0
    return _ChebyshevEvaluator.depth(coeffs, baby_steps(len(coeffs) - 1))


class _ChebyshevEvaluator(object):
    r"""Chebyshev-basis polynomial evaluation with baby steps :math:`T_1 .. T_m` and giant steps :math:`T_{m 2^k}`.

    The polynomial is split as :math:`p = r + q \cdot T_D` with :math:`T_{D + j} = 2 T_D T_j - T_{D - j}`, and every
    partial result is produced at a precomputed level and scale so that additions always line up exactly.
    """
    def __init__(self, ct, keys, degree):
        self.keys = keys
        self.params = ct.params
        self.top_level = ct.level
        self.domain = ct.domain
        self.powers = {1: ct}

        self.baby = baby_steps(degree)

    @staticmethod
    def power_depth(i):
        return math.ceil(math.log2(i)) if i > 1 else 0

    def power(self, i):
        if i in self.powers:
            return self.powers[i]

        if utils.is_power_of_two(i):
            a = b = i // 2
        else:
            a = 2 ** (i.bit_length() - 1)
            b = i - a
        c = a - b

        ta, tb = self.power(a), self.power(b)
        ta, tb = _align(ta, tb)
        product = rlwe.relinearize(rlwe.tensor(ta, tb), self.keys.relin)
        product = rlwe.mul_int(product, 2)

        if c == 0:
            product = add_scalar(product, -1.)
        else:
            tc = drop_level(self.power(c), product.level)
            lift = utils.round_half_away_int(product.scale / tc.scale)
            tc = rlwe.mul_int(tc, lift)
            product = rlwe.sub(product, tc.with_parts(tc.parts, scale=product.scale))

        self.powers[i] = eval_rescale(product)
        return self.powers[i]

    @classmethod
    def depth(cls, coeffs, baby):
        degree = len(coeffs) - 1
        if degree < baby:
            used = [i for i in range(1, degree + 1) if coeffs[i] != 0]
            return cls.power_depth(max(used)) + 1 if used else 0

        split = cls.split_degree(degree, baby)
        q, r = cls.split(coeffs, split)
        return max(cls.depth(q, baby) + 1, cls.power_depth(split) + 1, cls.depth(r, baby))

    @staticmethod
    def split_degree(degree, baby):
        split = baby
        while 2 * split <= degree:
            split *= 2
        return split

    @staticmethod
    def split(coeffs, split):
        degree = len(coeffs) - 1
        q = np.zeros(degree - split + 1)
        q[0] = coeffs[split]
        q[1:] = 2 * coeffs[split + 1:]

        r = np.array(coeffs[:split], dtype=np.float64)
        for j in range(1, degree - split + 1):
            r[split - j] -= coeffs[split + j]
        return q, r

    def evaluate(self, coeffs, target_scale, target_level):
        degree = len(coeffs) - 1
        if degree < self.baby:
            return self.linear_combination(coeffs, target_scale, target_level)

        split = self.split_degree(degree, self.baby)
        q_coeffs, r_coeffs = self.split(coeffs, split)

        giant = drop_level(self.power(split), target_level + 1)
        prime = self.params.q[target_level + 1]
        q_ct = self.evaluate(q_coeffs, target_scale * prime / giant.scale, target_level + 1)
        product = rlwe.relinearize(rlwe.tensor(q_ct, giant), self.keys.relin)
        product = eval_rescale(product)

        r_ct = self.evaluate(r_coeffs, target_scale, target_level)
        return rlwe.add(r_ct.with_parts(r_ct.parts, scale=product.scale), product)

    def linear_combination(self, coeffs, target_scale, target_level):
        level = target_level + 1
        prime = self.params.q[level]
        scale = target_scale * prime

        acc = rlwe.Ciphertext.zero(self.params, level, scale, self.domain)
        for i in range(1, len(coeffs)):
            if coeffs[i] == 0:
                continue
            t = drop_level(self.power(i), level)
            factor = utils.round_half_away_int(coeffs[i] * scale / t.scale)
            term = rlwe.mul_int(t, factor)
            acc = rlwe.add(acc, term.with_parts(term.parts, scale=scale))

        acc = add_scalar(acc, float(coeffs[0]))
        return eval_rescale(acc)


def eval_poly(ct, coeffs, keys, basis='chebyshev', interval=(-1., 1.), target_scale=None):
    r"""Evaluates a polynomial on every slot.

    Parameters
    ----------
    ct : hexplore.rlwe.Ciphertext
    coeffs : array-like
        Coefficients in the Chebyshev basis of `interval`, or monomial coefficients if `basis == 'power'`.
    keys : EvaluationKeys
        Only the relinearization key is used.
    basis : str
        `'chebyshev'` or `'power'`.
    interval : tuple[float, float]
        Domain the Chebyshev basis is defined on; mapping it onto [-1, 1] costs one extra level.
    target_scale : float, optional
        Scale of the result, defaults to the input scale.

    Returns
    -------
    hexplore.rlwe.Ciphertext
        At level `ct.level - poly_depth(degree)` (one lower when `interval` is not [-1, 1]).
    """
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=np.float64), 'b')
    if coeffs.size == 0:
        coeffs = np.zeros(1)
    if basis == 'power':
        coeffs = chebyshev.poly2cheb(coeffs)
    elif basis != 'chebyshev':
        raise ValueError('Unknown basis {}'.format(basis))

    target_scale = ct.scale if target_scale is None else target_scale
    degree = len(coeffs) - 1
    if degree == 0:
        zero = rlwe.Ciphertext.zero(ct.params, ct.level, target_scale, ct.domain)
        return add_scalar(zero, float(coeffs[0]))

    a, b = interval
    remap = (a, b) != (-1., 1.)
    depth = _ChebyshevEvaluator.depth(coeffs, baby_steps(degree))
    if ct.level < depth + remap:
        raise ring.LevelError('Degree-{} polynomial needs {} levels, ciphertext has {}'.format(
            degree, depth + remap, ct.level))

    if remap:
        ct = add_scalar(mul_const(ct, 2. / (b - a)), -(a + b) / (b - a))
    prime = ct.params.q[ct.level]
    if not 0.5 <= ct.scale / prime <= 2.:
        logger.warning('Polynomial input at scale 2^{:.2f} is off the prime 2^{:.2f}, power scales will drift'.format(
            math.log2(ct.scale), math.log2(prime)))
    evaluator = _ChebyshevEvaluator(ct, keys, degree)

    result = evaluator.evaluate(coeffs, target_scale, ct.level - depth)
    logger.debug('Evaluated degree-{} polynomial, level {} -> {}'.format(degree, ct.level, result.level))
    return result


def chebyshev_interpolant(func, degree, interval=(-1., 1.)):
    r"""Chebyshev coefficients of the degree-`degree` interpolant of `func` at the Chebyshev nodes of `interval`."""
    return chebyshev.Chebyshev.interpolate(func, degree, domain=list(interval)).coef
