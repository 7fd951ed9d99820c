r"""Negacyclic polynomial ring arithmetic over an RNS modulus chain.

Polynomials live in :math:`\mathbb{Z}_Q[X]/(X^N + 1)` and are stored as one row of residues per prime. Products are
taken in evaluation (NTT) form, everything else works on either form.
"""
import logging
import math

import numpy as np
import sympy

from hexplore import utils


logger = logging.getLogger('hexplore')

# Residues are int64 and products use a float64 quotient estimate, which stays exact below 2**51.
MAX_PRIME_BITS = 50
MIN_DEGREE = 16

DEFAULT_SIGMA = 3.2
TAIL_CUT = 6.

COEFFS = 'coeffs'
EVAL = 'eval'


class ParameterError(ValueError):
    r"""Raised for ring or noise parameters that violate their invariants."""


class LevelError(ValueError):
    r"""Raised when an operation needs more (or different) modulus levels than an operand has."""


class InvalidAutomorphismError(ValueError):
    r"""Raised for automorphism exponents that are not units modulo 2N."""


def mulmod(a, b, q, qf=None, bf=None):
    r"""Element-wise :math:`a \cdot b \bmod q` for int64 residues below 2**51.

    The quotient is estimated in double precision and the remainder is computed with wrapping int64 arithmetic, the
    estimate is off by at most one so two conditional corrections suffice.
    """
    if qf is None:
        qf = np.asarray(q, dtype=np.float64)
    if bf is None:
        bf = np.asarray(b, dtype=np.float64)

    quot = np.floor(a.astype(np.float64) * bf / qf).astype(np.int64)
    r = a * b - quot * q
    r = np.where(r < 0, r + q, r)
    r = np.where(r >= q, r - q, r)
    return r


def generate_primes(degree, bits, count, exclude=()):
    r"""Finds `count` primes :math:`q \equiv 1 \bmod 2N` as close as possible to `2**bits`.

    Parameters
    ----------
    degree : int
        Ring degree N.
    bits : int
        Target bit size, at most :data:`MAX_PRIME_BITS`.
    count : int
        Number of primes to return.
    exclude : iterable[int]
        Primes that are already in use elsewhere in the chain.

    Returns
    -------
    list[int]
    """
    step = 2 * degree
    if bits > MAX_PRIME_BITS:
        raise ParameterError('Primes are limited to {} bits, got {}'.format(MAX_PRIME_BITS, bits))
    if (2 ** bits) % step != 0:
        raise ParameterError('2**{} is not a multiple of 2N = {}'.format(bits, step))

    exclude = set(exclude)
    base = 2 ** bits + 1
    primes = []
    k = 0
    while len(primes) < count:
        candidates = [base] if k == 0 else [base - k * step, base + k * step]
        for candidate in candidates:
            if candidate <= step or candidate.bit_length() > MAX_PRIME_BITS:
                continue
            if candidate in exclude or candidate in primes:
                continue
            if sympy.isprime(candidate):
                primes.append(candidate)
                if len(primes) == count:
                    break
        k += 1

        if base - k * step <= step and (base + k * step).bit_length() > MAX_PRIME_BITS:
            raise ParameterError('Ran out of {}-bit primes for N = {}'.format(bits, degree))

    return primes


def primitive_root_of_unity(order, q):
    r"""Finds a primitive `order`-th root of unity modulo `q`, `order` a power of two dividing `q - 1`."""
    if (q - 1) % order != 0:
        raise ParameterError('{} has no primitive {}-th root of unity'.format(q, order))

    for x in range(2, q):
        root = pow(x, (q - 1) // order, q)
        if pow(root, order // 2, q) == q - 1:
            return root

    raise ParameterError('No primitive {}-th root of unity found modulo {}'.format(order, q))


def crt_reconstruct(rows, moduli, centre=True):
    r"""Reconstructs integers from residue rows with Python big integers.

    Parameters
    ----------
    rows : np.ndarray, shape (num_moduli, N)
    moduli : list[int]
    centre : bool
        If True, the result is centred in (-M/2, M/2].

    Returns
    -------
    list[int]
    """
    modulus = math.prod(moduli)
    basis = []
    for q in moduli:
        m_i = modulus // q
        basis.append(m_i * pow(m_i, -1, q))

    values = []
    for column in np.asarray(rows).T:
        value = sum(int(r) * b for r, b in zip(column, basis)) % modulus
        if centre and value > modulus // 2:
            value -= modulus
        values.append(value)

    return values


class _RowTables(object):
    r"""Per-row moduli and NTT twiddles gathered for one (level, extended) layout."""
    def __init__(self, moduli, psi_rev, psi_inv_rev, n_inv):
        self.moduli = list(moduli)
        self.q = np.array(moduli, dtype=np.int64)
        self.qf = self.q.astype(np.float64)

        self.psi = psi_rev
        self.psi_f = psi_rev.astype(np.float64)
        self.psi_inv = psi_inv_rev
        self.psi_inv_f = psi_inv_rev.astype(np.float64)

        self.n_inv = n_inv
        self.n_inv_f = n_inv.astype(np.float64)

    def col(self, extra_dims=0):
        r"""Moduli as a column that broadcasts against `(rows, *[1] * extra_dims)`."""
        shape = (-1,) + (1,) * extra_dims
        return self.q.reshape(shape), self.qf.reshape(shape)


class RingParams(object):
    r"""Ring degree and RNS prime chain :math:`q_0, \dots, q_L` followed by the special primes forming :math:`P`.

    Parameters
    ----------
    degree : int
        Power-of-two ring degree N, at least :data:`MIN_DEGREE`.
    moduli : list[int]
        Distinct NTT-friendly primes (:math:`q \equiv 1 \bmod 2N`). The last `special_moduli_count` form :math:`P`.
    special_moduli_count : int
        Number of trailing primes forming the auxiliary modulus used in keyswitching.

    Attributes
    ----------
    q : tuple[int]
        Ciphertext primes, level `l` uses `q[:l + 1]`.
    p : tuple[int]
        Special primes.
    Q : int
        Product of all ciphertext primes.
    P : int
        Product of special primes.
    max_level : int
        Index of the highest ciphertext prime.
    """
    def __init__(self, degree, moduli, special_moduli_count=1):
        if not utils.is_power_of_two(degree) or degree < MIN_DEGREE:
            raise ParameterError('Ring degree must be a power of two >= {}, got {}'.format(MIN_DEGREE, degree))

        moduli = [int(q) for q in moduli]
        if len(set(moduli)) != len(moduli):
            raise ParameterError('Moduli must be distinct, got {}'.format(moduli))
        if not 0 <= special_moduli_count < len(moduli):
            raise ParameterError('Need at least one ciphertext prime besides {} special primes'
                                 .format(special_moduli_count))

        for q in moduli:
            if q.bit_length() > MAX_PRIME_BITS:
                raise ParameterError('Prime {} exceeds {} bits'.format(q, MAX_PRIME_BITS))
            if (q - 1) % (2 * degree) != 0:
                raise ParameterError('Prime {} has no 2N-th root of unity for N = {}'.format(q, degree))
            if not sympy.isprime(q):
                raise ParameterError('{} is not prime'.format(q))

        self.degree = degree
        self.moduli = tuple(moduli)
        self.special_moduli_count = special_moduli_count

        num_q = len(moduli) - special_moduli_count
        self.q = self.moduli[:num_q]
        self.p = self.moduli[num_q:]
        self.max_level = num_q - 1

        self.Q = math.prod(self.q)
        self.P = math.prod(self.p)

        self._build_ntt_tables()
        self._row_tables = {}
        self._subrings = {}

    @classmethod
    def from_bit_sizes(cls, degree, bit_sizes, special_bit_sizes):
        r"""Generates a chain with one prime per entry of `bit_sizes`, then the special primes."""
        moduli = []
        for bits in list(bit_sizes) + list(special_bit_sizes):
            moduli.extend(generate_primes(degree, bits, 1, exclude=moduli))

        return cls(degree, moduli, special_moduli_count=len(special_bit_sizes))

    def _build_ntt_tables(self):
        n = self.degree
        bit_rev = utils.bit_reverse_permutation(n)

        psi_rev = np.empty((len(self.moduli), n), dtype=np.int64)
        psi_inv_rev = np.empty((len(self.moduli), n), dtype=np.int64)
        n_inv = np.empty(len(self.moduli), dtype=np.int64)

        for i, q in enumerate(self.moduli):
            psi = primitive_root_of_unity(2 * n, q)
            psi_inv = pow(psi, -1, q)

            powers = np.empty(n, dtype=np.int64)
            inv_powers = np.empty(n, dtype=np.int64)
            x, y = 1, 1
            for j in range(n):
                powers[j], inv_powers[j] = x, y
                x, y = x * psi % q, y * psi_inv % q

            psi_rev[i] = powers[bit_rev]
            psi_inv_rev[i] = inv_powers[bit_rev]
            n_inv[i] = pow(n, -1, q)

        self._psi_rev = psi_rev
        self._psi_inv_rev = psi_inv_rev
        self._n_inv = n_inv

    def row_indices(self, level, extended=False):
        r"""Indices into :attr:`moduli` of the rows a polynomial at `level` carries."""
        if not 0 <= level <= self.max_level:
            raise LevelError('Level {} outside [0, {}]'.format(level, self.max_level))

        indices = list(range(level + 1))
        if extended:
            indices += list(range(len(self.q), len(self.moduli)))
        return indices

    def tables(self, level, extended=False):
        key = (level, extended)
        if key not in self._row_tables:
            idx = self.row_indices(level, extended)
            self._row_tables[key] = _RowTables(
                [self.moduli[i] for i in idx], self._psi_rev[idx], self._psi_inv_rev[idx], self._n_inv[idx])

        return self._row_tables[key]

    def modulus_at(self, level):
        r"""Product :math:`Q_\ell` of the primes active at `level`."""
        return math.prod(self.q[:level + 1])

    def subring(self, degree, levels=None):
        r"""Parameters for a ring of smaller `degree` sharing the first `levels` primes and all special primes."""
        levels = len(self.q) if levels is None else levels
        key = (degree, levels)
        if key not in self._subrings:
            self._subrings[key] = RingParams(degree, list(self.q[:levels]) + list(self.p), self.special_moduli_count)
        return self._subrings[key]

    def __eq__(self, other):
        return (isinstance(other, RingParams) and self.degree == other.degree and self.moduli == other.moduli
                and self.special_moduli_count == other.special_moduli_count)

    def __hash__(self):
        return hash((self.degree, self.moduli, self.special_moduli_count))

    def __repr__(self):
        return 'RingParams(N={}, log Q={:.1f}, log P={:.1f}, L={})'.format(
            self.degree, math.log2(self.Q), math.log2(self.P) if self.P > 1 else 0., self.max_level)


class NoiseParams(object):
    r"""Error and secret distributions.

    Parameters
    ----------
    gaussian_sigma : float
        Standard deviation of the rounded Gaussian error, tail cut at :data:`TAIL_CUT` sigma.
    secret_hamming_weight : int
        Number of nonzero ternary coefficients in secrets.
    """
    def __init__(self, secret_hamming_weight, gaussian_sigma=DEFAULT_SIGMA):
        if gaussian_sigma <= 0:
            raise ParameterError('sigma must be positive, got {}'.format(gaussian_sigma))
        if secret_hamming_weight <= 0:
            raise ParameterError('Hamming weight must be positive, got {}'.format(secret_hamming_weight))

        self.gaussian_sigma = gaussian_sigma
        self.secret_hamming_weight = secret_hamming_weight

    def validate(self, params):
        if self.secret_hamming_weight > params.degree:
            raise ParameterError('Hamming weight {} exceeds N = {}'.format(self.secret_hamming_weight, params.degree))

    @property
    def error_bound(self):
        return TAIL_CUT * self.gaussian_sigma


class Poly(object):
    r"""Ring element as residue rows.

    Parameters
    ----------
    params : RingParams
    coeffs : np.ndarray, shape (rows, N)
        Residues in [0, q_i). Rows are the primes of `level`, followed by the special primes if `extended`.
    form : str
        :data:`COEFFS` or :data:`EVAL`.
    extended : bool
        Whether rows for the special primes are present (modulus :math:`Q_\ell P`).
    """
    def __init__(self, params, coeffs, form=COEFFS, extended=False):
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.ndim != 2 or coeffs.shape[1] != params.degree:
            raise ValueError('Expected residue rows of length {}, got shape {}'.format(params.degree, coeffs.shape))

        num_special = params.special_moduli_count if extended else 0
        level = coeffs.shape[0] - num_special - 1
        if not 0 <= level <= params.max_level:
            raise LevelError('{} rows do not match any level of {}'.format(coeffs.shape[0], params))

        self.params = params
        self.coeffs = coeffs
        self.form = form
        self.extended = extended
        self.level = level

    @classmethod
    def zero(cls, params, level, extended=False, form=COEFFS):
        rows = len(params.row_indices(level, extended))
        return cls(params, np.zeros((rows, params.degree), dtype=np.int64), form=form, extended=extended)

    @classmethod
    def from_integers(cls, params, values, level, extended=False):
        r"""Embeds a signed integer coefficient vector (int64 or Python ints) into every row."""
        tab = params.tables(level, extended)
        values = np.asarray(values)

        if values.dtype == object or (values.size and np.max(np.abs(values.astype(np.float64))) >= 2. ** 62):
            rows = np.array([[int(v) % q for v in values] for q in tab.moduli], dtype=np.int64)
        else:
            values = values.astype(np.int64)
            rows = np.mod(values[None, :], tab.q[:, None])

        return cls(params, rows, form=COEFFS, extended=extended)

    @classmethod
    def constant(cls, params, value, level, extended=False):
        values = np.zeros(params.degree, dtype=object)
        values[0] = int(value)
        return cls.from_integers(params, values, level, extended)

    @property
    def degree(self):
        return self.params.degree

    @property
    def tables(self):
        return self.params.tables(self.level, self.extended)

    def copy(self):
        return Poly(self.params, self.coeffs.copy(), form=self.form, extended=self.extended)

    def like(self, coeffs, form=None):
        r"""New polynomial with the same layout as `self`."""
        return Poly(self.params, coeffs, form=self.form if form is None else form, extended=self.extended)

    def _check_compatible(self, other):
        if self.params.degree != other.params.degree:
            raise ValueError('Ring degree mismatch: {} != {}'.format(self.params.degree, other.params.degree))
        if self.level != other.level or self.extended != other.extended:
            raise LevelError('Level mismatch: ({}, {}) != ({}, {})'.format(
                self.level, self.extended, other.level, other.extended))
        if self.form != other.form:
            raise ValueError('Form mismatch: {} != {}'.format(self.form, other.form))

    def __add__(self, other):
        self._check_compatible(other)
        q = self.tables.q[:, None]
        out = self.coeffs + other.coeffs
        return self.like(np.where(out >= q, out - q, out))

    def __sub__(self, other):
        self._check_compatible(other)
        q = self.tables.q[:, None]
        out = self.coeffs - other.coeffs
        return self.like(np.where(out < 0, out + q, out))

    def __neg__(self):
        q = self.tables.q[:, None]
        return self.like(np.where(self.coeffs == 0, 0, q - self.coeffs))

    def __mul__(self, other):
        tab = self.tables
        q, qf = tab.col(1)

        if isinstance(other, Poly):
            self._check_compatible(other)
            if self.form != EVAL:
                raise ValueError('Polynomial products are taken in evaluation form')
            return self.like(mulmod(self.coeffs, other.coeffs, q, qf))

        if isinstance(other, (int, np.integer)):
            return self.mul_row_scalars([int(other) % m for m in tab.moduli])

        return NotImplemented

    __rmul__ = __mul__

    def mul_row_scalars(self, scalars):
        r"""Multiplies row `i` by `scalars[i]` (already reduced modulo that row's prime)."""
        tab = self.tables
        q, qf = tab.col(1)
        s = np.array(scalars, dtype=np.int64)[:, None]
        return self.like(mulmod(self.coeffs, s, q, qf))

    def to_eval(self):
        return self if self.form == EVAL else ntt_transform(self, 'forward')

    def to_coeffs(self):
        return self if self.form == COEFFS else ntt_transform(self, 'inverse')

    def drop_to(self, level):
        r"""Discards the primes above `level` (a modulus switch without rounding)."""
        if level > self.level:
            raise LevelError('Cannot raise level {} to {} by dropping primes'.format(self.level, level))

        num_special = self.params.special_moduli_count if self.extended else 0
        rows = np.concatenate([self.coeffs[:level + 1], self.coeffs[self.level + 1:self.level + 1 + num_special]])
        return self.like(rows)

    def restrict(self, level, extended):
        r"""Selects the rows for `(level, extended)` out of a polynomial carrying a superset of them."""
        if level > self.level or (extended and not self.extended):
            raise LevelError('Polynomial at ({}, {}) cannot provide ({}, {})'.format(
                self.level, self.extended, level, extended))

        rows = [self.coeffs[:level + 1]]
        if extended:
            rows.append(self.coeffs[self.level + 1:])
        return Poly(self.params, np.concatenate(rows), form=self.form, extended=extended)

    def monomial_mul(self, k):
        r"""Multiplies by :math:`X^k` (negacyclic rotation with sign flips), `k` taken modulo 2N."""
        n = self.degree
        k %= 2 * n
        negate_all = k >= n
        k %= n

        p = self.to_coeffs()
        q = p.tables.q[:, None]
        out = np.roll(p.coeffs, k, axis=1)
        if k:
            out[:, :k] = np.where(out[:, :k] == 0, 0, q - out[:, :k])
        if negate_all:
            out = np.where(out == 0, 0, q - out)

        result = p.like(out)
        return result.to_eval() if self.form == EVAL else result

    def to_bigint(self, centre=True):
        r"""CRT-reconstructs the coefficients as Python integers modulo :math:`Q_\ell` (times P when extended)."""
        p = self.to_coeffs()
        return crt_reconstruct(p.coeffs, p.tables.moduli, centre=centre)

    def infinity_norm(self):
        return max(abs(v) for v in self.to_bigint())

    def __eq__(self, other):
        return (isinstance(other, Poly) and self.params == other.params and self.form == other.form
                and self.extended == other.extended and np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self):
        return 'Poly(N={}, level={}, form={}, extended={})'.format(self.degree, self.level, self.form, self.extended)


def _ntt_forward(a, tab):
    r"""Cooley-Tukey negacyclic NTT over the last axis; rows (axis -2) follow `tab`. Output in bit-reversed order."""
    a = np.array(a, dtype=np.int64, copy=True)
    n = a.shape[-1]
    q, qf = tab.col(2)

    t, m = n, 1
    while m < n:
        t //= 2
        view = a.reshape(a.shape[:-1] + (m, 2, t))
        s = tab.psi[:, m:2 * m][:, :, None]
        sf = tab.psi_f[:, m:2 * m][:, :, None]

        u = view[..., 0, :]
        v = mulmod(view[..., 1, :], s, q, qf, sf)
        upper = u + v
        lower = u - v
        view[..., 0, :] = np.where(upper >= q, upper - q, upper)
        view[..., 1, :] = np.where(lower < 0, lower + q, lower)
        m *= 2

    return a


def _ntt_inverse(a, tab):
    r"""Gentleman-Sande inverse of :func:`_ntt_forward`, including the scaling by :math:`N^{-1}`."""
    a = np.array(a, dtype=np.int64, copy=True)
    n = a.shape[-1]
    q, qf = tab.col(2)

    t, m = 1, n
    while m > 1:
        h = m // 2
        view = a.reshape(a.shape[:-1] + (h, 2, t))
        s = tab.psi_inv[:, h:2 * h][:, :, None]
        sf = tab.psi_inv_f[:, h:2 * h][:, :, None]

        u = view[..., 0, :]
        v = view[..., 1, :]
        upper = u + v
        lower = u - v
        lower = np.where(lower < 0, lower + q, lower)
        view[..., 0, :] = np.where(upper >= q, upper - q, upper)
        view[..., 1, :] = mulmod(lower, s, q, qf, sf)
        t *= 2
        m = h

    q, qf = tab.col(1)
    return mulmod(a, tab.n_inv[:, None], q, qf, tab.n_inv_f[:, None])


def ntt_rows(array, tab, direction):
    r"""Applies the NTT to a batch of residue arrays shaped `(..., rows, N)` laid out like `tab`."""
    if direction == 'forward':
        return _ntt_forward(array, tab)
    elif direction == 'inverse':
        return _ntt_inverse(array, tab)
    raise ValueError('Unknown NTT direction {}'.format(direction))


def ntt_transform(p, direction):
    r"""Negacyclic number-theoretic transform of every residue row.

    Parameters
    ----------
    p : Poly
        Must be in coefficient form for `'forward'` and evaluation form for `'inverse'`.
    direction : str
        `'forward'` or `'inverse'`.

    Returns
    -------
    Poly
        The transformed polynomial with its form flag flipped.
    """
    expected = COEFFS if direction == 'forward' else EVAL
    if p.form != expected:
        raise ValueError('{} NTT expects {} form, got {}'.format(direction, expected, p.form))

    coeffs = ntt_rows(p.coeffs, p.tables, direction)
    return p.like(coeffs, form=EVAL if direction == 'forward' else COEFFS)


def automorphism_permutation(degree, exponent):
    r"""Destination indices and sign flips of :math:`X^i \mapsto X^{i \cdot g}` modulo :math:`X^N + 1`."""
    if math.gcd(exponent, 2 * degree) != 1:
        raise InvalidAutomorphismError('Exponent {} is not a unit modulo 2N = {}'.format(exponent, 2 * degree))

    images = (np.arange(degree, dtype=np.int64) * (exponent % (2 * degree))) % (2 * degree)
    return images % degree, images >= degree


def automorphism_apply(p, exponent):
    r"""Evaluates :math:`p(X^g)` modulo :math:`X^N + 1` for an odd exponent `g`.

    Parameters
    ----------
    p : Poly
    exponent : int
        Odd integer, taken modulo 2N.

    Returns
    -------
    Poly
        Same form as `p`.
    """
    dest, negate = automorphism_permutation(p.degree, exponent)

    c = p.to_coeffs()
    q = c.tables.q[:, None]
    values = np.where(negate[None, :] & (c.coeffs != 0), q - c.coeffs, c.coeffs)
    out = np.empty_like(values)
    out[:, dest] = values

    result = c.like(out)
    return result.to_eval() if p.form == EVAL else result


def sample(kind, params, seed, level=None, extended=False, sigma=DEFAULT_SIGMA, hamming_weight=None):
    r"""Samples a ring element.

    Parameters
    ----------
    kind : str
        `'uniform'` (uniform residues per prime), `'gaussian'` (rounded continuous Gaussian, tail cut at 6 sigma) or
        `'ternary'` (exactly `hamming_weight` coefficients in {-1, +1}).
    params : RingParams
    seed : int or np.random.Generator
    level : int
        Defaults to the maximum level.
    extended : bool
        Whether to include the special primes.
    sigma : float
    hamming_weight : int

    Returns
    -------
    Poly
        In coefficient form.
    """
    rng = utils.as_generator(seed)
    level = params.max_level if level is None else level
    n = params.degree

    if kind == 'uniform':
        tab = params.tables(level, extended)
        rows = rng.integers(0, tab.q[:, None], size=(len(tab.moduli), n), dtype=np.int64)
        return Poly(params, rows, form=COEFFS, extended=extended)

    elif kind == 'gaussian':
        if sigma <= 0:
            raise ParameterError('sigma must be positive, got {}'.format(sigma))
        bound = TAIL_CUT * sigma
        values = np.clip(utils.round_half_away(rng.normal(0., sigma, size=n)), -math.floor(bound), math.floor(bound))
        return Poly.from_integers(params, values.astype(np.int64), level, extended)

    elif kind == 'ternary':
        if hamming_weight is None or not 0 <= hamming_weight <= n:
            raise ParameterError('Hamming weight must be in [0, {}], got {}'.format(n, hamming_weight))
        values = np.zeros(n, dtype=np.int64)
        positions = rng.choice(n, size=hamming_weight, replace=False)
        values[positions] = rng.choice(np.array([-1, 1], dtype=np.int64), size=hamming_weight)
        return Poly.from_integers(params, values, level, extended)

    raise ValueError('Unknown distribution {}'.format(kind))


def rescale_round(p):
    r"""Divides by the top prime :math:`q_\ell` with rounding half away from zero, dropping to level :math:`\ell - 1`.

    Parameters
    ----------
    p : Poly
        Not extended, at level >= 1.

    Returns
    -------
    Poly
        Same form as `p`.
    """
    if p.extended:
        raise LevelError('Rescale a polynomial after removing the special primes')
    if p.level < 1:
        raise LevelError('Cannot rescale a polynomial at level 0')

    c = p.to_coeffs()
    top = c.params.q[c.level]
    remainder = utils.centred(c.coeffs[-1], top)

    lower = c.drop_to(c.level - 1)
    tab = lower.tables
    q, qf = tab.col(1)
    diff = lower.coeffs - np.mod(remainder[None, :], q)
    diff = np.where(diff < 0, diff + q, diff)
    inv = np.array([pow(top, -1, m) for m in tab.moduli], dtype=np.int64)[:, None]
    result = lower.like(mulmod(diff, inv, q, qf))

    return result.to_eval() if p.form == EVAL else result


def mod_down(p):
    r"""Divides an extended polynomial by the special modulus :math:`P` and removes the special rows.

    With a single special prime this is exact rounding; with several it uses a fast base conversion whose result is
    off by at most the number of special primes.
    """
    if not p.extended:
        raise LevelError('mod_down expects a polynomial over Q_l * P')

    c = p.to_coeffs()
    params = c.params
    special = c.coeffs[c.level + 1:]
    lower_tab = params.tables(c.level, False)
    q, qf = lower_tab.col(1)

    # Centred representative of (x mod P) spread over the ciphertext primes.
    conv = np.zeros((c.level + 1, params.degree), dtype=np.int64)
    for k, pk in enumerate(params.p):
        hat = params.P // pk
        v = utils.centred(mulmod(special[k], np.int64(pow(hat, -1, pk) % pk), np.int64(pk)), pk)
        hat_mod = np.array([hat % m for m in lower_tab.moduli], dtype=np.int64)[:, None]
        term = mulmod(np.mod(v[None, :], q), hat_mod, q, qf)
        conv = conv + term
        conv = np.where(conv >= q, conv - q, conv)

    diff = c.coeffs[:c.level + 1] - conv
    diff = np.where(diff < 0, diff + q, diff)
    inv = np.array([pow(params.P, -1, m) for m in lower_tab.moduli], dtype=np.int64)[:, None]
    result = Poly(params, mulmod(diff, inv, q, qf), form=COEFFS, extended=False)

    return result.to_eval() if p.form == EVAL else result


def raise_to_extended(p):
    r"""Multiplies by :math:`P` and adds zero special rows, mapping :math:`Q_\ell` into :math:`Q_\ell P` exactly."""
    if p.extended:
        return p
    params = p.params
    lifted = p.mul_row_scalars([params.P % m for m in p.tables.moduli])
    special = np.zeros((params.special_moduli_count, params.degree), dtype=np.int64)
    return Poly(params, np.concatenate([lifted.coeffs, special]), form=p.form, extended=True)
