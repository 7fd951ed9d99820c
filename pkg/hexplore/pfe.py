r"""Private evaluation of tabulated scoring functions.

A function on :math:`[a, b)` is tabulated on the grid :math:`x_k = a + k (b - a) / n` and encoded as the test vector
:math:`u_f = f(x_0) - \sum_{i=1}^{n-1} f(x_{n-i}) X^i`, so that the constant coefficient of :math:`u_f \cdot X^k` is
:math:`f(x_k)`. An input is looked up by one plaintext monomial product, and the scores of a database row are the sum of
the lookups of its attributes.
"""
from concurrent import futures
import logging

import numpy as np

from hexplore import ckks
from hexplore import rlwe
from hexplore import utils


logger = logging.getLogger('hexplore')


class DomainError(ValueError):
    r"""Raised for inputs outside a scoring function's domain, with the offending row and column when known."""
    def __init__(self, message, row=None, col=None):
        if row is not None:
            message = 'row {}, column {}: {}'.format(row, col, message)
        super(DomainError, self).__init__(message)
        self.row = row
        self.col = col


class FunctionSpec(object):
    r"""A scoring function tabulated on `n` grid points of :math:`[a, b)`.

    Parameters
    ----------
    lower, upper : float
        Domain bounds a < b.
    table : array-like, shape (n,)
        :math:`f(a + k (b - a) / n)` for :math:`k = 0, \dots, n - 1`.
    name : str
    """
    def __init__(self, lower, upper, table, name='f'):
        table = np.asarray(table, dtype=np.float64)
        if not lower < upper:
            raise DomainError('Empty domain [{}, {})'.format(lower, upper))
        if table.ndim != 1 or not utils.is_power_of_two(table.shape[0]):
            raise ValueError('Table length must be a power of two, got shape {}'.format(table.shape))
        if not np.all(np.isfinite(table)):
            raise ValueError('Table of {} has non-finite values'.format(name))

        self.lower = float(lower)
        self.upper = float(upper)
        self.table = table
        self.name = name

    @classmethod
    def from_function(cls, func, lower, upper, n, name='f'):
        return cls(lower, upper, [func(x) for x in grid(lower, upper, n)], name=name)

    @property
    def n(self):
        return self.table.shape[0]

    @property
    def max_value(self):
        return float(np.max(self.table))

    def __call__(self, x):
        r"""Plaintext lookup, the value the encrypted evaluation reproduces."""
        return self.table[encode_input(x, self.lower, self.upper, self.n)]


def grid(lower, upper, n):
    return lower + np.arange(n) * (upper - lower) / n


def encode_input(x, lower, upper, n):
    r"""Monomial exponent :math:`\lfloor n g(x) \rceil` of an input, with :math:`g(x) = (x - a) / (b - a)`.

    The exponent n (inputs within half a cell of b) is clamped to n - 1, since :math:`X^n = -1`.

    Parameters
    ----------
    x : float
    lower, upper : float
    n : int

    Returns
    -------
    int
    """
    if not lower <= x < upper:
        raise DomainError('{} outside [{}, {})'.format(x, lower, upper))
    g = 0.5 * ((2 * x - upper - lower) / (upper - lower) + 1)
    return min(utils.round_half_away_int(n * g), n - 1)


def table_coefficients(table):
    r"""Coefficients of :math:`u_f`: the first table value, then the remaining values negated in reverse order."""
    table = np.asarray(table, dtype=np.float64)
    u = np.empty_like(table)
    u[0] = table[0]
    u[1:] = -table[:0:-1]
    return u


class TestVector(object):
    r"""Encrypted test vector of one scoring function.

    Only the domain and the grid size travel with the ciphertext; the table is hidden in it.

    Parameters
    ----------
    ct : hexplore.rlwe.Ciphertext
    lower, upper : float
    name : str
    """
    __test__ = False

    def __init__(self, ct, lower, upper, name='f'):
        self.ct = ct
        self.lower = float(lower)
        self.upper = float(upper)
        self.name = name

    @property
    def n(self):
        return self.ct.params.degree

    def size_bytes(self):
        return self.ct.size_bytes()


def build_test_vector(spec, key, scale, seed, level=0):
    r"""Encrypts the test vector of `spec` at `scale` in the ring of degree `spec.n`.

    Parameters
    ----------
    spec : FunctionSpec
    key : hexplore.rlwe.PublicKey or hexplore.rlwe.SecretKey
        Key of the small ring, whose degree must equal the table length.
    scale : float
    seed : int or np.random.Generator
    level : int

    Returns
    -------
    TestVector
    """
    if key.params.degree != spec.n:
        raise ValueError('Table of {} has {} entries, the ring degree is {}'.format(
            spec.name, spec.n, key.params.degree))

    m = ckks.encode_coeffs(key.params, table_coefficients(spec.table), scale, level)
    ct = rlwe.encrypt(key, m, scale, seed, domain=rlwe.COEFFS_DOMAIN)
    return TestVector(ct, spec.lower, spec.upper, name=spec.name)


def lookup(tv, exponent):
    r"""Ciphertext whose constant coefficient is the table value at `exponent`, for :math:`0 \le i < 2n`.

    Exponents in :math:`[n, 2n)` return the negated value, :math:`X^n = -1`.
    """
    if not 0 <= exponent < 2 * tv.n:
        raise DomainError('Exponent {} outside [0, {})'.format(exponent, 2 * tv.n))
    return rlwe.monomial_mul(tv.ct, exponent)


def _score_row(i, row, tvs, trace):
    total = None
    for j, (x, tv) in enumerate(zip(row, tvs)):
        try:
            exponent = encode_input(x, tv.lower, tv.upper, tv.n)
        except DomainError as e:
            raise DomainError(str(e), row=i, col=j)

        term = lookup(tv, exponent)
        total = term if total is None else rlwe.add(total, term)
        if trace is not None:
            trace.append(('lookup', i, j))
    return total


def eval_scores(rows, tvs, threads=1, trace=None):
    r"""Encrypted score :math:`\sum_j f_j(P'[i][j])` of every row, in the constant coefficient.

    Parameters
    ----------
    rows : np.ndarray, shape (p, m)
        Plaintext attribute values after selection.
    tvs : list[TestVector]
        One test vector per column.
    threads : int
        Rows are scored concurrently when `threads > 1`.
    trace : list, optional
        Receives one `('lookup', row, column)` entry per lookup; the sequence depends on the shape of `rows` only.

    Returns
    -------
    list[hexplore.rlwe.Ciphertext]
        p ciphertexts of the small ring.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(tvs):
        raise ValueError('Expected a matrix with {} columns, got shape {}'.format(len(tvs), rows.shape))

    if threads > 1 and trace is None:
        with futures.ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda i: _score_row(i, rows[i], tvs, None), range(rows.shape[0])))
    else:
        scores = [_score_row(i, row, tvs, trace) for i, row in enumerate(rows)]

    logger.debug('Scored {} rows with {} functions'.format(rows.shape[0], len(tvs)))
    return scores


def plaintext_scores(rows, specs):
    r"""Scores computed directly from the tables."""
    rows = np.asarray(rows, dtype=np.float64)
    return np.array([sum(spec(x) for x, spec in zip(row, specs)) for row in rows])


def score_bound(specs):
    r"""The local normaliser :math:`\sum_j \max f_j`."""
    return sum(spec.max_value for spec in specs)
