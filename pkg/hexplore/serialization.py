r"""Binary format shared by keys, ciphertexts, queries and threshold chains.

Every object starts with an 8-byte header (magic, format version, object kind). Ring parameters are written in front
of every object that lives in a ring (degree, number of primes, number of special primes, then the primes). Integers
and residues are little-endian; residue rows are 64-bit words.
"""
import functools
import struct

import numpy as np

from hexplore import ckks
from hexplore import pfe
from hexplore import repack
from hexplore import ring
from hexplore import rlwe
from hexplore import threshold


MAGIC = b'HXPL'
VERSION = 1

KINDS = ('ciphertext', 'secret_key', 'public_key', 'switching_key', 'galois_keys', 'evaluation_keys', 'repack_keys',
         'merge_keys', 'test_vector', 'threshold_params', 'chain', 'query', 'key_set', 'ring', 'packed_scores')

_HEADER = struct.Struct('<4sHH')
_RING = struct.Struct('<IHH')
_CIPHERTEXT = struct.Struct('<BBd')
_POLY = struct.Struct('<BBI')

_DOMAINS = (rlwe.COEFFS_DOMAIN, rlwe.SLOTS_DOMAIN)
_FORMS = (ring.COEFFS, ring.EVAL)


class SerializationError(ValueError):
    r"""Raised for bytes that are not a valid encoding: bad magic, unknown version or kind, or truncation."""


class Writer(object):
    r"""Accumulates little-endian fields."""
    def __init__(self):
        self.chunks = []

    def pack(self, fmt, *values):
        self.chunks.append(struct.pack('<' + fmt, *values))

    def array(self, values, dtype='<i8'):
        values = np.ascontiguousarray(values)
        self.pack('B', values.ndim)
        self.pack('{}I'.format(values.ndim), *values.shape)
        self.chunks.append(values.astype(dtype).tobytes())

    def string(self, text):
        data = text.encode('utf-8')
        self.pack('H', len(data))
        self.chunks.append(data)

    def raw(self, data):
        self.chunks.append(data)

    def getvalue(self):
        return b''.join(self.chunks)


class Reader(object):
    r"""Reads fields back in order, raising :class:`SerializationError` on truncation."""
    def __init__(self, data, offset=0):
        self.data = memoryview(data)
        self.offset = offset

    def take(self, size):
        if self.offset + size > len(self.data):
            raise SerializationError('Truncated input: need {} bytes at offset {}, have {}'.format(
                size, self.offset, len(self.data) - self.offset))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        layout = struct.Struct('<' + fmt)
        values = layout.unpack(self.take(layout.size))
        return values if len(values) > 1 else values[0]

    def array(self, dtype='<i8'):
        ndim = self.unpack('B')
        shape = self.unpack('{}I'.format(ndim)) if ndim else ()
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = int(np.prod(shape)) if shape else 1
        item = np.dtype(dtype).itemsize
        values = np.frombuffer(self.take(count * item), dtype=dtype).reshape(shape)
        return values.astype(np.dtype(dtype).newbyteorder('='))

    def string(self):
        size = self.unpack('H')
        return bytes(self.take(size)).decode('utf-8')

    def done(self):
        if self.offset != len(self.data):
            raise SerializationError('{} trailing bytes'.format(len(self.data) - self.offset))


def write_header(w, kind):
    w.raw(_HEADER.pack(MAGIC, VERSION, KINDS.index(kind)))


def read_header(r, expected=None):
    magic, version, kind = _HEADER.unpack(r.take(_HEADER.size))
    if magic != MAGIC:
        raise SerializationError('Bad magic {!r}'.format(bytes(magic)))
    if version != VERSION:
        raise SerializationError('Unsupported format version {} (expected {})'.format(version, VERSION))
    if kind >= len(KINDS):
        raise SerializationError('Unknown object kind {}'.format(kind))
    kind = KINDS[kind]
    if expected is not None and kind != expected:
        raise SerializationError('Expected a {}, got a {}'.format(expected, kind))
    return kind


@functools.lru_cache(maxsize=None)
def _ring_params(degree, moduli, special):
    return ring.RingParams(degree, moduli, special_moduli_count=special)


def write_ring(w, params):
    w.raw(_RING.pack(params.degree, len(params.moduli), params.special_moduli_count))
    w.pack('{}Q'.format(len(params.moduli)), *params.moduli)


def read_ring(r):
    degree, count, special = _RING.unpack(r.take(_RING.size))
    moduli = r.unpack('{}Q'.format(count))
    moduli = (moduli,) if isinstance(moduli, int) else tuple(moduli)
    try:
        return _ring_params(degree, moduli, special)
    except ring.ParameterError as e:
        raise SerializationError('Invalid ring parameters: {}'.format(e))


def ring_size(params):
    return _RING.size + 8 * len(params.moduli)


def write_poly(w, p):
    w.raw(_POLY.pack(_FORMS.index(p.form), int(p.extended), p.coeffs.shape[0]))
    w.raw(p.coeffs.astype('<i8').tobytes())


def read_poly(r, params):
    form, extended, rows = _POLY.unpack(r.take(_POLY.size))
    coeffs = np.frombuffer(r.take(rows * params.degree * 8), dtype='<i8').reshape(rows, params.degree)
    return ring.Poly(params, coeffs.astype(np.int64), form=_FORMS[form], extended=bool(extended))


def write_ciphertext(w, ct):
    write_ring(w, ct.params)
    w.raw(_CIPHERTEXT.pack(len(ct.parts), _DOMAINS.index(ct.domain), ct.scale))
    for p in ct.parts:
        write_poly(w, p)


def read_ciphertext(r):
    params = read_ring(r)
    count, domain, scale = _CIPHERTEXT.unpack(r.take(_CIPHERTEXT.size))
    parts = [read_poly(r, params) for _ in range(count)]
    return rlwe.Ciphertext(parts, scale, _DOMAINS[domain])


def ciphertext_size(params, level, degree=1):
    r"""Exact byte count of :func:`dumps` on a ciphertext: the header plus :math:`(k + 1) N (\ell + 1) \cdot 8`."""
    parts = degree + 1
    return (_HEADER.size + ring_size(params) + _CIPHERTEXT.size + parts * _POLY.size
            + parts * params.degree * (level + 1) * 8)


def write_secret_key(w, sk):
    write_ring(w, sk.params)
    w.string(sk.key_id)
    w.pack('B', sk.values is not None)
    if sk.values is not None:
        w.raw(sk.values.astype('<i8').tobytes())
    else:
        write_poly(w, sk.poly)


def read_secret_key(r):
    params = read_ring(r)
    key_id = r.string()
    if r.unpack('B'):
        values = np.frombuffer(r.take(params.degree * 8), dtype='<i8').astype(np.int64)
        return rlwe.SecretKey(params, values, key_id=key_id)
    return rlwe.SecretKey(params, poly=read_poly(r, params), key_id=key_id)


def write_public_key(w, pk):
    write_ring(w, pk.params)
    w.string(pk.key_id)
    write_poly(w, pk.b)
    write_poly(w, pk.a)


def read_public_key(r):
    params = read_ring(r)
    key_id = r.string()
    b = read_poly(r, params)
    return rlwe.PublicKey(b, read_poly(r, params), key_id=key_id)


def write_gadget(w, gadget):
    write_ring(w, gadget.params)
    w.pack('HH', gadget.base2 or 0, gadget.primes_per_digit)


def read_gadget(r):
    params = read_ring(r)
    base2, primes_per_digit = r.unpack('HH')
    return rlwe.GadgetVector(params, base2=base2 or None, primes_per_digit=primes_per_digit)


def write_switching_key(w, swk):
    write_gadget(w, swk.gadget)
    w.string(swk.source_id)
    w.string(swk.target_id)
    w.array(swk.key0)
    w.array(swk.key1)


def read_switching_key(r):
    gadget = read_gadget(r)
    source_id = r.string()
    target_id = r.string()
    key0 = r.array()
    return rlwe.SwitchingKey(gadget, key0, r.array(), source_id, target_id)


def write_galois_keys(w, keys):
    w.pack('I', len(keys))
    for exponent in sorted(keys):
        w.pack('I', exponent)
        write_switching_key(w, keys[exponent])


def read_galois_keys(r):
    keys = rlwe.GaloisKeySet()
    for _ in range(r.unpack('I')):
        exponent = r.unpack('I')
        keys[exponent] = read_switching_key(r)
    return keys


def write_evaluation_keys(w, keys):
    w.pack('B', keys.relin is not None)
    if keys.relin is not None:
        write_switching_key(w, keys.relin)
    write_galois_keys(w, keys.galois)


def read_evaluation_keys(r):
    relin = read_switching_key(r) if r.unpack('B') else None
    return ckks.EvaluationKeys(relin=relin, galois=read_galois_keys(r))


def write_repack_keys(w, keys):
    write_gadget(w, keys.gadget)
    write_galois_keys(w, keys.keys)


def read_repack_keys(r):
    gadget = read_gadget(r)
    return repack.RepackKeySet(read_galois_keys(r), gadget)


def write_merge_keys(w, keys):
    w.pack('I', len(keys))
    for degree in sorted(keys):
        w.pack('I', degree)
        write_switching_key(w, keys[degree])


def read_merge_keys(r):
    keys = {}
    for _ in range(r.unpack('I')):
        degree = r.unpack('I')
        keys[degree] = read_switching_key(r)
    return keys


def write_test_vector(w, tv):
    write_ciphertext(w, tv.ct)
    w.pack('dd', tv.lower, tv.upper)
    w.string(tv.name)


def read_test_vector(r):
    ct = read_ciphertext(r)
    lower, upper = r.unpack('dd')
    return pfe.TestVector(ct, lower, upper, name=r.string())


def write_threshold_params(w, params):
    w.pack('HHdH', params.alpha, params.beta, params.epsilon, len(params.degrees))
    w.pack('{}H'.format(len(params.degrees)), *params.degrees)


def read_threshold_params(r):
    alpha, beta, epsilon, count = r.unpack('HHdH')
    degrees = r.unpack('{}H'.format(count))
    degrees = [degrees] if isinstance(degrees, int) else list(degrees)
    return threshold.ThresholdParams(alpha, beta, degrees, epsilon=epsilon)


def write_chain(w, chain):
    write_threshold_params(w, chain.params)
    w.pack('H', len(chain.stages))
    for stage in chain.stages:
        w.pack('dd', stage.gamma, stage.error)
        w.array(stage.odd_coeffs, dtype='<f8')


def read_chain(r):
    params = read_threshold_params(r)
    stages = []
    for _ in range(r.unpack('H')):
        gamma, error = r.unpack('dd')
        stages.append(threshold.MinimaxPolynomial(r.array(dtype='<f8'), error, gamma))
    return threshold.MinimaxChain(params, stages)


_CODECS = {
    'ciphertext': (rlwe.Ciphertext, write_ciphertext, read_ciphertext),
    'secret_key': (rlwe.SecretKey, write_secret_key, read_secret_key),
    'public_key': (rlwe.PublicKey, write_public_key, read_public_key),
    'switching_key': (rlwe.SwitchingKey, write_switching_key, read_switching_key),
    'galois_keys': (rlwe.GaloisKeySet, write_galois_keys, read_galois_keys),
    'evaluation_keys': (ckks.EvaluationKeys, write_evaluation_keys, read_evaluation_keys),
    'repack_keys': (repack.RepackKeySet, write_repack_keys, read_repack_keys),
    'test_vector': (pfe.TestVector, write_test_vector, read_test_vector),
    'threshold_params': (threshold.ThresholdParams, write_threshold_params, read_threshold_params),
    'chain': (threshold.MinimaxChain, write_chain, read_chain),
    'ring': (ring.RingParams, write_ring, read_ring),
}


def register(kind, cls, write, read):
    r"""Adds a codec for `kind`, used by modules whose types are built on the ones above."""
    if kind not in KINDS:
        raise ValueError('Unknown object kind {}'.format(kind))
    _CODECS[kind] = (cls, write, read)


def kind_of(obj):
    for kind, (cls, _, _) in _CODECS.items():
        if type(obj) is cls:
            return kind
    if isinstance(obj, dict) and obj and all(isinstance(k, rlwe.SwitchingKey) for k in obj.values()):
        return 'merge_keys'
    raise SerializationError('Cannot serialize {}'.format(type(obj).__name__))


def dumps(obj, kind=None):
    r"""Encodes `obj` with its header.

    Parameters
    ----------
    obj : object
        Any registered type; a dict of degree to :class:`~hexplore.rlwe.SwitchingKey` is written as merge keys.
    kind : str, optional
        Overrides the kind inferred from the type.

    Returns
    -------
    bytes
    """
    kind = kind_of(obj) if kind is None else kind
    w = Writer()
    write_header(w, kind)
    if kind == 'merge_keys':
        write_merge_keys(w, obj)
    else:
        _CODECS[kind][1](w, obj)
    return w.getvalue()


def loads(data, expected=None):
    r"""Decodes bytes written by :func:`dumps`, checking the kind against `expected` if given."""
    r = Reader(data)
    kind = read_header(r, expected)
    if kind == 'merge_keys':
        obj = read_merge_keys(r)
    elif kind in _CODECS:
        obj = _CODECS[kind][2](r)
    else:
        raise SerializationError('No codec registered for {}'.format(kind))
    r.done()
    return obj


def save(path, obj, kind=None):
    with open(path, 'wb') as f:
        f.write(dumps(obj, kind))


def load(path, expected=None):
    with open(path, 'rb') as f:
        return loads(f.read(), expected)
