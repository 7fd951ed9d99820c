from collections.abc import Sized
import math

import numpy as np
from tqdm import tqdm


def listify(object_or_list):
    r"""Converts input to an iterable if it is not already one."""
    if not isinstance(object_or_list, (list, tuple)):
        object_or_list = [object_or_list]
    return object_or_list


def format_float_array(array):
    r"""Formats a single value or a 1-dimensional vector as a string."""
    if isinstance(array, Sized):
        try:
            feat_dim = len(array)
        except TypeError:
            # Length of a zero-dimensional array is undefined.
            feat_dim = 0
    else:
        feat_dim = 0

    if feat_dim <= 1:
        return tqdm.format_num(array)
    elif feat_dim <= 4:
        return '[{}]'.format(', '.join(tqdm.format_num(val) for val in array))
    else:
        return '[{first}, {second}, ..., {last}]'.format(
            first=tqdm.format_num(array[0]), second=tqdm.format_num(array[1]), last=tqdm.format_num(array[-1]))


def as_generator(seed):
    r"""Turns a seed (int, `np.random.SeedSequence` or `np.random.Generator`) into a `np.random.Generator`.

    Generators are passed through unchanged, so one stream can be threaded through several operations.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(seed, n):
    r"""Splits a seed into `n` independent generators."""
    if isinstance(seed, np.random.Generator):
        return [np.random.default_rng(int(child)) for child in seed.integers(0, 2 ** 63 - 1, size=n)]
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seed.spawn(n)]


def round_half_away(values):
    r"""Rounds to the nearest integer, ties away from zero. This is the single rounding rule used across the package."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def round_half_away_int(value):
    r"""Scalar version of :func:`round_half_away` returning a Python int (exact for large magnitudes)."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return -int(math.floor(-value + 0.5))


def is_power_of_two(value):
    return value > 0 and value & (value - 1) == 0


def log2_int(value):
    r"""Exact base-2 logarithm of a power of two."""
    if not is_power_of_two(value):
        raise ValueError('{} is not a power of two'.format(value))
    return value.bit_length() - 1


def bit_reverse(value, bits):
    result = 0
    for _ in range(bits):
        result = (result << 1) | (value & 1)
        value >>= 1
    return result


def bit_reverse_permutation(n):
    r"""Index array `perm` such that `x[perm]` is `x` in bit-reversed order."""
    bits = log2_int(n)
    return np.array([bit_reverse(i, bits) for i in range(n)], dtype=np.int64)


def centred(values, modulus):
    r"""Maps residues in [0, modulus) to the centred interval (-modulus/2, modulus/2]."""
    values = np.asarray(values)
    return np.where(values > modulus // 2, values - modulus, values)
