r"""Named parameter profiles.

A profile fixes the ring degrees, the modulus chain, the gadget, the secret distribution, the scaling factors, the
bootstrapping circuit and the degrees of the two threshold chains. The number of ciphertext primes of the big ring is
derived from the depth of the bootstrapping circuit and of the two thresholds. Profiles whose primes exceed the
machine-word limit only support the analytic size report.
"""
import copy
import logging
import math

from hexplore import bootstrap
from hexplore import ckks
from hexplore import ring
from hexplore import rlwe
from hexplore import threshold


logger = logging.getLogger('hexplore')


class Profile(object):
    r"""Parameter set for the exploration protocol.

    Parameters
    ----------
    name : str
    degree : int
        Degree N of the bootstrapping ring.
    small_degree : int
        Degree n of the ring the scoring functions are tabulated in (the table length).
    first_prime_bits : int
        Size of :math:`q_0`, the only prime of the scoring and packing stages.
    prime_bits : int or list[int]
        Size of the primes above :math:`q_0`, one entry per level or a single size repeated.
    special_bits : list[int]
        Sizes of the special primes.
    primes_per_digit : int
        Gadget grouping of the big ring.
    base2 : int, optional
        Extra base-2 decomposition of the big-ring gadget.
    small_special_bits : list[int], optional
        Special primes of the small rings, only used by the analytic size report (materialised small rings share the
        big ring's special primes).
    small_base2 : int, optional
        Base-2 decomposition of the small-ring gadget.
    hamming_weight : int
        Secret Hamming weight.
    sigma : float
        Gaussian error width.
    scale_bits : int
        :math:`\log_2 \Delta`, the scale of the bootstrapped scores and of the thresholds.
    input_headroom_bits : int
        :math:`\log_2 (q_0 / \Delta_0)` for the coefficient-encoded scores.
    bootstrap : dict, optional
        Keyword arguments of :class:`hexplore.bootstrap.BootstrapParams`; None for profiles that stop after packing.
    threshold1, threshold2 : dict
        `beta` and `degrees` of the local and global thresholds, `alpha` optionally fixed.
    analytic : bool
        If True the rings are never materialised.
    """
    def __init__(self, name, degree, small_degree, first_prime_bits, prime_bits, special_bits, primes_per_digit=1,
                 base2=None, small_special_bits=None, small_base2=None, hamming_weight=32, sigma=ring.DEFAULT_SIGMA,
                 scale_bits=45, input_headroom_bits=16, bootstrap=None, threshold1=None, threshold2=None,
                 analytic=False):
        if small_degree > degree:
            raise ring.ParameterError('Small ring degree {} exceeds ring degree {}'.format(small_degree, degree))

        self.name = name
        self.degree = degree
        self.small_degree = small_degree
        self.first_prime_bits = first_prime_bits
        self.prime_bits = prime_bits
        self.special_bits = list(special_bits)
        self.primes_per_digit = primes_per_digit
        self.base2 = base2
        self.small_special_bits = list(small_special_bits) if small_special_bits else None
        self.small_base2 = small_base2
        self.hamming_weight = hamming_weight
        self.sigma = sigma
        self.scale_bits = scale_bits
        self.input_headroom_bits = input_headroom_bits
        self.bootstrap = bootstrap
        self.threshold1 = threshold1 or {'beta': 12, 'degrees': [15, 15, 15]}
        self.threshold2 = threshold2 or {'beta': 20, 'degrees': [15, 15, 15, 15, 15]}
        self.analytic = analytic

        self._params = None

    @property
    def explores(self):
        r"""Whether the profile runs the full protocol (bootstrapping and thresholds)."""
        return self.bootstrap is not None

    def boot_params(self):
        if not self.explores:
            raise ring.ParameterError('Profile {} has no bootstrapping circuit'.format(self.name))
        return bootstrap.BootstrapParams(secret_hamming_weight=self.hamming_weight, **self.bootstrap)

    @staticmethod
    def chain_levels(degrees):
        r"""Upper bound on the levels of a threshold with these stage degrees, normalisation included."""
        return sum(ckks.poly_depth(d) for d in degrees) + 1

    @property
    def levels(self):
        r"""Number of primes above :math:`q_0`."""
        if isinstance(self.prime_bits, (list, tuple)):
            return len(self.prime_bits)
        if not self.explores:
            return 0
        return (self.boot_params().depth + self.chain_levels(self.threshold1['degrees'])
                + self.chain_levels(self.threshold2['degrees']))

    @property
    def q_bits(self):
        if isinstance(self.prime_bits, (list, tuple)):
            return [self.first_prime_bits] + list(self.prime_bits)
        return [self.first_prime_bits] + [self.prime_bits] * self.levels

    @property
    def small_q_bits(self):
        return self.q_bits[:1]

    def ring_params(self):
        r"""The big ring, with its primes generated deterministically from the bit sizes."""
        if self.analytic:
            raise ring.ParameterError('Profile {} is analytic only, its primes exceed {} bits'.format(
                self.name, ring.MAX_PRIME_BITS))
        if self._params is None:
            self._params = ring.RingParams.from_bit_sizes(self.degree, self.q_bits, self.special_bits)
            logger.info('Profile {}: {}'.format(self.name, self._params))
        return self._params

    def small_ring(self):
        return self.ring_params().subring(self.small_degree, levels=1)

    def merge_rings(self):
        r"""Rings of degree 2n, 4n, ..., N holding only :math:`q_0`, indexed by degree."""
        big = self.ring_params()
        rings = {}
        k = 2 * self.small_degree
        while k <= self.degree:
            rings[k] = big.subring(k, levels=1)
            k *= 2
        return rings

    def gadget(self, params):
        r"""Gadget of the big ring, or of a single-prime ring of the packing stages."""
        if params.degree == self.degree and params.max_level == self.levels:
            return rlwe.GadgetVector(params, base2=self.base2, primes_per_digit=self.primes_per_digit)
        return rlwe.GadgetVector(params, base2=self.small_base2)

    def noise(self):
        return ring.NoiseParams(self.hamming_weight, gaussian_sigma=self.sigma)

    @property
    def scale(self):
        return 2. ** self.scale_bits

    @property
    def input_scale(self):
        r""":math:`\Delta_0 = q_0 / 2^{headroom}`, the scale of test vectors and packed scores."""
        return self.ring_params().q[0] / 2. ** self.input_headroom_bits

    def threshold_params(self, which, score_range, epsilon=1.):
        r"""Threshold parameters for inputs spaced `epsilon` apart and normalised by `1 / score_range`.

        Parameters
        ----------
        which : int
            1 for the local threshold on scores, 2 for the global threshold on the count.
        score_range : float
        epsilon : float

        Returns
        -------
        hexplore.threshold.ThresholdParams
        """
        config = self.threshold1 if which == 1 else self.threshold2
        alpha = config.get('alpha') or threshold.required_alpha(score_range, epsilon)
        return threshold.ThresholdParams(alpha, config['beta'], config['degrees'], epsilon=epsilon)

    def with_overrides(self, **overrides):
        r"""Copy of the profile with some fields replaced, e.g. from a sidecar file."""
        fields = self.to_dict()
        unknown = set(overrides) - set(fields)
        if unknown:
            raise ring.ParameterError('Unknown profile fields: {}'.format(', '.join(sorted(unknown))))
        fields.update(overrides)
        return Profile(**fields)

    def to_dict(self):
        return copy.deepcopy({
            'name': self.name, 'degree': self.degree, 'small_degree': self.small_degree,
            'first_prime_bits': self.first_prime_bits, 'prime_bits': self.prime_bits,
            'special_bits': self.special_bits, 'primes_per_digit': self.primes_per_digit, 'base2': self.base2,
            'small_special_bits': self.small_special_bits, 'small_base2': self.small_base2,
            'hamming_weight': self.hamming_weight, 'sigma': self.sigma, 'scale_bits': self.scale_bits,
            'input_headroom_bits': self.input_headroom_bits, 'bootstrap': self.bootstrap,
            'threshold1': self.threshold1, 'threshold2': self.threshold2, 'analytic': self.analytic})

    def __repr__(self):
        return 'Profile({}, N=2^{}, n=2^{}, {} levels)'.format(
            self.name, int(math.log2(self.degree)), int(math.log2(self.small_degree)), self.levels)


_DESK_BOOTSTRAP = {'modulus_bound': 16, 'eval_mod_degree': 31, 'double_angle': 3, 'cts_levels': 3}

PROFILES = {
    # Default test profile.
    'tiny': {
        'degree': 2 ** 8, 'small_degree': 2 ** 4, 'first_prime_bits': 50, 'prime_bits': 45,
        'special_bits': [50] * 13, 'primes_per_digit': 14, 'hamming_weight': 32, 'scale_bits': 45,
        'bootstrap': _DESK_BOOTSTRAP,
        'threshold1': {'beta': 12, 'degrees': [15, 15, 15]},
        'threshold2': {'beta': 12, 'degrees': [15, 15, 15, 15]},
    },
    'toy': {
        'degree': 2 ** 10, 'small_degree': 2 ** 6, 'first_prime_bits': 50, 'prime_bits': 45,
        'special_bits': [50] * 13, 'primes_per_digit': 14, 'hamming_weight': 32, 'scale_bits': 45,
        'bootstrap': _DESK_BOOTSTRAP,
        'threshold1': {'beta': 12, 'degrees': [15, 15, 15, 15]},
        'threshold2': {'beta': 12, 'degrees': [15, 15, 15, 15, 15]},
    },
    # Scoring and packing only, with the gadget of the first parameter set.
    'set1-only': {
        'degree': 2 ** 12, 'small_degree': 2 ** 12, 'first_prime_bits': 50, 'prime_bits': [],
        'special_bits': [50], 'small_base2': 30, 'base2': 30, 'hamming_weight': 2 * 2 ** 12 // 3,
    },
    'full-analytic': {
        'degree': 2 ** 16, 'small_degree': 2 ** 12, 'first_prime_bits': 55,
        'prime_bits': [45] * 8 + [39] * 3 + [60] * 8 + [56] * 4, 'special_bits': [61] * 5, 'primes_per_digit': 5,
        'small_special_bits': [54], 'small_base2': 30, 'hamming_weight': 192, 'scale_bits': 45,
        'bootstrap': {'modulus_bound': 16, 'eval_mod_degree': 31, 'double_angle': 3, 'cts_levels': 4,
                      'stc_levels': 3},
        'threshold1': {'alpha': 8, 'beta': 12, 'degrees': [15, 15, 15]},
        'threshold2': {'alpha': 16, 'beta': 20, 'degrees': [15, 15, 15, 15, 15]},
        'analytic': True,
    },
}

_CACHE = {}


def get_profile(name):
    r"""Returns the named profile; materialised rings are shared between calls."""
    if name not in PROFILES:
        raise ring.ParameterError('Unknown profile {}, choose from {}'.format(name, ', '.join(sorted(PROFILES))))
    if name not in _CACHE:
        _CACHE[name] = Profile(name=name, **copy.deepcopy(PROFILES[name]))
    return _CACHE[name]
