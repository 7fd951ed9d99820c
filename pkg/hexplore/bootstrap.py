r"""Approximate bootstrapping: ModRaise, CoeffsToSlots, EvalMod and SlotsToCoeffs.

:meth:`Bootstrapper.half_bts` stops after EvalMod and returns the real and imaginary halves of the refreshed
coefficient vector as two slots-domain ciphertexts, which is how the exploration protocol turns coefficient-packed
scores into SIMD-packed ones.
"""
import logging
import math

import numpy as np

from hexplore import ckks
from hexplore import ring
from hexplore import rlwe
from hexplore import utils


logger = logging.getLogger('hexplore')


class BootstrapParams(object):
    r"""Configuration of the bootstrapping circuit.

    Parameters
    ----------
    modulus_bound : int
        Bound K on the integer polynomial :math:`I(X)` introduced by ModRaise, :math:`\|I\|_\infty \le K`.
    eval_mod_degree : int
        Degree of the Chebyshev interpolant of the scaled cosine.
    double_angle : int
        Number of double-angle iterations :math:`c \leftarrow 2c^2 - 1` after the interpolant.
    cts_levels : int
        Number of levels CoeffsToSlots is split into; 0 uses a single dense matrix.
    stc_levels : int
        Same for SlotsToCoeffs; must be 0 exactly when `cts_levels` is 0.
    slots : int, optional
        Number of complex slots; defaults to full packing (N/2). Sparse packing applies the trace map after ModRaise.
    secret_hamming_weight : int, optional
        Weight of the secret the circuit will be used with, only for checking K against :math:`O(\sqrt{h})`.
    """
    def __init__(self, modulus_bound=16, eval_mod_degree=31, double_angle=3, cts_levels=3, stc_levels=None,
                 slots=None, secret_hamming_weight=None):
        stc_levels = cts_levels if stc_levels is None else stc_levels
        if modulus_bound < 1:
            raise ring.ParameterError('K must be positive, got {}'.format(modulus_bound))
        if eval_mod_degree < 1 or double_angle < 0:
            raise ring.ParameterError('Invalid EvalMod configuration (degree {}, {} double angles)'.format(
                eval_mod_degree, double_angle))
        if (cts_levels == 0) != (stc_levels == 0):
            raise ring.ParameterError('CoeffsToSlots and SlotsToCoeffs must both be dense or both be factored')
        if secret_hamming_weight is not None and modulus_bound < math.sqrt(secret_hamming_weight):
            logger.warning('K = {} is below sqrt(h) = {:.1f}, ModRaise overflow is likely'.format(
                modulus_bound, math.sqrt(secret_hamming_weight)))

        self.modulus_bound = modulus_bound
        self.eval_mod_degree = eval_mod_degree
        self.double_angle = double_angle
        self.cts_levels = cts_levels
        self.stc_levels = stc_levels
        self.slots = slots
        self.secret_hamming_weight = secret_hamming_weight

    @property
    def eval_mod_depth(self):
        return ckks.poly_depth(self.eval_mod_degree) + self.double_angle + 1

    @property
    def depth(self):
        r"""Levels consumed by :meth:`Bootstrapper.half_bts`."""
        return max(self.cts_levels, 1) + self.eval_mod_depth

    @property
    def full_depth(self):
        r"""Levels consumed by :meth:`Bootstrapper.bootstrap`."""
        return self.depth + max(self.stc_levels, 1)

    def to_dict(self):
        return {'modulus_bound': self.modulus_bound, 'eval_mod_degree': self.eval_mod_degree,
                'double_angle': self.double_angle, 'cts_levels': self.cts_levels, 'stc_levels': self.stc_levels,
                'slots': self.slots, 'secret_hamming_weight': self.secret_hamming_weight}


def eval_mod_function(modulus_bound, double_angle):
    r"""The function interpolated on [-1, 1] by EvalMod.

    An input :math:`u = x / (q (K + 1/2))` is mapped to :math:`\cos(2\pi ((K + 1/2) u - 1/4) / 2^r)`; `r` double angles
    then give :math:`\cos(2\pi x / q - \pi / 2) = \sin(2\pi x / q)`.
    """
    width = modulus_bound + 0.5
    divisor = 2. ** double_angle

    def func(u):
        return np.cos(2 * np.pi * (width * np.asarray(u) - 0.25) / divisor)

    return func


def eval_mod_reference(x, q):
    r"""Plaintext counterpart of :meth:`Bootstrapper.eval_mod`: :math:`(q / 2\pi) \sin(2\pi x / q)`."""
    return q / (2 * np.pi) * np.sin(2 * np.pi * np.asarray(x, dtype=np.float64) / q)


def transform_offsets(slots, groups, inverse=True):
    r"""Diagonal offsets of each grouped special Fourier factor, without building the matrices.

    A butterfly stage of half-size `h` has diagonals at 0 and :math:`\pm h`; a group of stages has the sums.
    """
    if groups == 0:
        return [set(range(slots))]

    halves = [2 ** (l - 1) for l in range(1, utils.log2_int(slots) + 1)]
    halves = halves[::-1] if inverse else halves
    sizes = [len(halves) // groups + (1 if i < len(halves) % groups else 0) for i in range(groups)]

    offsets, start = [], 0
    for size in sizes:
        group = {0}
        for h in halves[start:start + size]:
            group = {(d + s) % slots for d in group for s in (0, h, -h)}
        offsets.append(group)
        start += size
    return offsets


def analytic_rotations(slots, boot_params):
    r"""Rotations a :class:`Bootstrapper` with these parameters will use, computed from the diagonal structure only."""
    groups = transform_offsets(slots, boot_params.cts_levels, inverse=True)
    groups += transform_offsets(slots, boot_params.stc_levels, inverse=False)
    return sorted({k for offsets in groups for k in ckks.bsgs_rotations(offsets, slots)})


class Bootstrapper(object):
    r"""Bootstrapping evaluator for one ring, prepared once and reusable across ciphertexts.

    Parameters
    ----------
    params : hexplore.ring.RingParams
    boot_params : BootstrapParams
    input_scale : float
        Scaling factor :math:`\Delta_0` of the exhausted ciphertexts that will be bootstrapped.
    output_scale : float
        Scaling factor of the refreshed ciphertexts.

    Attributes
    ----------
    slots : int
    rotations : list[int]
        Slot rotations used by the linear transforms.
    trace_exponents : list[int]
        Galois exponents of the sparse-packing trace map.
    output_level : int
    """
    def __init__(self, params, boot_params, input_scale, output_scale):
        self.params = params
        self.boot_params = boot_params
        self.input_scale = float(input_scale)
        self.output_scale = float(output_scale)

        self.slots = params.degree // 2 if boot_params.slots is None else boot_params.slots
        if not utils.is_power_of_two(self.slots) or self.slots > params.degree // 2:
            raise ring.ParameterError('Slot count must be a power of two <= N/2, got {}'.format(self.slots))
        self.gap = params.degree // (2 * self.slots)

        if params.max_level < boot_params.depth:
            raise ring.ParameterError('Bootstrapping needs {} levels, the chain has {}'.format(
                boot_params.depth, params.max_level))
        self.output_level = params.max_level - boot_params.depth

        q0 = params.q[0]
        if self.input_scale * 4 > q0:
            raise ring.ParameterError('Input scale 2^{:.1f} leaves no room below q_0 = 2^{:.1f}'.format(
                math.log2(self.input_scale), math.log2(q0)))

        # ModRaise leaves (m + q_0 I) / Delta_0 in the slots; CoeffsToSlots maps it into [-1, 1]. The extra 1/2 cancels
        # the doubling of z + conj(z), so the real and imaginary parts stay at the output scale.
        trace_factor = 2. ** -utils.log2_int(self.gap)
        self.cts_constant = self.input_scale / (2 * q0 * (boot_params.modulus_bound + 0.5)) * trace_factor
        self.trace_exponents = [params.degree // 2 ** i + 1 for i in range(utils.log2_int(self.gap))]

        self.cts_plans = self._build_cts_plans()
        self.eval_mod_coeffs = ckks.chebyshev_interpolant(
            eval_mod_function(boot_params.modulus_bound, boot_params.double_angle), boot_params.eval_mod_degree)

        stc_level = self.output_level
        self.stc_plans = self._build_stc_plans(stc_level) if stc_level >= max(boot_params.stc_levels, 1) else None

        plans = list(self.cts_plans) + (list(self.stc_plans) if self.stc_plans else [])
        self.rotations = sorted({k for plan in plans for k in plan.rotations})

        logger.info('Bootstrapper for {}: {} slots, depth {}, output level {}, {} rotations'.format(
            params, self.slots, boot_params.depth, self.output_level, len(self.rotations)))

    @property
    def factored(self):
        return self.boot_params.cts_levels > 0

    def _build_cts_plans(self):
        n, top = self.slots, self.params.max_level
        if self.factored:
            matrices = ckks.grouped_factors(ckks.special_fourier_factors(n, inverse=True), self.boot_params.cts_levels)
        else:
            matrices = [ckks.encoder_tables(n).inverse_matrix()]
        matrices[0] = matrices[0] * self.cts_constant

        plans = []
        for j, matrix in enumerate(matrices):
            level = top - j
            if j == 0:
                # Lands exactly on the output scale: Delta_0 * s_pt / q_L = output_scale.
                scale = self.output_scale * self.params.q[level] / self.input_scale
            else:
                scale = self.params.q[level]
            plans.append(ckks.LinearTransformPlan.from_matrix(self.params, matrix, level, scale=scale))
        return plans

    def _build_stc_plans(self, level):
        n = self.slots
        if self.factored:
            matrices = ckks.grouped_factors(ckks.special_fourier_factors(n, inverse=False),
                                            self.boot_params.stc_levels)
        else:
            matrices = [ckks.encoder_tables(n).matrix()]
        return [ckks.LinearTransformPlan.from_matrix(self.params, matrix, level - j)
                for j, matrix in enumerate(matrices)]

    @property
    def slot_order(self):
        r"""Index `k` of the complex coefficient :math:`w_k` held by slot `j` after CoeffsToSlots."""
        if self.factored:
            return utils.bit_reverse_permutation(self.slots)
        return np.arange(self.slots)

    def coefficient_positions(self):
        r"""Coefficient indices of the input held by each slot of the two Half-BTS outputs.

        Returns
        -------
        np.ndarray[int64], shape (slots,)
            Slot `j` of the left output holds input coefficient `left[j]`.
        np.ndarray[int64], shape (slots,)
            Same for the right output.
        """
        order = self.slot_order
        return self.gap * order, self.gap * (order + self.slots)

    def key_requirements(self):
        r"""Rotations, extra Galois exponents and whether conjugation is needed."""
        return {'rotations': self.rotations, 'extra_exponents': self.trace_exponents, 'conjugation': True}

    def gen_keys(self, sk, gadget, seed, noise=None, extra_rotations=()):
        r"""Generates every evaluation key the circuit uses, plus `extra_rotations`."""
        reqs = self.key_requirements()
        return ckks.EvaluationKeys.generate(sk, gadget, list(reqs['rotations']) + list(extra_rotations), seed,
                                            conjugation=True, extra_exponents=reqs['extra_exponents'], noise=noise)

    def mod_raise(self, ct, keys=None):
        r"""Reinterprets a level-0 ciphertext modulo :math:`Q_L`, so that it decrypts to :math:`m + q_0 I`.

        With sparse packing the trace map then keeps only the coefficients at multiples of N / 2n (scaled by
        N / 2n, which CoeffsToSlots divides out).

        Parameters
        ----------
        ct : hexplore.rlwe.Ciphertext
            Degree 1.
        keys : hexplore.ckks.EvaluationKeys, optional
            Needed only for sparse packing.

        Any ring of the same degree whose first prime is :math:`q_0` is accepted, only level 0 is read.

        Returns
        -------
        hexplore.rlwe.Ciphertext
            At the maximum level, coefficients domain.
        """
        if ct.params.degree != self.params.degree or ct.params.q[0] != self.params.q[0]:
            raise ring.ParameterError('Ciphertext ring {} does not match bootstrapper ring {}'.format(
                ct.params, self.params))
        if ct.degree != 1:
            raise ValueError('Relinearize before bootstrapping')
        if ct.level != 0:
            ct = ct.drop_to(0)

        q0 = self.params.q[0]
        parts = []
        for p in ct.parts:
            centred = utils.centred(p.to_coeffs().coeffs[0], q0).astype(np.int64)
            parts.append(ring.Poly.from_integers(self.params, centred, self.params.max_level).to_eval())
        raised = rlwe.Ciphertext(parts, ct.scale, rlwe.COEFFS_DOMAIN)

        for exponent in self.trace_exponents:
            raised = rlwe.add(raised, rlwe.apply_galois(raised, exponent, keys.galois))
        return raised

    def coeffs_to_slots(self, ct, keys):
        r"""Moves the coefficient vector of a raised ciphertext into the slots.

        Returns
        -------
        tuple[hexplore.rlwe.Ciphertext, hexplore.rlwe.Ciphertext]
            Real slots holding :math:`(m_k + q_0 I_k) / (q_0 (K + 1/2))` for the first and second half of the
            coefficients, in :attr:`slot_order`, both at :attr:`output_scale`.
        """
        if ct.level < self.cts_plans[0].level:
            raise ring.LevelError('CoeffsToSlots needs a ciphertext at level {}, got {}'.format(
                self.cts_plans[0].level, ct.level))

        # The coefficient vector is a slots encoding of SF(w) with w_k = m_k + i m_{k + n}.
        ct = ct.with_parts(ct.parts, domain=rlwe.SLOTS_DOMAIN)
        ct = ckks.linear_transform(ct, self.cts_plans, keys)
        real, imag = ckks.real_part(ct, keys), ckks.imag_part(ct, keys)
        return real.with_parts(real.parts, scale=ct.scale), imag.with_parts(imag.parts, scale=ct.scale)

    def eval_mod(self, ct, keys):
        r"""Removes the multiples of :math:`q_0`, returning :math:`m / \Delta_0` at :attr:`output_scale`."""
        level_before = ct.level
        ct = ckks.eval_poly(ct, self.eval_mod_coeffs, keys)
        for _ in range(self.boot_params.double_angle):
            square = ckks.eval_mul(ct, ct, rlk=keys.relin)
            ct = ckks.eval_rescale(ckks.add_scalar(ckks.mul_int(square, 2), -1.))

        q0 = self.params.q[0]
        ct = ckks.mul_const(ct, q0 / (2 * np.pi * self.input_scale), target_scale=self.output_scale)
        logger.debug('EvalMod consumed {} levels'.format(level_before - ct.level))
        return ct

    def slots_to_coeffs(self, cts, keys):
        r"""Inverse of :meth:`coeffs_to_slots` for two real-slot ciphertexts, returning a coefficients-domain one."""
        if self.stc_plans is None:
            raise ring.LevelError('The chain leaves no levels for SlotsToCoeffs')
        ct_real, ct_imag = cts
        ct_real, ct_imag = ckks.match_levels(ct_real, ct_imag)
        if ct_real.level < self.stc_plans[0].level:
            raise ring.LevelError('SlotsToCoeffs needs level {}, got {}'.format(self.stc_plans[0].level, ct_real.level))

        imag = ckks.mul_by_i(ct_imag)
        combined = rlwe.add(ct_real, imag.with_parts(imag.parts, scale=ct_real.scale))
        combined = ckks.linear_transform(combined, self.stc_plans, keys)
        return combined.with_parts(combined.parts, domain=rlwe.COEFFS_DOMAIN)

    def half_bts(self, ct, keys):
        r"""Bootstrapping without SlotsToCoeffs.

        Parameters
        ----------
        ct : hexplore.rlwe.Ciphertext
            Coefficients domain, scale :attr:`input_scale`, any level.
        keys : hexplore.ckks.EvaluationKeys

        Returns
        -------
        tuple[hexplore.rlwe.Ciphertext, hexplore.rlwe.Ciphertext]
            Slots-domain ciphertexts at :attr:`output_level` holding the input coefficients listed by
            :meth:`coefficient_positions`.
        """
        if ct.domain != rlwe.COEFFS_DOMAIN:
            raise rlwe.DomainTagError('Half-BTS expects a coefficients-domain ciphertext')
        if abs(ct.scale - self.input_scale) > rlwe.SCALE_RTOL * self.input_scale:
            raise rlwe.ScaleMismatchError('Bootstrapper prepared for scale 2^{:.2f}, got 2^{:.2f}'.format(
                math.log2(self.input_scale), math.log2(ct.scale)))

        raised = self.mod_raise(ct, keys)
        real, imag = self.coeffs_to_slots(raised, keys)
        return self.eval_mod(real, keys), self.eval_mod(imag, keys)

    def bootstrap(self, ct, keys):
        r"""Full bootstrapping: Half-BTS followed by SlotsToCoeffs, back in the coefficients domain."""
        return self.slots_to_coeffs(self.half_bts(ct, keys), keys)
