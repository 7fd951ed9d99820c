r"""Private thresholds from composed odd minimax approximations of the sign function.

A chain of odd polynomials :math:`p_k \circ \dots \circ p_1` approximates :math:`\mathrm{sign}(x)` on
:math:`[-1, -2^{-\alpha}] \cup [2^{-\alpha}, 1]`. Each stage is the minimax approximation of sign on the image of its
predecessor, found with the Remez exchange on :math:`[\gamma, 1]` (odd symmetry covers the negative half). Every stage
except the last is divided by :math:`1 + e_i`, so its image :math:`[(1 - e_i) / (1 + e_i), 1]` is the next domain.
The step function is :math:`(\mathrm{sign}(x) + 1) / 2`, folded into the last stage.
"""
import functools
import logging
import math

import numpy as np
from numpy.polynomial import chebyshev
from scipy import linalg
from scipy import optimize

from hexplore import ckks
from hexplore import ring
from hexplore import rlwe


logger = logging.getLogger('hexplore')

_ROUNDOFF = 1e-13
# On gaps narrower than this the alternation system is singular; x is within 1 - gamma of sign there.
_UNIT_GAP = 2. ** -32


class ConvergenceError(RuntimeError):
    r"""Raised when the Remez exchange does not equioscillate within the iteration budget."""
    def __init__(self, message, residual=None):
        super(ConvergenceError, self).__init__(message)
        self.residual = residual


class InfeasibleChainError(ValueError):
    r"""Raised when a chain's degrees cannot reach the requested output precision."""
    def __init__(self, message, achieved_beta=None):
        super(InfeasibleChainError, self).__init__(message)
        self.achieved_beta = achieved_beta


class ThresholdParams(object):
    r"""Parameters of one private threshold.

    Parameters
    ----------
    alpha : int
        Sensitivity, valid inputs satisfy :math:`|x| \ge 2^{-\alpha}`.
    beta : int
        Output precision, :math:`|b - \mathrm{step}(x)| \le 2^{-\beta}`.
    degrees : list[int]
        Odd degrees of the chain stages, in evaluation order.
    epsilon : float
        Spacing of the (unnormalised) inputs; the comparison is offset by half of it.
    """
    def __init__(self, alpha, beta, degrees, epsilon=1.):
        degrees = [int(d) for d in degrees]
        if not degrees:
            raise ring.ParameterError('A threshold needs at least one polynomial stage')
        if any(d < 1 or d % 2 == 0 for d in degrees):
            raise ring.ParameterError('Stage degrees must be odd and positive, got {}'.format(degrees))
        if alpha <= 0 or beta <= 0:
            raise ring.ParameterError('alpha and beta must be positive, got {} and {}'.format(alpha, beta))
        if epsilon <= 0:
            raise ring.ParameterError('epsilon must be positive, got {}'.format(epsilon))

        self.alpha = int(alpha)
        self.beta = int(beta)
        self.degrees = degrees
        self.epsilon = float(epsilon)

    @property
    def gap(self):
        return 2. ** -self.alpha

    def check_gap(self, normaliser):
        r"""Checks that :math:`2^{-\alpha}` lies below the normalised half-spacing :math:`\epsilon \cdot norm / 2`."""
        min_gap = 0.5 * self.epsilon * normaliser
        if not self.gap < min_gap:
            raise ring.ParameterError('alpha = {} is too small: 2^-alpha = {:.3g} >= normalised gap {:.3g}, use '
                                      'alpha >= {}'.format(self.alpha, self.gap, min_gap,
                                                           required_alpha(1. / normaliser, self.epsilon)))

    def key(self):
        return self.alpha, self.beta, tuple(self.degrees)

    def to_dict(self):
        return {'alpha': self.alpha, 'beta': self.beta, 'degrees': list(self.degrees), 'epsilon': self.epsilon}

    @classmethod
    def from_dict(cls, config):
        return cls(config['alpha'], config['beta'], config['degrees'], config.get('epsilon', 1.))

    def __eq__(self, other):
        return isinstance(other, ThresholdParams) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.key() + (self.epsilon,))

    def __repr__(self):
        return 'ThresholdParams(alpha={}, beta={}, degrees={})'.format(self.alpha, self.beta, self.degrees)


def required_alpha(score_range, epsilon=1.):
    r"""Smallest alpha with :math:`2^{-\alpha} < \epsilon / (2 \cdot range)`, for inputs normalised by `1 / range`."""
    return int(math.floor(math.log2(2. * score_range / epsilon))) + 1


class MinimaxPolynomial(object):
    r"""Odd polynomial :math:`\sum_k c_k T_{2k+1}(x)` with its equioscillation certificate.

    Parameters
    ----------
    odd_coeffs : array-like
        Coefficients of :math:`T_1, T_3, \dots, T_d`.
    error : float
        Certified sup-norm error of the approximation of sign on :math:`[\gamma, 1]`.
    gamma : float
    nodes : np.ndarray, optional
        Reference points of the final exchange, where the error alternates in sign.
    node_errors : np.ndarray, optional
    """
    def __init__(self, odd_coeffs, error, gamma, nodes=None, node_errors=None):
        self.odd_coeffs = np.asarray(odd_coeffs, dtype=np.float64)
        self.error = float(error)
        self.gamma = float(gamma)
        self.nodes = nodes
        self.node_errors = node_errors

    @property
    def degree(self):
        return 2 * len(self.odd_coeffs) - 1

    @property
    def coeffs(self):
        full = np.zeros(self.degree + 1)
        full[1::2] = self.odd_coeffs
        return full

    def scaled(self, factor):
        return MinimaxPolynomial(self.odd_coeffs * factor, self.error, self.gamma, self.nodes, self.node_errors)

    def __call__(self, x):
        return chebyshev.chebval(x, self.coeffs)


def _odd_basis(x, terms):
    return chebyshev.chebvander(x, 2 * terms - 1)[:, 1::2]


def _alternating_extrema(x, r, count):
    interior = np.nonzero((r[1:-1] - r[:-2]) * (r[2:] - r[1:-1]) <= 0)[0] + 1
    candidates = np.concatenate([[0], interior, [len(x) - 1]])

    # Keep the largest point of every run of equal sign.
    kept = []
    for i in candidates:
        if kept and np.sign(r[i]) == np.sign(r[kept[-1]]):
            if abs(r[i]) > abs(r[kept[-1]]):
                kept[-1] = i
        else:
            kept.append(i)

    while len(kept) > count:
        if abs(r[kept[0]]) < abs(r[kept[-1]]):
            kept.pop(0)
        else:
            kept.pop()
    return kept


def _refine(func, x, i, sign):
    if i == 0 or i == len(x) - 1:
        return x[i]
    result = optimize.minimize_scalar(lambda t: -sign * func(t), bounds=(x[i - 1], x[i + 1]), method='bounded',
                                      options={'xatol': 1e-14})
    return result.x if -result.fun >= sign * func(x[i]) else x[i]


def remez_minimax(degree, gamma, max_iter=100, tol=1e-9, grid_size=4000):
    r"""Best odd approximation of sign on :math:`[-1, -\gamma] \cup [\gamma, 1]` by the Remez exchange.

    Parameters
    ----------
    degree : int
        Odd degree.
    gamma : float
        Gap, :math:`0 < \gamma \le 1`; gaps within :math:`2^{-32}` of 1 are approximated by `x`.
    max_iter : int
    tol : float
        Relative spread between the largest and smallest extremum of the error at convergence.
    grid_size : int
        Number of linear and of geometric grid points searched for extrema.

    Returns
    -------
    MinimaxPolynomial
    """
    if degree < 1 or degree % 2 == 0:
        raise ring.ParameterError('Minimax degree must be odd and positive, got {}'.format(degree))
    if not 0 < gamma <= 1:
        raise ring.ParameterError('Gap must lie in (0, 1], got {}'.format(gamma))

    terms = (degree + 1) // 2
    identity = np.zeros(terms)
    identity[0] = 1.
    if 1. - gamma < _UNIT_GAP:
        return MinimaxPolynomial(identity, 1. - gamma, gamma)

    count = terms + 1
    grid = np.unique(np.concatenate([np.linspace(gamma, 1., grid_size), np.geomspace(gamma, 1., grid_size)]))
    nodes = gamma + (1. - gamma) * 0.5 * (1. - np.cos(np.pi * np.arange(count) / (count - 1)))
    signs = (-1.) ** np.arange(count)

    spread = None
    for iteration in range(max_iter):
        system = np.concatenate([_odd_basis(nodes, terms), signs[:, None]], axis=1)
        try:
            solution = linalg.solve(system, np.ones(count))
        except linalg.LinAlgError as e:
            raise ConvergenceError('Remez degree {} gap {:.3g}: {}'.format(degree, gamma, e))
        odd_coeffs, level = solution[:-1], solution[-1]

        poly = MinimaxPolynomial(odd_coeffs, abs(level), gamma)
        residual = poly(grid) - 1.
        if abs(level) < _ROUNDOFF:
            # Below double precision the alternation is lost in rounding; certify on the grid.
            error = float(np.max(np.abs(residual)))
            if error > 1. - gamma:
                return MinimaxPolynomial(identity, 1. - gamma, gamma)
            return MinimaxPolynomial(odd_coeffs, error, gamma, nodes=nodes, node_errors=poly(nodes) - 1.)

        extrema = _alternating_extrema(grid, residual, count)
        if len(extrema) < count:
            raise ConvergenceError('Error of degree {} has {} alternations, expected {}'.format(
                degree, len(extrema), count), residual=float(np.max(np.abs(residual))))

        new_nodes = np.array([_refine(lambda t: poly(t) - 1., grid, i, np.sign(residual[i])) for i in extrema])
        errors = np.abs(poly(new_nodes) - 1.)
        spread = (errors.max() - errors.min()) / errors.max()

        if spread <= tol or errors.max() - errors.min() < _ROUNDOFF:
            node_errors = poly(nodes) - 1.
            logger.debug('Remez degree {} gap {:.3g} converged in {} iterations, error {:.6g}'.format(
                degree, gamma, iteration + 1, errors.max()))
            error = max(errors.max(), float(np.max(np.abs(residual))))
            return MinimaxPolynomial(odd_coeffs, error, gamma, nodes=nodes, node_errors=node_errors)

        nodes = new_nodes

    raise ConvergenceError('Remez degree {} gap {:.3g} did not converge in {} iterations, spread {:.3g}'.format(
        degree, gamma, max_iter, spread), residual=spread)


class MinimaxChain(object):
    r"""Composition of odd minimax stages approximating the step function.

    Parameters
    ----------
    params : ThresholdParams
    stages : list[MinimaxPolynomial]
        Stages after normalisation; only the last one keeps a maximum above 1.

    Attributes
    ----------
    errors : list[float]
        Certified error of every stage on its own domain.
    achieved_beta : float
        :math:`-\log_2(e_k / 2)`, the precision of the step output.
    """
    def __init__(self, params, stages):
        self.params = params
        self.stages = stages
        self.errors = [stage.error for stage in stages]

        final = self.errors[-1]
        self.achieved_beta = math.inf if final == 0 else -math.log2(final / 2.)

    @property
    def depth(self):
        return sum(ckks.chebyshev_depth(stage.coeffs) for stage in self.stages)

    @property
    def levels_needed(self):
        r"""Levels consumed by :func:`eval_private_threshold`, including the normalisation product."""
        return self.depth + 1

    def step_coeffs(self):
        r"""Chebyshev coefficients of :math:`(p_k + 1) / 2`."""
        coeffs = self.stages[-1].coeffs / 2.
        coeffs[0] += 0.5
        return coeffs

    def sign(self, x):
        y = np.asarray(x, dtype=np.float64)
        for stage in self.stages:
            y = stage(y)
        return y

    def __call__(self, x):
        return (self.sign(x) + 1.) / 2.

    def __len__(self):
        return len(self.stages)


def build_chain(params, strict=True):
    r"""Builds (or fetches from the cache) the minimax chain of `params`.

    Parameters
    ----------
    params : ThresholdParams
    strict : bool
        If True, a chain more than one bit short of `params.beta` raises :class:`InfeasibleChainError`. Otherwise the
        shortfall is logged and the chain returned with its `achieved_beta`.

    Returns
    -------
    MinimaxChain
    """
    chain = MinimaxChain(params, _build_chain(params.alpha, tuple(params.degrees)))

    if chain.achieved_beta < params.beta:
        message = 'Degrees {} reach beta = {:.2f}, short of {} (alpha = {})'.format(
            params.degrees, chain.achieved_beta, params.beta, params.alpha)
        if strict and chain.achieved_beta < params.beta - 1:
            raise InfeasibleChainError(message, achieved_beta=chain.achieved_beta)
        logger.warning(message)
    return chain


@functools.lru_cache(maxsize=None)
def _build_chain(alpha, degrees):
    gamma = 2. ** -alpha
    stages = []
    for i, degree in enumerate(degrees):
        stage = remez_minimax(degree, gamma)
        if stage.error >= 1:
            raise InfeasibleChainError('Stage {} of degree {} cannot separate the gap {:.3g}'.format(
                i, degree, gamma), achieved_beta=0.)

        if i < len(degrees) - 1:
            stage = stage.scaled(1. / (1. + stage.error))
            gamma = (1. - stage.error) / (1. + stage.error)
        stages.append(stage)

    errors = [stage.error for stage in stages]
    logger.info('Built chain {} for alpha = {}: stage errors {}'.format(
        list(degrees), alpha, ', '.join('{:.3g}'.format(e) for e in errors)))
    return tuple(stages)


def _match_scale(ct, scale):
    if abs(ct.scale - scale) <= rlwe.SCALE_RTOL * scale:
        return ct
    return ckks.mul_const(ct, 1., target_scale=scale)


def eval_private_threshold(ct_scores, ct_t, normaliser, chain, keys, epsilon=None, output_scale=None):
    r"""Encrypted :math:`\mathrm{step}((x - t + \epsilon / 2) \cdot norm)` on every slot.

    Parameters
    ----------
    ct_scores : hexplore.rlwe.Ciphertext
        Slots-domain scores.
    ct_t : hexplore.rlwe.Ciphertext or float
        Threshold, encrypted in the slots domain or public.
    normaliser : hexplore.rlwe.Ciphertext or float
        Encrypted or public normalisation factor.
    chain : MinimaxChain
    keys : hexplore.ckks.EvaluationKeys
    epsilon : float, optional
        Defaults to `chain.params.epsilon`.
    output_scale : float, optional
        Defaults to the scale of `ct_scores`.

    Returns
    -------
    hexplore.rlwe.Ciphertext
        Slots close to 0 or 1, within :math:`2^{-\beta}`, at level `ct_scores.level - chain.levels_needed`.
    """
    if ct_scores.domain != rlwe.SLOTS_DOMAIN:
        raise rlwe.DomainTagError('Thresholds are evaluated on slots, got {}'.format(ct_scores.domain))
    if ct_scores.level < chain.levels_needed:
        raise ring.LevelError('Threshold chain needs {} levels, scores are at level {}'.format(
            chain.levels_needed, ct_scores.level))
    for other in (ct_t, normaliser):
        if isinstance(other, rlwe.Ciphertext) and other.domain != rlwe.SLOTS_DOMAIN:
            raise rlwe.DomainTagError('Threshold operands must be slots-encoded, got {}'.format(other.domain))

    epsilon = chain.params.epsilon if epsilon is None else epsilon
    output_scale = ct_scores.scale if output_scale is None else output_scale
    start = ct_scores.level

    if isinstance(ct_t, rlwe.Ciphertext):
        diff = ckks.eval_sub(ct_scores, _match_scale(ct_t, ct_scores.scale))
    else:
        diff = ckks.eval_sub(ct_scores, float(ct_t))
    diff = ckks.add_scalar(diff, 0.5 * epsilon)

    if isinstance(normaliser, rlwe.Ciphertext):
        x = ckks.eval_rescale(ckks.eval_mul(diff, normaliser, rlk=keys.relin))
    else:
        x = ckks.mul_const(diff, float(normaliser), target_scale=output_scale)

    for stage in chain.stages[:-1]:
        x = ckks.eval_poly(x, stage.coeffs, keys, target_scale=output_scale)
    result = ckks.eval_poly(x, chain.step_coeffs(), keys, target_scale=output_scale)

    logger.debug('Private threshold with {} stages, level {} -> {}'.format(len(chain), start, result.level))
    return result
