r"""Private exploration of a database: does the database hold at least :math:`t_1` rows scoring at least :math:`t_0`?

The scientist encrypts one test vector per scoring function, the two thresholds and the local normaliser, and hands them
to the database owner together with the evaluation keys. The owner scores every row with plaintext-ciphertext lookups,
repacks the scores n at a time, merges the packed ciphertexts into the bootstrapping ring, moves the scores into the
slots with Half-BTS, thresholds every slot, counts the qualifying rows with an inner sum and thresholds the count. The
single ciphertext that comes back decrypts to the answer bit in every slot.

The two parties are role objects, :class:`Scientist` and :class:`DatabaseOwner`, which only exchange bytes.
Horizontally or vertically partitioned databases are explored by letting every owner produce its packed scores
(:meth:`DatabaseOwner.pack`) and merging them before the bootstrapping stage.
"""
import contextlib
from concurrent import futures
import json
import logging
import math

import numpy as np

from hexplore import _logging
from hexplore import bootstrap
from hexplore import ckks
from hexplore import metrics
from hexplore import pfe
from hexplore import repack
from hexplore import ring
from hexplore import rlwe
from hexplore import serialization
from hexplore import threshold
from hexplore import utils


logger = logging.getLogger('hexplore')

STAGES = metrics.STAGES
SCIENTIST_GENERATION, OWNER_GENERATION, PACKING, HALF_BTS, THRESHOLD_1, THRESHOLD_2 = STAGES


class StageError(RuntimeError):
    r"""Failure inside one stage of the exploration; the original exception is kept as `cause`."""
    def __init__(self, stage, cause):
        super(StageError, self).__init__('{} failed: {}: {}'.format(stage, type(cause).__name__, cause))
        self.stage = stage
        self.cause = cause


class PartitionError(ValueError):
    r"""Raised when partial results of several database owners cannot be combined."""


@contextlib.contextmanager
def _stage(name, timer=None):
    with _logging.log_stage(name):
        logger.info('Stage: {}'.format(name))
        try:
            if timer is None:
                yield
            else:
                with timer.time(name):
                    yield
        except StageError:
            raise
        except Exception as e:
            logger.error('{} failed: {}'.format(name, e))
            raise StageError(name, e) from e


class Database(object):
    r"""A p x h matrix of attribute values, each attribute within declared bounds :math:`[a, b)`.

    Parameters
    ----------
    values : array-like, shape (p, h)
    names : list[str], optional
        Attribute names, defaults to `x0, x1, ...`.
    bounds : dict[str, tuple[float, float]], optional
        Bounds per attribute name; attributes without bounds are only checked to be finite.
    """
    def __init__(self, values, names=None, bounds=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError('A database is a non-empty p x h matrix, got shape {}'.format(values.shape))

        names = ['x{}'.format(j) for j in range(values.shape[1])] if names is None else list(names)
        if len(names) != values.shape[1]:
            raise ValueError('{} attribute names for {} columns'.format(len(names), values.shape[1]))
        bounds = dict(bounds or {})
        unknown = set(bounds) - set(names)
        if unknown:
            raise ValueError('Bounds given for unknown attributes: {}'.format(', '.join(sorted(unknown))))

        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            row, col = bad[0]
            raise pfe.DomainError('value is not finite', row=int(row), col=int(col))
        for col, name in enumerate(names):
            if name not in bounds:
                continue
            lower, upper = bounds[name]
            outside = np.flatnonzero((values[:, col] < lower) | (values[:, col] >= upper))
            if outside.size:
                row = int(outside[0])
                raise pfe.DomainError('{} = {} outside [{}, {})'.format(name, values[row, col], lower, upper),
                                      row=row, col=col)

        self.values = values
        self.names = names
        self.bounds = bounds

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def attributes(self):
        return self.values.shape[1]

    def split_rows(self, parts):
        r"""Horizontal partition into `parts` databases of consecutive rows."""
        return [Database(chunk, self.names, self.bounds) for chunk in np.array_split(self.values, parts, axis=0)]

    def take_columns(self, columns):
        r"""Vertical partition: the database restricted to the given attribute indices."""
        names = [self.names[j] for j in columns]
        bounds = {name: self.bounds[name] for name in names if name in self.bounds}
        return Database(self.values[:, columns], names, bounds)


class SelectionMatrix(object):
    r"""The plaintext h x m attribute-selection matrix M, applied as :math:`P' = P M`."""
    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValueError('Selection matrix must be h x m with m >= 1, got shape {}'.format(matrix.shape))
        if not np.all(np.isfinite(matrix)):
            raise ValueError('Selection matrix has non-finite entries')
        self.matrix = matrix

    @classmethod
    def identity(cls, h):
        return cls(np.eye(h))

    @classmethod
    def select(cls, h, columns):
        r"""Picks attributes `columns` in order; the other attributes are dummies."""
        matrix = np.zeros((h, len(columns)))
        matrix[list(columns), np.arange(len(columns))] = 1.
        return cls(matrix)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[1] != self.matrix.shape[0]:
            raise ValueError('Database has {} attributes, the selection matrix expects {}'.format(
                values.shape[1], self.matrix.shape[0]))
        return values @ self.matrix


class Query(object):
    r"""Everything the scientist sends besides the keys.

    Parameters
    ----------
    test_vectors : list[hexplore.pfe.TestVector]
        One per scoring function, in the order of the columns of :math:`P'`.
    ct_t0, ct_t1 : hexplore.rlwe.Ciphertext
        Encrypted thresholds, slots domain, at the bootstrapping output level.
    ct_norm : hexplore.rlwe.Ciphertext
        Encrypted local normaliser :math:`1 / \sum_j \max f_j`, scaled so that one rescale after the product restores
        the score scale.
    chain1, chain2 : hexplore.threshold.MinimaxChain
        The local (per-row) and global (count) thresholds.
    rows : int
        Number of rows p the global threshold was sized for.
    config : dict
        Profile name, ring degrees, bootstrapping parameters and scales.
    manifest : dict
        Galois exponents, repacking exponents and merge degrees the owner will use.
    """
    def __init__(self, test_vectors, ct_t0, ct_t1, ct_norm, chain1, chain2, rows, config, manifest):
        self.test_vectors = list(test_vectors)
        self.ct_t0 = ct_t0
        self.ct_t1 = ct_t1
        self.ct_norm = ct_norm
        self.chain1 = chain1
        self.chain2 = chain2
        self.rows = int(rows)
        self.config = dict(config)
        self.manifest = dict(manifest)

    @property
    def threshold1(self):
        return self.chain1.params

    @property
    def threshold2(self):
        return self.chain2.params

    @property
    def functions(self):
        return len(self.test_vectors)

    def boot_params(self):
        return bootstrap.BootstrapParams(**self.config['bootstrap'])

    def size_bytes(self):
        return (sum(tv.size_bytes() for tv in self.test_vectors)
                + sum(ct.size_bytes() for ct in (self.ct_t0, self.ct_t1, self.ct_norm)))


class EvalKeySet(object):
    r"""The evaluation keys the database owner needs.

    Parameters
    ----------
    repack : hexplore.repack.RepackKeySet
    merge : dict[int, hexplore.rlwe.SwitchingKey]
        Merge keys indexed by target degree.
    evaluation : hexplore.ckks.EvaluationKeys
        Relinearization key and every Galois key of the bootstrapping ring (bootstrapping transforms, conjugation and
        inner-sum rotations).
    """
    def __init__(self, repack, merge, evaluation):
        self.repack = repack
        self.merge = dict(merge)
        self.evaluation = evaluation

    @property
    def params(self):
        return self.evaluation.relin.params

    def sizes(self):
        return {'Ring Packing': self.repack.size_bytes(), 'Ring Merging': rlwe.key_size_bytes(self.merge),
                'Bootstrapping': self.evaluation.size_bytes()}

    def size_bytes(self):
        return sum(self.sizes().values())

    def manifest(self):
        return {'galois': sorted(int(g) for g in self.evaluation.galois), 'repack': sorted(self.repack.exponents),
                'merge': sorted(int(k) for k in self.merge), 'relin': self.evaluation.relin is not None}

    def check(self, manifest):
        r"""Raises :class:`~hexplore.rlwe.MissingKeyError` if a key listed in `manifest` is absent."""
        have = self.manifest()
        missing = []
        for name in ('galois', 'repack', 'merge'):
            absent = sorted(set(manifest.get(name, ())) - set(have[name]))
            missing.extend('{} {}'.format(name, k) for k in absent)
        if manifest.get('relin') and not have['relin']:
            missing.append('relinearization key')
        if missing:
            raise rlwe.MissingKeyError('Key set lacks {}'.format(', '.join(missing)))


class PackedScores(object):
    r"""Repacked score ciphertexts of one database owner, n scores per ciphertext, the last one zero-padded.

    Parameters
    ----------
    cts : list[hexplore.rlwe.Ciphertext]
    rows : int
        Number of real (non-padding) scores.
    """
    def __init__(self, cts, rows):
        self.cts = list(cts)
        self.rows = int(rows)

    def size_bytes(self):
        return sum(ct.size_bytes() for ct in self.cts)

    def __len__(self):
        return len(self.cts)


def half_bts_count(rows, degree):
    r"""Number of Half-BTS calls for `rows` scores: one per N packed scores."""
    return math.ceil(rows / degree)


def _secret_chain(sk, profile, seed):
    r"""Secrets of degree n, 2n, ..., N over :math:`q_0`; the last one is the coefficient vector of `sk`."""
    rings = {profile.small_degree: profile.small_ring()}
    rings.update(profile.merge_rings())
    degrees = sorted(rings)

    secrets = []
    for k, rng in zip(degrees[:-1], utils.spawn(seed, len(degrees))):
        noise = ring.NoiseParams(min(profile.hamming_weight, 2 * k // 3), gaussian_sigma=profile.sigma)
        s, _ = rlwe.keygen(rings[k], noise, rng)
        secrets.append(rlwe.SecretKey(rings[k], s.values, key_id='s_{}'.format(k)))
    secrets.append(rlwe.SecretKey(rings[degrees[-1]], sk.values, key_id=sk.key_id))
    return secrets


def _check_thresholds(specs, t0, t1, rows, epsilon):
    if any(np.min(spec.table) < 0 for spec in specs):
        raise ring.ParameterError('Scoring tables must be non-negative')
    score_range = pfe.score_bound(specs)
    if not epsilon <= t0 <= score_range:
        raise ring.ParameterError('t0 = {} outside [{}, {}], the range of positive scores'.format(
            t0, epsilon, score_range))
    if not 1 <= t1 <= rows:
        raise ring.ParameterError('t1 = {} outside [1, {}]'.format(t1, rows))
    return score_range


def plan_thresholds(specs, t0, t1, profile, rows, epsilon=1.):
    r"""Checks the query against the profile and builds both threshold chains.

    Parameters
    ----------
    specs : list[hexplore.pfe.FunctionSpec]
    t0 : float
    t1 : int
    profile : hexplore.profiles.Profile
    rows : int
    epsilon : float

    Returns
    -------
    hexplore.threshold.MinimaxChain
        Local threshold, sized for the score range :math:`\sum_j \max f_j`.
    hexplore.threshold.MinimaxChain
        Global threshold, sized for `rows`.

    Raises
    ------
    hexplore.ring.ParameterError
        If a table length differs from n, a threshold is out of range, or the local threshold is too coarse for the
        number of slots that are summed.
    hexplore.ring.LevelError
        If the bootstrapping output level cannot hold both thresholds.
    """
    if not profile.explores:
        raise ring.ParameterError('Profile {} has no bootstrapping circuit'.format(profile.name))
    if not specs:
        raise ring.ParameterError('At least one scoring function is needed')
    for spec in specs:
        if spec.n != profile.small_degree:
            raise ring.ParameterError('Table of {} has {} entries, profile {} tabulates on n = {}'.format(
                spec.name, spec.n, profile.name, profile.small_degree))
    if rows < 1:
        raise ring.ParameterError('The database must hold at least one row')

    score_range = _check_thresholds(specs, t0, t1, rows, epsilon)
    params1 = profile.threshold_params(1, score_range, epsilon)
    params1.check_gap(1. / score_range)
    params2 = profile.threshold_params(2, rows)
    params2.check_gap(1. / rows)
    chain1 = threshold.build_chain(params1)
    chain2 = threshold.build_chain(params2)

    out = output_level(profile)
    if out < chain1.levels_needed + chain2.levels_needed:
        raise ring.LevelError('Thresholds need {} + {} levels, bootstrapping leaves {}'.format(
            chain1.levels_needed, chain2.levels_needed, out))

    # Every slot of every Half-BTS output adds up to 2^-beta1 to the count.
    count_error = half_bts_count(rows, profile.degree) * profile.degree * 2. ** -chain1.achieved_beta
    if count_error >= 0.5 - rows * params2.gap:
        raise ring.ParameterError('Threshold 1 precision 2^-{:.1f} leaves a count error of {:.3f} for {} rows'.format(
            chain1.achieved_beta, count_error, rows))
    return chain1, chain2


def output_level(profile):
    r"""Level of the Half-BTS outputs, where the thresholds start."""
    return profile.levels - profile.boot_params().depth


def scientist_keygen(profile, seed):
    r"""Generates the scientist's secrets and the owner's evaluation keys.

    Parameters
    ----------
    profile : hexplore.profiles.Profile
    seed : int or np.random.Generator

    Returns
    -------
    hexplore.rlwe.SecretKey
        Secret of the bootstrapping ring, used to encrypt the thresholds and to decrypt the answer.
    hexplore.rlwe.SecretKey
        Secret of the small ring, used to encrypt the test vectors.
    EvalKeySet
    """
    big = profile.ring_params()
    bootstrapper = bootstrap.Bootstrapper(big, profile.boot_params(), profile.input_scale, profile.scale)

    noise = profile.noise()
    rngs = utils.spawn(seed, 5)
    sk, _ = rlwe.keygen(big, noise, rngs[0])
    secrets = _secret_chain(sk, profile, rngs[1])
    small_sk = secrets[0]

    repack_keys = repack.gen_repack_keys(small_sk, profile.gadget(small_sk.params), rngs[2], noise=noise)
    merge_keys = rlwe.gen_merge_keys(secrets, {k: profile.gadget(p) for k, p in profile.merge_rings().items()},
                                     rngs[3], noise=noise)
    inner = [2 ** i for i in range(utils.log2_int(big.degree // 2))]
    evaluation = bootstrapper.gen_keys(sk, profile.gadget(big), rngs[4], noise=noise, extra_rotations=inner)
    keys = EvalKeySet(repack_keys, merge_keys, evaluation)

    for name, size in keys.sizes().items():
        logger.info('{}: {:.2f} MB'.format(name, size / 2 ** 20))
    return sk, small_sk, keys


def make_query(sk, small_sk, manifest, specs, t0, t1, profile, seed, rows, epsilon=1., chains=None):
    r"""Encrypts the test vectors, the thresholds and the local normaliser.

    Parameters
    ----------
    sk, small_sk : hexplore.rlwe.SecretKey
        From :func:`scientist_keygen`.
    manifest : dict
        :meth:`EvalKeySet.manifest` of the keys the owner will receive.
    specs : list[hexplore.pfe.FunctionSpec]
    t0 : float
    t1 : int
    profile : hexplore.profiles.Profile
    seed : int or np.random.Generator
    rows : int
    epsilon : float
    chains : tuple[hexplore.threshold.MinimaxChain, hexplore.threshold.MinimaxChain], optional
        From :func:`plan_thresholds`, which is called when not given.

    Returns
    -------
    Query
    """
    chain1, chain2 = plan_thresholds(specs, t0, t1, profile, rows, epsilon) if chains is None else chains
    big = sk.params
    out = output_level(profile)
    rngs = utils.spawn(seed, 2)

    tvs = [pfe.build_test_vector(spec, small_sk, profile.input_scale, rng)
           for spec, rng in zip(specs, utils.spawn(rngs[0], len(specs)))]

    slots = big.degree // 2
    rng_t0, rng_t1, rng_norm = utils.spawn(rngs[1], 3)
    ct_t0 = ckks.encrypt_slots(sk, np.full(slots, float(t0)), profile.scale, out, rng_t0)
    ct_t1 = ckks.encrypt_slots(sk, np.full(slots, float(t1)), profile.scale, out, rng_t1)
    ct_norm = ckks.encrypt_slots(sk, np.full(slots, 1. / pfe.score_bound(specs)), big.q[out], out, rng_norm)

    config = {'profile': profile.name, 'degree': big.degree, 'small_degree': profile.small_degree,
              'bootstrap': profile.boot_params().to_dict(), 'input_scale': profile.input_scale,
              'scale': profile.scale}
    query = Query(tvs, ct_t0, ct_t1, ct_norm, chain1, chain2, rows, config, manifest)
    logger.info('Query: {} test vectors, {:.2f} MB'.format(len(tvs), query.size_bytes() / 2 ** 20))
    return query


def scientist_setup(specs, t0, t1, profile, seed, rows, epsilon=1.):
    r"""Generates the secret, the evaluation keys and the encrypted query.

    The parameters are checked before any key is generated.

    Parameters
    ----------
    specs : list[hexplore.pfe.FunctionSpec]
        One scoring function per selected attribute, tabulated on n points.
    t0 : float
        Row threshold: a row qualifies if its score is at least `t0`.
    t1 : int
        Count threshold: the answer is 1 if at least `t1` rows qualify.
    profile : hexplore.profiles.Profile
    seed : int
        Split into a key seed and a query seed, so that :func:`scientist_keygen` and :func:`make_query` called with
        `utils.spawn(seed, 2)` give the same bytes.
    rows : int
        Number of rows p of the database to explore; sizes the global threshold.
    epsilon : float
        Spacing of the score grid (1 for integer tables).

    Returns
    -------
    hexplore.rlwe.SecretKey
    EvalKeySet
    Query
    """
    chains = plan_thresholds(specs, t0, t1, profile, rows, epsilon)
    key_seed, query_seed = utils.spawn(seed, 2)
    sk, small_sk, keys = scientist_keygen(profile, key_seed)
    query = make_query(sk, small_sk, keys.manifest(), specs, t0, t1, profile, query_seed, rows, epsilon, chains)
    return sk, keys, query


def owner_bootstrapper(query, keys):
    r"""The owner's bootstrapping evaluator, built from the public part of the query."""
    config = query.config
    if keys.params.degree != config['degree']:
        raise ring.ParameterError('Keys for degree {}, query for degree {}'.format(
            keys.params.degree, config['degree']))
    return bootstrap.Bootstrapper(keys.params, query.boot_params(), config['input_scale'], config['scale'])


def pack_scores(db, selection, query, keys, columns=None, threads=1, progress=False):
    r"""Scores every row and repacks the scores, n per ciphertext.

    Parameters
    ----------
    db : Database
    selection : SelectionMatrix
    query : Query
    keys : EvalKeySet
    columns : list[int], optional
        Indices of the query's scoring functions matching the columns of :math:`P'`; all of them by default. An owner
        of a vertical partition passes the functions of its own attributes.
    threads : int
    progress : bool

    Returns
    -------
    PackedScores
    """
    tvs = query.test_vectors if columns is None else [query.test_vectors[j] for j in columns]
    selected = selection.apply(db.values)
    if selected.shape[1] != len(tvs):
        raise ValueError('Selection yields {} columns for {} scoring functions'.format(selected.shape[1], len(tvs)))

    scores = pfe.eval_scores(selected, tvs, threads=threads)
    packed = repack.repack_batches(scores, keys.repack, threads=threads, progress=progress)
    return PackedScores(packed, db.rows)


def merge_horizontal(partials):
    r"""Concatenates the packed scores of owners holding disjoint rows.

    The merged row count is public, and the count threshold later normalises by its inverse 1/p rather than by a product
    of per-owner inverses.

    Raises
    ------
    hexplore.ring.LevelError
        If the owners' ciphertexts sit at different levels.
    hexplore.rlwe.ScaleMismatchError
    """
    if not partials:
        raise PartitionError('Nothing to merge')
    first = partials[0].cts[0]
    for partial in partials:
        for ct in partial.cts:
            if ct.level != first.level or ct.params != first.params:
                raise ring.LevelError('Owners sent ciphertexts at different levels or rings')
            if abs(ct.scale - first.scale) > rlwe.SCALE_RTOL * first.scale:
                raise rlwe.ScaleMismatchError('Owners sent ciphertexts at different scales')
    return PackedScores([ct for partial in partials for ct in partial.cts], sum(p.rows for p in partials))


def merge_vertical(partials):
    r"""Adds the packed partial scores of owners holding different attributes of the same rows."""
    if not partials:
        raise PartitionError('Nothing to merge')
    rows, count = partials[0].rows, len(partials[0])
    for partial in partials[1:]:
        if partial.rows != rows or len(partial) != count:
            raise PartitionError('Owners hold {} and {} rows; vertical partitions must align'.format(
                rows, partial.rows))
    cts = [_sum(column) for column in zip(*(p.cts for p in partials))]
    return PackedScores(cts, rows)


def _sum(cts):
    total = cts[0]
    for ct in cts[1:]:
        total = rlwe.add(total, ct)
    return total


def _merge_groups(packed, keys, degree):
    arity = degree // packed.cts[0].params.degree
    zero = rlwe.Ciphertext.zero(packed.cts[0].params, packed.cts[0].level, packed.cts[0].scale)
    merged = []
    for start in range(0, len(packed.cts), arity):
        group = packed.cts[start:start + arity]
        group = group + [zero] * (arity - len(group))
        merged.append(rlwe.merge_tree(group, keys.merge))
    return merged


def finish(packed, query, keys, bootstrapper=None, threads=1, timer=None, progress=False):
    r"""Merges, bootstraps and thresholds packed scores, returning the encrypted answer bit.

    Parameters
    ----------
    packed : PackedScores
    query : Query
    keys : EvalKeySet
    bootstrapper : hexplore.bootstrap.Bootstrapper, optional
        Built from the query when not given.
    threads : int
        Half-BTS calls run concurrently when `threads > 1`.
    timer : hexplore.metrics.StageTimer, optional
    progress : bool

    Returns
    -------
    hexplore.rlwe.Ciphertext
        Every slot close to 1 if at least :math:`t_1` of the `packed.rows` scores reach :math:`t_0`, else close to 0.
    """
    if bootstrapper is None:
        with _stage(OWNER_GENERATION, timer):
            bootstrapper = owner_bootstrapper(query, keys)
    degree = bootstrapper.params.degree

    with _stage(PACKING, timer):
        merged = _merge_groups(packed, keys, degree)

    with _stage(HALF_BTS, timer):
        if threads > 1:
            with futures.ThreadPoolExecutor(max_workers=threads) as pool:
                halves = list(pool.map(lambda ct: bootstrapper.half_bts(ct, keys.evaluation), merged))
        else:
            halves = []
            bar = _logging.ProgressBar(len(merged), stage=HALF_BTS, unit='ciphertext', disable=not progress)
            for i in bar:
                halves.append(bootstrapper.half_bts(merged[i], keys.evaluation))
                bar.report(i, level=halves[-1][0].level)
        logger.info('{} Half-BTS calls for {} rows'.format(len(merged), packed.rows))

    with _stage(THRESHOLD_1, timer):
        def local(ct):
            return threshold.eval_private_threshold(ct, query.ct_t0, query.ct_norm, query.chain1, keys.evaluation,
                                                    output_scale=query.config['scale'])

        slots = [ct for pair in halves for ct in pair]
        if threads > 1:
            with futures.ThreadPoolExecutor(max_workers=threads) as pool:
                indicators = list(pool.map(local, slots))
        else:
            indicators = [local(ct) for ct in slots]
        total = _sum(indicators)

    with _stage(THRESHOLD_2, timer):
        count = ckks.inner_sum(total, degree // 2, keys.evaluation)
        result = threshold.eval_private_threshold(count, query.ct_t1, 1. / packed.rows, query.chain2,
                                                  keys.evaluation, epsilon=1., output_scale=query.config['scale'])
    return result


def explore(db, selection, query, keys, threads=1, timer=None, progress=False, bootstrapper=None):
    r"""Runs the whole exploration for one database owner.

    Parameters
    ----------
    db : Database
    selection : SelectionMatrix
    query : Query
    keys : EvalKeySet
    threads : int
    timer : hexplore.metrics.StageTimer, optional
        Receives the time spent in each stage.
    progress : bool
    bootstrapper : hexplore.bootstrap.Bootstrapper, optional
        Built from the query when not given.

    Returns
    -------
    hexplore.rlwe.Ciphertext

    Raises
    ------
    StageError
        Wrapping the first failure, tagged with its stage.
    """
    with _stage(OWNER_GENERATION, timer):
        if db.rows != query.rows:
            raise ring.ParameterError('Query sized for {} rows, the database holds {}'.format(query.rows, db.rows))
        keys.check(query.manifest)
        if bootstrapper is None:
            bootstrapper = owner_bootstrapper(query, keys)

    with _stage(PACKING, timer):
        packed = pack_scores(db, selection, query, keys, threads=threads, progress=progress)

    return finish(packed, query, keys, bootstrapper=bootstrapper, threads=threads, timer=timer, progress=progress)


def decrypt_result(sk, ct):
    r"""Decrypts the answer.

    Returns
    -------
    int
        The answer bit.
    float
        The decrypted value it was rounded from (the first slot).
    """
    values = ckks.decrypt_slots(sk, ct).real
    bits = np.clip(utils.round_half_away(values), 0, 1).astype(np.int64)
    if np.any(bits != bits[0]):
        logger.warning('{} of {} slots disagree with the first slot'.format(int(np.sum(bits != bits[0])), bits.size))
    logger.info('Result {:.6f} -> {}, max deviation from the bit {:.3g}'.format(
        values[0], bits[0], float(np.max(np.abs(values - bits[0])))))
    return int(bits[0]), float(values[0])


def plaintext_explore(values, selection, specs, t0, t1, epsilon=1.):
    r"""The exploration computed in the clear.

    Returns
    -------
    int
        1 if at least `t1` rows have a score of at least `t0`.
    int
        The number of qualifying rows.
    np.ndarray
        The score of every row.
    """
    selected = selection.apply(values)
    scores = pfe.plaintext_scores(selected, specs)
    count = int(np.sum(scores - t0 + 0.5 * epsilon > 0))
    return int(count - t1 + 0.5 > 0), count, scores


def _switching_key_bytes(degree, q_bits, special_bits, primes_per_digit=1, base2=None):
    if base2 is None:
        digits = math.ceil(len(q_bits) / primes_per_digit)
    else:
        digits = sum(math.ceil(bits / base2) for bits in q_bits)
    return digits * 2 * (len(q_bits) + len(special_bits)) * degree * 8


def analytic_sizes(profile, functions=16):
    r"""Sizes of the scientist's data computed from the profile's bit sizes, without materialising any ring.

    Parameters
    ----------
    profile : hexplore.profiles.Profile
    functions : int
        Number of scoring functions (test vectors).

    Returns
    -------
    dict[str, int]
        Bytes for the packing keys, the merge keys, the bootstrapping keys, the test vectors, the encrypted thresholds
        and normaliser, and the total.
    """
    n, big = profile.small_degree, profile.degree
    small_special = profile.small_special_bits or profile.special_bits
    small_q = profile.small_q_bits

    def small_key(degree):
        return _switching_key_bytes(degree, small_q, small_special, base2=profile.small_base2)

    sizes = {'Ring Packing': utils.log2_int(n) * small_key(n)}
    merge = 0
    k = 2 * n
    while k <= big:
        merge += small_key(k)
        k *= 2
    sizes['Ring Merging'] = merge

    q_bits = profile.q_bits
    big_key = _switching_key_bytes(big, q_bits, profile.special_bits, profile.primes_per_digit, profile.base2)
    out = len(q_bits) - 1
    if profile.explores:
        boot_params = profile.boot_params()
        slots = big // 2 if boot_params.slots is None else boot_params.slots
        rotations = set(bootstrap.analytic_rotations(slots, boot_params))
        rotations.update(2 ** i for i in range(utils.log2_int(big // 2)))
        rotations.discard(0)
        trace = utils.log2_int(big // (2 * slots))
        # Relinearization, conjugation, rotations and the sparse-packing trace.
        sizes['Bootstrapping'] = (2 + len(rotations) + trace) * big_key
        out -= boot_params.depth
    else:
        sizes['Bootstrapping'] = 0

    sizes['RLWE(f_i)'] = functions * 2 * len(small_q) * n * 8
    sizes['RLWE(t_i)'] = 3 * 2 * (out + 1) * big * 8 if profile.explores else 0
    sizes['Total'] = sum(sizes.values())
    return sizes


class Scientist(object):
    r"""The querying party: holds the secret and turns scoring functions and thresholds into bytes.

    Parameters
    ----------
    profile : hexplore.profiles.Profile
    specs : list[hexplore.pfe.FunctionSpec]
    t0 : float
    t1 : int
    rows : int
    seed : int
    timer : hexplore.metrics.StageTimer, optional
    """
    def __init__(self, profile, specs, t0, t1, rows, seed=0, timer=None):
        self.profile = profile
        self.specs = list(specs)
        self.t0 = t0
        self.t1 = t1
        self.rows = rows
        self.seed = seed
        self.timer = timer

        self.sk = None
        self.keys = None
        self.query = None

    def setup(self):
        with _stage(SCIENTIST_GENERATION, self.timer):
            self.sk, self.keys, self.query = scientist_setup(self.specs, self.t0, self.t1, self.profile, self.seed,
                                                             self.rows)
        return self

    def query_bytes(self):
        return serialization.dumps(self.query)

    def key_bytes(self):
        return serialization.dumps(self.keys)

    def secret_bytes(self):
        return serialization.dumps(self.sk)

    def decrypt(self, result):
        r"""Answer bit and raw value from the owner's result bytes."""
        return decrypt_result(self.sk, serialization.loads(result, expected='ciphertext'))

    def expected(self, db, selection):
        r"""Plaintext answer on a database the scientist can see, for testing."""
        return plaintext_explore(db.values, selection, self.specs, self.t0, self.t1)


class DatabaseOwner(object):
    r"""The data holder: receives query and keys as bytes and returns the encrypted answer as bytes.

    Parameters
    ----------
    db : Database
    selection : SelectionMatrix
    threads : int
        Size of the owner's worker pool.
    timer : hexplore.metrics.StageTimer, optional
    """
    def __init__(self, db, selection, threads=1, timer=None, progress=False):
        self.db = db
        self.selection = selection
        self.threads = threads
        self.timer = timer
        self.progress = progress

        self.query = None
        self.keys = None
        self.bootstrapper = None

    def receive(self, query_bytes, key_bytes):
        with _stage(OWNER_GENERATION, self.timer):
            self.query = serialization.loads(query_bytes, expected='query')
            self.keys = serialization.loads(key_bytes, expected='key_set')
            self.keys.check(self.query.manifest)
            self.bootstrapper = owner_bootstrapper(self.query, self.keys)
        return self

    def _require_query(self):
        if self.query is None:
            raise RuntimeError('No query received')

    def explore(self):
        self._require_query()
        result = explore(self.db, self.selection, self.query, self.keys, threads=self.threads, timer=self.timer,
                         progress=self.progress, bootstrapper=self.bootstrapper)
        return serialization.dumps(result)

    def pack(self, columns=None):
        r"""Packed scores of this owner's part of a partitioned database, as bytes."""
        self._require_query()
        with _stage(PACKING, self.timer):
            packed = pack_scores(self.db, self.selection, self.query, self.keys, columns=columns,
                                 threads=self.threads, progress=self.progress)
        return serialization.dumps(packed)

    def finish(self, partials, mode='horizontal'):
        r"""Merges the packed scores of every owner (this one included) and completes the exploration.

        Parameters
        ----------
        partials : list[bytes]
        mode : str
            'horizontal' for owners of disjoint rows, 'vertical' for owners of disjoint attributes.
        """
        self._require_query()
        with _stage(PACKING, self.timer):
            packed = [serialization.loads(data, expected='packed_scores') for data in partials]
            if mode == 'horizontal':
                merged = merge_horizontal(packed)
            elif mode == 'vertical':
                merged = merge_vertical(packed)
            else:
                raise ValueError('Unknown partition mode {}'.format(mode))
            if merged.rows != self.query.rows:
                raise ring.ParameterError('Query sized for {} rows, the partitions hold {}'.format(
                    self.query.rows, merged.rows))
        result = finish(merged, self.query, self.keys, bootstrapper=self.bootstrapper, threads=self.threads,
                        timer=self.timer, progress=self.progress)
        return serialization.dumps(result)


def _write_query(w, query):
    w.pack('H', len(query.test_vectors))
    for tv in query.test_vectors:
        serialization.write_test_vector(w, tv)
    for ct in (query.ct_t0, query.ct_t1, query.ct_norm):
        serialization.write_ciphertext(w, ct)
    serialization.write_chain(w, query.chain1)
    serialization.write_chain(w, query.chain2)
    w.pack('Q', query.rows)
    w.string(json.dumps({'config': query.config, 'manifest': query.manifest}, sort_keys=True))


def _read_query(r):
    tvs = [serialization.read_test_vector(r) for _ in range(r.unpack('H'))]
    ct_t0, ct_t1, ct_norm = [serialization.read_ciphertext(r) for _ in range(3)]
    chain1 = serialization.read_chain(r)
    chain2 = serialization.read_chain(r)
    rows = r.unpack('Q')
    extra = json.loads(r.string())
    return Query(tvs, ct_t0, ct_t1, ct_norm, chain1, chain2, rows, extra['config'], extra['manifest'])


def _write_key_set(w, keys):
    serialization.write_repack_keys(w, keys.repack)
    serialization.write_merge_keys(w, keys.merge)
    serialization.write_evaluation_keys(w, keys.evaluation)


def _read_key_set(r):
    repack_keys = serialization.read_repack_keys(r)
    merge = serialization.read_merge_keys(r)
    return EvalKeySet(repack_keys, merge, serialization.read_evaluation_keys(r))


def _write_packed(w, packed):
    w.pack('QI', packed.rows, len(packed.cts))
    for ct in packed.cts:
        serialization.write_ciphertext(w, ct)


def _read_packed(r):
    rows, count = r.unpack('QI')
    return PackedScores([serialization.read_ciphertext(r) for _ in range(count)], rows)


serialization.register('query', Query, _write_query, _read_query)
serialization.register('key_set', EvalKeySet, _write_key_set, _read_key_set)
serialization.register('packed_scores', PackedScores, _write_packed, _read_packed)
