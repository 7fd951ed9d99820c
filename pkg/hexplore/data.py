r"""Databases, scoring functions and sidecar configuration on disk.

A database is a CSV file with a header row of attribute names and one row per entry. Attribute bounds and parameter
overrides live in a sidecar file of `key=value` lines next to it, e.g.::

    profile=toy
    n=64
    threshold1.beta=12
    t0=80
    bounds.x0=0,2
"""
import csv
import json
import logging

import numpy as np

from hexplore import pfe
from hexplore import profiles
from hexplore import protocol
from hexplore import utils


logger = logging.getLogger('hexplore')

# Short sidecar keys and the profile fields they override.
SIDECAR_FIELDS = {
    'n': 'small_degree',
    'N': 'degree',
    'q0_bits': 'first_prime_bits',
    'q_bits': 'prime_bits',
    'special_bits': 'special_bits',
    'delta_bits': 'scale_bits',
    'headroom_bits': 'input_headroom_bits',
    'hamming_weight': 'hamming_weight',
}


class DataFormatError(ValueError):
    r"""Malformed database or sidecar file, with the offending row and column (1-based, header is row 1)."""
    def __init__(self, message, path=None, row=None, col=None):
        location = ''
        if path is not None:
            location += '{}: '.format(path)
        if row is not None:
            location += 'row {}, column {}: '.format(row, col)
        super(DataFormatError, self).__init__(location + message)
        self.path = path
        self.row = row
        self.col = col


def load_database(path, bounds=None):
    r"""Reads a database CSV.

    Parameters
    ----------
    path : str
    bounds : dict[str, tuple[float, float]], optional
        Attribute bounds, usually from :func:`load_sidecar`.

    Returns
    -------
    hexplore.protocol.Database

    Raises
    ------
    DataFormatError
        For ragged rows, non-numeric cells and values outside their bounds.
    """
    with open(path, 'r', newline='') as f:
        reader = csv.reader(f)
        try:
            names = [name.strip() for name in next(reader)]
        except StopIteration:
            raise DataFormatError('empty file', path=path)

        rows = []
        for i, line in enumerate(reader, start=2):
            if not line:
                continue
            if len(line) != len(names):
                raise DataFormatError('expected {} values, got {}'.format(len(names), len(line)), path=path, row=i,
                                      col=min(len(line), len(names)) + 1)
            row = []
            for j, cell in enumerate(line):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DataFormatError('cannot parse {!r} as a number'.format(cell), path=path, row=i, col=j + 1)
            rows.append(row)

    if not rows:
        raise DataFormatError('no rows', path=path)

    try:
        db = protocol.Database(np.array(rows), names, bounds)
    except pfe.DomainError as e:
        # Database rows are 0-based and exclude the header.
        raise DataFormatError(str(e), path=path, row=e.row + 2, col=e.col + 1) from e

    logger.info('Loaded {} rows and {} attributes from {}'.format(db.rows, db.attributes, path))
    return db


def save_database(db, path):
    r"""Writes a database CSV; values are written with `repr` so they load back exactly."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(db.names)
        for row in db.values:
            writer.writerow([repr(float(v)) for v in row])


def gen_dataset(p, h, seed, path=None, mean=1., std_dev=1., lower=0., upper=2.):
    r"""Synthetic database of Gaussian attributes clamped to :math:`[lower, upper)`.

    Parameters
    ----------
    p, h : int
        Rows and attributes, both at least 1.
    seed : int
    path : str, optional
        If given, the database is also written there.
    mean, std_dev : float
    lower, upper : float

    Returns
    -------
    hexplore.protocol.Database
    """
    if p < 1 or h < 1:
        raise ValueError('Need at least one row and one attribute, got p = {}, h = {}'.format(p, h))

    rng = utils.as_generator(seed)
    values = rng.normal(mean, std_dev, size=(p, h))
    values = np.clip(values, lower, np.nextafter(upper, lower))

    names = ['x{}'.format(j) for j in range(h)]
    db = protocol.Database(values, names, {name: (lower, upper) for name in names})
    if path is not None:
        save_database(db, path)
        logger.info('Wrote {} x {} dataset to {}'.format(p, h, path))
    return db


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        pass
    if ',' in text:
        return [_parse_value(part.strip()) for part in text.split(',')]
    return text


def load_sidecar(path):
    r"""Reads `key=value` lines; `#` starts a comment.

    Values are parsed as JSON where possible, comma-separated values become lists. Keys with dots are nested, so
    `threshold1.beta=12` gives `{'threshold1': {'beta': 12}}`.

    Returns
    -------
    dict
        The configuration, without the bounds.
    dict[str, tuple[float, float]]
        Attribute bounds from `bounds.<name>=a,b` lines.
    """
    config, bounds = {}, {}
    with open(path, 'r') as f:
        for i, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise DataFormatError('expected key=value, got {!r}'.format(line), path=path, row=i, col=1)

            key, value = (part.strip() for part in line.split('=', 1))
            value = _parse_value(value)
            if key.startswith('bounds.'):
                if not isinstance(value, list) or len(value) != 2:
                    raise DataFormatError('bounds need two values a,b', path=path, row=i, col=2)
                bounds[key[len('bounds.'):]] = (float(value[0]), float(value[1]))
                continue

            target = config
            *parents, leaf = key.split('.')
            for parent in parents:
                target = target.setdefault(parent, {})
            target[leaf] = value
    return config, bounds


def profile_from_config(config, default='tiny'):
    r"""The named profile of a sidecar configuration, with its overrides applied."""
    profile = profiles.get_profile(config.get('profile', default))

    overrides = {}
    for key, field in SIDECAR_FIELDS.items():
        if key in config:
            overrides[field] = config[key]
    for which in ('threshold1', 'threshold2', 'bootstrap'):
        if which in config:
            merged = dict(getattr(profile, which) or {})
            merged.update(config[which])
            overrides[which] = merged

    return profile.with_overrides(**overrides) if overrides else profile


def random_functions(m, n, seed, lower=0., upper=2., levels=10):
    r"""`m` scoring functions :math:`[lower, upper) \to \{0, \dots, levels - 1\}` with random integer tables."""
    rng = utils.as_generator(seed)
    return [pfe.FunctionSpec(lower, upper, rng.integers(0, levels, size=n).astype(np.float64), name='f{}'.format(j))
            for j in range(m)]


def save_functions(specs, path):
    r"""Writes scoring functions as JSON (the scientist's private input)."""
    with open(path, 'w') as f:
        json.dump([{'name': spec.name, 'lower': spec.lower, 'upper': spec.upper, 'table': spec.table.tolist()}
                   for spec in specs], f, indent=1)


def load_functions(path):
    with open(path, 'r') as f:
        items = json.load(f)
    return [pfe.FunctionSpec(item['lower'], item['upper'], item['table'], name=item.get('name', 'f{}'.format(j)))
            for j, item in enumerate(items)]


def load_selection(path, h=None):
    r"""Reads a selection matrix from a headerless CSV; the identity on `h` attributes if `path` is None."""
    if path is None:
        return protocol.SelectionMatrix.identity(h)
    try:
        matrix = np.loadtxt(path, delimiter=',', ndmin=2)
    except ValueError as e:
        raise DataFormatError(str(e), path=path)
    return protocol.SelectionMatrix(matrix)
