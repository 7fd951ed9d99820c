r"""Command-line front end: `hexplore <command> [options]`.

Each command runs in its own run directory (`--experiments_base/--experiment_name`) holding the logs and a
`config.json` of the arguments. The scientist's commands (`keygen`, `query-gen`, `decrypt`) and the database owner's
command (`evaluate`) only share files; `evaluate` never reads a secret key.
"""
import argparse
import ast
import json
import math
import os
import sys

import numpy as np
from tensorboardX import SummaryWriter

from hexplore import _logging
from hexplore import data
from hexplore import metrics
from hexplore import pfe
from hexplore import profiles
from hexplore import protocol
from hexplore import ring
from hexplore import rlwe
from hexplore import serialization
from hexplore import threshold
from hexplore import utils


COMMANDS = ('gen-dataset', 'keygen', 'query-gen', 'evaluate', 'decrypt', 'bench', 'sizes')

# Failures reported as a non-zero exit code instead of a traceback.
EXPECTED_ERRORS = (protocol.StageError, protocol.PartitionError, data.DataFormatError, pfe.DomainError,
                   ring.ParameterError, ring.LevelError, rlwe.MissingKeyError, serialization.SerializationError,
                   threshold.InfeasibleChainError, OSError)

SECRET_FILE = 'secret.key'
SMALL_SECRET_FILE = 'secret_small.key'
KEYS_FILE = 'eval.keys'
MANIFEST_FILE = 'manifest.json'


def add_boolean_arg(parser, name, help):
    r"""Adds two arguments (one with a \"no-" prefix), allowing for a positive or a negative boolean argument."""
    parser.add_argument("--{}".format(name), dest=name, action="store_true", default=True, help=help)
    parser.add_argument("--no-{}".format(name), dest=name, action="store_false", help=argparse.SUPPRESS)


class DictAction(argparse.Action):
    r"""Converts a string representation of a dict into a dict instance (including types of values)."""
    def __init__(self, option_strings, dest, nargs=None, **kwargs):
        if nargs is not None:
            raise ValueError("nargs not allowed")
        super(DictAction, self).__init__(option_strings, dest, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, ast.literal_eval(values))


class ExplorationBuilder(object):
    r"""Runs one command of the exploration tool-chain.

    Parameters
    ----------
    command : str
        One of :data:`COMMANDS`.
    kwargs : dict[str, \*]
        Command line arguments. See :func:`~add_args` for all options.

    Attributes
    ----------
    run_dir : str
        Directory for logs, `config.json` and TensorBoard events.
    profile : hexplore.profiles.Profile
        The `--profile`, with overrides from `--sidecar` and `--profile_overrides` applied.
    sidecar : dict
        Parsed sidecar configuration, without bounds.
    bounds : dict[str, tuple[float, float]]

    Notes
    -----
    All arguments are saved as instance attributes.
    """

    @classmethod
    def get_parser(cls):
        r"""Creates the command line argument parser, with one sub-parser per command."""
        parser = argparse.ArgumentParser(prog='hexplore', description="Private functional exploration of a database.")
        subparsers = parser.add_subparsers(dest='command', required=True)
        for command in COMMANDS:
            cls.add_args(subparsers.add_parser(command), command)
        return parser

    @classmethod
    def get_args(cls, argv=None):
        r"""Parses `argv` and returns the dictionary of arguments."""
        args = cls.get_parser().parse_args(argv)

        return vars(args)

    @classmethod
    def add_args(cls, parser, command):
        r"""Adds the common arguments and the arguments of `command` to a parser."""
        parser.add_argument("--profile",
                            dest="profile", action="store", type=str, default=None,
                            choices=sorted(profiles.PROFILES),
                            help="Parameter profile; defaults to the sidecar's `profile` entry, then to tiny.")
        parser.add_argument("--sidecar",
                            dest="sidecar", action="store", type=str, default=None,
                            help="key=value file with attribute bounds, profile overrides and fixture thresholds.")
        parser.add_argument("--profile_overrides",
                            dest="profile_overrides", action=DictAction, type=str, default={},
                            help="Profile fields to override, a Python dictionary written in quotes.")
        parser.add_argument("--seed",
                            dest="seed", action="store", type=int, default=0,
                            help="Seed of all randomness of the command.")
        parser.add_argument("--threads",
                            dest="threads", action="store", type=int, default=1,
                            help="Worker threads of the database owner.")
        add_boolean_arg(parser, "progress", help="Whether to show progress bars.")

        parser.add_argument("--experiments_base",
                            dest="experiments_base", action="store", type=str, default='runs',
                            help="Base directory where all runs direct their logs.")
        parser.add_argument("--experiment_name",
                            dest="experiment_name", action="store", type=str, default=command,
                            help="Name of the sub-directory of --experiments_base used for logs.")
        parser.add_argument("--key_dir",
                            dest="key_dir", action="store", type=str, default='keys',
                            help="Directory of the secrets, evaluation keys and key manifest.")

        if command in ('gen-dataset', 'bench'):
            parser.add_argument("--attributes",
                                dest="attributes", action="store", type=int, default=16,
                                help="Number of attributes h of the synthetic database.")
        if command == 'gen-dataset':
            parser.add_argument("--rows",
                                dest="rows", action="store", type=int, required=True,
                                help="Number of rows p.")
            parser.add_argument("--output",
                                dest="output", action="store", type=str, required=True,
                                help="CSV file to write.")

        if command in ('query-gen', 'bench'):
            parser.add_argument("--functions",
                                dest="functions", action="store", type=str, default=None,
                                help="JSON file of scoring functions; random integer tables are drawn if absent.")
            parser.add_argument("--num_functions",
                                dest="num_functions", action="store", type=int, default=16,
                                help="Number of random scoring functions.")
            parser.add_argument("--function_levels",
                                dest="function_levels", action="store", type=int, default=10,
                                help="Random scoring functions take values 0, ..., levels - 1.")
            parser.add_argument("--t0",
                                dest="t0", action="store", type=float, default=None,
                                help="Row threshold; defaults to the sidecar's t0.")
            parser.add_argument("--t1",
                                dest="t1", action="store", type=int, default=None,
                                help="Count threshold; defaults to the sidecar's t1.")
        if command == 'query-gen':
            parser.add_argument("--rows",
                                dest="rows", action="store", type=int, required=True,
                                help="Number of rows p of the database the query is sized for.")
            parser.add_argument("--output",
                                dest="output", action="store", type=str, default='query.bin',
                                help="Query file to write.")

        if command == 'evaluate':
            parser.add_argument("--database",
                                dest="database", action="store", type=str, required=True,
                                help="Database CSV.")
            parser.add_argument("--selection",
                                dest="selection", action="store", type=str, default=None,
                                help="Headerless CSV of the h x m selection matrix; identity if absent.")
            parser.add_argument("--query",
                                dest="query", action="store", type=str, default='query.bin',
                                help="Query file from query-gen.")
            parser.add_argument("--output",
                                dest="output", action="store", type=str, default='result.ct',
                                help="Encrypted result file to write.")

        if command == 'decrypt':
            parser.add_argument("--result",
                                dest="result", action="store", type=str, default='result.ct',
                                help="Encrypted result file from evaluate.")

        if command == 'bench':
            parser.add_argument("--rows",
                                dest="rows", action="store", type=int, nargs='+', default=[2 ** 10],
                                help="Database sizes p; one benchmark per value.")
            add_boolean_arg(parser, "tensorboard", help="Whether to log stage timings with tensorboardX.")

        if command == 'sizes':
            parser.add_argument("--num_functions",
                                dest="num_functions", action="store", type=int, default=16,
                                help="Number of encrypted scoring functions.")

    def __init__(self, command, **kwargs):
        self.command = command
        self.kwargs = kwargs

        for name, value in kwargs.items():
            setattr(self, name.replace('-', '_'), value)

        #
        # Add/modify settings and attributes.
        #

        self.run_dir = os.path.join(self.experiments_base, self.experiment_name)
        self.logger = _logging.create_logger(self.run_dir, command)

        self.sidecar, self.bounds = ({}, {}) if self.sidecar is None else data.load_sidecar(self.sidecar)

        #
        # Check settings have no "conflicts".
        #

        self.resolve_setting_conflicts()

        config = dict(self.sidecar)
        if self.profile is not None:
            config['profile'] = self.profile
        self.profile = data.profile_from_config(config)
        if self.profile_overrides:
            self.profile = self.profile.with_overrides(**self.profile_overrides)

        self.log_initial_setup(command=command, **kwargs)

    def log_initial_setup(self, **kwargs):
        r"""Logs the config options and the profile, and saves both in `config.json`."""
        kwargs = dict(kwargs, resolved_profile=self.profile.to_dict())
        self.logger.info('\n\n{}\n\n'.format(json.dumps(kwargs, indent=4)))
        with open(os.path.join(self.run_dir, 'config.json'), 'w') as f:
            json.dump(kwargs, f, indent=4)

    def resolve_setting_conflicts(self):
        r"""Checks settings before any work is done.

        Raises
        ------
        ValueError
            If a count is not positive, or if thresholds are missing for the commands that need them.
        """
        if self.threads < 1:
            raise ValueError('--threads must be at least 1, got {}'.format(self.threads))

        if self.command in ('query-gen', 'bench'):
            if self.t0 is None:
                self.t0 = self.sidecar.get('t0')
            if self.t1 is None:
                self.t1 = self.sidecar.get('t1')
            if self.command == 'query-gen' and (self.t0 is None or self.t1 is None):
                raise ValueError('query-gen needs --t0 and --t1 (or t0= and t1= in the sidecar)')
            if self.num_functions < 1:
                raise ValueError('--num_functions must be at least 1')

        rows = getattr(self, 'rows', None)
        if rows is not None and min(utils.listify(rows)) < 1:
            raise ValueError('--rows must be at least 1')

    def load_specs(self):
        if self.functions is not None:
            return data.load_functions(self.functions)
        specs = data.random_functions(self.num_functions, self.profile.small_degree, self.seed,
                                      levels=self.function_levels)
        os.makedirs(self.key_dir, exist_ok=True)
        path = os.path.join(self.key_dir, 'functions.json')
        data.save_functions(specs, path)
        self.logger.info('Drew {} random scoring functions, saved to {}'.format(len(specs), path))
        return specs

    def run_gen_dataset(self):
        data.gen_dataset(self.rows, self.attributes, self.seed, self.output)

    def run_keygen(self):
        os.makedirs(self.key_dir, exist_ok=True)
        key_seed, _ = utils.spawn(self.seed, 2)
        sk, small_sk, keys = protocol.scientist_keygen(self.profile, key_seed)

        serialization.save(os.path.join(self.key_dir, SECRET_FILE), sk)
        serialization.save(os.path.join(self.key_dir, SMALL_SECRET_FILE), small_sk)
        serialization.save(os.path.join(self.key_dir, KEYS_FILE), keys)
        with open(os.path.join(self.key_dir, MANIFEST_FILE), 'w') as f:
            json.dump(keys.manifest(), f)
        self.logger.info('Wrote secrets and {:.2f} MB of evaluation keys to {}'.format(
            keys.size_bytes() / 2 ** 20, self.key_dir))

    def run_query_gen(self):
        sk = serialization.load(os.path.join(self.key_dir, SECRET_FILE), expected='secret_key')
        small_sk = serialization.load(os.path.join(self.key_dir, SMALL_SECRET_FILE), expected='secret_key')
        with open(os.path.join(self.key_dir, MANIFEST_FILE), 'r') as f:
            manifest = json.load(f)

        _, query_seed = utils.spawn(self.seed, 2)
        query = protocol.make_query(sk, small_sk, manifest, self.load_specs(), self.t0, self.t1, self.profile,
                                    query_seed, self.rows)
        serialization.save(self.output, query)

    def run_evaluate(self):
        db = data.load_database(self.database, self.bounds)
        selection = data.load_selection(self.selection, db.attributes)

        timer = metrics.StageTimer()
        owner = protocol.DatabaseOwner(db, selection, threads=self.threads, timer=timer, progress=self.progress)
        with open(self.query, 'rb') as f:
            query_bytes = f.read()
        with open(os.path.join(self.key_dir, KEYS_FILE), 'rb') as f:
            key_bytes = f.read()

        result = owner.receive(query_bytes, key_bytes).explore()
        with open(self.output, 'wb') as f:
            f.write(result)
        self.logger.info('Stage timings: {}'.format(timer))

    def run_decrypt(self):
        sk = serialization.load(os.path.join(self.key_dir, SECRET_FILE), expected='secret_key')
        bit, value = protocol.decrypt_result(sk, serialization.load(self.result, expected='ciphertext'))
        print('result={}'.format(bit))
        print('value={:.6f}'.format(value))
        return bit

    def run_bench(self):
        r"""Runs the whole protocol for every `--rows` value and reports per-stage timings."""
        writer = SummaryWriter(self.run_dir) if self.tensorboard else None
        specs = self.load_specs() if self.functions is not None else data.random_functions(
            self.num_functions, self.profile.small_degree, self.seed, levels=self.function_levels)

        reports = []
        for rows in self.rows:
            db = data.gen_dataset(rows, self.attributes, self.seed)
            selection = protocol.SelectionMatrix.select(self.attributes, [j % self.attributes
                                                                          for j in range(len(specs))])
            t0, t1 = self.bench_thresholds(db, selection, specs)

            handler = metrics.Handler(timings=metrics.StageTimer(), precision=metrics.Precision())
            timer = handler.metrics['timings']

            scientist = protocol.Scientist(self.profile, specs, t0, t1, rows, seed=self.seed, timer=timer).setup()
            owner = protocol.DatabaseOwner(db, selection, threads=self.threads, timer=timer, progress=self.progress)
            result = owner.receive(scientist.query_bytes(), scientist.key_bytes()).explore()

            bit, value = scientist.decrypt(result)
            expected, count, _ = scientist.expected(db, selection)
            handler.accumulate(precision=(value, float(bit)))
            if bit != expected:
                self.logger.error('Result bit {} differs from the plaintext answer {} ({} rows qualify, t1 = {})'
                                  .format(bit, expected, count, t1))

            counts = {'repacked': math.ceil(rows / self.profile.small_degree),
                      'half_bts': protocol.half_bts_count(rows, self.profile.degree)}
            report = metrics.BenchReport(timer.totals, rows, key_sizes=scientist.keys.sizes(), counts=counts)
            reports.append(report)

            self.logger.info('p = {}: {}'.format(rows, handler))
            print(report.as_table())
            print(report.as_key_values())
            with open(os.path.join(self.run_dir, 'bench_{}.txt'.format(rows)), 'w') as f:
                f.write(report.as_key_values() + '\n')
            if writer is not None:
                report.write_tensorboard(writer, step=rows)

        if writer is not None:
            writer.close()
        return reports

    def bench_thresholds(self, db, selection, specs):
        r"""The configured thresholds, or the median score and half the qualifying rows."""
        t0, t1 = self.t0, self.t1
        if t0 is None:
            scores = pfe.plaintext_scores(selection.apply(db.values), specs)
            t0 = float(np.clip(np.round(np.median(scores)), 1, pfe.score_bound(specs)))
        if t1 is None:
            _, count, _ = protocol.plaintext_explore(db.values, selection, specs, t0, 1)
            t1 = max(count // 2, 1)
        return t0, t1

    def run_sizes(self):
        sizes = protocol.analytic_sizes(self.profile, functions=self.num_functions)
        width = max(len(name) for name in sizes)
        for name, size in sizes.items():
            print('{:<{w}}  {:>12.2f} MB'.format(name, size / 2 ** 20, w=width))
        return sizes

    def run_command(self):
        r"""Runs the requested command and returns its result."""
        run = getattr(self, 'run_{}'.format(self.command.replace('-', '_')))
        return run()


def main(argv=None):
    r"""Entry point of the `hexplore` console script; returns the exit code."""
    args = ExplorationBuilder.get_args(argv)
    command = args.pop('command')
    try:
        builder = ExplorationBuilder(command, **args)
        builder.run_command()
    except EXPECTED_ERRORS + (ValueError,) as e:
        if isinstance(e, protocol.StageError):
            message = '{} stage failed: {}'.format(e.stage, e.cause)
        else:
            message = str(e)
        print('hexplore {}: error: {}'.format(command, message), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
