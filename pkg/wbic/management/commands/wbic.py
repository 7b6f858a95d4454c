# Copyright (C) 2024 The wbic authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#            http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import logging
import os
from concurrent.futures import ProcessPoolExecutor

from django.core.management.base import BaseCommand, CommandError

from wbic.conf import Diagnostic, get_config, validate
from wbic.exceptions import (DynamicsError, ExperimentConfigError, InfeasibleProblem, ModelError,
                             SimulationFault, SolverNotConverged)
from wbic.icc import damping_benchmark
from wbic.plots import render_all
from wbic.runlog import write_summary
from wbic.sim import SCENARIOS, run_experiment, summarize

logger = logging.getLogger('wbic')

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SIMULATION = 4
LOG_LEVELS = {
    'debug': logging.DEBUG,
    'info': logging.INFO,
    'warning': logging.WARNING,
    'error': logging.ERROR,
}


def configure_logging():
    level = LOG_LEVELS.get(os.environ.get('WBIC_LOG', 'warning').lower(), logging.WARNING)
    logger.setLevel(level)
    if not logger.handlers:
        logger.addHandler(logging.StreamHandler())


def parse_overrides(entries):
    """``section.key=value`` strings as a config layer."""
    layer, problems = {}, []
    for entry in entries:
        name, sep, value = entry.partition('=')
        section, dot, key = name.strip().partition('.')
        if not (sep and dot and section and key):
            problems.append(Diagnostic(section or '?', None, 'expected SECTION.KEY=VALUE, got %r' % entry, '--set'))
            continue
        layer.setdefault(section, {})[key.strip()] = value.strip()
    if problems:
        raise ExperimentConfigError(problems)
    return layer


def execute(conf, label, out_dir, duration=None, plots=True):
    """One run: CSV, plots and its summary row. Module level so worker processes can pickle it."""
    run_dir = os.path.join(out_dir, label)
    os.makedirs(run_dir, exist_ok=True)
    log = run_experiment(conf, duration)
    path = os.path.join(run_dir, 'run.csv')
    log.save(path)
    if plots:
        render_all(path, run_dir)
    row = summarize(log, conf.seed)
    row['label'] = label
    row['damping'] = conf.controller_config().damping_mode
    return row


class Command(BaseCommand):
    help = 'Run or validate whole-body impedance coordination experiments.'

    def add_arguments(self, parser):
        parser.add_argument('action', choices=('run', 'validate'))
        parser.add_argument('--scenario', action='append', choices=sorted(SCENARIOS),
                            help='Scenario to run; repeat for a batch.')
        parser.add_argument('--config', help='INI experiment file layered over the settings.')
        parser.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                            help='Override one config entry; repeatable, applied last.')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--out', help='Output directory.')
        parser.add_argument('--compare', choices=('bang-bang', 'fixed'),
                            help='Also run every scenario with this damping mode and tabulate E.')
        parser.add_argument('--jobs', type=int, default=1)
        parser.add_argument('--duration', type=float, help='Simulated seconds, overriding the profile.')
        parser.add_argument('--no-plots', action='store_true')

    def handle(self, *args, **options):
        configure_logging()
        configs = self.load_configs(options)
        problems = [(label, d) for label, conf in configs for d in validate(conf)]
        if problems:
            for label, d in problems:
                self.stderr.write('%s: %s' % (label, d))
            raise CommandError('%d configuration problem(s)' % len(problems), returncode=EXIT_CONFIG)
        if options['action'] == 'validate':
            self.stdout.write('configuration OK (%d run(s))' % len(configs))
            return

        out_dir = configs[0][1].output_dir(options['out'])
        os.makedirs(out_dir, exist_ok=True)
        try:
            rows = self.run_all(configs, out_dir, options)
        except (InfeasibleProblem, SolverNotConverged) as e:
            family = getattr(e, 'family', 'active set')
            raise CommandError('solver failure at tick %s [%s]: %s' % (getattr(e, 'tick', '?'), family, e),
                               returncode=EXIT_SOLVER)
        except (SimulationFault, DynamicsError) as e:
            raise CommandError('simulation fault: %s' % e, returncode=EXIT_SIMULATION)
        write_summary(os.path.join(out_dir, 'summary.csv'), rows)
        if options['compare']:
            self.report_comparison(rows, configs[0][1])
        self.stdout.write('wrote %d run(s) to %s' % (len(rows), out_dir))

    def load_configs(self, options):
        overrides = {}
        if options['seed'] is not None:
            overrides['experiment'] = {'seed': options['seed']}
        try:
            base = get_config(path=options['config'], overrides=overrides)
            if options.get('set'):
                base = base.merged(parse_overrides(options['set']), '--set')
            names = options['scenario'] or [base.get('experiment', 'scenario')]
            configs = []
            for name in names:
                conf = base.merged({'experiment': {'scenario': name}})
                configs.append((name, conf))
                if options['compare']:
                    configs.append(('%s-%s' % (name, options['compare']),
                                    conf.merged({'icc': {'damping': options['compare']}})))
        except ExperimentConfigError as e:
            for d in e.diagnostics:
                self.stderr.write(str(d))
            raise CommandError('invalid configuration', returncode=EXIT_CONFIG)
        except ModelError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)
        return configs

    def run_all(self, configs, out_dir, options):
        plots = not options['no_plots']
        if options['jobs'] > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=options['jobs']) as pool:
                futures = [pool.submit(execute, conf, label, out_dir, options['duration'], plots)
                           for label, conf in configs]
                return [f.result() for f in futures]
        return [execute(conf, label, out_dir, options['duration'], plots) for label, conf in configs]

    def report_comparison(self, rows, conf):
        self.stdout.write('%-36s %-10s %14s %14s' % ('run', 'damping', 'E [J]', 'obj. dF [N]'))
        for row in rows:
            self.stdout.write('%-36s %-10s %14.6g %14.6g' % (row['label'], row['damping'], row['E'],
                                                           row['object_force_fluctuation']))
        self.stdout.write('')
        self.stdout.write('sinusoidal leg excitation benchmark')
        for row in damping_benchmark(conf.icc_params()):
            label = row.label if row.D is None else '%s D=%g' % (row.label, row.D)
            self.stdout.write('%-36s %14.6g' % (label, row.E))
