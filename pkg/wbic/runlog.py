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

"""Run logs and their CSV form.

The file starts with a ``# wbic-run <version>`` line, then the header row. Column
order is part of the schema; bump ``SCHEMA_VERSION`` when it changes.
"""

import csv
import io
import logging
from typing import Dict, List, Sequence

import numpy as np

from .exceptions import DimensionError
from .utils import get_custom_setting

logger = logging.getLogger('wbic')

SCHEMA_VERSION = 1
MAGIC = '# wbic-run'
AXES = ('x', 'y', 'z')


def leg_label(joint_name):
    return joint_name[:-len('_leg')] if joint_name.endswith('_leg') else joint_name


def columns(nq, nv, n, contacts: Sequence[str], legs: Sequence[str], friction_size) -> List[str]:
    """The fixed column order of a run log."""
    cols = ['t']
    cols += ['q_%d' % i for i in range(nq)]
    cols += ['qd_%d' % i for i in range(nv)]
    cols += ['tau_%d' % i for i in range(n)]
    cols += ['leg_ext_%s' % leg_label(leg) for leg in legs]
    cols += ['height', 'height_ref', 'support_dz']
    for contact in contacts:
        cols += ['ground_%s_x' % contact, 'ground_%s_z' % contact]
    for prefix in ('fC_true', 'fC_est', 'nz_true', 'nz_est'):
        for contact in contacts:
            cols += ['%s_%s_%s' % (prefix, contact, a) for a in AXES]
    for side in ('L', 'R'):
        cols += ['f_obj_%s_%s' % (side, a) for a in AXES]
    for side in ('L', 'R'):
        cols += ['load_acc_%s' % side]
    for side in ('L', 'R'):
        cols += ['D_%s_%s' % (side, a) for a in AXES]
    cols += ['F_f_%d' % i for i in range(friction_size)]
    cols += ['rho1', 'rho2', 'E', 'solver_iters', 'solver_residual']
    return cols


class RunLog:
    """Row-wise time series with a fixed column order."""

    def __init__(self, cols: Sequence[str], scenario='', meta: Dict = None):
        self.columns = list(cols)
        self.index = {c: i for i, c in enumerate(self.columns)}
        self.scenario = scenario
        self.meta = dict(meta or {})
        self.rows: List[np.ndarray] = []

    def append(self, values: Dict[str, float]):
        row = np.full(len(self.columns), np.nan)
        for key, value in values.items():
            row[self.index[key]] = value
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def data(self):
        if not self.rows:
            return np.zeros((0, len(self.columns)))
        return np.vstack(self.rows)

    def column(self, name):
        return self.data[:, self.index[name]]

    def matching(self, prefix):
        return [c for c in self.columns if c.startswith(prefix)]

    def check_uniform(self, dt, tol=1e-9):
        t = self.column('t')
        if t.shape[0] > 1 and np.max(np.abs(np.diff(t) - dt)) > tol:
            raise DimensionError('run log timestamps are not uniformly spaced')

    # ############################################
    # CSV
    # ############################################

    def write_csv(self, handle, float_format=None):
        float_format = float_format or get_custom_setting('WBIC_CSV_FLOAT_FORMAT', 'repr')
        fmt = repr if float_format == 'repr' else (lambda v: float_format % v)
        handle.write('%s %d %s\n' % (MAGIC, SCHEMA_VERSION, self.scenario))
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt(float(v)) for v in row])

    def save(self, path, float_format=None):
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            self.write_csv(handle, float_format)
        logger.info('wrote %d rows to %s', len(self), path)

    def to_csv(self, float_format=None):
        buf = io.StringIO()
        self.write_csv(buf, float_format)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, handle):
        first = handle.readline()
        if not first.startswith(MAGIC):
            raise DimensionError('not a wbic run log')
        parts = first[len(MAGIC):].split()
        version = int(parts[0])
        if version != SCHEMA_VERSION:
            raise DimensionError('run log schema %d, this version reads %d' % (version, SCHEMA_VERSION))
        reader = csv.reader(handle)
        log = cls(next(reader), parts[1] if len(parts) > 1 else '')
        for row in reader:
            if row:
                log.rows.append(np.array([float(v) for v in row]))
        return log

    @classmethod
    def load(cls, path):
        with open(path, newline='', encoding='utf-8') as handle:
            return cls.read_csv(handle)


def write_summary(path, rows: Sequence[Dict]):
    """One line per run with its headline numbers."""
    if not rows:
        return
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0]), lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    logger.info('wrote summary of %d runs to %s', len(rows), path)
