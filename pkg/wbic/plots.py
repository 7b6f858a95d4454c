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

"""SVG figures rendered from a run log alone."""

import logging
import os

import matplotlib
import numpy as np

from .runlog import RunLog

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger('wbic')

PLOTS = ('terrain', 'legs', 'forces')


def _contacts(log: RunLog):
    return [c[len('ground_'):-len('_x')] for c in log.columns if c.startswith('ground_') and c.endswith('_x')]


def plot_terrain(log: RunLog, path):
    """Ground profile under the wheels and its slope angle."""
    fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    for contact in _contacts(log):
        x = log.column('ground_%s_x' % contact)
        order = np.argsort(x)
        nx, nz = log.column('nz_true_%s_x' % contact), log.column('nz_true_%s_z' % contact)
        ax.plot(x[order], log.column('ground_%s_z' % contact)[order], label=contact)
        ax2.plot(x[order], np.arctan2(-nx, nz)[order], label=contact)
    ax.set_ylabel('height [m]')
    ax.set_title('terrain (%s)' % log.scenario)
    ax2.set_xlabel('x [m]')
    ax2.set_ylabel('slope [rad]')
    for a in (ax, ax2):
        a.grid(True, alpha=0.3)
        a.legend(loc='upper right', fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_legs(log: RunLog, path):
    """Leg extensions with the base height against its reference."""
    t = log.column('t')
    fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    for name in log.matching('leg_ext_'):
        ax.plot(t, log.column(name), label=name[len('leg_ext_'):])
    ax.set_ylabel('extension [m]')
    ax.set_title('leg extension (%s)' % log.scenario)
    ax2.plot(t, log.column('height'), label='height')
    ax2.plot(t, log.column('height_ref'), '--', label='reference')
    ax2.set_xlabel('t [s]')
    ax2.set_ylabel('base height [m]')
    for a in (ax, ax2):
        a.grid(True, alpha=0.3)
        a.legend(loc='upper right', fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_forces(log: RunLog, path):
    """Normal ground forces (true and estimated) and vertical object forces."""
    t = log.column('t')
    fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    for contact in _contacts(log):
        line, = ax.plot(t, log.column('fC_true_%s_z' % contact), label='%s true' % contact)
        ax.plot(t, log.column('fC_est_%s_z' % contact), ':', color=line.get_color(), label='%s est.' % contact)
    ax.set_ylabel('ground force z [N]')
    ax.set_title('contact forces (%s)' % log.scenario)
    for side in ('L', 'R'):
        ax2.plot(t, log.column('f_obj_%s_z' % side), label=side)
    ax2.set_xlabel('t [s]')
    ax2.set_ylabel('object force z [N]')
    for a in (ax, ax2):
        a.grid(True, alpha=0.3)
        a.legend(loc='upper right', fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_all(csv_path, out_dir=None):
    """Write every figure for ``csv_path``; returns the SVG paths."""
    log = RunLog.load(csv_path)
    out_dir = out_dir or os.path.dirname(os.path.abspath(csv_path))
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    paths = []
    for name, draw in (('terrain', plot_terrain), ('legs', plot_legs), ('forces', plot_forces)):
        path = os.path.join(out_dir, '%s_%s.svg' % (stem, name))
        draw(log, path)
        paths.append(path)
    logger.info('rendered %d plots for %s', len(paths), csv_path)
    return paths
