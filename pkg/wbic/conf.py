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

import configparser
import copy
import os
from dataclasses import dataclass, field
from importlib import import_module
from typing import Any, Dict, List, Optional

import numpy as np
from django.core.exceptions import ImproperlyConfigured

from .controller import ControllerConfig
from .exceptions import ExperimentConfigError, InvalidParameter, ModelError
from .icc import IccParams
from .impedance import ImpedanceParams
from .plant import PlantConfig
from .robot import DEFAULT_MODEL, line_index, load_model
from .sim import SCENARIOS, VelocityProfile
from .terrain import make_terrain
from .utils import get_custom_setting
from .wbc import WbcWeights


def _bool(text):
    value = str(text).strip().lower()
    if value in configparser.ConfigParser.BOOLEAN_STATES:
        return configparser.ConfigParser.BOOLEAN_STATES[value]
    raise ValueError('not a boolean: %r' % text)


def _floats(text):
    if isinstance(text, (list, tuple, np.ndarray)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split()]


def _optional(parse):
    def inner(text):
        if text is None or str(text).strip().lower() in ('', 'none', 'auto'):
            return None
        return parse(text)
    return inner


# section -> key -> (parser, default)
SCHEMA = {
    'experiment': {
        'scenario': (str, 'flat-carry'),
        'model': (_optional(str), None),
        'seed': (int, 0),
        'output': (_optional(str), None),
        'duration': (_optional(float), None),
        'cruise': (float, 0.5),
        'accel': (float, 0.2),
        'distance': (_optional(float), None),
    },
    'terrain': {
        'kind': (_optional(str), None),
        'preset': (_optional(str), None),
        'start': (_optional(float), None),
        'rise': (_optional(float), None),
        'angle': (_optional(float), None),
        'length': (_optional(float), None),
        'spacing': (_optional(float), None),
        'height': (_optional(float), None),
        'amplitude': (_optional(float), None),
        'periods': (_optional(int), None),
        'plateau': (_optional(float), None),
        'lead_in': (_optional(float), None),
    },
    'plant': {
        'dt': (float, 2e-3),
        'integrator': (str, 'semi-implicit'),
        'contact_stiffness': (float, 1e5),
        'contact_damping': (float, 1e3),
        'traction': (float, 0.8),
        'rolling': (_optional(float), None),
        'leg_coulomb': (float, 5.0),
        'leg_viscous': (float, 1.0),
        'max_penetration': (float, 0.05),
        'q_noise': (float, 1e-5),
        'qd_noise': (float, 1e-4),
    },
    'icc': {
        'M': (float, 80.0),
        'm_L': (float, 0.9),
        'm_R': (float, 0.9),
        'K_b': (_floats, [1e5]),
        'D_b': (_floats, [600.0]),
        'K_L': (_floats, [350.0]),
        'K_R': (_floats, [350.0]),
        'D_L_min': (_floats, [20.0]),
        'D_L_max': (_floats, [200.0]),
        'D_R_min': (_floats, [20.0]),
        'D_R_max': (_floats, [200.0]),
        'dt': (float, 1e-2),
        'damping': (_optional(str), None),
        'fixed_damping': (float, 100.0),
    },
    'impedance': {
        'enabled': (_bool, True),
        'M': (float, 80.0),
        'D': (float, 600.0),
        'K': (float, 1e5),
        'clamp': (_optional(float), 0.2),
    },
    'wbc': {
        'nominal_height': (float, 0.6),
        'height_kp': (float, 1000.0),
        'height_kd': (float, 20.0),
        'centroid_kp': (float, 800.0),
        'centroid_kd': (float, 10.0),
        'rotation_kp': (float, 300.0),
        'rotation_kd': (float, 15.0),
        'height_acc_limit': (_optional(float), 6.0),
        'centroid_acc_limit': (_optional(float), None),
        'rotation_acc_limit': (_optional(float), 10.0),
        'mu': (_optional(float), None),
        'facets': (int, 4),
        'w_qdd': (float, 1e-3),
        'w_tau': (float, 1e-6),
        'w_force': (float, 1e-6),
        'w_tau_rate': (float, 1e-4),
        'w_force_rate': (float, 1e-4),
    },
    'estimation': {
        'K_O': (float, 50.0),
        'terrain': (_bool, True),
    },
    'friction': {
        'enabled': (_bool, True),
        'k_P': (float, 100.0),
        'k_lambda': (float, 10.0),
        'F_max': (float, 30.0),
    },
}

ROLLING_RANGE = (0.06, 0.12)


@dataclass(frozen=True)
class Diagnostic:
    section: str
    key: Optional[str]
    message: str
    source: str = '<defaults>'
    line: Optional[int] = None

    def __str__(self):
        where = self.source if self.line is None else '%s:%d' % (self.source, self.line)
        field_name = self.section if self.key is None else '%s.%s' % (self.section, self.key)
        return '%s [%s] %s' % (where, field_name, self.message)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Parsed experiment parameters, with where each value came from."""
    values: Dict[str, Dict[str, Any]]
    origins: Dict[tuple, tuple] = field(default_factory=dict)

    def get(self, section, key):
        return self.values[section][key]

    def origin(self, section, key):
        return self.origins.get((section, key), ('<defaults>', None))

    def merged(self, layer: Dict[str, Dict[str, Any]], source='<overrides>', lines=None):
        """Copy with ``layer`` parsed on top; raises ``ExperimentConfigError`` on bad entries."""
        lines = lines or {}
        values = copy.deepcopy(self.values)
        origins = dict(self.origins)
        problems = []
        for section, entries in (layer or {}).items():
            if section not in SCHEMA:
                problems.append(Diagnostic(section, None, 'unknown section', source, lines.get((section, None))))
                continue
            for key, raw in entries.items():
                line = lines.get((section, key), lines.get((section, str(key).lower())))
                if key not in SCHEMA[section]:
                    problems.append(Diagnostic(section, key, 'unknown key', source, line))
                    continue
                parse = SCHEMA[section][key][0]
                try:
                    values[section][key] = parse(raw)
                except (TypeError, ValueError) as e:
                    problems.append(Diagnostic(section, key, 'cannot parse %r: %s' % (raw, e), source, line))
                    continue
                origins[(section, key)] = (source, line)
        if problems:
            raise ExperimentConfigError(problems)
        return ExperimentConfig(values, origins)

    # ############################################
    # Builders
    # ############################################

    @property
    def scenario(self):
        name = self.get('experiment', 'scenario')
        if name not in SCENARIOS:
            raise InvalidParameter('unknown scenario "%s"' % name)
        return SCENARIOS[name]

    @property
    def seed(self):
        return self.get('experiment', 'seed')

    @property
    def model_path(self):
        return self.get('experiment', 'model') or get_custom_setting('WBIC_DEFAULT_MODEL', DEFAULT_MODEL)

    def tree(self):
        return load_model(self.model_path)

    def terrain(self):
        scenario = self.scenario
        params = {k: v for k, v in self.values['terrain'].items() if v is not None and k != 'kind'}
        kind = self.get('terrain', 'kind') or scenario.terrain
        if kind == scenario.terrain:
            params = dict(scenario.terrain_params, **params)
        if params.get('preset') == 'terrain1':
            params.setdefault('seed', self.seed)
        return make_terrain(kind, **params)

    @property
    def mu(self):
        return self.get('wbc', 'mu') or self.scenario.mu

    def plant_config(self):
        p = self.values['plant']
        icc = self.values['icc']
        return PlantConfig(dt=p['dt'], integrator=p['integrator'], contact_stiffness=p['contact_stiffness'],
                           contact_damping=p['contact_damping'], traction=p['traction'], rolling=p['rolling'],
                           leg_coulomb=p['leg_coulomb'], leg_viscous=p['leg_viscous'],
                           max_penetration=p['max_penetration'], q_noise=p['q_noise'], qd_noise=p['qd_noise'],
                           seed=self.seed, load_masses=(icc['m_L'], icc['m_R']),
                           arm_stiffness=(icc['K_L'][-1], icc['K_R'][-1]))

    def icc_params(self):
        p = self.values['icc']
        return IccParams(M=p['M'], m_L=p['m_L'], m_R=p['m_R'], K_b=p['K_b'], D_b=p['D_b'], K_L=p['K_L'],
                         K_R=p['K_R'], D_L_min=p['D_L_min'], D_L_max=p['D_L_max'], D_R_min=p['D_R_min'],
                         D_R_max=p['D_R_max'])

    def controller_config(self):
        w, imp, est, fr, icc = (self.values[s] for s in ('wbc', 'impedance', 'estimation', 'friction', 'icc'))
        return ControllerConfig(
            dt=self.get('plant', 'dt'), icc_dt=icc['dt'], nominal_height=w['nominal_height'],
            height_gains=(w['height_kp'], w['height_kd']),
            centroid_gains=(w['centroid_kp'], w['centroid_kd']),
            rotation_gains=(w['rotation_kp'], w['rotation_kd']),
            height_acc_limit=w['height_acc_limit'], centroid_acc_limit=w['centroid_acc_limit'],
            rotation_acc_limit=w['rotation_acc_limit'],
            mu=self.mu, facets=w['facets'], terrain_estimation=est['terrain'], K_O=est['K_O'],
            friction_enabled=fr['enabled'], friction_k_P=fr['k_P'], friction_k_lambda=fr['k_lambda'],
            friction_F_max=fr['F_max'], impedance_enabled=imp['enabled'],
            impedance=ImpedanceParams([imp['M']], [imp['D']], [imp['K']]), impedance_clamp=imp['clamp'],
            damping_mode=icc['damping'] or self.scenario.damping_mode, fixed_damping=icc['fixed_damping'],
            weights=WbcWeights(w['w_qdd'], w['w_tau'], w['w_force'], w['w_tau_rate'], w['w_force_rate']),
            icc=self.icc_params())

    def profile(self):
        e = self.values['experiment']
        distance = e['distance'] if e['distance'] is not None else self.scenario.distance
        return VelocityProfile(distance, cruise=e['cruise'], accel=e['accel'])

    def output_dir(self, override=None):
        return override or self.get('experiment', 'output') or get_custom_setting('WBIC_OUTPUT_DIR', 'wbic-out')


def defaults():
    return ExperimentConfig({s: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for s, keys in SCHEMA.items()})


def get_config_loader(path):
    i = path.rfind('.')
    module, attr = path[:i], path[i + 1:]
    try:
        mod = import_module(module)
    except ImportError as e:
        raise ImproperlyConfigured(
            'Error importing wbic config loader %s: "%s"' % (path, e))
    except ValueError:
        raise ImproperlyConfigured(
            'Error importing wbic config loader. Is WBIC_CONFIG_LOADER '
            'a correctly string with a callable path?'
            )
    try:
        config_loader = getattr(mod, attr)
    except AttributeError:
        raise ImproperlyConfigured(
            'Module "%s" does not define a "%s" config loader' %
            (module, attr)
            )

    if not hasattr(config_loader, '__call__'):
        raise ImproperlyConfigured(
            "wbic config loader must be a callable object.")

    return config_loader


def config_settings_loader(overrides=None):
    """Built-in defaults, then ``WBIC_CONFIG``, then ``overrides``.

    This is also the default config loader.
    """
    conf = defaults().merged(copy.deepcopy(get_custom_setting('WBIC_CONFIG', {})), 'settings.WBIC_CONFIG')
    if overrides:
        conf = conf.merged(overrides)
    return conf


def read_experiment_file(path):
    """Sections and a ``(section, key) -> line`` index of an INI experiment file."""
    if not os.path.exists(path):
        raise ExperimentConfigError([Diagnostic('experiment', None, 'config file not found', path)])
    with open(path, encoding='utf-8') as handle:
        text = handle.read()
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        raise ExperimentConfigError([Diagnostic('experiment', None, 'unreadable: %s' % e, path,
                                                getattr(e, 'lineno', None))])
    layer = {section: dict(parser.items(section)) for section in parser.sections()}
    return layer, line_index(text)


def get_config(config_loader_path=None, path=None, overrides=None):
    config_loader_path = config_loader_path or get_custom_setting(
        'WBIC_CONFIG_LOADER', 'wbic.conf.config_settings_loader')

    config_loader = get_config_loader(config_loader_path)
    conf = config_loader()
    if path:
        layer, lines = read_experiment_file(path)
        conf = conf.merged(layer, path, lines)
    if overrides:
        conf = conf.merged(overrides)
    return conf


# ############################################
# Validation
# ############################################

def _diag(conf, section, key, message):
    source, line = conf.origin(section, key)
    return Diagnostic(section, key, message, source, line)


def validate(conf: ExperimentConfig) -> List[Diagnostic]:
    """Dry-run checks of a parsed config; nothing is simulated."""
    problems = []
    name = conf.get('experiment', 'scenario')
    if name not in SCENARIOS:
        problems.append(_diag(conf, 'experiment', 'scenario', 'unknown scenario "%s"; expected one of %s'
                              % (name, ', '.join(SCENARIOS))))
        return problems

    path = conf.model_path
    if not os.path.exists(path):
        problems.append(_diag(conf, 'experiment', 'model', 'model file not found: %s' % path))
    else:
        try:
            conf.tree()
        except ModelError as e:
            problems.append(_diag(conf, 'experiment', 'model', str(e)))

    icc = conf.values['icc']
    bounded = True
    for side in ('L', 'R'):
        lo, hi = np.asarray(icc['D_%s_min' % side]), np.asarray(icc['D_%s_max' % side])
        if np.any(lo > hi) or np.any(lo == hi):
            problems.append(_diag(conf, 'icc', 'D_%s_min' % side,
                                  'D_%s_min must be below D_%s_max' % (side, side)))
            bounded = False
    if bounded:
        for build, section in ((conf.icc_params, 'icc'), (conf.plant_config, 'plant'),
                               (conf.controller_config, 'wbc'), (conf.profile, 'experiment')):
            try:
                build()
            except (InvalidParameter, ValueError) as e:
                problems.append(_diag(conf, section, None, str(e)))

    rolling = conf.get('plant', 'rolling')
    if rolling is not None and not ROLLING_RANGE[0] <= rolling <= ROLLING_RANGE[1]:
        problems.append(_diag(conf, 'plant', 'rolling', 'rolling coefficient %.3f outside [%.2f, %.2f]'
                              % ((rolling,) + ROLLING_RANGE)))

    try:
        terrain = conf.terrain()
    except (InvalidParameter, TypeError) as e:
        problems.append(_diag(conf, 'terrain', None, str(e)))
    else:
        steepest = terrain.max_slope()
        if steepest > conf.mu:
            problems.append(_diag(conf, 'wbc', 'mu', 'friction cone %.2f is narrower than the steepest '
                                  'terrain slope (tan = %.3f)' % (conf.mu, steepest)))
    return problems
