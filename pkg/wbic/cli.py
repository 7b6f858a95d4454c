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

"""``wbic`` console script: the management command without a Django project."""

import os
import sys

import django
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError


def setup():
    if settings.configured:
        return
    if os.environ.get('DJANGO_SETTINGS_MODULE'):
        django.setup()
        return
    from . import default_settings
    settings.configure(**{k: getattr(default_settings, k) for k in dir(default_settings) if k.isupper()})
    django.setup()


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    setup()
    try:
        call_command('wbic', *argv)
    except CommandError as e:
        sys.stderr.write('wbic: %s\n' % e)
        return getattr(e, 'returncode', 1)
    return 0


if __name__ == '__main__':
    sys.exit(main())
