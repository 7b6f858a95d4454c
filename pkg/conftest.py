# Test collection wiring: mirror tests/run_tests.py so plain pytest configures Django.
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "tests.settings")
django.setup()
