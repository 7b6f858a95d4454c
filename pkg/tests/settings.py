"""
Django settings for running the wbic test suite.
"""

import os

# Build paths inside the project like this: os.path.join(BASE_DIR, ...)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Make this unique, and don't share it with anybody.
SECRET_KEY = 'wbic-tests-0c9f3e1ad27b48f6a5e2'

DEBUG = True

ALLOWED_HOSTS = []

INSTALLED_APPS = (
    'wbic',
)

# Database
# The suite uses SimpleTestCase only; sqlite keeps the test runner happy.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.path.join(BASE_DIR, 'db.sqlite3'),
    }
}

USE_TZ = True

WBIC_OUTPUT_DIR = os.path.join(BASE_DIR, 'wbic-out')
WBIC_CSV_FLOAT_FORMAT = 'repr'

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
        },
    },
    'loggers': {
        'wbic': {
            'handlers': ['console'],
            'level': 'WARNING',
        },
    }
}
