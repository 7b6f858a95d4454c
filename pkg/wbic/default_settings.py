"""Settings used when ``wbic`` runs outside a Django project."""

SECRET_KEY = 'wbic-standalone'

INSTALLED_APPS = [
    'wbic',
]

USE_TZ = True

WBIC_CONFIG = {}
WBIC_OUTPUT_DIR = 'wbic-out'
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
    },
}
