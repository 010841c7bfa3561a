"""
Django settings for the halfwave project.

The project hosts no web surface: Django provides configuration, the
management-command CLI, the cache framework, signals and the test runner
for the ``bubbles`` numerics app.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""
import os
from pathlib import Path
from dotenv import load_dotenv


load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'halfwave-local-only')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'


# Application definition

INSTALLED_APPS = [
    "rest_framework",
    "bubbles",
]

# No DATABASES: nothing here defines models, so the dummy backend applies.

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Cache for solved ground states and profile chains. Redis when configured,
# otherwise a file cache that survives between command invocations.

REDIS_URL = os.environ.get('HALFWAVE_REDIS_URL')

if REDIS_URL:
    CACHES = {
        'default': {
            'BACKEND': 'django_redis.cache.RedisCache',
            'LOCATION': REDIS_URL,
            'TIMEOUT': 60 * 60 * 24,
            'OPTIONS': {
                'CLIENT_CLASS': 'django_redis.client.DefaultClient',
            }
        }
    }
else:
    CACHES = {
        'default': {
            'BACKEND': 'django.core.cache.backends.filebased.FileBasedCache',
            'LOCATION': os.environ.get('HALFWAVE_CACHE_DIR', str(BASE_DIR / '.spectral_cache')),
            'TIMEOUT': 60 * 60 * 24,
        }
    }

CACHE_TTL = int(os.environ.get('HALFWAVE_CACHE_TTL', 60 * 60 * 24))


# Numerical defaults; every run config falls back to these.

HALFWAVE = {
    'DEFAULT_N_POINTS': int(os.environ.get('HALFWAVE_N_POINTS', 4096)),
    'DEFAULT_LENGTH': float(os.environ.get('HALFWAVE_LENGTH', 200.0)),
    'GROUND_STATE_TOL': 1e-11,
    'GROUND_STATE_MAX_ITER': 2000,
    'PROFILE_TOL': 1e-10,
    'COMPATIBILITY_TOL': 1e-5,
    'DECOMPOSITION_TOL': 1e-10,
    'MAX_NEWTON': 30,
    'OUTPUT_DIR': os.environ.get('HALFWAVE_OUTPUT_DIR', str(BASE_DIR / 'runs')),
    'MAX_WORKERS': int(os.environ.get('HALFWAVE_MAX_WORKERS', 2)),
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'bubbles': {
            'handlers': ['console'],
            'level': os.environ.get('HALFWAVE_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
