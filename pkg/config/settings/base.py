"""
Django settings for the cross-domain recommender toolkit.

The project has no HTTP surface: everything runs through management
commands (prepare, train, eval, ablate, gradcheck, runs). Environment
overrides are read with python-decouple.
"""
from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = config('DJANGO_SECRET_KEY', default='django-insecure-desk-key-not-for-production')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'django_filters',
    'rest_framework',
    'interactions',
    'recsys',
    'training',
    'evaluation',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('RECSYS_DB_PATH', default=str(BASE_DIR / 'db.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Artifact locations

DATA_DIR = Path(config('RECSYS_DATA_DIR', default=str(BASE_DIR / 'data')))
RUNS_DIR = Path(config('RECSYS_RUNS_DIR', default=str(BASE_DIR / 'runs')))

# One intra-op thread keeps CPU runs bitwise reproducible.
TORCH_NUM_THREADS = config('RECSYS_TORCH_THREADS', default=1, cast=int)


# Logging

LOG_LEVEL = config('RECSYS_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ('interactions', 'recsys', 'training', 'evaluation', 'config')
    },
}


REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}
