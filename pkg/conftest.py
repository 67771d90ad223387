"""Pytest wiring: configure Django and a test database, as `manage.py test` would."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings.local')
django.setup()

from django.test.utils import setup_test_environment, teardown_test_environment  # noqa: E402
from django.test.runner import DiscoverRunner  # noqa: E402

_runner = DiscoverRunner(verbosity=0, interactive=False)
_old_config = None


def pytest_sessionstart(session):
    global _old_config
    setup_test_environment()
    _old_config = _runner.setup_databases()


def pytest_sessionfinish(session, exitstatus):
    if _old_config is not None:
        _runner.teardown_databases(_old_config)
    teardown_test_environment()
