import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "netstab_web.settings")
django.setup()

from django.test.utils import setup_test_environment  # noqa: E402

# Same environment `manage.py test` prepares (e.g. 'testserver' in ALLOWED_HOSTS).
setup_test_environment()
