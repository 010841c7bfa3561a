import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "halfwave.settings")
django.setup()
