import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'orthosplat.settings')
django.setup()
