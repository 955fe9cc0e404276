import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'soliton_geometry.settings')
django.setup()
