"""Programmatic entry point: ``run(argv)`` behaves like ``manage.py affine <argv>`` and returns the exit code."""
import os
from typing import Optional, Sequence

from django.core.management import ManagementUtility


def run(argv: Optional[Sequence[str]] = None) -> int:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'soliton_geometry.settings')
    utility = ManagementUtility(['manage.py', 'affine', *(argv or ())])
    try:
        utility.execute()
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0
