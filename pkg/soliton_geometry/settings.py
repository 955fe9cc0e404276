"""
Django settings for the soliton_geometry project.

The project has no web surface and no database; Django supplies the
configuration layer, the `manage.py affine` command and the test runner.
"""

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Required by Django; nothing here is signed.
SECRET_KEY = 'soliton-geometry-local-only'

DEBUG = False

ALLOWED_HOSTS = []


# Numerics
# Solver and verifier defaults; every value can be overridden per run through
# the command flags or a --config file.

SURFACES_NEWTON_TOL = 1e-10
SURFACES_NEWTON_MAX_ITER = 50
SURFACES_NEWTON_DAMPING = 1.0
SURFACES_NEWTON_MAX_HALVINGS = 8

# |λ − μ| below this is treated as the umbilic set and rejected
SURFACES_GAP_TOL = 1e-8
# |det h| below this is treated as degenerate
SURFACES_DEGENERACY_TOL = 1e-12
# iterates of the constant-τ equation with τ > 0 stay inside (−√τ + δ, √τ − δ)
SURFACES_TAU_MARGIN = 1e-8

SURFACES_GOURSAT_CELL_TOL = 1e-13
SURFACES_GOURSAT_MAX_STEPS = 50

SURFACES_CURVE_MAX_STEP = 1e-3
SURFACES_SEED_TOL = 1e-8

# Pass/fail thresholds, applied by the command only
SURFACES_VERIFY_THRESHOLD = 1e-4
SURFACES_PATH_THRESHOLD = 1e-3


# Application definition

INSTALLED_APPS = [
    'surfaces',
]

MIDDLEWARE = []

DATABASES = {}


# Logging
# stdout carries the one-line JSON summary of each run, so log records go to
# stderr.

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'surfaces': {
            'handlers': ['stderr'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
