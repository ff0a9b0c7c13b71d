"""
Django settings for core project.

Proyecto de redes ODE con pesos expresados en funciones base. Django aporta la
carga de configuración, el logging y los comandos de administración (CLI).

For more information on this file, see
https://docs.djangoproject.com/en/4.2/topics/settings/
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Cargar variables de entorno desde el archivo .env
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def _env_bool(name: str, default: str) -> bool:
    """Leer una variable booleana del entorno ('true', '1', 'yes')"""
    return os.getenv(name, default=default).strip().lower() in ('1', 'true', 'yes')


# SECURITY WARNING: no hay servidor HTTP, la clave solo satisface a Django
SECRET_KEY = os.getenv('ODENETS_SECRET_KEY', default='odenets-local-only')

DEBUG = _env_bool('DEBUG', 'False')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'odenets',
]

# Sin base de datos: los artefactos son archivos JSON/CSV
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# https://docs.djangoproject.com/en/4.2/topics/logging/

ODENETS_LOG_LEVEL = os.getenv('ODENETS_LOG_LEVEL', default='INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'odenets': {
            'handlers': ['console'],
            'level': ODENETS_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Configuración numérica de las redes ODE

# Normalización por lotes: epsilon y momento del promedio móvil del estado
ODENETS_BN_EPS = float(os.getenv('ODENETS_BN_EPS', default='1e-5'))
ODENETS_BN_MOMENTUM = float(os.getenv('ODENETS_BN_MOMENTUM', default='0.9'))

# Verificación de NaN/Inf después de cada primitiva (modo depuración)
ODENETS_CHECKED_MATH = _env_bool('ODENETS_CHECKED_MATH', 'True' if DEBUG else 'False')

# Versión del formato de checkpoint
ODENETS_CHECKPOINT_FORMAT_VERSION = int(os.getenv('ODENETS_CHECKPOINT_FORMAT_VERSION', default='1'))

# Datos
ODENETS_DATA_DIR = Path(os.getenv('ODENETS_DATA_DIR', default=str(BASE_DIR / 'data')))
ODENETS_SYNTHETIC_NOISE = float(os.getenv('ODENETS_SYNTHETIC_NOISE', default='0.1'))
ODENETS_EVAL_BATCH_SIZE = int(os.getenv('ODENETS_EVAL_BATCH_SIZE', default='256'))

# Barridos de compresión
ODENETS_SWEEP_REPEATS = int(os.getenv('ODENETS_SWEEP_REPEATS', default='5'))
ODENETS_SWEEP_WORKERS = int(os.getenv('ODENETS_SWEEP_WORKERS', default='1'))
