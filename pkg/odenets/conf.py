"""
Acceso a la configuración del proyecto desde los módulos numéricos
"""

from typing import Any

from django.conf import settings


def get_setting(name: str, default: Any) -> Any:
    """
    Obtener un valor de configuración de Django

    Si Django no está configurado (uso como librería) se devuelve el valor por defecto.
    """
    if not settings.configured:
        return default
    return getattr(settings, name, default)


def bn_eps() -> float:
    return float(get_setting('ODENETS_BN_EPS', 1e-5))


def bn_momentum() -> float:
    return float(get_setting('ODENETS_BN_MOMENTUM', 0.9))


def checked_math() -> bool:
    return bool(get_setting('ODENETS_CHECKED_MATH', False))


def checkpoint_format_version() -> int:
    return int(get_setting('ODENETS_CHECKPOINT_FORMAT_VERSION', 1))
