"""
Clase base de los comandos: opciones comunes y traducción de errores a códigos de salida
"""

import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from ..exceptions import CheckpointError, ConfigurationError, IdxFormatError, OdeNetsError

# Errores de uso o de configuración: código de salida 2
USAGE_ERRORS = (ConfigurationError, CheckpointError, IdxFormatError, FileNotFoundError, serializers.ValidationError)


class OdeNetsCommand(BaseCommand):
    """
    Comando con --seed y --quiet

    Salida 0 en éxito, 1 en fallas numéricas o de ejecución y 2 en errores de uso.
    """

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Semilla que reemplaza a la de la configuración')
        parser.add_argument('--quiet', action='store_true', help='Mostrar solo advertencias y resultados')

    def execute(self, *args, **options):
        self.quiet = options.get('quiet', False)
        if self.quiet:
            logging.getLogger('odenets').setLevel(logging.WARNING)
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except USAGE_ERRORS as e:
            raise CommandError(str(e), returncode=2)
        except OdeNetsError as e:
            raise CommandError(str(e), returncode=1)

    def progress(self, message: str):
        if not self.quiet:
            self.stdout.write(message)

    @staticmethod
    def parse_int_list(value: str, option: str):
        """Convertir '1,2,4' en [1, 2, 4]; una lista vacía es un error de uso"""
        items = [item.strip() for item in (value or '').split(',') if item.strip()]
        if not items:
            raise CommandError(f"{option} no puede estar vacío", returncode=2)
        try:
            numbers = [int(item) for item in items]
        except ValueError:
            raise CommandError(f"{option} debe ser una lista de enteros separados por comas", returncode=2)
        if any(number < 1 for number in numbers):
            raise CommandError(f"{option} solo admite enteros positivos", returncode=2)
        return numbers
