#!/usr/bin/env python
"""
Punto de entrada de la línea de comandos

    python manage.py train config.json model.json
    python manage.py compress model.json small.json --k 4 --method project
    python manage.py eval small.json --dataset spirals
    python manage.py sweep model.json sweep.csv --dataset spirals --k-list 8,4,2
    python manage.py convergence --scheme rk4
"""
import os
import sys


def main():
    """Ejecutar un comando de administración"""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "No se pudo importar Django. ¿Está instalado y disponible en PYTHONPATH? "
            "¿Olvidó activar el entorno virtual?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
