"""
Jerarquía de errores del dominio
"""

from typing import Any, Optional, Sequence


class OdeNetsError(Exception):
    """Error base de la librería"""


class DomainError(OdeNetsError):
    """Tiempo fuera del intervalo [0, T]"""

    def __init__(self, t: float, t_final: float):
        self.t = t
        self.t_final = t_final
        super().__init__(f"El tiempo t={t!r} está fuera del intervalo [0, {t_final!r}]")


class ConfigurationError(OdeNetsError):
    """Especificación o configuración inválida"""


class ConditioningError(OdeNetsError):
    """La matriz del sistema de proyección es numéricamente singular"""


class CoverageError(OdeNetsError):
    """La nube de puntos no cubre alguna función base (índice desde 1)"""

    def __init__(self, basis_index: int, message: Optional[str] = None):
        self.basis_index = basis_index
        super().__init__(message or f"La función base {basis_index} no tiene muestras suficientes en la nube de puntos")


class ShapeError(OdeNetsError):
    """Formas incompatibles"""

    def __init__(self, left: Sequence[int], right: Sequence[int], operation: str = ''):
        self.left = tuple(left)
        self.right = tuple(right)
        prefix = f"{operation}: " if operation else ''
        super().__init__(f"{prefix}formas incompatibles {self.left} y {self.right}")


class ContractError(OdeNetsError):
    """Se violó el contrato de una operación (p. ej. función no escalar)"""


class NumericError(OdeNetsError):
    """Aparecieron valores NaN/Inf con la verificación numérica activa"""


class DivergenceError(OdeNetsError):
    """La integración produjo una derivada no finita"""

    def __init__(self, t: float, stage: int):
        self.t = t
        self.stage = stage
        super().__init__(f"Divergencia en t={t!r}, etapa {stage}")


class CheckpointError(OdeNetsError):
    """Error base de lectura/escritura de checkpoints"""


class CheckpointVersionError(CheckpointError):
    """Versión de formato distinta a la esperada"""

    def __init__(self, found: Any, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"Versión de checkpoint {found!r} no soportada (se esperaba {expected})")


class MalformedCheckpointError(CheckpointError):
    """El archivo no es un documento de checkpoint válido"""


class CheckpointShapeError(CheckpointError):
    """Los datos de un parámetro no coinciden con su forma o su base"""


class CheckpointSpecError(CheckpointError):
    """Un campo de especificación tiene un valor desconocido"""

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"Especificación inválida en '{field}': {detail}")


class IdxFormatError(OdeNetsError):
    """Archivo IDX con formato inválido"""


class TrainingAborted(OdeNetsError):
    """El entrenamiento se detuvo; conserva el último modelo válido"""

    def __init__(self, message: str, model: Any, metrics: list):
        self.model = model
        self.metrics = metrics
        super().__init__(message)
