"""
Esquemas Runge-Kutta explícitos (tablas de Butcher) y un integrador de paso fijo
con ganchos por etapa
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .adcore import value_of
from .exceptions import ConfigurationError, ContractError, DivergenceError


class SchemeId(str, Enum):
    EULER = 'euler'
    MIDPOINT = 'midpoint'
    RK4 = 'rk4'


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """
    Coeficientes (a_ij, b_i, c_i) de un esquema explícito de p etapas

    Invariantes: sum(b) = 1, c_i = sum_j a_ij y a estrictamente triangular inferior.
    """
    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        c = np.array(self.c, dtype=np.float64)
        stages = b.shape[0]
        if a.shape != (stages, stages) or c.shape != (stages,):
            raise ConfigurationError(f"Tabla de Butcher '{self.name}' con dimensiones inconsistentes")
        if np.any(np.triu(a) != 0.0):
            raise ConfigurationError(f"La tabla '{self.name}' no es explícita")
        if not np.isclose(b.sum(), 1.0, atol=1e-14):
            raise ConfigurationError(f"Los pesos b de '{self.name}' no suman 1")
        if not np.allclose(a.sum(axis=1), c, atol=1e-14):
            raise ConfigurationError(f"Los nodos c de '{self.name}' no coinciden con las sumas de a")
        for array in (a, b, c):
            array.setflags(write=False)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'c', c)

    @property
    def stages(self) -> int:
        return self.b.shape[0]


def make_tableau(scheme: str) -> ButcherTableau:
    """Construir la tabla de Butcher de un esquema conocido"""
    try:
        scheme = SchemeId(scheme)
    except ValueError:
        raise ConfigurationError(f"Esquema de integración desconocido: {scheme!r}")

    if scheme == SchemeId.EULER:
        return ButcherTableau('euler', [[0.0]], [1.0], [0.0], order=1)
    if scheme == SchemeId.MIDPOINT:
        return ButcherTableau(
            'midpoint',
            [[0.0, 0.0],
             [0.5, 0.0]],
            [0.0, 1.0],
            [0.0, 0.5],
            order=2,
        )
    return ButcherTableau(
        'rk4',
        [[0.0, 0.0, 0.0, 0.0],
         [0.5, 0.0, 0.0, 0.0],
         [0.0, 0.5, 0.0, 0.0],
         [0.0, 0.0, 1.0, 0.0]],
        [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        [0.0, 0.5, 0.5, 1.0],
        order=4,
    )


@dataclass(frozen=True)
class StageRecord:
    """Registro de una etapa: t_i, x_i, k_i y la salida auxiliar del lado derecho"""
    t: float
    x: Any
    k: Any
    stage: int
    aux: Any = None


# f(t, x) devuelve dx/dt o el par (dx/dt, aux)
RightHandSide = Callable[[float, Any], Any]
StageHook = Callable[[StageRecord], None]


def _split_output(output) -> Tuple[Any, Any]:
    if isinstance(output, tuple):
        if len(output) != 2:
            raise ContractError("El lado derecho debe devolver dx/dt o (dx/dt, aux)")
        return output
    return output, None


def rk_step(f: RightHandSide, tab: ButcherTableau, t: float, dt: float, x) -> Tuple[Any, List[StageRecord]]:
    """
    Un paso explícito: x_i = x + dt sum_j a_ij k_j, k_i = f(t + c_i dt, x_i)

    Returns:
        (x siguiente, registros de las etapas en orden)
    """
    if not dt > 0:
        raise ConfigurationError(f"El paso de tiempo debe ser positivo, se recibió {dt!r}")

    ks = []
    records = []
    for i in range(tab.stages):
        t_i = t + tab.c[i] * dt
        x_i = x
        for j in range(i):
            if tab.a[i, j] != 0.0:
                x_i = x_i + float(dt * tab.a[i, j]) * ks[j]
        k_i, aux = _split_output(f(t_i, x_i))
        if not np.all(np.isfinite(value_of(k_i))):
            raise DivergenceError(t, i)
        ks.append(k_i)
        records.append(StageRecord(t=t_i, x=x_i, k=k_i, stage=i, aux=aux))

    x_next = x
    for i in range(tab.stages):
        if tab.b[i] != 0.0:
            x_next = x_next + float(dt * tab.b[i]) * ks[i]
    return x_next, records


def integrate(f: RightHandSide, tab: ButcherTableau, x0, t_final: float, n_t: int,
              stage_hook: Optional[StageHook] = None):
    """
    Integrar de 0 a T con N_T pasos fijos de tamaño T / N_T

    stage_hook recibe cada registro de etapa en orden de ejecución.
    """
    if isinstance(n_t, bool) or int(n_t) != n_t or n_t < 1:
        raise ConfigurationError(f"N_T debe ser un entero positivo, se recibió {n_t!r}")
    dt = float(t_final) / int(n_t)

    x = x0
    for step in range(int(n_t)):
        # t = n * dt sin acumular para no arrastrar redondeo
        x, records = rk_step(f, tab, step * dt, dt, x)
        if stage_hook is not None:
            for record in records:
                stage_hook(record)
    return x


def stage_times(tab: ButcherTableau, t_final: float, n_t: int) -> np.ndarray:
    """Tiempos {n dt + c_i dt} visitados por el esquema, en orden de ejecución"""
    dt = float(t_final) / n_t
    return np.array([step * dt + c * dt for step in range(n_t) for c in tab.c])


@dataclass
class OrderMeasurement:
    """Errores globales en y' = y sobre [0, 1] y órdenes medidos"""
    scheme: str
    n_t: List[int]
    errors: List[float]
    pairwise_orders: List[float]
    fitted_order: float


def measure_order(tab: ButcherTableau, n_t_list: Sequence[int]) -> OrderMeasurement:
    """
    Medir el orden de convergencia con la EDO lineal y' = y, y(0) = 1

    El orden por pares es log2 del cociente de errores entre N_T y 2 N_T; el orden
    ajustado es la pendiente de la regresión log-log del error contra el paso.
    """
    n_t_list = sorted(int(n) for n in n_t_list)
    if len(n_t_list) < 2:
        raise ConfigurationError("Se necesitan al menos dos valores de N_T")

    errors = []
    for n_t in n_t_list:
        y = integrate(lambda t, y: y, tab, np.array([1.0]), 1.0, n_t)
        errors.append(float(abs(y[0] - np.e)))

    pairwise = [
        float(np.log(errors[i] / errors[i + 1]) / np.log(n_t_list[i + 1] / n_t_list[i]))
        for i in range(len(n_t_list) - 1)
    ]
    slope, _ = np.polyfit(np.log(1.0 / np.array(n_t_list)), np.log(errors), 1)
    return OrderMeasurement(
        scheme=tab.name,
        n_t=n_t_list,
        errors=errors,
        pairwise_orders=pairwise,
        fitted_order=float(slope),
    )
