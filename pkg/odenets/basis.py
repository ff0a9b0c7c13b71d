"""
Funciones base sobre [0, T], evaluación de funciones de peso y cambios de base:
interpolación, proyección L2 por cuadratura y proyección de nubes de puntos
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf
from scipy.special import roots_legendre

from .exceptions import (
    ConditioningError,
    ConfigurationError,
    CoverageError,
    DomainError,
    ShapeError,
)

# Tolerancia relativa para tiempos que exceden [0, T] por redondeo
TIME_TOLERANCE = 1e-12

# Desplazamiento para asignar un tiempo sobre el borde de una celda a la celda derecha
CELL_SNAP = 1e-9

# Regla de Gauss-Legendre de 4 puntos: exacta para polinomios de grado 7
QUADRATURE_POINTS = 4

# Umbral de pivote relativo al mayor elemento diagonal
PIVOT_THRESHOLD = 1e-12


class BasisFamily(str, Enum):
    PIECEWISE_CONSTANT = 'piecewise_constant'
    PIECEWISE_LINEAR = 'piecewise_linear'


@dataclass(frozen=True)
class BasisSpec:
    """
    Familia de funciones base con K funciones sobre [0, T]

    - piecewise_constant: K celdas de ancho T/K, semiabiertas; t = T pertenece a la última.
    - piecewise_linear: K puntos de control t_k = T(k-1)/(K-1) con funciones "sombrero";
      con K = 1 degenera en una función constante.
    """
    family: BasisFamily
    k: int
    t_final: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'family', BasisFamily(self.family))
        except ValueError:
            raise ConfigurationError(f"Familia de base desconocida: {self.family!r}")

        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"K debe ser un entero positivo, se recibió {self.k!r}")
        object.__setattr__(self, 'k', int(self.k))

        t_final = float(self.t_final)
        if not np.isfinite(t_final) or t_final <= 0:
            raise ConfigurationError(f"T debe ser positivo y finito, se recibió {self.t_final!r}")
        object.__setattr__(self, 't_final', t_final)

    @property
    def delta_t(self) -> float:
        """Ancho de celda T/K"""
        return self.t_final / self.k

    def control_points(self) -> np.ndarray:
        """Puntos donde theta(t_k) coincide con el coeficiente k"""
        if self.family == BasisFamily.PIECEWISE_CONSTANT:
            return (np.arange(self.k) + 0.5) * self.delta_t
        if self.k == 1:
            return np.array([0.5 * self.t_final])
        return self.t_final * np.arange(self.k) / (self.k - 1)

    def breakpoints(self) -> np.ndarray:
        """Bordes de los elementos donde las funciones base pierden suavidad"""
        if self.family == BasisFamily.PIECEWISE_CONSTANT:
            return self.t_final * np.arange(self.k + 1) / self.k
        if self.k == 1:
            return np.array([0.0, self.t_final])
        return self.t_final * np.arange(self.k) / (self.k - 1)

    def with_k(self, k: int) -> 'BasisSpec':
        return BasisSpec(self.family, k, self.t_final)

    def to_dict(self) -> Dict:
        """Convertir la especificación a diccionario"""
        return {
            'family': self.family.value,
            'k': self.k,
            't_final': self.t_final,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'BasisSpec':
        return cls(data['family'], data['k'], data.get('t_final', 1.0))


def next_k(spec: BasisSpec) -> int:
    """
    Regla de refinamiento: 2K para constantes a trozos, 2K-1 para lineales

    Una base lineal con K = 1 pasa a K = 2 (de lo contrario no crecería).
    """
    if spec.family == BasisFamily.PIECEWISE_CONSTANT:
        return 2 * spec.k
    return max(2 * spec.k - 1, 2)


def _check_times(spec: BasisSpec, ts: np.ndarray) -> np.ndarray:
    tolerance = TIME_TOLERANCE * spec.t_final
    outside = (ts < -tolerance) | (ts > spec.t_final + tolerance) | ~np.isfinite(ts)
    if np.any(outside):
        raise DomainError(float(ts[np.argmax(outside)]), spec.t_final)
    return np.clip(ts, 0.0, spec.t_final)


def basis_matrix(spec: BasisSpec, ts: Sequence[float]) -> np.ndarray:
    """
    Evaluar las K funciones base en varios tiempos

    Returns:
        Matriz de N x K con phi_k(t_i)
    """
    ts = _check_times(spec, np.atleast_1d(np.asarray(ts, dtype=np.float64)))
    rows = np.arange(ts.shape[0])
    phi = np.zeros((ts.shape[0], spec.k))

    if spec.family == BasisFamily.PIECEWISE_CONSTANT:
        cells = np.floor(ts * spec.k / spec.t_final + CELL_SNAP).astype(np.int64)
        phi[rows, np.clip(cells, 0, spec.k - 1)] = 1.0
        return phi

    if spec.k == 1:
        phi[:, 0] = 1.0
        return phi

    s = ts * (spec.k - 1) / spec.t_final
    left = np.clip(np.floor(s).astype(np.int64), 0, spec.k - 2)
    weight = np.clip(s - left, 0.0, 1.0)
    phi[rows, left] = 1.0 - weight
    phi[rows, left + 1] = weight
    return phi


def basis_eval(spec: BasisSpec, t: float) -> np.ndarray:
    """Evaluar (phi_1(t), ..., phi_K(t))"""
    return basis_matrix(spec, [t])[0]


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """
    Función de peso theta(t) = sum_k phi_k(t) * coeffs[k, :]

    coeffs es una matriz K x P, con P el ancho aplanado de un tensor de la unidad.
    """
    spec: BasisSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if coeffs.ndim != 2 or coeffs.shape[0] != self.spec.k:
            raise ShapeError(coeffs.shape, (self.spec.k, -1), 'coeficientes de la función de peso')
        if not np.all(np.isfinite(coeffs)):
            raise ConfigurationError("Los coeficientes de la función de peso deben ser finitos")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def parameter_count(self) -> int:
        return self.coeffs.size


def weight_eval(wf: WeightFunction, t: float) -> np.ndarray:
    """Evaluar theta(t) como vector de longitud P"""
    return basis_eval(wf.spec, t) @ wf.coeffs


def _require_same_horizon(source: BasisSpec, target: BasisSpec):
    if not np.isclose(source.t_final, target.t_final, rtol=TIME_TOLERANCE, atol=0.0):
        raise ConfigurationError(
            f"Las bases no comparten T: {source.t_final!r} y {target.t_final!r}"
        )


def interpolate(wf: WeightFunction, target: BasisSpec) -> WeightFunction:
    """Evaluar la función fuente en los puntos de control de la base destino"""
    _require_same_horizon(wf.spec, target)
    phi = basis_matrix(wf.spec, target.control_points())
    return WeightFunction(target, phi @ wf.coeffs)


def _factor_spd(matrix: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Factorizar una matriz simétrica definida positiva (Cholesky)

    Returns:
        (factor inferior, índice 1-based del primer pivote inválido o 0 si es válida)
    """
    factor, info = dpotrf(matrix, lower=1, clean=1)
    if info > 0:
        return factor, int(info)
    if info < 0:
        raise ConditioningError(f"Argumento inválido para la factorización (info={info})")

    pivots = np.diag(factor) ** 2
    threshold = PIVOT_THRESHOLD * np.max(np.diag(matrix))
    small = np.flatnonzero(pivots <= threshold)
    if small.size:
        return factor, int(small[0]) + 1
    return factor, 0


def _subcell_edges(source: BasisSpec, target: BasisSpec) -> np.ndarray:
    # Unión de ambas particiones; con particiones anidadas son max(K1, K2) subceldas
    edges = np.sort(np.concatenate([source.breakpoints(), target.breakpoints()]))
    keep = np.concatenate([[True], np.diff(edges) > TIME_TOLERANCE * target.t_final])
    return edges[keep]


def quadrature_rule(source: BasisSpec, target: BasisSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Nodos y pesos de Gauss-Legendre por subcelda para el par de bases"""
    xi, w = roots_legendre(QUADRATURE_POINTS)
    edges = _subcell_edges(source, target)
    centers = 0.5 * (edges[1:] + edges[:-1])
    halves = 0.5 * (edges[1:] - edges[:-1])
    nodes = (centers[:, None] + halves[:, None] * xi[None, :]).ravel()
    weights = (halves[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=256)
def transfer_operator(source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """
    Operador A = H^-1 R (K2 x K1) de la proyección L2 de source sobre target

    H es la matriz de masa de la base destino y R la matriz de transferencia,
    ambas integradas con cuadratura de Gauss por subcelda.
    """
    _require_same_horizon(source, target)
    nodes, weights = quadrature_rule(source, target)
    phi_source = basis_matrix(source, nodes)
    phi_target = basis_matrix(target, nodes)

    hessian = phi_target.T @ (weights[:, None] * phi_target)
    transfer = phi_target.T @ (weights[:, None] * phi_source)

    factor, bad_pivot = _factor_spd(hessian)
    if bad_pivot:
        raise ConditioningError(
            f"Matriz de masa singular para {target.family.value} K={target.k} (pivote {bad_pivot})"
        )
    operator = cho_solve((factor, True), transfer)
    operator.setflags(write=False)
    return operator


def project(wf: WeightFunction, target: BasisSpec) -> WeightFunction:
    """Proyección L2 de la función de peso sobre la base destino"""
    operator = transfer_operator(wf.spec, target)
    return WeightFunction(target, operator @ wf.coeffs)


@dataclass(frozen=True, eq=False)
class StatePointCloud:
    """Muestras (t_i, valor_i) del estado recogidas durante el paso hacia adelante en [0, T]"""
    samples: Tuple[Tuple[float, np.ndarray], ...]
    t_final: float = 1.0

    def __post_init__(self):
        t_final = float(self.t_final)
        if not np.isfinite(t_final) or t_final <= 0:
            raise ConfigurationError(f"T debe ser positivo y finito, se recibió {self.t_final!r}")
        samples = tuple((float(t), np.asarray(value, dtype=np.float64).ravel()) for t, value in self.samples)
        if not samples:
            raise ConfigurationError("La nube de puntos del estado está vacía")
        width = samples[0][1].shape[0]
        for t, value in samples:
            if value.shape[0] != width:
                raise ShapeError(value.shape, (width,), 'muestra de estado')
            if not 0.0 <= t <= t_final * (1.0 + 1e-12):
                raise DomainError(t, t_final)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 't_final', t_final)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.vstack([value for _, value in self.samples])

    def __len__(self) -> int:
        return len(self.samples)


def project_pointcloud(cloud: StatePointCloud, target: BasisSpec) -> np.ndarray:
    """
    Mínimos cuadrados punto a punto de la nube sobre la base destino

    Resuelve las ecuaciones normales Phi^T Phi c = Phi^T v una sola vez para
    todas las columnas del estado.

    Returns:
        Matriz K x P_s de coeficientes
    """
    phi = basis_matrix(target, cloud.times)

    # 1. Verificar que cada función base tenga al menos una muestra
    uncovered = np.flatnonzero(~np.any(phi > 0.0, axis=0))
    if uncovered.size:
        raise CoverageError(int(uncovered[0]) + 1)

    # 2. Factorizar la matriz normal con verificación de pivotes
    gram = phi.T @ phi
    factor, bad_pivot = _factor_spd(gram)
    if bad_pivot:
        raise CoverageError(bad_pivot, f"La nube de puntos no determina la función base {bad_pivot} (rango deficiente)")

    # 3. Resolver para todas las columnas a la vez
    return cho_solve((factor, True), phi.T @ cloud.values)
