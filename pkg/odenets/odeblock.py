"""
Bloque ODE con estado: unidad residual parametrizada por funciones base,
integrada con Runge-Kutta mientras recoge y proyecta el estado de BatchNorm
"""

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .adcore import (
    Tensor,
    as_tensor,
    batch_mean,
    batch_norm,
    batch_variance,
    dense,
    linear_combination,
    relu,
    reshape,
)
from .basis import BasisSpec, StatePointCloud, WeightFunction, basis_eval, project_pointcloud
from .exceptions import ConfigurationError, ShapeError
from .integrate import ButcherTableau, StageHook, StageRecord, integrate

# Orden fijo de los tensores de la unidad BN -> ReLU -> Dense -> BN -> ReLU -> Dense
UNIT_GRADIENT_TENSORS = (
    'bn1/scale',
    'bn1/bias',
    'dense1/kernel',
    'dense1/bias',
    'bn2/scale',
    'bn2/bias',
    'dense2/kernel',
    'dense2/bias',
)
BN_SITES = (('bn1', 'dense1'), ('bn2', 'dense2'))
UNIT_STATE_TENSORS = ('bn1/mean', 'bn1/var', 'bn2/mean', 'bn2/var')


class Mode(str, Enum):
    TRAIN = 'train'
    INFER = 'infer'


@dataclass(frozen=True)
class ResidualUnitSpec:
    """Unidad residual densa de ancho d con dos sitios de BatchNorm"""
    width: int

    def __post_init__(self):
        if isinstance(self.width, bool) or int(self.width) != self.width or self.width < 1:
            raise ConfigurationError(f"El ancho de la unidad debe ser positivo, se recibió {self.width!r}")

    def gradient_shapes(self) -> Dict[str, Tuple[int, ...]]:
        d = self.width
        return OrderedDict(
            (name, (d, d) if name.endswith('/kernel') else (d,)) for name in UNIT_GRADIENT_TENSORS
        )

    def state_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return OrderedDict((name, (self.width,)) for name in UNIT_STATE_TENSORS)

    @property
    def state_width(self) -> int:
        return len(UNIT_STATE_TENSORS) * self.width


def unit_forward(unit: ResidualUnitSpec,
                 theta_g_at_t: Mapping[str, Tensor],
                 theta_s_at_t: Mapping[str, np.ndarray],
                 x,
                 mode: Mode,
                 momentum: float,
                 eps: float) -> Tuple[Tensor, Optional[np.ndarray]]:
    """
    Evaluar R(theta_g(t), theta_s(t), x)

    En modo TRAIN cada BatchNorm normaliza con la estadística del lote y emite la
    muestra de estado momentum * theta_s(t) + (1 - momentum) * estadística.
    En modo INFER normaliza con theta_s(t) y no emite muestra.

    Returns:
        (dx/dt, vector de estado [bn1/mean, bn1/var, bn2/mean, bn2/var] o None)
    """
    x = as_tensor(x)
    if x.data.ndim != 2 or x.shape[1] != unit.width:
        raise ShapeError(x.shape, (-1, unit.width), 'entrada de la unidad residual')

    h = x
    samples = []
    for site, layer in BN_SITES:
        stored_mean = theta_s_at_t[f'{site}/mean']
        stored_var = theta_s_at_t[f'{site}/var']
        if mode == Mode.TRAIN:
            mean = batch_mean(h)
            var = batch_variance(h)
            samples.append(momentum * stored_mean + (1.0 - momentum) * mean.data)
            samples.append(momentum * stored_var + (1.0 - momentum) * var.data)
        else:
            mean, var = stored_mean, stored_var

        h = batch_norm(h, mean, var, theta_g_at_t[f'{site}/scale'], theta_g_at_t[f'{site}/bias'], eps)
        h = relu(h)
        h = dense(h, theta_g_at_t[f'{layer}/kernel'], theta_g_at_t[f'{layer}/bias'])

    sample = np.concatenate(samples) if mode == Mode.TRAIN else None
    return h, sample


@dataclass(frozen=True, eq=False)
class StatefulOdeBlock:
    """
    Bloque ODE con parámetros de gradiente theta_g y de estado theta_s

    Cada tensor de la unidad tiene su propia función de peso; todas las de gradiente
    comparten la base basis_g y todas las de estado la base basis_s.
    """
    unit: ResidualUnitSpec
    scheme: ButcherTableau
    n_t: int
    t_final: float
    params_g: Mapping[str, WeightFunction]
    params_s: Mapping[str, WeightFunction]
    momentum: float = 0.9
    eps: float = 1e-5

    def __post_init__(self):
        if isinstance(self.n_t, bool) or int(self.n_t) != self.n_t or self.n_t < 1:
            raise ConfigurationError(f"N_T debe ser un entero positivo, se recibió {self.n_t!r}")
        object.__setattr__(self, 'n_t', int(self.n_t))
        object.__setattr__(self, 't_final', float(self.t_final))
        object.__setattr__(self, 'params_g', self._checked(self.params_g, self.unit.gradient_shapes(), 'gradiente'))
        object.__setattr__(self, 'params_s', self._checked(self.params_s, self.unit.state_shapes(), 'estado'))

    def _checked(self, params: Mapping[str, WeightFunction], shapes: Dict[str, Tuple[int, ...]], kind: str):
        if set(params) != set(shapes):
            raise ConfigurationError(
                f"Parámetros de {kind} inesperados: {sorted(params)} (se esperaban {sorted(shapes)})"
            )
        specs = {params[name].spec for name in shapes}
        if len(specs) != 1:
            raise ConfigurationError(f"Los parámetros de {kind} deben compartir una misma base")
        spec = specs.pop()
        if not np.isclose(spec.t_final, self.t_final, rtol=1e-12, atol=0.0):
            raise ConfigurationError(f"La base de {kind} tiene T={spec.t_final}, el bloque T={self.t_final}")
        for name, shape in shapes.items():
            if params[name].width != int(np.prod(shape)):
                raise ShapeError((params[name].width,), shape, f'parámetro {name}')
        return OrderedDict((name, params[name]) for name in shapes)

    @property
    def basis_g(self) -> BasisSpec:
        return self.params_g['dense1/kernel'].spec

    @property
    def basis_s(self) -> BasisSpec:
        return self.params_s['bn1/mean'].spec

    def gradient_coefficients(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, wf.coeffs) for name, wf in self.params_g.items())

    def state_coefficients(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, wf.coeffs) for name, wf in self.params_s.items())

    def parameter_count(self) -> int:
        return sum(wf.parameter_count for wf in self.params_g.values()) + \
            sum(wf.parameter_count for wf in self.params_s.values())

    def weights_at(self, t: float, coeffs: Optional[Mapping[str, object]] = None) -> Dict[str, Tensor]:
        """Evaluar theta_g(t) con las formas de la unidad"""
        coeffs = coeffs if coeffs is not None else self.gradient_coefficients()
        phi = basis_eval(self.basis_g, t)
        shapes = self.unit.gradient_shapes()
        return {
            name: reshape(linear_combination(phi, coeffs[name]), shape)
            for name, shape in shapes.items()
        }

    def state_at(self, t: float) -> Dict[str, np.ndarray]:
        """Evaluar theta_s(t)"""
        phi = basis_eval(self.basis_s, t)
        return {name: phi @ wf.coeffs for name, wf in self.params_s.items()}

    def split_state(self, matrix: np.ndarray) -> Dict[str, np.ndarray]:
        """Separar una matriz K x P_s en los coeficientes de cada tensor de estado"""
        d = self.unit.width
        return OrderedDict(
            (name, np.array(matrix[:, i * d:(i + 1) * d])) for i, name in enumerate(UNIT_STATE_TENSORS)
        )

    def replace(self, **changes) -> 'StatefulOdeBlock':
        return dataclasses.replace(self, **changes)


def _right_hand_side(block: StatefulOdeBlock, coeffs, mode: Mode):
    def rhs(t, x):
        return unit_forward(
            block.unit,
            block.weights_at(t, coeffs),
            block.state_at(t),
            x,
            mode,
            block.momentum,
            block.eps,
        )
    return rhs


def block_forward_train(block: StatefulOdeBlock, x_in, theta_g: Optional[Mapping[str, object]] = None,
                        stage_hook: Optional[StageHook] = None) -> Tuple[Tensor, Dict[str, np.ndarray]]:
    """
    Paso hacia adelante de entrenamiento (integración + proyección del estado)

    En cada etapa se registra (t_i, muestra de estado) en la nube de puntos; al
    final la nube se proyecta sobre basis_s.

    Returns:
        (x_out, nuevos coeficientes de estado por tensor)
    """
    cloud: List[Tuple[float, np.ndarray]] = []

    def collect(record: StageRecord):
        cloud.append((record.t, record.aux))
        if stage_hook is not None:
            stage_hook(record)

    x_out = integrate(
        _right_hand_side(block, theta_g, Mode.TRAIN),
        block.scheme,
        as_tensor(x_in),
        block.t_final,
        block.n_t,
        stage_hook=collect,
    )
    coeffs = project_pointcloud(StatePointCloud(tuple(cloud), block.t_final), block.basis_s)
    return x_out, block.split_state(coeffs)


def block_forward_infer(block: StatefulOdeBlock, x_in, theta_g: Optional[Mapping[str, object]] = None,
                        stage_hook: Optional[StageHook] = None) -> Tensor:
    """Paso hacia adelante de inferencia: el estado queda fijo y no se recoge la nube"""
    return integrate(
        _right_hand_side(block, theta_g, Mode.INFER),
        block.scheme,
        as_tensor(x_in),
        block.t_final,
        block.n_t,
        stage_hook=stage_hook,
    )


def apply_state_update(block: StatefulOdeBlock, new_state: Mapping[str, np.ndarray]) -> StatefulOdeBlock:
    """Reemplazar los coeficientes de estado; las varianzas se acotan a >= eps"""
    params_s = OrderedDict()
    for name, wf in block.params_s.items():
        coeffs = np.asarray(new_state[name], dtype=np.float64)
        if coeffs.shape != wf.coeffs.shape:
            raise ShapeError(coeffs.shape, wf.coeffs.shape, f'estado {name}')
        if name.endswith('/var'):
            coeffs = np.maximum(coeffs, block.eps)
        params_s[name] = WeightFunction(wf.spec, coeffs)
    return block.replace(params_s=params_s)
