"""
Modelo clasificador continuo: capa de entrada, bloques ODE con estado,
adaptadores entre anchos distintos y capa de salida
"""

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import conf
from .adcore import ParamStore, Tensor, dense
from .basis import BasisSpec, WeightFunction
from .exceptions import ConfigurationError, ContractError, ShapeError
from .integrate import StageHook, make_tableau
from .odeblock import (
    Mode,
    ResidualUnitSpec,
    StatefulOdeBlock,
    apply_state_update,
    block_forward_infer,
    block_forward_train,
)


@dataclass(frozen=True)
class BlockConfig:
    """Configuración de un bloque ODE"""
    width: int
    basis_g: BasisSpec
    scheme: str = 'rk4'
    n_t: int = 1
    t_final: float = 1.0
    basis_s: Optional[BasisSpec] = None

    def __post_init__(self):
        ResidualUnitSpec(self.width)
        make_tableau(self.scheme)
        if isinstance(self.n_t, bool) or int(self.n_t) != self.n_t or self.n_t < 1:
            raise ConfigurationError(f"N_T debe ser un entero positivo, se recibió {self.n_t!r}")
        if self.basis_s is None:
            object.__setattr__(self, 'basis_s', self.basis_g)
        for label, spec in (('basis_g', self.basis_g), ('basis_s', self.basis_s)):
            if not np.isclose(spec.t_final, self.t_final, rtol=1e-12, atol=0.0):
                raise ConfigurationError(
                    f"{label} tiene T={spec.t_final} pero el bloque usa T={self.t_final}"
                )

    def to_dict(self) -> Dict:
        return {
            'width': self.width,
            'scheme': self.scheme,
            'n_t': self.n_t,
            't_final': self.t_final,
            'basis_g': self.basis_g.to_dict(),
            'basis_s': self.basis_s.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> 'BlockConfig':
        t_final = float(data.get('t_final', 1.0))

        def spec(raw):
            if raw is None:
                return None
            return BasisSpec(raw['family'], raw['k'], raw.get('t_final', t_final))

        return cls(
            width=data['width'],
            basis_g=spec(data['basis_g']),
            scheme=data.get('scheme', 'rk4'),
            n_t=data.get('n_t', 1),
            t_final=t_final,
            basis_s=spec(data.get('basis_s')),
        )


@dataclass(frozen=True)
class ModelConfig:
    """Arquitectura completa: dimensiones de entrada y salida y lista de bloques"""
    input_dim: int
    num_classes: int
    blocks: Tuple[BlockConfig, ...]
    seed: int = 0
    bn_momentum: float = field(default_factory=conf.bn_momentum)
    bn_eps: float = field(default_factory=conf.bn_eps)

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple(self.blocks))
        if not self.blocks:
            raise ConfigurationError("El modelo necesita al menos un bloque")
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim debe ser positivo, se recibió {self.input_dim}")
        if self.num_classes < 2:
            raise ConfigurationError(f"Se necesitan al menos 2 clases, se recibió {self.num_classes}")
        if not 0.0 <= self.bn_momentum < 1.0:
            raise ConfigurationError(f"El momento de BatchNorm debe estar en [0, 1), se recibió {self.bn_momentum}")
        if not self.bn_eps > 0:
            raise ConfigurationError(f"El epsilon de BatchNorm debe ser positivo, se recibió {self.bn_eps}")

    def stitch_indices(self) -> List[int]:
        """Bloques precedidos por un adaptador denso por cambio de ancho"""
        return [
            i for i in range(1, len(self.blocks))
            if self.blocks[i].width != self.blocks[i - 1].width
        ]

    def to_dict(self) -> Dict:
        return {
            'input_dim': self.input_dim,
            'num_classes': self.num_classes,
            'seed': self.seed,
            'bn_momentum': self.bn_momentum,
            'bn_eps': self.bn_eps,
            'blocks': [block.to_dict() for block in self.blocks],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> 'ModelConfig':
        extra = {
            key: data[key] for key in ('bn_momentum', 'bn_eps')
            if data.get(key) is not None
        }
        return cls(
            input_dim=int(data['input_dim']),
            num_classes=int(data['num_classes']),
            blocks=tuple(BlockConfig.from_dict(block) for block in data['blocks']),
            seed=int(data.get('seed', 0)),
            **extra,
        )


class ParameterLayout(NamedTuple):
    """Nombres y formas de todos los parámetros de un modelo"""
    static: Dict[str, Tuple[int, ...]]
    gradient: Dict[str, Tuple[BasisSpec, Tuple[int, ...]]]
    state: Dict[str, Tuple[BasisSpec, Tuple[int, ...]]]


def block_prefix(index: int) -> str:
    return f'block{index}/unit/'


def parameter_layout(config: ModelConfig) -> ParameterLayout:
    """Calcular la disposición de parámetros que define la configuración"""
    static = OrderedDict()
    gradient = OrderedDict()
    state = OrderedDict()
    stitches = set(config.stitch_indices())

    first = config.blocks[0].width
    static['stem/dense/kernel'] = (config.input_dim, first)
    static['stem/dense/bias'] = (first,)

    for i, block in enumerate(config.blocks):
        if i in stitches:
            static[f'stitch{i}/dense/kernel'] = (config.blocks[i - 1].width, block.width)
            static[f'stitch{i}/dense/bias'] = (block.width,)
        unit = ResidualUnitSpec(block.width)
        for name, shape in unit.gradient_shapes().items():
            gradient[block_prefix(i) + name] = (block.basis_g, shape)
        for name, shape in unit.state_shapes().items():
            state[block_prefix(i) + name] = (block.basis_s, shape)

    last = config.blocks[-1].width
    static['head/dense/kernel'] = (last, config.num_classes)
    static['head/dense/bias'] = (config.num_classes,)
    return ParameterLayout(static, gradient, state)


def _he_normal(rng: np.random.Generator, fan_in: int, size) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=size)


def init_params(config: ModelConfig, seed: Optional[int] = None) -> 'ContinuousClassifier':
    """
    Inicializar un modelo de forma determinista

    - Núcleos densos: normal de varianza 2 / fan_in, independiente por coeficiente de base.
    - Sesgos: 0. Escala de BatchNorm: 1, sesgo de BatchNorm: 0.
    - Estado: media 0 y varianza 1.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    layout = parameter_layout(config)

    static = OrderedDict()
    for name, shape in layout.static.items():
        if name.endswith('/kernel'):
            static[name] = _he_normal(rng, shape[0], shape)
        else:
            static[name] = np.zeros(shape)

    blocks = []
    for i, block_config in enumerate(config.blocks):
        unit = ResidualUnitSpec(block_config.width)
        k_g = block_config.basis_g.k
        k_s = block_config.basis_s.k

        params_g = OrderedDict()
        for name, shape in unit.gradient_shapes().items():
            width = int(np.prod(shape))
            if name.endswith('/kernel'):
                coeffs = _he_normal(rng, shape[0], (k_g, width))
            elif name.endswith('/scale'):
                coeffs = np.ones((k_g, width))
            else:
                coeffs = np.zeros((k_g, width))
            params_g[name] = WeightFunction(block_config.basis_g, coeffs)

        params_s = OrderedDict()
        for name, shape in unit.state_shapes().items():
            fill = np.ones if name.endswith('/var') else np.zeros
            params_s[name] = WeightFunction(block_config.basis_s, fill((k_s, shape[0])))

        blocks.append(build_block(block_config, config, params_g, params_s))

    return ContinuousClassifier(config=config, static_params=static, blocks=tuple(blocks))


def build_block(block_config: BlockConfig, config: ModelConfig, params_g, params_s) -> StatefulOdeBlock:
    return StatefulOdeBlock(
        unit=ResidualUnitSpec(block_config.width),
        scheme=make_tableau(block_config.scheme),
        n_t=block_config.n_t,
        t_final=block_config.t_final,
        params_g=params_g,
        params_s=params_s,
        momentum=config.bn_momentum,
        eps=config.bn_eps,
    )


@dataclass(frozen=True, eq=False)
class ContinuousClassifier:
    """
    Red clasificadora con bloques ODE

    Inmutable: las actualizaciones devuelven un modelo nuevo. La configuración
    refleja siempre las bases y N_T actuales de los bloques.
    """
    config: ModelConfig
    static_params: Mapping[str, np.ndarray]
    blocks: Tuple[StatefulOdeBlock, ...]

    def __post_init__(self):
        layout = parameter_layout(self.config)
        if set(self.static_params) != set(layout.static):
            raise ConfigurationError(
                f"Parámetros estáticos inesperados: {sorted(self.static_params)}"
            )
        static = OrderedDict()
        for name, shape in layout.static.items():
            value = np.array(self.static_params[name], dtype=np.float64)
            if value.shape != shape:
                raise ShapeError(value.shape, shape, f'parámetro {name}')
            if not np.all(np.isfinite(value)):
                raise ConfigurationError(f"El parámetro {name} debe ser finito")
            value.setflags(write=False)
            static[name] = value
        object.__setattr__(self, 'static_params', static)
        object.__setattr__(self, 'blocks', tuple(self.blocks))
        if len(self.blocks) != len(self.config.blocks):
            raise ConfigurationError("El número de bloques no coincide con la configuración")

    def gradient_params(self) -> ParamStore:
        """Todos los parámetros entrenables: estáticos y coeficientes K x P de los bloques"""
        items = [(name, value) for name, value in self.static_params.items() if name.startswith('stem/')]
        stitches = set(self.config.stitch_indices())
        for i, block in enumerate(self.blocks):
            if i in stitches:
                items.extend(
                    (name, value) for name, value in self.static_params.items()
                    if name.startswith(f'stitch{i}/')
                )
            items.extend((block_prefix(i) + name, coeffs) for name, coeffs in block.gradient_coefficients().items())
        items.extend((name, value) for name, value in self.static_params.items() if name.startswith('head/'))
        return ParamStore(items)

    def state_params(self) -> ParamStore:
        return ParamStore(
            (block_prefix(i) + name, coeffs)
            for i, block in enumerate(self.blocks)
            for name, coeffs in block.state_coefficients().items()
        )

    def with_gradient_params(self, params: ParamStore) -> 'ContinuousClassifier':
        """Reemplazar los parámetros entrenables conservando las bases"""
        expected = self.gradient_params()
        if params.names() != expected.names():
            raise ContractError("Los nombres de parámetros no coinciden con el modelo")

        static = OrderedDict((name, params[name]) for name in self.static_params)
        blocks = []
        for i, block in enumerate(self.blocks):
            params_g = OrderedDict(
                (name, WeightFunction(wf.spec, params[block_prefix(i) + name].reshape(wf.coeffs.shape)))
                for name, wf in block.params_g.items()
            )
            blocks.append(block.replace(params_g=params_g))
        return dataclasses.replace(self, static_params=static, blocks=tuple(blocks))

    def with_state_updates(self, updates: Sequence[Optional[Mapping[str, np.ndarray]]]) -> 'ContinuousClassifier':
        """Aplicar los nuevos coeficientes de estado de cada bloque (None = sin cambio)"""
        if len(updates) != len(self.blocks):
            raise ContractError("Se esperaba una actualización de estado por bloque")
        blocks = tuple(
            block if update is None else apply_state_update(block, update)
            for block, update in zip(self.blocks, updates)
        )
        return dataclasses.replace(self, blocks=blocks)

    def with_blocks(self, blocks: Sequence[StatefulOdeBlock]) -> 'ContinuousClassifier':
        """Reemplazar los bloques y sincronizar la configuración (bases, N_T)"""
        blocks = tuple(blocks)
        block_configs = tuple(
            dataclasses.replace(
                block_config,
                scheme=block.scheme.name,
                n_t=block.n_t,
                t_final=block.t_final,
                basis_g=block.basis_g,
                basis_s=block.basis_s,
            )
            for block_config, block in zip(self.config.blocks, blocks)
        )
        config = dataclasses.replace(self.config, blocks=block_configs)
        return ContinuousClassifier(config=config, static_params=self.static_params, blocks=blocks)

    def param_count(self) -> int:
        """Cantidad total de números almacenados (estáticos, gradiente y estado)"""
        return sum(value.size for value in self.static_params.values()) + self.basis_param_count()

    def basis_param_count(self) -> int:
        """Cantidad de coeficientes de base en los bloques ODE"""
        return sum(block.parameter_count() for block in self.blocks)


class ModelOutput(NamedTuple):
    logits: Tensor
    state_updates: Tuple[Optional[Dict[str, np.ndarray]], ...]


def model_forward(model: ContinuousClassifier, x, mode: Mode,
                  params: Optional[Mapping[str, Tensor]] = None,
                  stage_hook: Optional[StageHook] = None) -> ModelOutput:
    """
    Paso hacia adelante del modelo completo

    params permite sustituir cualquier parámetro entrenable por un tensor con
    gradiente (ver value_and_grad). En modo TRAIN se devuelven los nuevos
    coeficientes de estado de cada bloque.
    """
    mode = Mode(mode)

    def lookup(name: str):
        if params is not None and name in params:
            return params[name]
        return model.static_params[name]

    x = np.asarray(x, dtype=np.float64) if not isinstance(x, Tensor) else x
    if len(x.shape) != 2 or x.shape[1] != model.config.input_dim:
        raise ShapeError(x.shape, (-1, model.config.input_dim), 'entrada del modelo')

    stitches = set(model.config.stitch_indices())
    h = dense(x, lookup('stem/dense/kernel'), lookup('stem/dense/bias'))
    updates = []
    for i, block in enumerate(model.blocks):
        if i in stitches:
            h = dense(h, lookup(f'stitch{i}/dense/kernel'), lookup(f'stitch{i}/dense/bias'))
        coeffs = None
        if params is not None:
            coeffs = {
                name: params.get(block_prefix(i) + name, wf.coeffs)
                for name, wf in block.params_g.items()
            }
        if mode == Mode.TRAIN:
            h, new_state = block_forward_train(block, h, coeffs, stage_hook)
            updates.append(new_state)
        else:
            h = block_forward_infer(block, h, coeffs, stage_hook)
            updates.append(None)

    logits = dense(h, lookup('head/dense/kernel'), lookup('head/dense/bias'))
    return ModelOutput(logits=logits, state_updates=tuple(updates))
