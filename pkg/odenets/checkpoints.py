"""
Lectura y escritura de checkpoints en JSON

Documento: {format_version, config, params_g, params_s, meta}. Cada parámetro
guarda {family, k, t_final, shape, data}; los parámetros que no viven en una
base (entrada, adaptadores, salida) usan null en family, k y t_final.
"""

import hashlib
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import numpy as np

from . import conf
from .basis import BasisSpec, WeightFunction
from .exceptions import (
    CheckpointShapeError,
    CheckpointSpecError,
    CheckpointVersionError,
    ConfigurationError,
    MalformedCheckpointError,
)
from .models import ContinuousClassifier, ModelConfig, build_block, block_prefix, parameter_layout
from .odeblock import ResidualUnitSpec
from .serializers import SHAPE_MISMATCH, CheckpointSerializer, flatten_errors

# Configurar logging
logger = logging.getLogger(__name__)


def _entry(spec: Optional[BasisSpec], shape, values: np.ndarray) -> Dict:
    return {
        'family': spec.family.value if spec else None,
        'k': spec.k if spec else None,
        't_final': spec.t_final if spec else None,
        'shape': [int(size) for size in shape],
        # float() de numpy conserva los 64 bits; json escribe repr, que es exacto
        'data': [float(value) for value in np.asarray(values).ravel()],
    }


@dataclass
class Checkpoint:
    """Modelo más metadatos (época, semilla, historial de refinamientos, procedencia)"""
    model: ContinuousClassifier
    meta: Dict = field(default_factory=dict)
    format_version: int = field(default_factory=conf.checkpoint_format_version)

    def to_document(self) -> Dict:
        """Convertir el checkpoint a un documento JSON"""
        layout = parameter_layout(self.model.config)
        params_g = OrderedDict()
        for name, shape in layout.static.items():
            params_g[name] = _entry(None, shape, self.model.static_params[name])
        for i, block in enumerate(self.model.blocks):
            for name, wf in block.params_g.items():
                shape = block.unit.gradient_shapes()[name]
                params_g[block_prefix(i) + name] = _entry(wf.spec, shape, wf.coeffs)

        params_s = OrderedDict()
        for i, block in enumerate(self.model.blocks):
            for name, wf in block.params_s.items():
                shape = block.unit.state_shapes()[name]
                params_s[block_prefix(i) + name] = _entry(wf.spec, shape, wf.coeffs)

        return {
            'format_version': self.format_version,
            'config': self.model.config.to_dict(),
            'params_g': params_g,
            'params_s': params_s,
            'meta': self.meta,
        }

    def sha256(self) -> str:
        """Huella del documento canónico (claves ordenadas)"""
        canonical = json.dumps(self.to_document(), sort_keys=True, separators=(',', ':'), allow_nan=False)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @classmethod
    def from_document(cls, document) -> 'Checkpoint':
        """
        Reconstruir un checkpoint validando el documento

        Raises:
            MalformedCheckpointError: estructura inválida
            CheckpointVersionError: versión distinta a la esperada
            CheckpointSpecError: familia o esquema desconocido (nombra el campo)
            CheckpointShapeError: datos que no coinciden con su forma o su base
        """
        # 1. Verificar la versión antes que cualquier otra cosa
        if not isinstance(document, Mapping) or 'format_version' not in document:
            raise MalformedCheckpointError("El documento no tiene 'format_version'")
        expected = conf.checkpoint_format_version()
        if document['format_version'] != expected:
            raise CheckpointVersionError(document['format_version'], expected)

        # 2. Validar la estructura con el serializer
        serializer = CheckpointSerializer(data=document)
        if not serializer.is_valid():
            errors = flatten_errors(serializer.errors)
            for path, code, message in errors:
                if code == 'invalid_choice':
                    raise CheckpointSpecError(path, message)
            for path, code, message in errors:
                if code == SHAPE_MISMATCH:
                    raise CheckpointShapeError(f"{path}: {message}")
            detail = '; '.join(f"{path}: {message}" for path, _, message in errors)
            raise MalformedCheckpointError(f"Checkpoint inválido: {detail}")
        data = serializer.validated_data

        # 3. Reconstruir la configuración
        try:
            config = ModelConfig.from_dict(data['config'])
        except ConfigurationError as e:
            raise CheckpointSpecError('config', str(e))

        # 4. Comparar los parámetros con la disposición que define la configuración
        layout = parameter_layout(config)
        params_g, params_s = data['params_g'], data['params_s']
        expected_g = list(layout.static) + list(layout.gradient)
        if set(params_g) != set(expected_g):
            raise CheckpointShapeError(_name_mismatch('params_g', expected_g, params_g))
        if set(params_s) != set(layout.state):
            raise CheckpointShapeError(_name_mismatch('params_s', list(layout.state), params_s))

        static = OrderedDict()
        for name, shape in layout.static.items():
            entry = params_g[name]
            _check_entry(name, entry, None, shape)
            static[name] = _entry_data(name, entry).reshape(shape)

        blocks = []
        for i, block_config in enumerate(config.blocks):
            unit = ResidualUnitSpec(block_config.width)
            params = {}
            for kind, source, shapes, spec in (
                ('g', params_g, unit.gradient_shapes(), block_config.basis_g),
                ('s', params_s, unit.state_shapes(), block_config.basis_s),
            ):
                functions = OrderedDict()
                for name, shape in shapes.items():
                    full_name = block_prefix(i) + name
                    entry = source[full_name]
                    _check_entry(full_name, entry, spec, shape)
                    coeffs = _entry_data(full_name, entry).reshape(spec.k, -1)
                    functions[name] = WeightFunction(spec, coeffs)
                params[kind] = functions
            blocks.append(build_block(block_config, config, params['g'], params['s']))

        model = ContinuousClassifier(config=config, static_params=static, blocks=tuple(blocks))
        return cls(model=model, meta=dict(data.get('meta') or {}), format_version=expected)


def _name_mismatch(group: str, expected, found) -> str:
    missing = sorted(set(expected) - set(found))
    extra = sorted(set(found) - set(expected))
    return f"{group}: faltan {missing}, sobran {extra}"


def _entry_data(name: str, entry: Mapping) -> np.ndarray:
    data = np.array(entry['data'], dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise MalformedCheckpointError(f"{name}: el parámetro contiene valores no finitos")
    return data


def _check_entry(name: str, entry: Mapping, spec: Optional[BasisSpec], shape):
    if tuple(entry['shape']) != tuple(shape):
        raise CheckpointShapeError(f"{name}: forma {tuple(entry['shape'])}, se esperaba {tuple(shape)}")
    if spec is None:
        if entry['family'] is not None:
            raise CheckpointShapeError(f"{name}: el parámetro no vive en una base")
        return
    if entry['family'] != spec.family.value:
        raise CheckpointSpecError(f'{name}.family', f"{entry['family']!r} no coincide con {spec.family.value!r}")
    if entry['k'] != spec.k:
        raise CheckpointShapeError(f"{name}: K={entry['k']}, la configuración declara K={spec.k}")
    if not np.isclose(entry['t_final'], spec.t_final, rtol=1e-12, atol=0.0):
        raise CheckpointShapeError(f"{name}: T={entry['t_final']}, la configuración declara T={spec.t_final}")


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Guardar el checkpoint como JSON legible"""
    path = Path(path)
    try:
        text = json.dumps(checkpoint.to_document(), indent=1, allow_nan=False)
    except ValueError:
        raise MalformedCheckpointError("El modelo contiene valores no finitos y no se puede guardar")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    logger.info(f"Checkpoint guardado en {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Cargar y validar un checkpoint desde disco"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No existe el checkpoint: {path}")
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedCheckpointError(f"El archivo {path} no es JSON válido: {e}")
    checkpoint = Checkpoint.from_document(document)
    logger.debug(f"Checkpoint cargado desde {path}")
    return checkpoint
