"""
Documento de configuración de una ejecución de entrenamiento (RunConfig)
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

from .exceptions import ConfigurationError
from .models import ModelConfig
from .serializers import RunConfigSerializer, flatten_errors
from .services.training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    """Modelo, entrenamiento, datos y salidas de una ejecución"""
    model: ModelConfig
    train: TrainConfig
    dataset: Dict
    output: Dict = field(default_factory=dict)

    @classmethod
    def from_document(cls, document: Mapping, seed: Optional[int] = None) -> 'RunConfig':
        """
        Validar el documento antes de cualquier cálculo

        seed reemplaza las semillas del modelo, del entrenamiento y de los datos.
        """
        serializer = RunConfigSerializer(data=document)
        if not serializer.is_valid():
            detail = '; '.join(f"{path}: {message}" for path, _, message in flatten_errors(serializer.errors))
            raise ConfigurationError(f"Configuración inválida: {detail}")
        data = serializer.validated_data

        model = dict(data['model'])
        train = dict(data['train'])
        dataset = dict(data['dataset'])
        if seed is not None:
            model['seed'] = train['seed'] = dataset['seed'] = seed

        return cls(
            model=ModelConfig.from_dict(model),
            train=TrainConfig.from_dict(train),
            dataset=dataset,
            output=dict(data.get('output') or {}),
        )


def load_run_config(path: Union[str, Path], seed: Optional[int] = None) -> RunConfig:
    """Leer y validar un archivo de configuración JSON"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No existe el archivo de configuración: {path}")
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"El archivo de configuración {path} no es JSON válido: {e}")
    return RunConfig.from_document(document, seed=seed)
