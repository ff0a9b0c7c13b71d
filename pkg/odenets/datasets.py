"""
Conjuntos de datos: generadores sintéticos 2-D y lector de archivos IDX
"""

import gzip
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from . import conf
from .exceptions import ConfigurationError, IdxFormatError

# Configurar logging
logger = logging.getLogger(__name__)

# Números mágicos IDX: dos bytes en cero, tipo (0x08 = uint8) y número de dimensiones
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_CLASSES = 10


class DatasetKind(str, Enum):
    SPIRALS = 'spirals'
    CIRCLES = 'circles'
    BLOBS = 'blobs'
    MNIST = 'mnist'


SYNTHETIC_KINDS = (DatasetKind.SPIRALS, DatasetKind.CIRCLES, DatasetKind.BLOBS)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Características (N x D) y etiquetas enteras (N,)"""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ''

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise ConfigurationError(
                f"Características {features.shape} y etiquetas {labels.shape} incompatibles"
            )
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("Las características deben ser finitas")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ConfigurationError(f"Etiquetas fuera del rango [0, {self.num_classes})")
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> 'Dataset':
        return Dataset(self.features[indices], self.labels[indices], self.num_classes, self.name)

    def take(self, limit: Optional[int]) -> 'Dataset':
        """Primeras `limit` muestras"""
        if limit is None or limit >= len(self):
            return self
        return self.subset(np.arange(limit))

    def split(self, fraction: float, seed: int = 0) -> Tuple['Dataset', 'Dataset']:
        """
        Separar una fracción para validación

        Returns:
            (entrenamiento, validación)
        """
        if not 0.0 < fraction < 1.0:
            raise ConfigurationError(f"La fracción de validación debe estar en (0, 1), se recibió {fraction}")
        order = np.random.default_rng(seed).permutation(len(self))
        held_out = max(1, int(round(fraction * len(self))))
        if held_out >= len(self):
            raise ConfigurationError("No quedan muestras para entrenar después de separar la validación")
        return self.subset(np.sort(order[held_out:])), self.subset(np.sort(order[:held_out]))

    def batches(self, batch_size: int, order: Optional[np.ndarray] = None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Iterar por lotes; el último puede ser más pequeño"""
        if batch_size < 1:
            raise ConfigurationError(f"El tamaño de lote debe ser positivo, se recibió {batch_size}")
        order = np.arange(len(self)) if order is None else order
        for start in range(0, len(self), batch_size):
            index = order[start:start + batch_size]
            yield self.features[index], self.labels[index]


def _class_counts(n: int, num_classes: int) -> np.ndarray:
    counts = np.full(num_classes, n // num_classes)
    counts[:n % num_classes] += 1
    return counts


def _spirals(rng: np.random.Generator, counts: np.ndarray, noise: float):
    # Dos espirales entrelazadas: ángulo t + c pi, radio t, escaladas a la unidad
    points, labels = [], []
    for label, count in enumerate(counts):
        t = rng.uniform(0.25, 3.5 * np.pi, size=count)
        angle = t + label * np.pi
        xy = np.stack([t * np.cos(angle), t * np.sin(angle)], axis=1) / (3.5 * np.pi)
        points.append(xy + noise * rng.standard_normal(xy.shape))
        labels.append(np.full(count, label))
    return np.concatenate(points), np.concatenate(labels)


def _circles(rng: np.random.Generator, counts: np.ndarray, noise: float):
    # Clase 0 en el círculo de radio 1, clase 1 en el de radio 0.5
    points, labels = [], []
    for label, count in enumerate(counts):
        radius = 1.0 if label == 0 else 0.5
        angle = rng.uniform(0.0, 2.0 * np.pi, size=count)
        xy = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
        points.append(xy + noise * rng.standard_normal(xy.shape))
        labels.append(np.full(count, label))
    return np.concatenate(points), np.concatenate(labels)


def _blobs(rng: np.random.Generator, counts: np.ndarray, noise: float):
    # Centros equiespaciados en el círculo unitario
    points, labels = [], []
    num_classes = counts.shape[0]
    for label, count in enumerate(counts):
        angle = 2.0 * np.pi * label / num_classes
        center = np.array([np.cos(angle), np.sin(angle)])
        points.append(center + noise * rng.standard_normal((count, 2)))
        labels.append(np.full(count, label))
    return np.concatenate(points), np.concatenate(labels)


_GENERATORS = {
    DatasetKind.SPIRALS: _spirals,
    DatasetKind.CIRCLES: _circles,
    DatasetKind.BLOBS: _blobs,
}


def make_synthetic(kind: str, n: int, noise: Optional[float] = None, seed: int = 0,
                   num_classes: Optional[int] = None) -> Dataset:
    """
    Generar un conjunto sintético 2-D balanceado y barajado

    spirals y circles tienen 2 clases; blobs tiene num_classes (3 por defecto).
    """
    try:
        kind = DatasetKind(kind)
    except ValueError:
        raise ConfigurationError(f"Tipo de datos desconocido: {kind!r}")
    if kind not in SYNTHETIC_KINDS:
        raise ConfigurationError(f"'{kind.value}' no es un conjunto sintético")

    if kind == DatasetKind.BLOBS:
        num_classes = num_classes or 3
    elif num_classes not in (None, 2):
        raise ConfigurationError(f"'{kind.value}' solo admite 2 clases")
    else:
        num_classes = 2
    if n < num_classes:
        raise ConfigurationError(f"Se necesitan al menos {num_classes} muestras, se recibió {n}")

    noise = conf.get_setting('ODENETS_SYNTHETIC_NOISE', 0.1) if noise is None else float(noise)
    if noise < 0:
        raise ConfigurationError(f"El ruido debe ser no negativo, se recibió {noise}")

    rng = np.random.default_rng(seed)
    features, labels = _GENERATORS[kind](rng, _class_counts(n, num_classes), noise)
    order = rng.permutation(n)
    return Dataset(features[order], labels[order], num_classes, name=kind.value)


def _read_bytes(path: Path) -> bytes:
    if not path.exists():
        raise FileNotFoundError(f"No existe el archivo IDX: {path}")
    opener = gzip.open if path.suffix == '.gz' else open
    with opener(path, 'rb') as handle:
        return handle.read()


def _parse_idx(path: Path, expected_magic: int) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: archivo truncado (sin encabezado)")
    magic = int.from_bytes(raw[:4], 'big')
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: número mágico 0x{magic:08x}, se esperaba 0x{expected_magic:08x}")

    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: encabezado truncado")
    dims = np.frombuffer(raw, dtype='>u4', count=ndim, offset=4).astype(np.int64)
    expected = int(np.prod(dims))
    payload = len(raw) - header
    if payload < expected:
        raise IdxFormatError(f"{path}: se esperaban {expected} bytes de datos y hay {payload}")
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header).reshape(tuple(dims))


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path],
             limit: Optional[int] = None, pool: bool = False) -> Dataset:
    """
    Leer imágenes y etiquetas IDX (admite .gz)

    Las imágenes se aplanan a N x (filas * columnas) y se escalan a [0, 1]. Con
    pool=True se promedian bloques de 2x2 (28x28 -> 196 características).
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    images = _parse_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _parse_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"Hay {images.shape[0]} imágenes y {labels.shape[0]} etiquetas"
        )

    if limit is not None:
        images, labels = images[:limit], labels[:limit]

    pixels = images.astype(np.float64) / 255.0
    count, rows, cols = pixels.shape
    if pool:
        if rows % 2 or cols % 2:
            raise IdxFormatError(f"No se puede agrupar 2x2 una imagen de {rows}x{cols}")
        pixels = pixels.reshape(count, rows // 2, 2, cols // 2, 2).mean(axis=(2, 4))

    logger.info(f"Leídas {count} imágenes IDX desde {images_path.name}")
    return Dataset(pixels.reshape(count, -1), labels.astype(np.int64), MNIST_CLASSES, name='mnist')


def resolve_data_path(path: Union[str, Path]) -> Path:
    """Resolver rutas relativas contra ODENETS_DATA_DIR si no existen tal cual"""
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    return Path(conf.get_setting('ODENETS_DATA_DIR', Path('data'))) / path


def build_dataset(spec: Mapping, split: str = 'train') -> Dataset:
    """
    Construir un conjunto a partir de la sección `dataset` de la configuración

    La partición 'test' de los datos sintéticos usa la semilla + 1.
    """
    kind = DatasetKind(spec['kind'])
    if kind == DatasetKind.MNIST:
        prefix = '' if split == 'train' else 'test_'
        images = spec.get(f'{prefix}images_path')
        labels = spec.get(f'{prefix}labels_path')
        if not images or not labels:
            raise ConfigurationError(f"Faltan las rutas IDX de la partición '{split}'")
        return load_idx(
            resolve_data_path(images),
            resolve_data_path(labels),
            limit=spec.get(f'{prefix}limit'),
            pool=spec.get('pool', False),
        )

    seed = spec.get('seed', 0) + (1 if split == 'test' else 0)
    n = spec.get('n', 1000) if split == 'train' else spec.get('test_n') or spec.get('n', 1000)
    return make_synthetic(kind.value, n, spec.get('noise'), seed, spec.get('num_classes'))


MNIST_TEST_FILES = ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte')


def _find_idx(name: str) -> Path:
    for candidate in (name, f'{name}.gz'):
        path = resolve_data_path(candidate)
        if path.exists():
            return path
    return resolve_data_path(name)


def evaluation_dataset(name: str, input_dim: int, num_classes: int, limit: Optional[int] = None,
                       noise: Optional[float] = None, seed: int = 0,
                       images_path: Optional[str] = None, labels_path: Optional[str] = None) -> Dataset:
    """
    Conjunto de evaluación por nombre para los comandos eval y sweep

    Los sintéticos se generan con seed + 1 para no coincidir con el sorteo de
    entrenamiento; mnist lee los archivos de prueba de ODENETS_DATA_DIR.
    """
    try:
        kind = DatasetKind(name)
    except ValueError:
        raise ConfigurationError(f"Conjunto de datos desconocido: {name!r}")

    if kind == DatasetKind.MNIST:
        images = resolve_data_path(images_path) if images_path else _find_idx(MNIST_TEST_FILES[0])
        labels = resolve_data_path(labels_path) if labels_path else _find_idx(MNIST_TEST_FILES[1])
        dataset = load_idx(images, labels, limit=limit, pool=input_dim == 196)
    else:
        n = limit or 1000
        classes = num_classes if kind == DatasetKind.BLOBS else None
        dataset = make_synthetic(kind.value, n, noise, seed + 1, classes)

    if dataset.input_dim != input_dim:
        raise ConfigurationError(
            f"'{name}' tiene {dataset.input_dim} características y el modelo espera {input_dim}"
        )
    return dataset
