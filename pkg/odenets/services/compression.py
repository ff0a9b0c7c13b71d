"""
Servicio de compresión a posteriori: cambio de base de los coeficientes,
acortamiento del grafo (N_T) y barridos de compresión contra exactitud
"""

import copy
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass
from enum import Enum
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .. import conf
from ..basis import BasisFamily, BasisSpec, interpolate, project
from ..checkpoints import Checkpoint
from ..datasets import Dataset
from ..exceptions import ConfigurationError, OdeNetsError
from ..odeblock import apply_state_update
from .evaluation import EvaluationService

# Configurar logging
logger = logging.getLogger(__name__)

SWEEP_CSV_HEADER = ('k', 'n_t', 'method', 'family', 'param_count', 'accuracy', 'loss', 'eval_ms')


class CompressionMethod(str, Enum):
    INTERPOLATE = 'interpolate'
    PROJECT = 'project'


_TRANSFORMS = {
    CompressionMethod.INTERPOLATE: interpolate,
    CompressionMethod.PROJECT: project,
}


def _family(family: Optional[str]) -> Optional[BasisFamily]:
    if family is None:
        return None
    try:
        return BasisFamily(family)
    except ValueError:
        raise ConfigurationError(f"Familia de base desconocida: {family!r}")


def _method(method: str) -> CompressionMethod:
    try:
        return CompressionMethod(method)
    except ValueError:
        raise ConfigurationError(f"Método de compresión desconocido: {method!r}")


def compress_checkpoint(ckpt: Checkpoint, target_k: int, target_family: Optional[str] = None,
                        method: str = 'project') -> Checkpoint:
    """
    Transformar los coeficientes de todos los bloques a una nueva base

    No recibe datos: solo opera sobre los coeficientes. Las bases de estado se
    transforman con el mismo destino y sus varianzas se acotan a >= eps.
    """
    method = _method(method)
    transform = _TRANSFORMS[method]
    target_family = _family(target_family)

    blocks = []
    for block in ckpt.model.blocks:
        family = target_family or block.basis_g.family
        target = BasisSpec(family, target_k, block.t_final)
        transformed = block.replace(
            params_g={name: transform(wf, target) for name, wf in block.params_g.items()},
            params_s={name: transform(wf, target) for name, wf in block.params_s.items()},
        )
        blocks.append(apply_state_update(transformed, transformed.state_coefficients()))
    model = ckpt.model.with_blocks(blocks)

    meta = copy.deepcopy(ckpt.meta)
    meta.setdefault('provenance', []).append({
        'source_sha256': ckpt.sha256(),
        'operation': 'compress',
        'method': method.value,
        'target_k': int(target_k),
        'target_family': target_family.value if target_family else None,
    })
    logger.info(
        f"Compresión {method.value}: K={ckpt.model.blocks[0].basis_g.k} -> {target_k}, "
        f"parámetros {ckpt.model.param_count()} -> {model.param_count()}"
    )
    return Checkpoint(model=model, meta=meta, format_version=ckpt.format_version)


def shorten_graph(ckpt: Checkpoint, new_n_t: int) -> Checkpoint:
    """
    Cambiar N_T de todos los bloques sin tocar los parámetros

    Con bases constantes a trozos y N_T < K la integración salta funciones base;
    se registra una advertencia en meta y en el log.
    """
    if isinstance(new_n_t, bool) or int(new_n_t) != new_n_t or new_n_t < 1:
        raise ConfigurationError(f"N_T debe ser un entero positivo, se recibió {new_n_t!r}")
    new_n_t = int(new_n_t)
    if all(block.n_t == new_n_t for block in ckpt.model.blocks):
        return ckpt

    meta = copy.deepcopy(ckpt.meta)
    for i, block in enumerate(ckpt.model.blocks):
        for label, spec in (('basis_g', block.basis_g), ('basis_s', block.basis_s)):
            if spec.family == BasisFamily.PIECEWISE_CONSTANT and new_n_t < spec.k:
                warning = (f"block{i}: N_T={new_n_t} < K={spec.k} en {label}; "
                           f"la integración omite funciones base")
                logger.warning(warning)
                meta.setdefault('warnings', []).append(warning)

    meta.setdefault('provenance', []).append({
        'source_sha256': ckpt.sha256(),
        'operation': 'shorten_graph',
        'n_t': new_n_t,
    })
    model = ckpt.model.with_blocks([block.replace(n_t=new_n_t) for block in ckpt.model.blocks])
    return Checkpoint(model=model, meta=meta, format_version=ckpt.format_version)


@dataclass
class SweepRow:
    """Fila del barrido; las celdas fallidas llevan nan y el error"""
    k: int
    n_t: int
    method: str
    family: str
    param_count: float
    accuracy: float
    loss: float
    eval_ms: float
    error: Optional[str] = None

    def to_csv_row(self) -> List:
        return list(astuple(self))[:len(SWEEP_CSV_HEADER)]


class CompressionService:
    """
    Servicio para barridos de compresión contra exactitud
    """

    def __init__(self, evaluation_service: Optional[EvaluationService] = None,
                 repeats: Optional[int] = None, workers: Optional[int] = None):
        self.evaluation_service = evaluation_service or EvaluationService()
        self.repeats = repeats or int(conf.get_setting('ODENETS_SWEEP_REPEATS', 5))
        self.workers = workers or int(conf.get_setting('ODENETS_SWEEP_WORKERS', 1))

    def evaluate_cell(self, ckpt: Checkpoint, dataset: Dataset, k: int, n_t: int,
                      method: str, family: Optional[str] = None) -> SweepRow:
        """Comprimir, acortar y evaluar una combinación; los errores quedan en la fila"""
        family_label = _family(family).value if family else ckpt.model.blocks[0].basis_g.family.value
        try:
            compressed = shorten_graph(compress_checkpoint(ckpt, k, family, method), n_t)
            result = self.evaluation_service.evaluate(compressed.model, dataset, repeats=self.repeats)
        except OdeNetsError as e:
            logger.warning(f"Celda fallida k={k} n_t={n_t} método={method}: {e}")
            nan = float('nan')
            return SweepRow(k, n_t, _method(method).value, family_label, nan, nan, nan, nan, error=str(e))

        logger.info(f"Celda k={k} n_t={n_t} {method}: exactitud={result.accuracy:.4f}")
        return SweepRow(
            k=k,
            n_t=n_t,
            method=_method(method).value,
            family=family_label,
            param_count=result.param_count,
            accuracy=result.accuracy,
            loss=result.loss,
            eval_ms=result.eval_ms,
        )

    def sweep(self, ckpt: Checkpoint, dataset: Dataset, k_list: Sequence[int], n_t_list: Sequence[int],
              methods: Sequence[str], family: Optional[str] = None) -> List[SweepRow]:
        """
        Evaluar todas las combinaciones (k, n_t, método)

        El orden de las filas es el del producto de las listas, sin importar el
        orden en que terminen las celdas.
        """
        if not k_list or not n_t_list or not methods:
            raise ConfigurationError("Las listas de K, N_T y métodos no pueden estar vacías")
        if dataset.input_dim != ckpt.model.config.input_dim:
            raise ConfigurationError(
                f"Los datos tienen {dataset.input_dim} características y el modelo espera "
                f"{ckpt.model.config.input_dim}"
            )
        for method in methods:
            _method(method)
        _family(family)

        cells = list(product(k_list, n_t_list, methods))
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                return list(executor.map(lambda cell: self.evaluate_cell(ckpt, dataset, *cell, family), cells))
        return [self.evaluate_cell(ckpt, dataset, *cell, family) for cell in cells]

    def compression_curve(self, checkpoints: Sequence[Checkpoint], dataset: Dataset,
                          ratios: Sequence[int], method: str = 'project',
                          shorten: bool = True) -> List[Dict]:
        """
        Exactitud media contra razón de compresión sobre varios checkpoints

        Para la razón r se usa K/r (y N_T/r si shorten) en cada checkpoint.
        """
        curve = []
        for ratio in ratios:
            accuracies = []
            for ckpt in checkpoints:
                block = ckpt.model.blocks[0]
                k = max(1, block.basis_g.k // ratio)
                n_t = max(1, block.n_t // ratio) if shorten else block.n_t
                row = self.evaluate_cell(ckpt, dataset, k, n_t, method)
                accuracies.append(row.accuracy)
            curve.append({
                'ratio': ratio,
                'mean_accuracy': float(np.nanmean(accuracies)) if accuracies else float('nan'),
                'accuracies': accuracies,
            })
        return curve

    @staticmethod
    def write_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
        """Escribir las filas con el encabezado fijo del barrido"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(SWEEP_CSV_HEADER)
            for row in rows:
                writer.writerow(row.to_csv_row())
        logger.info(f"Barrido con {len(rows)} filas guardado en {path}")
        return path
