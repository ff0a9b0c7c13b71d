"""
manage.py train <config.json> <checkpoint.json>
"""

from pathlib import Path

from django.core.management.base import CommandError

from ...checkpoints import save_checkpoint
from ...datasets import build_dataset
from ...exceptions import TrainingAborted
from ...models import init_params
from ...runconfig import load_run_config
from ...services.training import TrainingService
from ..base import OdeNetsCommand


class Command(OdeNetsCommand):
    help = 'Entrena un clasificador continuo y guarda el checkpoint y las métricas por época'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('config_path', help='Archivo JSON de configuración')
        parser.add_argument('out_path', help='Ruta del checkpoint de salida')

    def handle(self, *args, **options):
        run = load_run_config(options['config_path'], seed=options['seed'])
        out_path = Path(options['out_path'])
        metrics_path = Path(run.output.get('metrics') or f'{out_path}.metrics.csv')

        # 1. Datos (la partición de prueba solo existe si la configuración la describe)
        dataset = build_dataset(run.dataset, 'train')
        validation = None
        if run.dataset['kind'] == 'mnist':
            if run.dataset.get('test_images_path'):
                validation = build_dataset(run.dataset, 'test')
        elif run.train.validation_fraction == 0:
            validation = build_dataset(run.dataset, 'test')

        # 2. Modelo y entrenamiento
        model = init_params(run.model)
        self.progress(f"Entrenando {model.param_count()} parámetros con {len(dataset)} muestras")
        service = TrainingService(progress=self.progress)
        meta = {'dataset': {key: value for key, value in run.dataset.items() if value is not None}}
        try:
            result = service.train(
                model,
                dataset,
                run.train,
                validation=validation,
                checkpoint_path=out_path if run.output.get('checkpoint_every_epoch', True) else None,
                metrics_path=metrics_path,
                meta=meta,
            )
        except TrainingAborted as e:
            raise CommandError(f"{e} (se conserva el último checkpoint en {out_path})", returncode=1)

        # 3. Checkpoint final
        save_checkpoint(service.make_checkpoint(result, run.train, run.train.epochs, meta), out_path)
        last = result.metrics[-1]
        self.stdout.write('epoch,k,n_t,train_loss,val_accuracy')
        self.stdout.write(f"{last.epoch},{last.k},{last.n_t},{last.train_loss:.6f},{last.val_accuracy:.6f}")
