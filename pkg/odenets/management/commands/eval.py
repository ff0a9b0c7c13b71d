"""
manage.py eval <checkpoint.json> --dataset NAME [--limit N]
"""

from ...checkpoints import load_checkpoint
from ...datasets import DatasetKind, evaluation_dataset
from ...services.evaluation import EvaluationService
from ..base import OdeNetsCommand


class Command(OdeNetsCommand):
    help = 'Evalúa un checkpoint en modo inferencia (exactitud, pérdida, parámetros, tiempo)'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('ckpt_path', help='Checkpoint a evaluar')
        parser.add_argument('--dataset', required=True, choices=[kind.value for kind in DatasetKind])
        parser.add_argument('--limit', type=int, default=None, help='Cantidad de muestras a evaluar')
        parser.add_argument('--noise', type=float, default=None, help='Ruido de los conjuntos sintéticos')
        parser.add_argument('--images', default=None, help='Archivo IDX de imágenes')
        parser.add_argument('--labels', default=None, help='Archivo IDX de etiquetas')
        parser.add_argument('--repeats', type=int, default=1, help='Repeticiones para medir eval_ms')

    def handle(self, *args, **options):
        checkpoint = load_checkpoint(options['ckpt_path'])
        config = checkpoint.model.config
        trained_on = checkpoint.meta.get('dataset', {})
        noise = options['noise'] if options['noise'] is not None else trained_on.get('noise')
        seed = options['seed'] if options['seed'] is not None else checkpoint.meta.get('seed', 0)

        dataset = evaluation_dataset(
            options['dataset'],
            config.input_dim,
            config.num_classes,
            limit=options['limit'],
            noise=noise,
            seed=seed,
            images_path=options['images'],
            labels_path=options['labels'],
        )
        result = EvaluationService().evaluate(checkpoint.model, dataset, repeats=options['repeats'])

        self.stdout.write('accuracy,loss,param_count,eval_ms,samples')
        self.stdout.write(
            f"{result.accuracy!r},{result.loss!r},{result.param_count},{result.eval_ms:.3f},{result.samples}"
        )
