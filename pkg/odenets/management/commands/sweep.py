"""
manage.py sweep <checkpoint.json> <out.csv> --dataset NAME --k-list 8,4,2 --n-t-list 8,4 --methods project
"""

from django.core.management.base import CommandError

from ...basis import BasisFamily
from ...checkpoints import load_checkpoint
from ...datasets import DatasetKind, evaluation_dataset
from ...services.compression import CompressionMethod, CompressionService
from ..base import OdeNetsCommand


class Command(OdeNetsCommand):
    help = 'Barrido de compresión: una fila por combinación de K, N_T y método'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('ckpt_path', help='Checkpoint de origen')
        parser.add_argument('out_csv', help='Archivo CSV de salida')
        parser.add_argument('--dataset', required=True, choices=[kind.value for kind in DatasetKind])
        parser.add_argument('--k-list', dest='k_list', required=True, help='Valores de K separados por comas')
        parser.add_argument('--n-t-list', dest='n_t_list', default=None,
                            help='Valores de N_T separados por comas (por defecto el N_T de origen)')
        parser.add_argument('--methods', default=CompressionMethod.PROJECT.value,
                            help='Métodos separados por comas: interpolate, project')
        parser.add_argument('--family', choices=[family.value for family in BasisFamily], default=None)
        parser.add_argument('--limit', type=int, default=None)
        parser.add_argument('--noise', type=float, default=None)
        parser.add_argument('--repeats', type=int, default=None, help='Repeticiones para la mediana de eval_ms')
        parser.add_argument('--workers', type=int, default=None, help='Celdas evaluadas en paralelo')

    def handle(self, *args, **options):
        k_list = self.parse_int_list(options['k_list'], '--k-list')
        methods = [method.strip() for method in options['methods'].split(',') if method.strip()]
        valid = {method.value for method in CompressionMethod}
        if not methods or any(method not in valid for method in methods):
            raise CommandError(f"--methods admite {sorted(valid)}", returncode=2)

        checkpoint = load_checkpoint(options['ckpt_path'])
        if options['n_t_list'] is None:
            n_t_list = [checkpoint.model.blocks[0].n_t]
        else:
            n_t_list = self.parse_int_list(options['n_t_list'], '--n-t-list')

        config = checkpoint.model.config
        trained_on = checkpoint.meta.get('dataset', {})
        noise = options['noise'] if options['noise'] is not None else trained_on.get('noise')
        seed = options['seed'] if options['seed'] is not None else checkpoint.meta.get('seed', 0)
        dataset = evaluation_dataset(
            options['dataset'], config.input_dim, config.num_classes,
            limit=options['limit'], noise=noise, seed=seed,
        )

        service = CompressionService(repeats=options['repeats'], workers=options['workers'])
        rows = service.sweep(checkpoint, dataset, k_list, n_t_list, methods, options['family'])
        service.write_csv(rows, options['out_csv'])

        failed = sum(1 for row in rows if row.error)
        self.progress(f"{len(rows)} filas escritas en {options['out_csv']} ({failed} fallidas)")
