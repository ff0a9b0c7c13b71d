"""
manage.py compress <in.json> <out.json> --k K [--family F] [--method M] [--n-t N]

No recibe datos: la compresión solo transforma coeficientes.
"""

from ...basis import BasisFamily
from ...checkpoints import load_checkpoint, save_checkpoint
from ...services.compression import CompressionMethod, compress_checkpoint, shorten_graph
from ..base import OdeNetsCommand


class Command(OdeNetsCommand):
    help = 'Cambia la base de un checkpoint (interpolación o proyección) y opcionalmente N_T'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('in_path', help='Checkpoint de entrada')
        parser.add_argument('out_path', help='Checkpoint de salida')
        parser.add_argument('--k', type=int, required=True, help='Número de funciones base destino')
        parser.add_argument('--family', choices=[family.value for family in BasisFamily], default=None,
                            help='Familia destino (por defecto la de origen)')
        parser.add_argument('--method', choices=[method.value for method in CompressionMethod],
                            default=CompressionMethod.PROJECT.value)
        parser.add_argument('--n-t', dest='n_t', type=int, default=None, help='Nuevo número de pasos N_T')

    def handle(self, *args, **options):
        source = load_checkpoint(options['in_path'])
        compressed = compress_checkpoint(source, options['k'], options['family'], options['method'])
        if options['n_t'] is not None:
            compressed = shorten_graph(compressed, options['n_t'])
        save_checkpoint(compressed, options['out_path'])

        self.stdout.write('source_params,compressed_params,k,n_t')
        self.stdout.write(
            f"{source.model.param_count()},{compressed.model.param_count()},"
            f"{compressed.model.blocks[0].basis_g.k},{compressed.model.blocks[0].n_t}"
        )
