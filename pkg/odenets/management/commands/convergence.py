"""
manage.py convergence --scheme rk4 --n-t-list 8,16,32,64
"""

from ...integrate import SchemeId, make_tableau, measure_order
from ..base import OdeNetsCommand


class Command(OdeNetsCommand):
    help = 'Mide el orden de convergencia de un esquema Runge-Kutta en y\' = y'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--scheme', required=True, choices=[scheme.value for scheme in SchemeId])
        parser.add_argument('--n-t-list', dest='n_t_list', default='8,16,32,64')

    def handle(self, *args, **options):
        n_t_list = self.parse_int_list(options['n_t_list'], '--n-t-list')
        measurement = measure_order(make_tableau(options['scheme']), n_t_list)

        self.stdout.write('scheme,n_t,error,pairwise_order')
        orders = [''] + [f'{order:.4f}' for order in measurement.pairwise_orders]
        for n_t, error, order in zip(measurement.n_t, measurement.errors, orders):
            self.stdout.write(f"{measurement.scheme},{n_t},{error!r},{order}")
        self.stdout.write(f"fitted_order={measurement.fitted_order:.4f}")
