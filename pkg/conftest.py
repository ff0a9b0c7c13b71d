"""
Configuración de pytest para Django y fixtures compartidas
"""
import os

import django
import pytest
from django.conf import settings


def pytest_configure():
    if not settings.configured:
        os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
        django.setup()


@pytest.fixture
def tiny_config():
    """Modelo mínimo: 2 entradas, un bloque de ancho 4, K=2, RK4 con N_T=2"""
    from odenets.basis import BasisSpec
    from odenets.models import BlockConfig, ModelConfig

    return ModelConfig(
        input_dim=2,
        num_classes=2,
        blocks=(BlockConfig(width=4, basis_g=BasisSpec('piecewise_constant', 2), scheme='rk4', n_t=2),),
        seed=7,
    )


@pytest.fixture
def tiny_model(tiny_config):
    from odenets.models import init_params

    return init_params(tiny_config)


@pytest.fixture
def spirals():
    from odenets.datasets import make_synthetic

    return make_synthetic('spirals', 64, noise=0.05, seed=3)


@pytest.fixture
def saved_checkpoint(tmp_path, tiny_model):
    """Checkpoint del modelo mínimo escrito en disco"""
    from odenets.checkpoints import Checkpoint, save_checkpoint

    path = tmp_path / 'model.json'
    save_checkpoint(Checkpoint(model=tiny_model, meta={'seed': 3, 'epochs': 0}), path)
    return path
