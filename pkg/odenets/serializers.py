"""
Serializers para los documentos JSON del proyecto
Contiene las validaciones de la configuración de ejecución y de los checkpoints
"""

from typing import Any, List, Mapping, Tuple

import numpy as np
from rest_framework import serializers

from .basis import BasisFamily
from .integrate import SchemeId

FAMILY_CHOICES = [family.value for family in BasisFamily]
SCHEME_CHOICES = [scheme.value for scheme in SchemeId]
REFINEMENT_METHODS = ['interpolate', 'project']
DATASET_KINDS = ['spirals', 'circles', 'blobs', 'mnist']

# Código de error para datos que no coinciden con su forma declarada
SHAPE_MISMATCH = 'shape_mismatch'


class BasisSpecSerializer(serializers.Serializer):
    """Serializer para la especificación de una base"""
    family = serializers.ChoiceField(choices=FAMILY_CHOICES)
    k = serializers.IntegerField(min_value=1)
    t_final = serializers.FloatField(required=False)

    def validate_t_final(self, value):
        """Validar que el horizonte sea positivo"""
        if not value > 0:
            raise serializers.ValidationError("T debe ser positivo")
        return value


class BlockConfigSerializer(serializers.Serializer):
    """Serializer para la configuración de un bloque ODE"""
    width = serializers.IntegerField(min_value=1)
    scheme = serializers.ChoiceField(choices=SCHEME_CHOICES, default='rk4')
    n_t = serializers.IntegerField(min_value=1, default=1)
    t_final = serializers.FloatField(default=1.0)
    basis_g = BasisSpecSerializer()
    basis_s = BasisSpecSerializer(required=False, allow_null=True)

    def validate_t_final(self, value):
        if not value > 0:
            raise serializers.ValidationError("T debe ser positivo")
        return value

    def validate(self, data):
        """Completar el T de las bases con el del bloque y verificar que coincidan"""
        for key in ('basis_g', 'basis_s'):
            spec = data.get(key)
            if spec is None:
                continue
            spec.setdefault('t_final', data['t_final'])
            if not np.isclose(spec['t_final'], data['t_final'], rtol=1e-12, atol=0.0):
                raise serializers.ValidationError({
                    key: f"T={spec['t_final']} no coincide con el T del bloque ({data['t_final']})"
                })
        return data


class ModelConfigSerializer(serializers.Serializer):
    """Serializer para la arquitectura del modelo"""
    input_dim = serializers.IntegerField(min_value=1)
    num_classes = serializers.IntegerField(min_value=2)
    seed = serializers.IntegerField(default=0)
    bn_momentum = serializers.FloatField(required=False, allow_null=True, min_value=0.0, max_value=0.999999)
    bn_eps = serializers.FloatField(required=False, allow_null=True)
    blocks = BlockConfigSerializer(many=True)

    def validate_blocks(self, value):
        if not value:
            raise serializers.ValidationError("El modelo necesita al menos un bloque")
        return value

    def validate_bn_eps(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("El epsilon de BatchNorm debe ser positivo")
        return value


class TrainConfigSerializer(serializers.Serializer):
    """Serializer para los hiperparámetros de entrenamiento"""
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1, default=128)
    learning_rate = serializers.FloatField(min_value=0.0, default=0.1)
    lr_decay_epochs = serializers.ListField(
        child=serializers.IntegerField(min_value=1), required=False, allow_null=True
    )
    lr_decay_factor = serializers.FloatField(min_value=0.0, default=0.1)
    momentum = serializers.FloatField(min_value=0.0, max_value=0.999999, default=0.9)
    weight_decay = serializers.FloatField(min_value=0.0, default=5e-4)
    refinement_epochs = serializers.ListField(
        child=serializers.IntegerField(), required=False, allow_null=True
    )
    refine_steps = serializers.BooleanField(default=True)
    refinement_method = serializers.ChoiceField(choices=REFINEMENT_METHODS, default='interpolate')
    seed = serializers.IntegerField(default=0)
    validation_fraction = serializers.FloatField(min_value=0.0, max_value=0.9, default=0.2)

    def validate(self, data):
        """
        Validar las épocas de refinamiento

        Deben ser estrictamente crecientes y estar dentro de [1, epochs].
        """
        epochs = data['epochs']
        refinement = data.get('refinement_epochs')
        if refinement:
            if any(later <= earlier for earlier, later in zip(refinement, refinement[1:])):
                raise serializers.ValidationError({
                    'refinement_epochs': "Las épocas de refinamiento deben ser estrictamente crecientes"
                })
            if refinement[0] < 1 or refinement[-1] > epochs:
                raise serializers.ValidationError({
                    'refinement_epochs': f"Las épocas de refinamiento deben estar en [1, {epochs}]"
                })
        decay = data.get('lr_decay_epochs')
        if decay and max(decay) > epochs:
            raise serializers.ValidationError({
                'lr_decay_epochs': f"Las épocas de decaimiento deben estar en [1, {epochs}]"
            })
        return data


class DatasetSpecSerializer(serializers.Serializer):
    """Serializer para el origen de datos (sintético o IDX)"""
    kind = serializers.ChoiceField(choices=DATASET_KINDS)
    n = serializers.IntegerField(min_value=2, default=1000)
    test_n = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    noise = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    seed = serializers.IntegerField(default=0)
    num_classes = serializers.IntegerField(min_value=2, required=False, allow_null=True)
    images_path = serializers.CharField(required=False, allow_null=True)
    labels_path = serializers.CharField(required=False, allow_null=True)
    test_images_path = serializers.CharField(required=False, allow_null=True)
    test_labels_path = serializers.CharField(required=False, allow_null=True)
    limit = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    test_limit = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    pool = serializers.BooleanField(default=False)

    def validate(self, data):
        if data['kind'] == 'mnist':
            missing = [key for key in ('images_path', 'labels_path') if not data.get(key)]
            if missing:
                raise serializers.ValidationError({
                    key: "Requerido para datos IDX" for key in missing
                })
        return data


class OutputSerializer(serializers.Serializer):
    """Serializer para las rutas de salida opcionales"""
    metrics = serializers.CharField(required=False, allow_null=True)
    checkpoint_every_epoch = serializers.BooleanField(default=True)


class RunConfigSerializer(serializers.Serializer):
    """Serializer para el documento de configuración de `train`"""
    model = ModelConfigSerializer()
    train = TrainConfigSerializer()
    dataset = DatasetSpecSerializer()
    output = OutputSerializer(required=False)

    def validate(self, data):
        """Verificar que el modelo sea compatible con los datos"""
        model = data['model']
        dataset = data['dataset']
        if dataset['kind'] == 'mnist':
            expected_dim = 196 if dataset['pool'] else 784
            expected_classes = 10
        else:
            expected_dim = 2
            expected_classes = dataset.get('num_classes') or (3 if dataset['kind'] == 'blobs' else 2)
        if model['input_dim'] != expected_dim:
            raise serializers.ValidationError({
                'model': f"input_dim={model['input_dim']} no coincide con los datos ({expected_dim})"
            })
        if model['num_classes'] != expected_classes:
            raise serializers.ValidationError({
                'model': f"num_classes={model['num_classes']} no coincide con los datos ({expected_classes})"
            })
        return data


class ParameterEntrySerializer(serializers.Serializer):
    """Serializer para un parámetro almacenado en un checkpoint"""
    family = serializers.ChoiceField(choices=FAMILY_CHOICES, allow_null=True)
    k = serializers.IntegerField(min_value=1, allow_null=True)
    t_final = serializers.FloatField(allow_null=True)
    shape = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=False)
    data = serializers.ListField(child=serializers.FloatField())

    def validate(self, data):
        """Validar que la cantidad de datos coincida con K x prod(shape)"""
        on_basis = [data['family'] is not None, data['k'] is not None, data['t_final'] is not None]
        if any(on_basis) and not all(on_basis):
            raise serializers.ValidationError("family, k y t_final deben definirse juntos")
        expected = int(np.prod(data['shape'])) * (data['k'] or 1)
        if len(data['data']) != expected:
            raise serializers.ValidationError(
                f"Se esperaban {expected} valores y hay {len(data['data'])}",
                code=SHAPE_MISMATCH,
            )
        return data


class CheckpointSerializer(serializers.Serializer):
    """Serializer para el documento completo de checkpoint"""
    format_version = serializers.IntegerField()
    config = ModelConfigSerializer()
    params_g = serializers.DictField(child=ParameterEntrySerializer())
    params_s = serializers.DictField(child=ParameterEntrySerializer())
    meta = serializers.DictField(required=False, default=dict)


def flatten_errors(errors: Any, path: str = '') -> List[Tuple[str, str, str]]:
    """
    Aplanar los errores anidados de DRF

    Returns:
        Lista de (ruta del campo, código, mensaje)
    """
    flat = []
    if isinstance(errors, Mapping):
        for key, value in errors.items():
            if key == 'non_field_errors':
                child = path or key
            else:
                child = f'{path}.{key}' if path else str(key)
            flat.extend(flatten_errors(value, child))
    elif isinstance(errors, (list, tuple)):
        for index, value in enumerate(errors):
            if isinstance(value, (Mapping, list, tuple)):
                flat.extend(flatten_errors(value, f'{path}[{index}]'))
            else:
                flat.extend(flatten_errors(value, path))
    else:
        flat.append((path, getattr(errors, 'code', 'invalid'), str(errors)))
    return flat
