"""
Pruebas del motor de diferenciación automática
"""

import numpy as np
import pytest

from odenets.adcore import (
    ParamStore,
    Tensor,
    add,
    batch_mean,
    batch_norm,
    batch_variance,
    dense,
    finite_diff_check,
    linear_combination,
    matmul,
    mul,
    relu,
    reshape,
    softmax_cross_entropy,
    sub,
    total,
    value_and_grad,
)
from odenets.exceptions import ContractError, NumericError, ShapeError


@pytest.mark.unit
class TestPrimitives:
    """
    Pruebas de los valores de las primitivas
    """

    def test_matmul(self):
        """
        Prueba: [[1,2],[3,4]] x [[1],[1]] = [[3],[7]]
        """
        result = matmul([[1.0, 2.0], [3.0, 4.0]], [[1.0], [1.0]])
        np.testing.assert_array_equal(result.data, [[3.0], [7.0]])

    def test_relu(self):
        """
        Prueba: relu([-1, 0, 2]) = [0, 0, 2]
        """
        np.testing.assert_array_equal(relu([-1.0, 0.0, 2.0]).data, [0.0, 0.0, 2.0])

    def test_uniform_softmax_cross_entropy(self):
        """
        Prueba: logits [0, 0] con etiqueta 0 dan ln 2
        """
        loss = softmax_cross_entropy([[0.0, 0.0]], [0])
        assert float(loss.data) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_batch_statistics(self):
        """
        Prueba: media y varianza sesgada por característica
        """
        x = np.array([[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]])
        np.testing.assert_allclose(batch_mean(x).data, [3.0, 10.0])
        np.testing.assert_allclose(batch_variance(x).data, [8.0 / 3.0, 0.0], atol=1e-12)

    def test_matmul_shape_mismatch_names_both_shapes(self):
        """
        Prueba: Formas incompatibles producen ShapeError con ambas formas
        """
        with pytest.raises(ShapeError) as exc_info:
            matmul(np.ones((2, 3)), np.ones((2, 3)))
        assert exc_info.value.left == (2, 3)
        assert exc_info.value.right == (2, 3)
        assert "matmul" in str(exc_info.value)

    def test_broadcast_mismatch(self):
        """
        Prueba: La difusión solo se permite sobre el eje del lote
        """
        with pytest.raises(ShapeError):
            add(np.ones((4, 3)), np.ones(2))

    def test_labels_out_of_range(self):
        """
        Prueba: Una etiqueta fuera de rango es un error de forma
        """
        with pytest.raises(ShapeError):
            softmax_cross_entropy(np.zeros((2, 3)), [0, 3])

    def test_operators_delegate_to_primitives(self):
        """
        Prueba: Los operadores del tensor y la mezcla con numpy producen tensores
        """
        x = Tensor([1.0, 2.0])
        result = 2.0 * x + np.array([1.0, 1.0]) - x
        assert isinstance(result, Tensor)
        np.testing.assert_array_equal(result.data, [2.0, 3.0])


@pytest.mark.unit
class TestValueAndGrad:
    """
    Pruebas del gradiente en modo reverso
    """

    def setup_method(self):
        """Configuración inicial para cada prueba"""
        self.rng = np.random.default_rng(5)

    def test_square(self):
        """
        Prueba: f(w) = w * w en w = 3 da (9, 6)
        """
        value, grads = value_and_grad(lambda p: mul(p['w'], p['w']), ParamStore([('w', 3.0)]))
        assert value == 9.0
        assert float(grads['w']) == 6.0

    def test_non_scalar_output(self):
        """
        Prueba: Una función no escalar viola el contrato
        """
        with pytest.raises(ContractError):
            value_and_grad(lambda p: mul(p['w'], 2.0), ParamStore([('w', np.ones(3))]))

    def test_relu_gradient_at_zero(self):
        """
        Prueba: La derivada de ReLU en 0 es 0
        """
        _, grads = value_and_grad(lambda p: total(relu(p['x'])), ParamStore([('x', [0.0, 1.0, -1.0])]))
        np.testing.assert_array_equal(grads['x'], [0.0, 1.0, 0.0])

    def test_unused_parameter_gets_zero_gradient(self):
        """
        Prueba: Los parámetros que no participan reciben gradiente cero
        """
        params = ParamStore([('used', np.ones(2)), ('unused', np.ones((2, 2)))])
        _, grads = value_and_grad(lambda p: total(p['used']), params)
        np.testing.assert_array_equal(grads['unused'], np.zeros((2, 2)))
        assert grads.names() == ('used', 'unused')

    def test_shared_subexpression_accumulates(self):
        """
        Prueba: Un tensor usado dos veces acumula ambos gradientes
        """
        def fn(p):
            y = mul(p['x'], 3.0)
            return total(add(y, mul(y, y)))

        _, grads = value_and_grad(fn, ParamStore([('x', [1.0, 2.0])]))
        # d/dx (3x + 9x^2) = 3 + 18x
        np.testing.assert_allclose(grads['x'], [21.0, 39.0])

    def test_duplicate_parameter_names(self):
        """
        Prueba: ParamStore rechaza nombres repetidos
        """
        with pytest.raises(ContractError):
            ParamStore([('w', 1.0), ('w', 2.0)])

    def test_gradient_is_linear_in_the_function(self):
        """
        Prueba: grad(a f + b g) = a grad f + b grad g
        """
        # Arrange
        x = self.rng.normal(size=(5, 3))
        labels = np.array([0, 1, 2, 1, 0])
        params = ParamStore([('w', self.rng.normal(size=(3, 3))), ('b', self.rng.normal(size=3))])

        def f(p):
            return total(relu(dense(x, p['w'], p['b'])))

        def g(p):
            return softmax_cross_entropy(dense(x, p['w'], p['b']), labels)

        # Act
        _, grad_f = value_and_grad(f, params)
        _, grad_g = value_and_grad(g, params)
        _, grad_h = value_and_grad(lambda p: add(mul(f(p), 2.5), mul(g(p), -0.75)), params)

        # Assert
        for name in params.names():
            np.testing.assert_allclose(grad_h[name], 2.5 * grad_f[name] - 0.75 * grad_g[name], atol=1e-12)

    def test_repeated_calls_are_bit_identical(self):
        """
        Prueba: Mismas entradas producen el mismo valor y gradiente bit a bit
        """
        x = self.rng.normal(size=(4, 2))
        params = ParamStore([('w', self.rng.normal(size=(2, 2))), ('b', np.zeros(2))])

        def fn(p):
            return softmax_cross_entropy(dense(x, p['w'], p['b']), np.array([0, 1, 1, 0]))

        first_value, first = value_and_grad(fn, params)
        second_value, second = value_and_grad(fn, params)

        assert first_value == second_value
        for name in params.names():
            np.testing.assert_array_equal(first[name], second[name])

    def test_sum_of_matmul_matches_finite_differences(self):
        """
        Prueba: sum(W x) coincide con diferencias centrales (error < 1e-6)
        """
        x = self.rng.normal(size=(3, 2))
        report = finite_diff_check(lambda p: total(matmul(p['W'], x)), ParamStore([('W', self.rng.normal(size=(4, 3)))]))
        assert report.max_error < 1e-6

    def test_quadratic_is_exact(self):
        """
        Prueba: Para una cuadrática el error relativo es < 1e-8
        """
        params = ParamStore([('w', self.rng.normal(size=5))])
        report = finite_diff_check(lambda p: total(mul(p['w'], p['w'])), params, step=1e-5)
        assert report.max_error < 1e-8

    def test_constant_function(self):
        """
        Prueba: Una función constante tiene gradiente y error cero
        """
        params = ParamStore([('w', np.ones(3))])
        value, grads = value_and_grad(lambda p: total(Tensor(np.ones(4))), params)
        report = finite_diff_check(lambda p: total(Tensor(np.ones(4))), params)
        assert value == 4.0
        np.testing.assert_array_equal(grads['w'], np.zeros(3))
        assert report.max_error == 0.0

    def test_invalid_step(self):
        """
        Prueba: El paso de diferencias finitas debe ser positivo
        """
        with pytest.raises(ContractError):
            finite_diff_check(lambda p: total(p['w']), ParamStore([('w', [1.0])]), step=0.0)


@pytest.mark.unit
class TestPrimitiveGradients:
    """
    Diferencias finitas por primitiva (error relativo < 1e-4)
    """

    def setup_method(self):
        """Configuración inicial para cada prueba"""
        rng = np.random.default_rng(21)
        self.x = rng.normal(size=(6, 4))
        self.weights = rng.normal(size=(6, 4))
        self.rng = rng

    def _check(self, fn, **arrays):
        report = finite_diff_check(fn, ParamStore(arrays.items()))
        assert report.max_error < 1e-4, report.per_param

    def test_add_with_broadcast(self):
        """Prueba: suma con difusión del sesgo"""
        self._check(lambda p: total(mul(add(p['x'], p['b']), self.weights)), x=self.x, b=self.rng.normal(size=4))

    def test_sub(self):
        """Prueba: resta"""
        self._check(lambda p: total(mul(sub(p['a'], p['b']), self.weights)), a=self.x, b=self.rng.normal(size=(6, 4)))

    def test_mul(self):
        """Prueba: producto elemento a elemento"""
        self._check(lambda p: total(mul(p['a'], p['b'])), a=self.x, b=self.rng.normal(size=4))

    def test_matmul(self):
        """Prueba: producto matricial respecto a ambos factores"""
        self._check(lambda p: total(mul(matmul(p['a'], p['b']), self.weights[:, :3])),
                    a=self.x, b=self.rng.normal(size=(4, 3)))

    def test_relu(self):
        """Prueba: ReLU lejos del punto no diferenciable"""
        x = self.x + np.sign(self.x) * 0.1
        self._check(lambda p: total(mul(relu(p['x']), self.weights)), x=x)

    def test_batch_norm(self):
        """Prueba: normalización con estadísticas del lote"""
        self._check(
            lambda p: total(mul(batch_norm(p['x'], batch_mean(p['x']), batch_variance(p['x']),
                                           p['s'], p['b'], 1e-5), self.weights)),
            x=self.x, s=self.rng.normal(size=4), b=self.rng.normal(size=4),
        )

    def test_linear_combination_and_reshape(self):
        """Prueba: evaluación de coeficientes de base con cambio de forma"""
        phi = np.array([0.25, 0.75, 0.0])
        self._check(
            lambda p: total(mul(matmul(self.x, reshape(linear_combination(phi, p['c']), (4, 2))), self.weights[:, :2])),
            c=self.rng.normal(size=(3, 8)),
        )

    def test_softmax_cross_entropy(self):
        """Prueba: entropía cruzada con etiquetas enteras"""
        labels = np.array([0, 1, 2, 3, 0, 1])
        self._check(lambda p: softmax_cross_entropy(p['logits'], labels), logits=self.x)

    def test_two_layer_network(self):
        """
        Prueba: Red de dos capas sobre 8 muestras
        """
        x = self.rng.normal(size=(8, 3))
        labels = np.array([0, 1, 0, 1, 1, 0, 0, 1])

        def fn(p):
            hidden = relu(dense(x, p['W1'], p['b1']))
            return softmax_cross_entropy(dense(hidden, p['W2'], p['b2']), labels)

        self._check(
            fn,
            W1=self.rng.normal(size=(3, 5)),
            b1=self.rng.normal(size=5) * 0.1,
            W2=self.rng.normal(size=(5, 2)),
            b2=np.zeros(2),
        )


@pytest.mark.unit
class TestCheckedMath:
    """
    Pruebas de la verificación numérica opcional
    """

    def test_non_finite_output_raises_when_enabled(self, settings):
        """
        Prueba: Con ODENETS_CHECKED_MATH activo un Inf produce NumericError
        """
        settings.ODENETS_CHECKED_MATH = True
        with pytest.raises(NumericError):
            mul(Tensor([np.inf]), 2.0)

    def test_non_finite_output_passes_when_disabled(self, settings):
        """
        Prueba: Sin verificación los valores no finitos se propagan
        """
        settings.ODENETS_CHECKED_MATH = False
        result = mul(Tensor([np.inf]), 2.0)
        assert np.isinf(result.data[0])
