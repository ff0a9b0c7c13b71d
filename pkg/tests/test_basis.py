"""
Pruebas de las funciones base, la interpolación y las proyecciones
"""

import numpy as np
import pytest

from odenets.basis import (
    BasisSpec,
    StatePointCloud,
    WeightFunction,
    basis_eval,
    basis_matrix,
    interpolate,
    next_k,
    project,
    project_pointcloud,
    quadrature_rule,
    transfer_operator,
    weight_eval,
)
from odenets.exceptions import ConditioningError, ConfigurationError, CoverageError, DomainError

PC = 'piecewise_constant'
PL = 'piecewise_linear'


@pytest.mark.unit
class TestBasisEvaluation:
    """
    Pruebas de evaluación de las familias de funciones base
    """

    @pytest.mark.parametrize("family,k", [(PC, 1), (PC, 4), (PC, 7), (PL, 1), (PL, 2), (PL, 5)])
    def test_partition_of_unity(self, family, k):
        """
        Prueba: Las funciones base suman 1 en cualquier tiempo de [0, T]
        """
        # Arrange
        spec = BasisSpec(family, k, 2.0)
        ts = np.linspace(0.0, 2.0, 101)

        # Act
        phi = basis_matrix(spec, ts)

        # Assert
        assert phi.shape == (101, k)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(phi >= 0.0)

    def test_piecewise_constant_cell_indicator(self):
        """
        Prueba: t=0.3 con K=4 activa la segunda celda
        """
        np.testing.assert_array_equal(basis_eval(BasisSpec(PC, 4), 0.3), [0, 1, 0, 0])

    def test_piecewise_constant_final_time_belongs_to_last_cell(self):
        """
        Prueba: t=T pertenece a la última celda
        """
        np.testing.assert_array_equal(basis_eval(BasisSpec(PC, 4), 1.0), [0, 0, 0, 1])

    def test_piecewise_constant_cell_edge_goes_right(self):
        """
        Prueba: un tiempo sobre el borde interior pertenece a la celda derecha
        """
        np.testing.assert_array_equal(basis_eval(BasisSpec(PC, 4, 4.0), 2.0), [0, 0, 1, 0])

    def test_piecewise_linear_hat(self):
        """
        Prueba: Las funciones sombrero interpolan linealmente entre puntos de control
        """
        np.testing.assert_allclose(basis_eval(BasisSpec(PL, 3), 0.25), [0.5, 0.5, 0.0])
        np.testing.assert_allclose(basis_eval(BasisSpec(PL, 3), 1.0), [0.0, 0.0, 1.0])

    @pytest.mark.parametrize("t", [-0.1, 1.0 + 1e-6, float('nan')])
    def test_time_outside_domain(self, t):
        """
        Prueba: Un tiempo fuera de [0, T] produce DomainError
        """
        with pytest.raises(DomainError):
            basis_eval(BasisSpec(PC, 4), t)

    def test_rounding_past_final_time_is_tolerated(self):
        """
        Prueba: Un exceso de redondeo sobre T se acepta y se trata como T
        """
        np.testing.assert_array_equal(basis_eval(BasisSpec(PC, 2), 1.0 + 1e-14), [0, 1])

    @pytest.mark.parametrize("family,k,t_final", [
        ('cubic', 2, 1.0),
        (PC, 0, 1.0),
        (PC, 1.5, 1.0),
        (PL, True, 1.0),
        (PL, 2, 0.0),
        (PL, 2, float('inf')),
    ])
    def test_invalid_spec(self, family, k, t_final):
        """
        Prueba: Especificaciones inválidas producen ConfigurationError
        """
        with pytest.raises(ConfigurationError):
            BasisSpec(family, k, t_final)

    def test_next_k_rule(self):
        """
        Prueba: next(K) = 2K para constantes y 2K-1 para lineales
        """
        assert next_k(BasisSpec(PC, 1)) == 2
        assert next_k(BasisSpec(PC, 4)) == 8
        assert next_k(BasisSpec(PL, 1)) == 2
        assert next_k(BasisSpec(PL, 3)) == 5


@pytest.mark.unit
class TestWeightFunctions:
    """
    Pruebas de funciones de peso e interpolación
    """

    def test_single_basis_is_constant(self):
        """
        Prueba: Con K=1 la función de peso es la fila de coeficientes en todo t
        """
        for family in (PC, PL):
            wf = WeightFunction(BasisSpec(family, 1), [[1.0, -2.0, 3.0]])
            np.testing.assert_array_equal(weight_eval(wf, 0.77), [1.0, -2.0, 3.0])

    def test_piecewise_constant_lookup(self):
        """
        Prueba: t=0.6 con K=4 devuelve la tercera fila
        """
        wf = WeightFunction(BasisSpec(PC, 4), [[1.0], [2.0], [3.0], [4.0]])
        np.testing.assert_array_equal(weight_eval(wf, 0.6), [3.0])

    def test_piecewise_linear_midpoint(self):
        """
        Prueba: El punto medio de dos sombreros promedia las filas
        """
        wf = WeightFunction(BasisSpec(PL, 2, 2.0), [[1.0, 4.0], [3.0, 0.0]])
        np.testing.assert_allclose(weight_eval(wf, 1.0), [2.0, 2.0])

    def test_coefficients_are_read_only(self):
        """
        Prueba: Los coeficientes no se pueden modificar en sitio
        """
        wf = WeightFunction(BasisSpec(PC, 2), [[1.0], [2.0]])
        with pytest.raises(ValueError):
            wf.coeffs[0, 0] = 5.0

    def test_interpolate_piecewise_constant_duplicates_rows(self):
        """
        Prueba: K=2 -> K=4 duplica cada fila
        """
        wf = WeightFunction(BasisSpec(PC, 2), [[1.0, 2.0], [3.0, 4.0]])
        result = interpolate(wf, BasisSpec(PC, 4))
        np.testing.assert_array_equal(result.coeffs, [[1, 2], [1, 2], [3, 4], [3, 4]])

    def test_interpolate_piecewise_linear_inserts_midpoints(self):
        """
        Prueba: K=3 -> K=5 agrega los promedios de vecinos
        """
        wf = WeightFunction(BasisSpec(PL, 3), [[0.0], [2.0], [6.0]])
        result = interpolate(wf, BasisSpec(PL, 5))
        np.testing.assert_allclose(result.coeffs.ravel(), [0.0, 1.0, 2.0, 4.0, 6.0])

    @pytest.mark.parametrize("family,k", [(PC, 3), (PL, 4)])
    def test_interpolate_onto_same_spec(self, family, k):
        """
        Prueba: Interpolar sobre la misma base no cambia los coeficientes
        """
        coeffs = np.random.default_rng(0).normal(size=(k, 3))
        wf = WeightFunction(BasisSpec(family, k), coeffs)
        np.testing.assert_allclose(interpolate(wf, wf.spec).coeffs, coeffs, atol=1e-12)

    def test_interpolate_requires_same_horizon(self):
        """
        Prueba: Bases con T distinto no se pueden combinar
        """
        wf = WeightFunction(BasisSpec(PC, 2, 1.0), [[1.0], [2.0]])
        with pytest.raises(ConfigurationError):
            interpolate(wf, BasisSpec(PC, 4, 2.0))


@pytest.mark.unit
class TestProjection:
    """
    Pruebas de la proyección L2 entre bases
    """

    def setup_method(self):
        """Configuración inicial para cada prueba"""
        transfer_operator.cache_clear()
        self.rng = np.random.default_rng(11)

    def teardown_method(self):
        transfer_operator.cache_clear()

    def test_cell_averages(self):
        """
        Prueba: {1,2,3,4} sobre K=2 constantes da los promedios {1.5, 3.5}
        """
        wf = WeightFunction(BasisSpec(PC, 4), [[1.0], [2.0], [3.0], [4.0]])
        result = project(wf, BasisSpec(PC, 2))
        np.testing.assert_allclose(result.coeffs.ravel(), [1.5, 3.5], atol=1e-12)

    def test_linear_function_onto_constants(self):
        """
        Prueba: La función t proyectada sobre dos celdas da {0.25, 0.75}
        """
        wf = WeightFunction(BasisSpec(PL, 3), [[0.0], [0.5], [1.0]])
        result = project(wf, BasisSpec(PC, 2))
        # Promedio analítico de t sobre [0, 1/2] y [1/2, 1]
        np.testing.assert_allclose(result.coeffs.ravel(), [0.25, 0.75], atol=1e-12)

    def test_hat_onto_constants(self):
        """
        Prueba: El sombrero central de K=3 tiene promedio 1/2 en cada mitad
        """
        wf = WeightFunction(BasisSpec(PL, 3), [[0.0], [1.0], [0.0]])
        result = project(wf, BasisSpec(PC, 2))
        np.testing.assert_allclose(result.coeffs.ravel(), [0.5, 0.5], atol=1e-12)

    @pytest.mark.parametrize("family,k", [(PC, 1), (PC, 5), (PL, 2), (PL, 6)])
    def test_idempotent(self, family, k):
        """
        Prueba: Proyectar sobre la misma base no cambia los coeficientes
        """
        spec = BasisSpec(family, k, 3.0)
        wf = WeightFunction(spec, self.rng.normal(size=(k, 4)))
        np.testing.assert_allclose(project(wf, spec).coeffs, wf.coeffs, atol=1e-10)

    def test_linear(self):
        """
        Prueba: La proyección es lineal en los coeficientes
        """
        source, target = BasisSpec(PL, 7), BasisSpec(PC, 3)
        a = self.rng.normal(size=(7, 2))
        b = self.rng.normal(size=(7, 2))

        combined = project(WeightFunction(source, 2.0 * a - 3.0 * b), target).coeffs
        separate = 2.0 * project(WeightFunction(source, a), target).coeffs \
            - 3.0 * project(WeightFunction(source, b), target).coeffs

        np.testing.assert_allclose(combined, separate, atol=1e-10)

    @pytest.mark.parametrize("source,target", [
        (BasisSpec(PC, 8), BasisSpec(PC, 3)),
        (BasisSpec(PL, 5), BasisSpec(PC, 2)),
        (BasisSpec(PC, 6), BasisSpec(PL, 4)),
        (BasisSpec(PL, 9), BasisSpec(PL, 3)),
    ])
    def test_residual_orthogonal_to_target(self, source, target):
        """
        Prueba: El residuo de la proyección es ortogonal a cada función base destino
        """
        # Arrange
        wf = WeightFunction(source, self.rng.normal(size=(source.k, 3)))
        nodes, weights = quadrature_rule(source, target)

        # Act
        projected = project(wf, target)
        residual = basis_matrix(source, nodes) @ wf.coeffs - basis_matrix(target, nodes) @ projected.coeffs
        inner = basis_matrix(target, nodes).T @ (weights[:, None] * residual)

        # Assert
        np.testing.assert_allclose(inner, 0.0, atol=1e-10)

    def test_refinement_round_trip(self):
        """
        Prueba: K -> 2K por interpolación y de vuelta a K por proyección es exacto
        """
        spec = BasisSpec(PC, 4)
        wf = WeightFunction(spec, self.rng.normal(size=(4, 5)))

        refined = interpolate(wf, BasisSpec(PC, 8))
        back = project(refined, spec)

        np.testing.assert_allclose(back.coeffs, wf.coeffs, atol=1e-10)

    def test_interpolate_and_project_agree_inside_span(self):
        """
        Prueba: Si la función está en el espacio destino ambos métodos coinciden
        """
        wf = WeightFunction(BasisSpec(PL, 3), self.rng.normal(size=(3, 2)))
        target = BasisSpec(PL, 5)
        np.testing.assert_allclose(interpolate(wf, target).coeffs, project(wf, target).coeffs, atol=1e-10)

    def test_singular_mass_matrix(self, mocker):
        """
        Prueba: Un pivote inválido en la factorización produce ConditioningError
        """
        # Arrange
        mocker.patch('odenets.basis._factor_spd', return_value=(np.eye(2), 2))
        wf = WeightFunction(BasisSpec(PC, 4), np.ones((4, 1)))

        # Act & Assert
        with pytest.raises(ConditioningError):
            project(wf, BasisSpec(PC, 2))


@pytest.mark.unit
class TestPointCloudProjection:
    """
    Pruebas de mínimos cuadrados sobre la nube de estado
    """

    def test_one_sample_per_cell_is_interpolated(self):
        """
        Prueba: Una muestra en el centro de cada celda se recupera exactamente
        """
        spec = BasisSpec(PC, 4)
        values = [np.array([v, -v]) for v in (1.0, 2.0, 3.0, 4.0)]
        cloud = StatePointCloud(tuple(zip(spec.control_points(), values)))

        coeffs = project_pointcloud(cloud, spec)

        np.testing.assert_allclose(coeffs, np.vstack(values), atol=1e-12)

    def test_cell_means(self):
        """
        Prueba: Dos muestras en la celda 1 (1 y 3) y una en la celda 2 (5) dan {2, 5}
        """
        cloud = StatePointCloud(((0.1, [1.0]), (0.3, [3.0]), (0.7, [5.0])))
        coeffs = project_pointcloud(cloud, BasisSpec(PC, 2))
        np.testing.assert_allclose(coeffs.ravel(), [2.0, 5.0], atol=1e-12)

    def test_uncovered_cell(self):
        """
        Prueba: Una celda sin muestras produce CoverageError con su índice
        """
        cloud = StatePointCloud(((0.1, [1.0]), (0.3, [3.0])))
        with pytest.raises(CoverageError) as exc_info:
            project_pointcloud(cloud, BasisSpec(PC, 2))
        assert exc_info.value.basis_index == 2

    def test_uncovered_middle_cell(self):
        """
        Prueba: El índice reportado es el de la primera celda vacía
        """
        cloud = StatePointCloud(((0.1, [1.0]), (0.3, [1.0]), (0.9, [1.0])))
        with pytest.raises(CoverageError) as exc_info:
            project_pointcloud(cloud, BasisSpec(PC, 4))
        assert exc_info.value.basis_index == 3

    def test_linear_rank_deficiency(self):
        """
        Prueba: Sombreros cubiertos pero indistinguibles producen CoverageError
        """
        # Solo t=0.25 toca las funciones 1 y 2, siempre con el mismo peso
        cloud = StatePointCloud(((0.25, [1.0]), (0.25, [2.0]), (1.0, [3.0])))
        with pytest.raises(CoverageError) as exc_info:
            project_pointcloud(cloud, BasisSpec(PL, 3))
        assert exc_info.value.basis_index == 2

    def test_empty_cloud(self):
        """
        Prueba: Una nube vacía no es válida
        """
        with pytest.raises(ConfigurationError):
            StatePointCloud(())

    @pytest.mark.parametrize("t", [-0.01, 2.5 * (1.0 + 1e-9), 3.0])
    def test_sample_outside_interval_reports_t_final(self, t):
        """
        Prueba: Una muestra fuera de [0, T] produce DomainError con el T del bloque
        """
        with pytest.raises(DomainError) as exc_info:
            StatePointCloud(((0.5, [1.0]), (t, [2.0])), t_final=2.5)
        assert exc_info.value.t == t
        assert exc_info.value.t_final == 2.5

    def test_sample_at_t_final_with_rounding_is_accepted(self):
        """
        Prueba: t = T con error de redondeo relativo menor a 1e-12 es válido
        """
        cloud = StatePointCloud(((0.0, [1.0]), (2.5 * (1.0 + 1e-13), [2.0])), t_final=2.5)
        assert len(cloud) == 2
        assert cloud.t_final == 2.5
