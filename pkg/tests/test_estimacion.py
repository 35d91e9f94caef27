"""
Pruebas de gradientes numéricos, Rprop y errores estándar
tests/test_estimacion.py
"""

import numpy as np
import pytest

from src.enums import MetodoErrores
from src.excepciones import FallaAjuste, FallaFiltro
from src.estimacion import (
    diferencias_centrales, errores_opg, errores_restringidos, gradiente_funcion, hessiana_numerica,
    hessian_standard_errors, invertir_informacion, loglik_por_individuo, numerical_gradient,
    opg_standard_errors, parametros_neutros, rprop_fit, rprop_maximizar, total_loglik,
    valores_iniciales, ventana_entrenamiento,
)
from src.filtro import run_filter
from src.models import RpropConfig, SimConfig
from src.parametrizacion import pack, validar_parametros
from src.simulacion import preset_simulacion, simulate_panel

MAXIMO = np.array([1.0, -2.0, 0.5])


def _cuadratica(x: np.ndarray) -> float:
    return -float(np.sum((np.asarray(x) - MAXIMO) ** 2))


def _gradiente_cuadratica(x: np.ndarray) -> np.ndarray:
    return -2.0 * (np.asarray(x) - MAXIMO)


def _vectorial(x: np.ndarray) -> np.ndarray:
    return np.array([x[0] ** 2 + 3.0 * x[1], np.sin(x[0])])


class TestDiferenciasFinitas:

    def test_jacobiano_de_funcion_conocida(self):
        jacobiano, banderas = diferencias_centrales(_vectorial, np.array([1.0, 2.0]))
        np.testing.assert_allclose(jacobiano, [[2.0, 3.0], [np.cos(1.0), 0.0]], atol=1e-6)
        assert not banderas.any()

    def test_gradiente_de_cuadratica(self):
        x = np.array([0.3, -0.7, 2.0])
        gradiente, _ = gradiente_funcion(lambda z: -float(np.sum(z ** 2)), x)
        np.testing.assert_allclose(gradiente, -2.0 * x, atol=1e-6)

    def test_diferencia_de_un_lado_junto_a_la_frontera(self):
        def acotada(x):
            return x[0] ** 2 if x[0] <= 1.0 else -np.inf

        gradiente, banderas = gradiente_funcion(acotada, np.array([1.0]))
        assert gradiente[0] == pytest.approx(2.0, abs=1e-4)
        assert not banderas[0]

    def test_sin_informacion_se_marca(self):
        def puntual(x):
            return 0.0 if x[0] == 0.0 else -np.inf

        gradiente, banderas = gradiente_funcion(puntual, np.array([0.0]))
        assert gradiente[0] == 0.0
        assert banderas[0]

    def test_trabajadores_en_paralelo_dan_el_mismo_resultado(self):
        x = np.array([0.4, -1.2])
        secuencial, _ = diferencias_centrales(_vectorial, x, n_jobs=1)
        paralelo, _ = diferencias_centrales(_vectorial, x, n_jobs=2)
        np.testing.assert_array_equal(secuencial, paralelo)

    def test_hessiana_de_cuadratica(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        H = hessiana_numerica(lambda x: -0.5 * float(x @ A @ x), np.array([0.2, -0.4]))
        np.testing.assert_allclose(H, -A, atol=1e-4)
        np.testing.assert_array_equal(H, H.T)


class TestInformacion:

    def test_inversa_regular(self):
        cov, ausentes = invertir_informacion(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(cov, np.diag([0.25, 1.0]))
        assert not ausentes.any()

    def test_direccion_singular_queda_ausente(self):
        info = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 4.0]])
        cov, ausentes = invertir_informacion(info)
        np.testing.assert_array_equal(ausentes, [True, True, False])
        assert cov[2, 2] == pytest.approx(0.25)
        assert np.isnan(cov[0, 0]) and np.isnan(cov[0, 2])

    def test_coordenada_sin_informacion(self):
        cov, ausentes = invertir_informacion(np.diag([0.0, 2.0]))
        assert ausentes.tolist() == [True, False]
        assert cov[1, 1] == pytest.approx(0.5)

    def test_opg_de_la_media_gaussiana(self, rng):
        sigma, N = 2.0, 400
        y = rng.normal(1.5, sigma, size=N)

        def por_individuo(x):
            return -0.5 * (y - x[0]) ** 2 / sigma ** 2

        errores, _ = errores_opg(por_individuo, np.array([y.mean()]))
        assert errores[0] == pytest.approx(sigma / np.sqrt(N), rel=0.15)

    def test_metodo_delta_en_varianzas(self, spec_pequena, params_pequenos):
        theta_hat = pack(params_pequenos, spec_pequena)
        k = len(theta_hat)
        errores = errores_restringidos(0.01 * np.eye(k), theta_hat, spec_pequena)
        j = theta_hat.nombres.index('R1[1]')
        # d exp(theta) / d theta = R1
        assert errores[j] == pytest.approx(0.3 * 0.1)

    def test_ausencia_se_propaga_por_el_metodo_delta(self, spec_pequena, params_pequenos):
        theta_hat = pack(params_pequenos, spec_pequena)
        k = len(theta_hat)
        j = theta_hat.nombres.index('R1[1]')
        cov = 0.01 * np.eye(k)
        cov[j, :] = cov[:, j] = np.nan
        errores = errores_restringidos(cov, theta_hat, spec_pequena)
        assert np.isnan(errores[j])
        assert np.isfinite(np.delete(errores, j)).all()


class TestVerosimilitud:

    def test_ventana_de_entrenamiento(self):
        assert ventana_entrenamiento(50) == 25
        assert ventana_entrenamiento(10, 3) == 3
        assert ventana_entrenamiento(10, 99) == 10
        assert ventana_entrenamiento(10, -1) == 0

    def test_total_coincide_con_el_filtro(self, spec_pequena, params_pequenos, simulacion_pequena):
        datos = simulacion_pequena.data
        theta = pack(params_pequenos, spec_pequena)
        esperado = run_filter(datos, params_pequenos, spec_pequena, t_range=(0, 5)).loglik
        assert total_loglik(theta, datos, spec_pequena) == pytest.approx(esperado, rel=1e-10)
        por_individuo = loglik_por_individuo(theta, datos, spec_pequena)
        assert por_individuo.shape == (datos.N,)
        assert por_individuo.sum() == pytest.approx(esperado, rel=1e-10)

    def test_falla_del_filtro_vale_menos_infinito(self, spec_pequena, params_pequenos,
                                                  simulacion_pequena, monkeypatch):
        def falla(*args, **kwargs):
            raise FallaFiltro("covarianza de innovación no definida positiva", i=1)

        monkeypatch.setattr('src.estimacion.run_filter', falla)
        theta = pack(params_pequenos, spec_pequena)
        assert total_loglik(theta, simulacion_pequena.data, spec_pequena) == -np.inf

    def test_gradiente_estable_al_reducir_el_paso(self, spec_pequena, simulacion_pequena, rng):
        theta = pack(parametros_neutros(simulacion_pequena.data, spec_pequena), spec_pequena)
        theta = theta.theta + rng.normal(0.0, 0.05, size=len(theta))
        g_h, _ = numerical_gradient(theta, simulacion_pequena.data, spec_pequena, h=1e-4)
        g_mitad, _ = numerical_gradient(theta, simulacion_pequena.data, spec_pequena, h=5e-5)
        np.testing.assert_allclose(g_h, g_mitad, rtol=1e-4, atol=1e-3)

    def test_punto_neutro_es_valido(self, spec_pequena, simulacion_pequena):
        neutro = parametros_neutros(simulacion_pequena.data, spec_pequena)
        validar_parametros(neutro, spec_pequena)
        assert np.isfinite(total_loglik(pack(neutro, spec_pequena), simulacion_pequena.data, spec_pequena))

    def test_arranques_reproducibles(self, spec_pequena, simulacion_pequena):
        datos = simulacion_pequena.data
        a = valores_iniciales(datos, spec_pequena, np.random.default_rng(4), 0.1)
        b = valores_iniciales(datos, spec_pequena, np.random.default_rng(4), 0.1)
        np.testing.assert_array_equal(a.theta, b.theta)


class TestRprop:

    def test_converge_en_una_cuadratica(self):
        config = RpropConfig(delta0=0.1, tol=1e-10, patience=5, max_iter=500)
        theta, loglik, traza, pasos = rprop_maximizar(_cuadratica, _gradiente_cuadratica, np.zeros(3), config)
        np.testing.assert_allclose(theta, MAXIMO, atol=1e-3)
        assert loglik == pytest.approx(0.0, abs=1e-6)
        assert len(traza) < 500

    def test_pasos_dentro_de_los_limites(self):
        config = RpropConfig(delta0=0.1, tol=1e-10, patience=5, max_iter=200)
        _, _, _, pasos = rprop_maximizar(_cuadratica, _gradiente_cuadratica, np.full(3, 4.0), config)
        for minimo, maximo in pasos:
            assert config.delta_min <= minimo <= maximo <= config.delta_max

    def test_devuelve_el_mejor_punto_visitado(self):
        config = RpropConfig(delta0=0.5, tol=1e-10, patience=5, max_iter=200)
        inicial = np.full(3, 3.0)
        theta, loglik, traza, _ = rprop_maximizar(_cuadratica, _gradiente_cuadratica, inicial, config)
        assert loglik == pytest.approx(max(traza))
        assert loglik >= _cuadratica(inicial)
        assert _cuadratica(theta) == pytest.approx(loglik)

    def test_candidatos_infinitos_se_descartan(self):
        def con_frontera(x):
            return -float((x[0] - 2.9) ** 2) if x[0] < 3.0 else -np.inf

        def gradiente(x):
            return np.array([-2.0 * (x[0] - 2.9)])

        config = RpropConfig(delta0=4.0, tol=1e-12, patience=10, max_iter=300)
        theta, _, traza, _ = rprop_maximizar(con_frontera, gradiente, np.zeros(1), config)
        assert np.all(np.isfinite(traza))
        assert theta[0] < 3.0
        assert theta[0] == pytest.approx(2.9, abs=1e-3)

    def test_punto_inicial_infinito(self):
        config = RpropConfig()
        theta, loglik, traza, _ = rprop_maximizar(lambda x: -np.inf, _gradiente_cuadratica, np.ones(3), config)
        assert loglik == -np.inf
        assert traza == []
        np.testing.assert_array_equal(theta, np.ones(3))

    def test_todos_los_arranques_divergen(self, spec_pequena, simulacion_pequena, monkeypatch):
        monkeypatch.setattr('src.estimacion.total_loglik', lambda *args, **kwargs: -np.inf)
        with pytest.raises(FallaAjuste) as error:
            rprop_fit(simulacion_pequena.data, spec_pequena, RpropConfig(n_starts=2), seed=1)
        assert len(error.value.diagnosticos) == 2


@pytest.mark.lento
class TestAjuste:

    def test_ajuste_pequeno(self, spec_pequena, simulacion_pequena):
        config = RpropConfig(n_starts=2, max_iter=30)
        resultado = rprop_fit(simulacion_pequena.data, spec_pequena, config, seed=3,
                              metodos_errores=(MetodoErrores.OPG, MetodoErrores.HESSIANA))
        assert np.isfinite(resultado.loglik)
        assert resultado.loglik == pytest.approx(max(resultado.logliks_inicios))
        assert len(resultado.loglik_trace) <= 30
        assert resultado.t_entrenamiento == 5
        assert resultado.se_opg.shape == (len(resultado.theta_hat),)
        assert resultado.se_hessian.shape == (len(resultado.theta_hat),)
        validar_parametros(resultado.params_hat, spec_pequena)

    def test_igualdad_de_la_matriz_de_informacion(self):
        spec, verdad = preset_simulacion()
        datos = simulate_panel(SimConfig(N=200, T=30, params=verdad, spec=spec, seed=21)).data
        theta = pack(verdad, spec)
        opg = opg_standard_errors(theta, datos, spec, t_entrenamiento=30)
        hessiana = hessian_standard_errors(theta, datos, spec, t_entrenamiento=30)
        validos = np.isfinite(opg) & np.isfinite(hessiana)
        cercanos = np.abs(opg[validos] - hessiana[validos]) <= 0.3 * hessiana[validos]
        assert cercanos.mean() >= 0.8
