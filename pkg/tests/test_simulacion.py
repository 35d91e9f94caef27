"""
Pruebas del proceso generador de datos
tests/test_simulacion.py
"""

import numpy as np
import pytest

from src.enums import Regimen
from src.evaluacion import probabilidad_evaluada, regime_metrics
from src.filtro import run_filter
from src.models import SimConfig
from src.parametrizacion import completar_parametros, transition_probability, validar_parametros
from src.simulacion import patron_por_bloques, preset_empirico, preset_simulacion, simulate_panel, simulate_study
from tests.conftest import spec_un_factor, valores_un_factor


def test_formas_de_la_salida(simulacion_pequena):
    salida = simulacion_pequena
    assert salida.data.y1.shape == (20, 10, 2)
    assert salida.data.y2.shape == (20, 2)
    assert salida.true_regimes.shape == (20, 10)
    assert salida.true_eta1.shape == (20, 10, 1)
    assert salida.true_eta2.shape == (20, 1)
    assert salida.true_zeta2.shape == (20, 1)
    assert not np.isnan(salida.data.y1).any()
    assert not np.isnan(salida.data.y2).any()


def test_misma_semilla_mismo_panel(spec_pequena, params_pequenos):
    config = SimConfig(N=15, T=8, params=params_pequenos, spec=spec_pequena, seed=7)
    a, b = simulate_panel(config), simulate_panel(config)
    np.testing.assert_array_equal(a.data.y1, b.data.y1)
    np.testing.assert_array_equal(a.true_regimes, b.true_regimes)
    otra = simulate_panel(SimConfig(N=15, T=8, params=params_pequenos, spec=spec_pequena, seed=8))
    assert not np.array_equal(a.data.y1, otra.data.y1)


def test_regimenes_validos_y_absorbentes(spec_pequena, params_pequenos):
    salida = simulate_panel(SimConfig(N=300, T=30, params=params_pequenos, spec=spec_pequena, seed=2))
    assert set(np.unique(salida.true_regimes)) <= {1, 2}
    # con P12 fijo en 1e-12 nadie vuelve al régimen 1
    assert np.all(np.diff(salida.true_regimes, axis=1) >= 0)
    assert (salida.true_regimes == 2).any()


def test_estudio_usa_semillas_consecutivas(spec_pequena, params_pequenos):
    config = SimConfig(N=10, T=5, params=params_pequenos, spec=spec_pequena, seed=5, replications=3)
    estudio = simulate_study(config)
    assert [salida.semilla for salida in estudio] == [5, 6, 7]
    suelta = simulate_panel(SimConfig(N=10, T=5, params=params_pequenos, spec=spec_pequena, seed=6))
    np.testing.assert_array_equal(estudio[1].data.y1, suelta.data.y1)


def test_estudio_en_paralelo_es_identico(spec_pequena, params_pequenos):
    config = SimConfig(N=10, T=5, params=params_pequenos, spec=spec_pequena, seed=1, replications=3)
    secuencial = simulate_study(config, n_jobs=1)
    paralelo = simulate_study(config, n_jobs=2)
    for a, b in zip(secuencial, paralelo):
        np.testing.assert_array_equal(a.data.y1, b.data.y1)


def test_preset_de_simulacion():
    spec, params = preset_simulacion()
    assert (spec.O1, spec.U1, spec.O2, spec.U2) == (4, 2, 2, 1)
    validar_parametros(params, spec)
    np.testing.assert_allclose(params.B3[0], np.diag([0.94, 0.93]))
    assert params.gamma1 == pytest.approx(4.60)


def test_preset_empirico():
    spec, params = preset_empirico()
    assert (spec.O1, spec.U1) == (17, 7)
    validar_parametros(params, spec)
    assert params.Lambda1[0, 1, 0] == pytest.approx(1.29)


def test_patron_por_bloques():
    assert patron_por_bloques([2, 1]) == [[1.0, 0.0], [None, 0.0], [0.0, 1.0]]


def test_covarianza_de_y2(spec_pequena, params_pequenos):
    salida = simulate_panel(SimConfig(N=100_000, T=1, params=params_pequenos, spec=spec_pequena, seed=9))
    esperada = params_pequenos.Lambda2 @ params_pequenos.P2 @ params_pequenos.Lambda2.T + np.diag(params_pequenos.R2)
    np.testing.assert_allclose(np.cov(salida.data.y2, rowvar=False), esperada, rtol=0.05)


@pytest.mark.lento
def test_autorregresion_recuperada_en_el_regimen_uno():
    spec = spec_un_factor(fixed={'Q2': [0.0]})
    params = completar_parametros(valores_un_factor(), spec)
    salida = simulate_panel(SimConfig(N=2000, T=50, params=params, spec=spec, seed=13))
    eta = salida.true_eta1[:, :, 0]
    eta2 = np.repeat(salida.true_eta2[:, 0:1], 49, axis=1)
    previo = eta[:, :-1]
    actual = eta[:, 1:]
    en_uno = salida.true_regimes[:, 1:] == 1

    X = np.column_stack([np.ones(en_uno.sum()), eta2[en_uno], previo[en_uno], (eta2 * previo)[en_uno]])
    coeficientes, *_ = np.linalg.lstsq(X, actual[en_uno], rcond=None)
    assert X.shape[0] >= 50_000
    assert coeficientes[2] == pytest.approx(0.6, abs=0.03)


@pytest.mark.lento
def test_exactitud_con_parametros_verdaderos():
    spec, params = preset_simulacion()
    salida = simulate_panel(SimConfig(N=75, T=50, params=params, spec=spec, seed=31))
    resultado = run_filter(salida.data, params, spec)
    metricas = regime_metrics(probabilidad_evaluada(resultado, 25), salida.true_regimes, 25)
    assert metricas.observado.accuracy > 0.68
    assert metricas.pronostico.accuracy > 0.68


def test_frecuencias_de_transicion_simuladas():
    spec = spec_un_factor(liberados=frozenset({'P12'}))
    params = completar_parametros(dict(valores_un_factor(), P12=0.2), spec)
    N = 5000
    salida = simulate_panel(SimConfig(N=N, T=20, params=params, spec=spec, seed=21))
    regimen_previo = np.concatenate([np.ones((N, 1), dtype=int), salida.true_regimes[:, :-1]], axis=1)
    eta_previo = np.concatenate([np.zeros((N, 1, 1)), salida.true_eta1[:, :-1]], axis=1)
    p21 = transition_probability(eta_previo, salida.true_eta2[:, None, :], params, Regimen.UNO)[..., 1]

    desde_1 = regimen_previo == 1
    esperado = p21[desde_1]
    error = np.sqrt(np.sum(esperado * (1.0 - esperado))) / esperado.size
    assert np.mean(salida.true_regimes[desde_1] == 2) == pytest.approx(esperado.mean(), abs=4 * error)

    desde_2 = regimen_previo == 2
    assert desde_2.sum() > 1000
    regresos = np.mean(salida.true_regimes[desde_2] == 1)
    assert regresos == pytest.approx(0.2, abs=4 * np.sqrt(0.16 / desde_2.sum()))
