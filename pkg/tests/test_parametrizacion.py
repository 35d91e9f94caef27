"""
Pruebas de la parametrización: layout, pack/unpack y probabilidades de transición
tests/test_parametrizacion.py
"""

import numpy as np
import pytest
from scipy.special import expit

from src.enums import Regimen, Transformacion
from src.excepciones import ErrorConfiguracion, ErrorDimensiones, ViolacionRestriccion
from src.models import ParameterSet, ParameterVector
from src.parametrizacion import (
    completar_parametros, construir_layout, jacobiano_transformacion, matriz_transicion, pack,
    transition_probability, unpack, validar_parametros, valores_por_entrada,
)
from src.simulacion import preset_empirico, preset_simulacion
from tests.conftest import parametros_aleatorios, spec_un_factor, valores_un_factor


def _con(params: ParameterSet, **cambios) -> ParameterSet:
    valores = params.a_dict()
    valores.update(cambios)
    return ParameterSet(**valores)


def test_layout_nombres_y_orden(spec_pequena):
    nombres = [entrada.nombre for entrada in construir_layout(spec_pequena)]
    assert nombres == [
        'Lambda1[2,1]', 'R1[1]', 'R1[2]', 'R2[1]', 'R2[2]',
        'b1_1[1]', 'b1_2[1]', 'b2_1[1,1]', 'b2_2[1,1]',
        'B3_1[1,1]', 'B3_2[1,1]', 'B4_1[1,1]', 'B4_2[1,1]',
        'Q1[1]', 'gamma2[1]', 'gamma3[1]', 'gamma4[1]',
    ]


def test_layout_es_determinista(spec_pequena):
    assert construir_layout(spec_pequena) == construir_layout(spec_pequena)
    otra = spec_un_factor()
    assert [e.nombre for e in construir_layout(otra)] == [e.nombre for e in construir_layout(spec_pequena)]


def test_transformaciones_del_layout(spec_pequena):
    por_nombre = {e.nombre: e.transformacion for e in construir_layout(spec_pequena)}
    assert por_nombre['R1[1]'] is Transformacion.LOG
    assert por_nombre['Q1[1]'] is Transformacion.LOG
    assert por_nombre['b1_2[1]'] is Transformacion.ORDENADA
    assert por_nombre['b1_1[1]'] is Transformacion.IDENTIDAD
    assert por_nombre['gamma3[1]'] is Transformacion.IDENTIDAD


def test_layout_del_preset_de_simulacion():
    spec, _ = preset_simulacion()
    nombres = [entrada.nombre for entrada in construir_layout(spec)]
    assert 'Lambda1[2,1]' in nombres and 'Lambda1[4,2]' in nombres
    assert not any(nombre.startswith(('gamma1', 'P12', 'Q2', 'Lambda2')) for nombre in nombres)
    assert nombres.count('gamma4[1]') == 1 and nombres.count('gamma4[2]') == 1


def test_layout_del_preset_empirico_respeta_mascara_gamma4():
    spec, params = preset_empirico()
    nombres = [entrada.nombre for entrada in construir_layout(spec)]
    assert [n for n in nombres if n.startswith('gamma4')] == ['gamma4[2]', 'gamma4[3]', 'gamma4[5]']
    assert params.Lambda1.shape == (2, 17, 7)


def test_pack_unpack_recupera_los_parametros(spec_pequena, params_pequenos):
    theta = pack(params_pequenos, spec_pequena)
    recuperados = unpack(theta, spec_pequena)
    for grupo, valor in params_pequenos.a_dict().items():
        np.testing.assert_allclose(getattr(recuperados, grupo), valor, atol=1e-12)


@pytest.mark.parametrize("preset", [preset_simulacion, preset_empirico])
def test_pack_unpack_de_las_tablas_de_los_presets(preset):
    spec, params = preset()
    theta = pack(params, spec)
    assert len(theta.theta) == len(construir_layout(spec))
    recuperados = unpack(theta, spec)
    for grupo, valor in params.a_dict().items():
        np.testing.assert_allclose(getattr(recuperados, grupo), valor, rtol=1e-10, atol=1e-12)


def test_theta_real_cualquiera_da_parametros_validos(spec_pequena, rng):
    for _ in range(100):
        params = parametros_aleatorios(spec_pequena, rng, escala=2.0)
        validar_parametros(params, spec_pequena)
        assert params.b1[1, 0] > params.b1[0, 0]
        assert np.all(params.R1 > 0) and np.all(params.Q1 > 0)


def test_unpack_longitud_incorrecta(spec_pequena):
    with pytest.raises(ErrorDimensiones):
        unpack(np.zeros(3), spec_pequena)


def test_pack_rechaza_varianza_negativa(spec_pequena, params_pequenos):
    malos = _con(params_pequenos, R2=np.array([-0.1, 0.5]))
    with pytest.raises(ViolacionRestriccion, match=r"R2\[1\]"):
        pack(malos, spec_pequena)


def test_pack_rechaza_orden_de_interceptos(spec_pequena, params_pequenos):
    malos = _con(params_pequenos, b1=np.array([[0.5], [0.1]]))
    with pytest.raises(ViolacionRestriccion, match=r"b1_2\[1\]"):
        pack(malos, spec_pequena)


def test_pack_rechaza_invariante_distinto(spec_pequena, params_pequenos):
    malos = _con(params_pequenos, Q1=np.array([[0.2], [0.3]]))
    with pytest.raises(ViolacionRestriccion, match="Q1"):
        pack(malos, spec_pequena)


def test_pack_rechaza_carga_fija_alterada(spec_pequena, params_pequenos):
    malos = _con(params_pequenos, Lambda1=np.array([[[2.0], [0.9]], [[2.0], [0.9]]]))
    with pytest.raises(ViolacionRestriccion, match=r"Lambda1\[1,1\]"):
        pack(malos, spec_pequena)


def test_pack_rechaza_gamma4_enmascarado(params_pequenos):
    spec = spec_un_factor(gamma4_mask=[False])
    with pytest.raises(ViolacionRestriccion, match="gamma4"):
        pack(params_pequenos, spec)


def test_pack_rechaza_grupo_fijo_distinto(spec_pequena, params_pequenos):
    malos = _con(params_pequenos, Q2=np.array([0.5]))
    with pytest.raises(ViolacionRestriccion, match="Q2"):
        pack(malos, spec_pequena)


def test_p12_liberado_usa_logit():
    spec = spec_un_factor(liberados=frozenset({'P12'}))
    valores = dict(valores_un_factor(), P12=0.2)
    params = completar_parametros(valores, spec)
    theta = pack(params, spec)
    assert theta.nombres[-1] == 'P12'
    assert theta.theta[-1] == pytest.approx(np.log(0.2 / 0.8))
    assert unpack(theta, spec).P12 == pytest.approx(0.2)


def test_spec_rechaza_liberar_y_fijar():
    with pytest.raises(ErrorConfiguracion):
        spec_un_factor(fixed={'P12': 0.1}, liberados=frozenset({'P12'}))


def test_spec_rechaza_factor_sin_carga_fija():
    with pytest.raises(ErrorConfiguracion, match="factor 1"):
        spec_un_factor(loading_pattern_1=[[None], [None]])


def test_spec_rechaza_p2_no_definida_positiva():
    with pytest.raises(ErrorConfiguracion, match="P2"):
        spec_un_factor(fixed={'Q2': [0.1], 'P2': [[-1.0]]})


def test_jacobiano_coincide_con_diferencias_finitas(spec_pequena, params_pequenos):
    theta = pack(params_pequenos, spec_pequena)
    layout = theta.layout
    J = jacobiano_transformacion(theta, spec_pequena)
    h = 1e-6
    numerico = np.zeros_like(J)
    for j in range(len(layout)):
        e = np.zeros(len(layout))
        e[j] = h
        arriba = valores_por_entrada(unpack(theta.theta + e, spec_pequena), layout)
        abajo = valores_por_entrada(unpack(theta.theta - e, spec_pequena), layout)
        numerico[:, j] = (arriba - abajo) / (2 * h)
    np.testing.assert_allclose(J, numerico, atol=1e-6)


def test_jacobiano_del_intercepto_ordenado_depende_de_dos_entradas(spec_pequena, params_pequenos):
    theta = pack(params_pequenos, spec_pequena)
    J = jacobiano_transformacion(theta, spec_pequena)
    fila = theta.nombres.index('b1_2[1]')
    columna = theta.nombres.index('b1_1[1]')
    assert J[fila, columna] == 1.0
    assert J[fila, fila] == pytest.approx(0.5)


def test_sigmoide_del_umbral_de_identificacion():
    assert expit(4.60) == pytest.approx(0.990, abs=1e-3)
    assert 0.99 ** 50 == pytest.approx(0.605, abs=1e-3)


def test_transicion_con_covariables_nulas(params_pequenos):
    probabilidades = transition_probability(np.zeros(1), np.zeros(1), params_pequenos, Regimen.UNO)
    assert probabilidades[0] == pytest.approx(expit(4.60))
    assert probabilidades.sum() == pytest.approx(1.0)


def test_transicion_desde_regimen_dos_es_casi_absorbente(params_pequenos):
    probabilidades = transition_probability(np.array([3.0]), np.array([-2.0]), params_pequenos, 2)
    assert probabilidades[0] == pytest.approx(1e-12)
    assert probabilidades[1] == pytest.approx(1.0)


def test_transicion_incluye_interaccion(params_pequenos):
    eta1, eta2 = np.array([0.7]), np.array([-0.4])
    esperado = expit(4.60 - 0.5 * (-0.4) - 1.0 * 0.7 + 0.3 * 0.7 * (-0.4))
    assert transition_probability(eta1, eta2, params_pequenos, 1)[0] == pytest.approx(esperado)


def test_matriz_de_transicion_tiene_columnas_estocasticas(params_pequenos, rng):
    eta1 = rng.normal(size=(5, 2, 1))
    eta2 = rng.normal(size=(5, 1))
    trans = matriz_transicion(eta1, eta2, params_pequenos)
    assert trans.shape == (5, 2, 2)
    np.testing.assert_allclose(trans.sum(axis=1), 1.0, atol=1e-12)


def test_parameter_vector_valida_longitud(spec_pequena):
    with pytest.raises(ErrorDimensiones):
        ParameterVector(np.zeros(2), construir_layout(spec_pequena))
