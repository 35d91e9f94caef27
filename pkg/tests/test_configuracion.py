"""
Pruebas de la configuración declarativa
tests/test_configuracion.py
"""

import textwrap

import numpy as np
import pytest

from src.configuracion import RunConfig
from src.enums import Comando, MetodoErrores, ModoPronostico
from src.excepciones import ErrorConfiguracion

SIMULACION = textwrap.dedent("""\
    seed: 4
    model:
      preset: simulacion
    data:
      simulation:
        N: 20
        T: 10
        replications: 2
    optimizer:
      preset: empirico
      max_iter: 50
      se_methods: [opg, hessiana]
    evaluation:
      split: 5
    output:
      dir: salida
""")

EXPLICITO = textwrap.dedent("""\
    model:
      O1: 2
      U1: 1
      O2: 2
      U2: 1
      loading_pattern_1: [[1.0], [null]]
      loading_pattern_2: [[1.0], [1.0]]
      gamma4_mask: [true]
      fixed:
        Q2: [0.1]
      free: [P12]
""")


def _config(texto: str) -> RunConfig:
    return RunConfig.desde_texto(textwrap.dedent(texto))


class TestLectura:

    def test_secciones(self):
        config = RunConfig.desde_texto(SIMULACION)
        assert config.seed == 4
        assert config.jobs == 1
        assert config.data['simulation']['N'] == 20
        assert config.directorio_salida.name == 'salida'
        assert config.validar(Comando.SIMULATE)

    def test_documento_vacio_usa_valores_por_defecto(self):
        config = RunConfig.desde_texto("")
        assert config.model == {'preset': 'simulacion'}
        assert config.corte == 0.5
        assert config.validar()

    def test_error_de_sintaxis_con_linea(self):
        with pytest.raises(ErrorConfiguracion) as error:
            RunConfig.desde_texto("seed: 1\nmodel:\n  preset: [simulacion\n")
        assert error.value.linea is not None
        assert "línea" in str(error.value)

    def test_seccion_desconocida(self):
        with pytest.raises(ErrorConfiguracion) as error:
            RunConfig.desde_texto("seed: 1\nextra: 2\n")
        assert error.value.linea == 2

    def test_seccion_que_no_es_mapa(self):
        with pytest.raises(ErrorConfiguracion) as error:
            RunConfig.desde_texto("seed: 1\nmodel: 3\n")
        assert error.value.linea == 2

    def test_archivo_inexistente(self, tmp_path):
        with pytest.raises(ErrorConfiguracion):
            RunConfig.desde_yaml(str(tmp_path / 'no_existe.yaml'))

    def test_ida_y_vuelta_por_yaml(self):
        config = RunConfig.desde_texto(SIMULACION)
        assert RunConfig.desde_texto(config.a_yaml()).a_dict() == config.a_dict()


class TestValidacion:

    def test_clave_de_modelo_desconocida_con_linea(self):
        config = _config("""\
            seed: 1
            model:
              preset: simulacion
              colores: 3
        """)
        with pytest.raises(ErrorConfiguracion) as error:
            config.validar()
        assert error.value.linea == 4

    def test_clave_de_optimizador_desconocida(self):
        config = _config("""\
            optimizer:
              velocidad: 2
        """)
        with pytest.raises(ErrorConfiguracion) as error:
            config.validar()
        assert error.value.linea == 2

    @pytest.mark.parametrize("texto", [
        "seed: -1\n",
        "jobs: 0\n",
        "evaluation:\n  cutoff: 1.5\n",
        "evaluation:\n  split: 0\n",
        "evaluation:\n  forecast_mode: adivinar\n",
        "optimizer:\n  se_methods: [bootstrap]\n",
        "optimizer:\n  delta0: 100.0\n",
        "model:\n  preset: otro\n",
        "output:\n  dir: ''\n",
    ])
    def test_valores_invalidos(self, texto):
        with pytest.raises(ErrorConfiguracion):
            RunConfig.desde_texto(texto).validar()

    def test_simulate_requiere_la_seccion_de_simulacion(self):
        with pytest.raises(ErrorConfiguracion):
            RunConfig.desde_texto("seed: 1\n").validar(Comando.SIMULATE)

    def test_simulacion_con_tamanos_invalidos(self):
        texto = SIMULACION.replace("N: 20", "N: 0")
        with pytest.raises(ErrorConfiguracion) as error:
            RunConfig.desde_texto(texto).validar(Comando.SIMULATE)
        assert error.value.linea == 6

    def test_fit_requiere_una_sola_fuente(self, tmp_path):
        with pytest.raises(ErrorConfiguracion):
            RunConfig.desde_texto("seed: 1\n").validar(Comando.FIT)
        config = RunConfig(data={'files': {'y1': str(tmp_path / 'y1.csv'), 'y2': str(tmp_path / 'y2.csv')},
                                 'simulated': str(tmp_path)})
        with pytest.raises(ErrorConfiguracion):
            config.validar(Comando.FIT)

    def test_archivos_inexistentes(self, tmp_path):
        config = RunConfig(data={'files': {'y1': str(tmp_path / 'y1.csv'), 'y2': str(tmp_path / 'y2.csv')}})
        with pytest.raises(ErrorConfiguracion):
            config.validar(Comando.FIT)

    def test_fuente_simulada_valida(self, tmp_path):
        assert RunConfig(data={'simulated': str(tmp_path)}).validar(Comando.EVALUATE)

    def test_modelo_explicito_sin_verdad_no_se_simula(self):
        texto = EXPLICITO + "data:\n  simulation: {N: 5, T: 4, replications: 1}\n"
        with pytest.raises(ErrorConfiguracion):
            RunConfig.desde_texto(texto).validar(Comando.SIMULATE)


class TestConstruccion:

    def test_spec_desde_preset(self):
        spec = RunConfig.desde_texto(SIMULACION).construir_spec()
        assert (spec.O1, spec.U1) == (4, 2)

    def test_preset_con_restricciones_adicionales(self):
        spec = _config("""\
            model:
              preset: simulacion
              free: [P12]
              initial_prob_regime1: 0.5
              fixed:
                gamma2: [0.0]
        """).construir_spec()
        assert 'P12' in spec.liberados
        assert not spec.esta_fijo('P12')
        assert spec.prob_inicial_regimen1 == 0.5
        assert spec.esta_fijo('gamma2') and spec.esta_fijo('gamma1')
        assert (spec.O1, spec.U1) == (4, 2)

    def test_preset_con_fijos_ajusta_la_verdad(self):
        config = _config("""\
            model:
              preset: simulacion
              fixed:
                gamma2: [0.0]
        """)
        params = config.parametros_verdaderos(config.construir_spec())
        np.testing.assert_array_equal(params.gamma2, [0.0])
        assert params.gamma1 == pytest.approx(4.60)

    def test_preset_rechaza_claves_estructurales(self):
        config = _config("""\
            model:
              preset: simulacion
              U1: 3
        """)
        with pytest.raises(ErrorConfiguracion, match="incompatible con preset") as error:
            config.validar()
        assert error.value.linea == 3

    def test_spec_explicita(self):
        spec = RunConfig.desde_texto(EXPLICITO).construir_spec()
        assert (spec.O1, spec.U1, spec.O2, spec.U2) == (2, 1, 2, 1)
        assert spec.liberados == frozenset({'P12'})
        assert not spec.esta_fijo('P12')
        assert spec.esta_fijo('gamma1')

    def test_spec_explicita_incompleta(self):
        with pytest.raises(ErrorConfiguracion):
            _config("""\
                model:
                  O1: 2
            """).construir_spec()

    def test_rprop_desde_preset(self):
        rprop = RunConfig.desde_texto(SIMULACION).construir_rprop()
        assert rprop.delta0 == 0.01
        assert rprop.max_iter == 50
        assert RunConfig().construir_rprop().delta0 == 0.1

    def test_metodos_y_modo(self):
        config = RunConfig.desde_texto(SIMULACION)
        assert config.metodos_errores() == (MetodoErrores.OPG, MetodoErrores.HESSIANA)
        assert config.modo_pronostico() is ModoPronostico.UN_PASO

    def test_ocasiones_de_entrenamiento(self):
        assert RunConfig.desde_texto(SIMULACION).t_entrenamiento(10) == 5
        assert RunConfig().t_entrenamiento(31) == 15
        assert RunConfig(optimizer={'training_occasions': 40}).t_entrenamiento(30) == 30

    def test_parametros_verdaderos_del_preset(self):
        config = RunConfig.desde_texto(SIMULACION)
        params = config.parametros_verdaderos(config.construir_spec())
        assert params.R1[0, 0] == pytest.approx(0.26)

    def test_argumentos_de_linea_de_comandos(self):
        config = RunConfig.desde_texto(SIMULACION)
        nueva = config.aplicar_argumentos(seed=9, out='otra', jobs=2, rapido=True)
        assert (nueva.seed, nueva.jobs) == (9, 2)
        assert nueva.directorio_salida.name == 'otra'
        assert nueva.data['simulation'] == {'N': 40, 'T': 30, 'replications': 5}
        assert config.data['simulation']['N'] == 20
        assert config.aplicar_argumentos() == config
