"""
Pruebas del logging y de los reportes de consola
tests/test_logger.py
"""

import logging
import os
import time

import numpy as np

from src.models import MetricasVentana, RegimeMetrics
from src.utils.console_logger import ConsoleLogger
from src.utils.logger_config import (
    NOMBRE_RAIZ, cambiar_nivel_logging, configurar_logging, limpiar_logs_antiguos, obtener_logger,
)


def test_logger_hijo_del_paquete():
    assert obtener_logger("filtro").name == f"{NOMBRE_RAIZ}.filtro"


def test_configurar_logging_crea_archivos(tmp_path):
    logger = configurar_logging(logging.DEBUG, str(tmp_path))
    try:
        assert logger.level == logging.DEBUG
        assert len(logger.handlers) == 3
        configurar_logging(logging.INFO, str(tmp_path))
        assert len(logger.handlers) == 3
        cambiar_nivel_logging(logging.WARNING)
        assert all(handler.level == logging.WARNING for handler in logger.handlers)
        assert (tmp_path / 'rsss.log').exists()
        assert any(nombre.startswith('rsss_') for nombre in os.listdir(tmp_path))
    finally:
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.setLevel(logging.NOTSET)
        logger.propagate = True


def test_limpieza_de_logs_antiguos(tmp_path):
    antiguo = tmp_path / 'rsss_20200101_000000.log'
    reciente = tmp_path / 'rsss_20990101_000000.log'
    ajeno = tmp_path / 'otro.log'
    for archivo in (antiguo, reciente, ajeno):
        archivo.write_text('x', encoding='utf-8')
    hace_diez_dias = time.time() - 10 * 24 * 3600
    os.utime(antiguo, (hace_diez_dias, hace_diez_dias))
    os.utime(ajeno, (hace_diez_dias, hace_diez_dias))

    assert limpiar_logs_antiguos(str(tmp_path)) == 1
    assert not antiguo.exists()
    assert reciente.exists() and ajeno.exists()
    assert limpiar_logs_antiguos(str(tmp_path / 'no_existe')) == 0


def test_consola_cuenta_eventos(capsys):
    consola = ConsoleLogger(silencioso=True)
    consola.log_evento("REPLICACION", "rep_001")
    consola.log_evento("REPLICACION", "rep_002")
    consola.log_evento("AJUSTE")
    consola.reporte_optimizador(0, 25, -120.5, 0.3, 1e-3, 0.2)
    metricas = MetricasVentana(1, 0, 2, 1)
    consola.reporte_evaluacion("rep_001", RegimeMetrics(metricas, metricas))
    consola.reporte_final("evaluate", ["a.csv"])

    estadisticas = consola.obtener_estadisticas_logger()
    assert estadisticas['total_eventos'] == 4
    assert estadisticas['eventos_por_tipo'] == {'REPLICACION': 2, 'AJUSTE': 1, 'EVALUACION': 1}
    assert estadisticas['entradas_historial'] == 1
    assert capsys.readouterr().out == ""


def test_consola_imprime_reportes(capsys):
    consola = ConsoleLogger()
    consola.reporte_optimizador(1, 50, -10.0, np.float64(-0.5), 1e-6, 1.0)
    metricas = MetricasVentana(0, 0, 3, 0)
    consola.reporte_evaluacion("panel", RegimeMetrics(metricas, metricas))
    salida = capsys.readouterr().out
    assert "Arranque 1" in salida
    assert "n/d" in salida


def test_eventos_recientes_acotados():
    consola = ConsoleLogger(silencioso=True)
    for k in range(30):
        consola.log_evento("PASO", str(k))
    assert len(consola.eventos_recientes) == 20
    assert consola.total_eventos == 30
