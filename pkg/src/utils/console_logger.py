"""
Reportes de progreso en consola para simulación, ajuste y evaluación
src/utils/console_logger.py
"""

import datetime
import time
from typing import Dict, List, Optional

import numpy as np

from src.constants import INTERVALO_REPORTE_OPTIMIZADOR
from src.models import FitResult, RegimeMetrics
from src.utils.logger_config import obtener_logger

logger = obtener_logger("consola")


class ConsoleLogger:
    """Registro de eventos de la corrida con reportes compactos en consola"""

    def __init__(self, silencioso: bool = False):
        self.silencioso = silencioso
        self.inicio = time.time()
        self.intervalo_reporte = INTERVALO_REPORTE_OPTIMIZADOR  # Iteraciones entre reportes
        self.eventos_recientes: List[tuple] = []
        self.estadisticas_historial: List[Dict[str, float]] = []

        # Contadores para el resumen final
        self.total_eventos = 0
        self.eventos_por_tipo: Dict[str, int] = {}

    def _imprimir(self, texto: str):
        if not self.silencioso:
            print(texto)

    def log_evento(self, evento: str, detalle: str = ""):
        """Registra un evento de la corrida (replicación simulada, ajuste terminado, etc.)"""
        timestamp = datetime.datetime.now().strftime("%H:%M:%S")
        mensaje = f"[{timestamp}] {evento}" + (f" - {detalle}" if detalle else "")
        logger.info(mensaje)

        self.eventos_recientes.append((time.time(), mensaje))
        if len(self.eventos_recientes) > 20:
            self.eventos_recientes.pop(0)

        self.eventos_por_tipo[evento] = self.eventos_por_tipo.get(evento, 0) + 1
        self.total_eventos += 1

    def reporte_optimizador(self, inicio: int, iteracion: int, loglik: float, mejora: float,
                            delta_min: float, delta_max: float):
        """Línea de progreso del optimizador con la magnitud de los pasos"""
        self.estadisticas_historial.append({
            'arranque': inicio, 'iteracion': iteracion, 'loglik': float(loglik),
            'delta_min': float(delta_min), 'delta_max': float(delta_max),
        })
        if len(self.estadisticas_historial) > 50:
            self.estadisticas_historial.pop(0)

        tendencia = "📈" if mejora > 0 else ("➖" if mejora == 0 else "📉")
        mensaje = (f"🔁 Arranque {inicio} | iter {iteracion:4d} | loglik {loglik:12.4f} "
                   f"{tendencia} {mejora:+.2e} | paso [{delta_min:.1e}, {delta_max:.1e}]")
        self._imprimir(mensaje)
        logger.debug(mensaje)

    def reporte_ajuste(self, unidad: str, resultado: FitResult):
        """Resumen compacto de un ajuste terminado"""
        errores = resultado.se_opg if resultado.se_opg is not None else resultado.se_hessian
        ausentes = 0 if errores is None else int(np.isnan(errores).sum())
        self._imprimir("\n" + "=" * 60)
        self._imprimir(f"📊 AJUSTE {unidad}")
        self._imprimir(f"🎯 loglik: {resultado.loglik:.4f} | arranque ganador: {resultado.start_index}")
        self._imprimir(f"🔢 parámetros libres: {len(resultado.theta_hat)} | iteraciones: {len(resultado.loglik_trace)}")
        if ausentes:
            self._imprimir(f"🚨 errores estándar ausentes: {ausentes}")
        self._imprimir(f"⏱️  duración: {resultado.duracion:.1f} s")
        self._imprimir("=" * 60)
        self.log_evento("AJUSTE", f"{unidad} loglik={resultado.loglik:.4f}")

    def reporte_evaluacion(self, unidad: str, metricas: RegimeMetrics):
        """Métricas de clasificación de régimen de una unidad"""
        def formato(valor: Optional[float]) -> str:
            return "  n/d" if valor is None else f"{valor:.3f}"

        self._imprimir(f"\n🧭 EVALUACIÓN {unidad}")
        for etiqueta, ventana in (("observada", metricas.observado), ("pronóstico", metricas.pronostico)):
            self._imprimir(f"   ├─ {etiqueta:<10} exactitud {formato(ventana.accuracy)} | "
                           f"sensibilidad {formato(ventana.sensitivity)} | "
                           f"especificidad {formato(ventana.specificity)}")
        self.log_evento("EVALUACION", unidad)

    def reporte_final(self, comando: str, archivos: List[str]):
        """Reporte final de la corrida"""
        tiempo_total = time.time() - self.inicio
        self._imprimir("\n" + "🏁" * 40)
        self._imprimir(f"REPORTE FINAL: {comando.upper()}")
        self._imprimir("🏁" * 40)
        self._imprimir(f"\n⏱️  DURACIÓN TOTAL: {tiempo_total:.1f} segundos ({tiempo_total / 60:.1f} minutos)")
        self._imprimir(f"📁 ARCHIVOS ESCRITOS: {len(archivos)}")
        self._imprimir(f"📝 EVENTOS TOTALES REGISTRADOS: {self.total_eventos}")

        if self.eventos_por_tipo:
            self._imprimir("\n🔢 EVENTOS MÁS FRECUENTES:")
            eventos_ordenados = sorted(self.eventos_por_tipo.items(), key=lambda x: x[1], reverse=True)
            for i, (evento, cantidad) in enumerate(eventos_ordenados[:5]):
                self._imprimir(f"   {i + 1}. {evento}: {cantidad} veces")
        self._imprimir("🏁" * 40)
        logger.info(f"Corrida {comando} terminada en {tiempo_total:.1f}s con {len(archivos)} archivos")

    def obtener_estadisticas_logger(self) -> dict:
        """Retorna estadísticas del sistema de logging"""
        return {
            'total_eventos': self.total_eventos,
            'eventos_por_tipo': self.eventos_por_tipo.copy(),
            'entradas_historial': len(self.estadisticas_historial),
            'tiempo_funcionamiento': time.time() - self.inicio,
        }
