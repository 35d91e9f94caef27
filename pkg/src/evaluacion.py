"""
Métricas de evaluación: clasificación de régimen, puntaje cuadrático y recuperación de parámetros
src/evaluacion.py
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.constants import CORTE_REGIMEN
from src.excepciones import ErrorEvaluacion
from src.models import MetricasVentana, ModelSpec, ParameterSet, RegimeMetrics, ResultadoFiltro, ScoreSeries
from src.parametrizacion import construir_layout, valores_por_entrada
from src.utils.logger_config import obtener_logger

logger = obtener_logger("evaluacion")

NOMBRES_METRICAS = ('accuracy', 'sensitivity', 'specificity')


def probabilidad_evaluada(resultado: ResultadoFiltro, t_corte: int) -> np.ndarray:
    """
    Serie N x T de Pr[S_it = 2] usada para clasificar

    Filtrada (datos hasta t) en la ventana observada y a un paso (datos hasta
    t-1) en la ventana de pronóstico.
    """
    serie = resultado.prS2_filtrada.copy()
    serie[:, t_corte:] = resultado.prS2_predicha[:, t_corte:]
    return serie


def _confusion(prediccion_2: np.ndarray, verdad_2: np.ndarray) -> MetricasVentana:
    return MetricasVentana(
        tp=int(np.sum(prediccion_2 & verdad_2)),
        fn=int(np.sum(~prediccion_2 & verdad_2)),
        tn=int(np.sum(~prediccion_2 & ~verdad_2)),
        fp=int(np.sum(prediccion_2 & ~verdad_2)),
    )


def regime_metrics(pred_prS2: np.ndarray, true_regimes: np.ndarray, split_t: int,
                   cutoff: float = CORTE_REGIMEN) -> RegimeMetrics:
    """
    Exactitud, sensibilidad y especificidad por ventana, con el régimen 2 como positivo

    Args:
        pred_prS2: Probabilidades N x T
        true_regimes: Regímenes verdaderos N x T (1 o 2)
        split_t: Ocasiones de la ventana observada; el resto es pronóstico
        cutoff: Se predice S = 2 cuando la probabilidad supera el corte

    Raises:
        ErrorEvaluacion: si alguna ventana queda vacía o las formas no coinciden
    """
    pred_prS2 = np.asarray(pred_prS2, dtype=float)
    true_regimes = np.asarray(true_regimes)
    if pred_prS2.shape != true_regimes.shape:
        raise ErrorEvaluacion(f"formas distintas: {pred_prS2.shape} y {true_regimes.shape}")
    if not 0.0 < cutoff < 1.0:
        raise ErrorEvaluacion("el corte debe estar en (0, 1)")
    T = pred_prS2.shape[1]
    if not 0 < split_t < T:
        raise ErrorEvaluacion(f"ventana vacía: split_t={split_t} con T={T}")

    prediccion_2 = pred_prS2 > cutoff
    verdad_2 = true_regimes == 2
    return RegimeMetrics(
        observado=_confusion(prediccion_2[:, :split_t], verdad_2[:, :split_t]),
        pronostico=_confusion(prediccion_2[:, split_t:], verdad_2[:, split_t:]),
    )


def score_function(pred_eta: np.ndarray, true_eta: np.ndarray,
                   window: Tuple[int, int]) -> ScoreSeries:
    """
    delta_t = (1/N) sum_i sum_j (eta_hat_itj - eta_itj)^2 en cada t de la ventana

    Args:
        pred_eta: Pronósticos N x T x U1
        true_eta: Latentes verdaderos N x T x U1
        window: (inicio, fin) en base 0, fin exclusivo

    Raises:
        ErrorEvaluacion: formas distintas o ventana vacía
    """
    pred_eta = np.asarray(pred_eta, dtype=float)
    true_eta = np.asarray(true_eta, dtype=float)
    if pred_eta.shape != true_eta.shape:
        raise ErrorEvaluacion(f"formas distintas: {pred_eta.shape} y {true_eta.shape}")
    inicio, fin = window
    if not 0 <= inicio < fin <= pred_eta.shape[1]:
        raise ErrorEvaluacion(f"ventana de pronóstico vacía o fuera de rango: {window}")
    errores = (pred_eta[:, inicio:fin] - true_eta[:, inicio:fin]) ** 2
    delta = errores.sum(axis=2).mean(axis=0)
    return ScoreSeries(t=np.arange(inicio + 1, fin + 1), delta=delta)


def tabla_metricas(metricas: RegimeMetrics) -> pd.DataFrame:
    """Tabla con pares de columnas observed/forecast"""
    filas = []
    for nombre in NOMBRES_METRICAS:
        filas.append({
            'metric': nombre,
            'observed': getattr(metricas.observado, nombre),
            'forecast': getattr(metricas.pronostico, nombre),
        })
    return pd.DataFrame(filas, columns=['metric', 'observed', 'forecast'])


def promediar_metricas(lista: Sequence[RegimeMetrics]) -> pd.DataFrame:
    """Promedio de las métricas por replicación; las ausentes no cuentan"""
    if not lista:
        raise ErrorEvaluacion("no hay replicaciones que promediar")
    filas = []
    for nombre in NOMBRES_METRICAS:
        fila = {'metric': nombre}
        for columna, ventana in (('observed', 'observado'), ('forecast', 'pronostico')):
            valores = [getattr(getattr(m, ventana), nombre) for m in lista]
            presentes = [v for v in valores if v is not None]
            fila[columna] = float(np.mean(presentes)) if presentes else None
        filas.append(fila)
    return pd.DataFrame(filas, columns=['metric', 'observed', 'forecast'])


def sumar_conteos(lista: Sequence[RegimeMetrics]) -> RegimeMetrics:
    """Matrices de confusión agregadas sobre todas las replicaciones"""
    def suma(ventana: str) -> MetricasVentana:
        matrices = [getattr(m, ventana) for m in lista]
        return MetricasVentana(
            tp=sum(m.tp for m in matrices), fn=sum(m.fn for m in matrices),
            tn=sum(m.tn for m in matrices), fp=sum(m.fp for m in matrices),
        )
    return RegimeMetrics(observado=suma('observado'), pronostico=suma('pronostico'))


def tabla_conteos(metricas: RegimeMetrics) -> pd.DataFrame:
    filas = []
    for etiqueta, ventana in (('observed', metricas.observado), ('forecast', metricas.pronostico)):
        filas.append({'window': etiqueta, 'tp': ventana.tp, 'fn': ventana.fn,
                      'tn': ventana.tn, 'fp': ventana.fp})
    return pd.DataFrame(filas, columns=['window', 'tp', 'fn', 'tn', 'fp'])


def recovery_stats(estimaciones: Sequence[Optional[ParameterSet]], truth: ParameterSet,
                   spec: ModelSpec) -> Tuple[pd.DataFrame, int]:
    """
    Media, sesgo, RMSE y SD de cada parámetro libre a través de las replicaciones

    Las replicaciones fallidas (None) se excluyen y se cuentan.

    Returns:
        (tabla con columnas parameter, true, mean, bias, rmse, sd; replicaciones excluidas)

    Raises:
        ErrorEvaluacion: con menos de dos replicaciones exitosas
    """
    layout = construir_layout(spec)
    exitosas = [p for p in estimaciones if p is not None]
    excluidas = len(estimaciones) - len(exitosas)
    if len(exitosas) < 2:
        raise ErrorEvaluacion(f"se requieren al menos 2 replicaciones exitosas, hay {len(exitosas)}")
    if excluidas:
        logger.warning(f"Recuperación: {excluidas} replicaciones fallidas excluidas")

    verdad = valores_por_entrada(truth, layout)
    matriz = np.stack([valores_por_entrada(p, layout) for p in exitosas])
    media = matriz.mean(axis=0)
    tabla = pd.DataFrame({
        'parameter': [entrada.nombre for entrada in layout],
        'true': verdad,
        'mean': media,
        'bias': media - verdad,
        'rmse': np.sqrt(np.mean((matriz - verdad) ** 2, axis=0)),
        'sd': matriz.std(axis=0, ddof=1),
    })
    return tabla, excluidas


def recuperacion_comparada(tablas: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    """Une tablas de recuperación de varias condiciones, lado a lado"""
    combinada: Optional[pd.DataFrame] = None
    for condicion, tabla in tablas.items():
        renombrada = tabla.rename(columns={c: f"{c}_{condicion}" for c in ('mean', 'bias', 'rmse', 'sd')})
        combinada = renombrada if combinada is None else combinada.merge(
            renombrada.drop(columns=['true']), on='parameter', how='outer', sort=False)
    if combinada is None:
        raise ErrorEvaluacion("no hay tablas de recuperación que combinar")
    return combinada


def resumen_cambios(prS2: np.ndarray, t_corte: int, cutoff: float = CORTE_REGIMEN) -> Dict[str, object]:
    """
    Resumen de los cambios de régimen pronosticados

    Returns:
        Diccionario con el primer t (base 1) con Pr[S=2] > corte por individuo
        (None si nunca ocurre) y la proporción en régimen 2 al corte y al final
    """
    sobre = prS2 > cutoff
    primeros: List[Optional[int]] = [int(np.argmax(fila)) + 1 if fila.any() else None for fila in sobre]
    return {
        'primer_cambio': primeros,
        'proporcion_corte': float(np.mean(sobre[:, t_corte - 1])) if t_corte > 0 else 0.0,
        'proporcion_final': float(np.mean(sobre[:, -1])) if sobre.shape[1] else 0.0,
    }
