"""
Lectura y escritura de paneles, verdades simuladas y resultados (CSV y JSON)
src/io_datos.py
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.excepciones import ErrorConfiguracion, ErrorEvaluacion
from src.models import ModelSpec, PanelDataset, ParameterSet, ResultadoFiltro, SimOutput
from src.parametrizacion import completar_parametros
from src.utils.logger_config import obtener_logger

logger = obtener_logger("io_datos")

FORMATO_FLOTANTE = '%.10g'
PREFIJO_REPLICACION = 'rep_'
ARCHIVOS_VERDAD = ('truth_regimes.csv', 'truth_eta1.csv', 'truth_between.csv', 'truth_params.json')


def _columnas(prefijo: str, cantidad: int) -> List[str]:
    return [f"{prefijo}_{j}" for j in range(1, cantidad + 1)]


def escribir_csv(tabla: pd.DataFrame, ruta: Path) -> Path:
    """CSV UTF-8 con saltos de línea fijos y flotantes reproducibles"""
    ruta.parent.mkdir(parents=True, exist_ok=True)
    tabla.to_csv(ruta, index=False, float_format=FORMATO_FLOTANTE, lineterminator='\n', encoding='utf-8')
    return ruta


def escribir_json(contenido: Dict[str, Any], ruta: Path) -> Path:
    ruta.parent.mkdir(parents=True, exist_ok=True)
    ruta.write_text(json.dumps(contenido, indent=2, ensure_ascii=False, allow_nan=False) + "\n",
                    encoding='utf-8')
    return ruta


def leer_json(ruta: Path) -> Dict[str, Any]:
    return json.loads(Path(ruta).read_text(encoding='utf-8'))


def a_nulos(valores) -> List[Optional[float]]:
    """Lista JSON con None en lugar de NaN"""
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(valores, dtype=float)]


def tabla_larga(ids: np.ndarray, arreglo: np.ndarray, prefijo: str) -> pd.DataFrame:
    """N x T x K en formato largo: id, t (base 1), prefijo_1..prefijo_K"""
    N, T, K = arreglo.shape
    tabla = pd.DataFrame(arreglo.reshape(N * T, K), columns=_columnas(prefijo, K))
    tabla.insert(0, 't', np.tile(np.arange(1, T + 1), N))
    tabla.insert(0, 'id', np.repeat(ids, T))
    return tabla


def tabla_ancha(ids: np.ndarray, arreglo: np.ndarray, prefijo: str) -> pd.DataFrame:
    tabla = pd.DataFrame(arreglo, columns=_columnas(prefijo, arreglo.shape[1]))
    tabla.insert(0, 'id', ids)
    return tabla


def escribir_panel(datos: PanelDataset, directorio: Path) -> List[Path]:
    """y1 largo (celda vacía = faltante), y2 ancho y eventos de régimen si existen"""
    archivos = [
        escribir_csv(tabla_larga(datos.ids, datos.y1, 'item'), directorio / 'y1.csv'),
        escribir_csv(tabla_ancha(datos.ids, datos.y2, 'item'), directorio / 'y2.csv'),
    ]
    if datos.regime_event is not None:
        eventos = pd.DataFrame({'id': datos.ids, 'event': datos.regime_event})
        archivos.append(escribir_csv(eventos, directorio / 'events.csv'))
    return archivos


def escribir_verdad(salida: SimOutput, params: ParameterSet, directorio: Path) -> List[Path]:
    """Regímenes y latentes verdaderos junto al panel simulado"""
    ids = salida.data.ids
    regimenes = tabla_larga(ids, salida.true_regimes[:, :, None], 'regime').rename(columns={'regime_1': 'regime'})
    entre = tabla_ancha(ids, salida.true_eta2, 'eta2')
    for j, columna in enumerate(_columnas('zeta2', salida.true_zeta2.shape[1])):
        entre[columna] = salida.true_zeta2[:, j]
    return [
        escribir_csv(regimenes, directorio / 'truth_regimes.csv'),
        escribir_csv(tabla_larga(ids, salida.true_eta1, 'eta1'), directorio / 'truth_eta1.csv'),
        escribir_csv(entre, directorio / 'truth_between.csv'),
        escribir_json(params.a_dict(), directorio / 'truth_params.json'),
    ]


def _leer_tabla(ruta: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(ruta, encoding='utf-8')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ErrorConfiguracion(f"no se puede leer '{ruta}': {error}") from error


def _pivotar_largo(tabla: pd.DataFrame, ids: np.ndarray, prefijo: str, ruta: Path) -> np.ndarray:
    """Formato largo a N x T x K; las filas ausentes quedan como NaN"""
    columnas = [c for c in tabla.columns if c.startswith(f"{prefijo}_")]
    if 'id' not in tabla.columns or 't' not in tabla.columns or not columnas:
        raise ErrorConfiguracion(f"'{ruta}' debe tener columnas id, t, {prefijo}_1..")
    if tabla.duplicated(['id', 't']).any():
        raise ErrorConfiguracion(f"'{ruta}' repite pares (id, t)")
    if (tabla['t'] < 1).any():
        raise ErrorConfiguracion(f"'{ruta}' tiene ocasiones t < 1")
    desconocidos = set(tabla['id']) - set(ids)
    if desconocidos:
        raise ErrorConfiguracion(f"'{ruta}' tiene ids sin fila en y2: {sorted(desconocidos)[:5]}")

    T = int(tabla['t'].max())
    posicion = {valor: n for n, valor in enumerate(ids)}
    arreglo = np.full((len(ids), T, len(columnas)), np.nan)
    filas = tabla['id'].map(posicion).to_numpy()
    ocasiones = tabla['t'].to_numpy(dtype=int) - 1
    arreglo[filas, ocasiones] = tabla[columnas].to_numpy(dtype=float)
    return arreglo


def leer_panel(ruta_y1: Path, ruta_y2: Path, ruta_eventos: Optional[Path] = None) -> PanelDataset:
    """
    Lee un panel desde los CSV de y1 (largo) e y2 (ancho)

    Raises:
        ErrorConfiguracion: archivos ilegibles o columnas incompatibles
    """
    tabla_y2 = _leer_tabla(Path(ruta_y2))
    columnas_y2 = [c for c in tabla_y2.columns if c.startswith('item_')]
    if 'id' not in tabla_y2.columns or not columnas_y2:
        raise ErrorConfiguracion(f"'{ruta_y2}' debe tener columnas id, item_1..")
    ids = tabla_y2['id'].to_numpy()
    y1 = _pivotar_largo(_leer_tabla(Path(ruta_y1)), ids, 'item', Path(ruta_y1))

    eventos = None
    if ruta_eventos is not None and Path(ruta_eventos).exists():
        tabla_eventos = _leer_tabla(Path(ruta_eventos))
        por_id = dict(zip(tabla_eventos['id'], tabla_eventos['event']))
        eventos = np.array([int(por_id.get(i, 0)) for i in ids], dtype=int)

    logger.info(f"Panel leído: N={len(ids)}, T={y1.shape[1]}, O1={y1.shape[2]}, O2={len(columnas_y2)}")
    return PanelDataset(y1, tabla_y2[columnas_y2].to_numpy(dtype=float), eventos, ids)


def leer_verdad(directorio: Path, spec: ModelSpec, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, ParameterSet]:
    """
    Regímenes N x T, latentes N x T x U1 y parámetros verdaderos de una replicación

    Raises:
        ErrorEvaluacion: si falta algún archivo de verdad
    """
    faltantes = [nombre for nombre in ARCHIVOS_VERDAD if not (directorio / nombre).exists()]
    if faltantes:
        raise ErrorEvaluacion(f"faltan archivos de verdad en '{directorio}': {', '.join(faltantes)}")
    tabla = _leer_tabla(directorio / 'truth_regimes.csv')
    tabla = tabla.rename(columns={'regime': 'regime_1'})
    regimenes = _pivotar_largo(tabla, ids, 'regime', directorio / 'truth_regimes.csv')[:, :, 0].astype(int)
    eta1 = _pivotar_largo(_leer_tabla(directorio / 'truth_eta1.csv'), ids, 'eta1', directorio / 'truth_eta1.csv')
    params = completar_parametros(leer_json(directorio / 'truth_params.json'), spec)
    return regimenes, eta1, params


def unidades_simuladas(directorio: Path) -> List[Tuple[str, Path]]:
    """Replicaciones bajo un directorio de simulación, o el directorio mismo si es un panel"""
    directorio = Path(directorio)
    if (directorio / 'y1.csv').exists():
        return [(directorio.name, directorio)]
    base = directorio / 'datos' if (directorio / 'datos').is_dir() else directorio
    unidades = sorted((d.name, d) for d in base.iterdir()
                      if d.is_dir() and d.name.startswith(PREFIJO_REPLICACION))
    if not unidades:
        raise ErrorConfiguracion(f"'{directorio}' no contiene paneles simulados")
    return unidades


def tabla_filtrado(ids: np.ndarray, resultado: ResultadoFiltro) -> pd.DataFrame:
    """
    Salida por (i, t): probabilidades de régimen, medias y SD de los latentes
    filtrados y a un paso, y predicción de las observaciones
    """
    N, T, U1 = resultado.eta_filtrada.shape
    tabla = tabla_larga(ids, resultado.prS2_filtrada[:, :, None], 'x').rename(columns={'x_1': 'prS2_filtered'})
    tabla['prS2_predicted'] = resultado.prS2_predicha.reshape(N * T)
    for nombre, arreglo in (('eta_filtered', resultado.eta_filtrada), ('sd_filtered', resultado.sd_filtrada),
                            ('eta_predicted', resultado.eta_predicha), ('sd_predicted', resultado.sd_predicha),
                            ('y_predicted', resultado.y_predicha)):
        valores = arreglo.reshape(N * T, arreglo.shape[2])
        for j, columna in enumerate(_columnas(nombre, arreglo.shape[2])):
            tabla[columna] = valores[:, j]
    tabla['loglik'] = resultado.loglik_it.reshape(N * T)
    return tabla


def tabla_parametros(nombres: Sequence[str], estimaciones: np.ndarray,
                     se_opg: Optional[np.ndarray], se_hessiana: Optional[np.ndarray],
                     fijos: Dict[str, Any]) -> pd.DataFrame:
    """Parámetros libres con sus errores y grupos fijos marcados, sin error estándar"""
    k = len(nombres)
    tabla = pd.DataFrame({
        'parameter': list(nombres),
        'estimate': np.asarray(estimaciones, dtype=float),
        'se_opg': np.full(k, np.nan) if se_opg is None else se_opg,
        'se_hessian': np.full(k, np.nan) if se_hessiana is None else se_hessiana,
        'fixed': False,
    })
    filas_fijas = []
    for grupo, valor in fijos.items():
        plano = np.ravel(np.asarray(valor, dtype=float))
        for j, v in enumerate(plano):
            nombre = grupo if plano.size == 1 else f"{grupo}[{j + 1}]"
            filas_fijas.append({'parameter': nombre, 'estimate': v, 'se_opg': np.nan,
                                'se_hessian': np.nan, 'fixed': True})
    if filas_fijas:
        tabla = pd.concat([tabla, pd.DataFrame(filas_fijas)], ignore_index=True)
    return tabla
