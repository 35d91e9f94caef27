"""
Línea de comandos rsss: simulate, fit, forecast y evaluate desde una configuración YAML
src/cli.py
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.configuracion import RunConfig
from src.enums import CodigoSalida, Comando, MetodoErrores, ModoPronostico
from src.estimacion import rprop_fit
from src.evaluacion import (
    probabilidad_evaluada, promediar_metricas, recovery_stats, recuperacion_comparada,
    regime_metrics, resumen_cambios, score_function, sumar_conteos, tabla_conteos, tabla_metricas,
)
from src.excepciones import ErrorConfiguracion, ErrorEvaluacion, ErrorRSSS, FallaAjuste, FallaNumerica
from src.filtro import run_filter
from src.io_datos import (
    PREFIJO_REPLICACION, a_nulos, escribir_csv, escribir_json, escribir_panel, escribir_verdad,
    leer_json, leer_panel, leer_verdad, tabla_filtrado, tabla_parametros, unidades_simuladas,
)
from src.models import FitResult, ModelSpec, PanelDataset, ParameterSet, RegimeMetrics, RpropConfig, SimConfig
from src.parametrizacion import completar_parametros, construir_layout, valores_por_entrada
from src.simulacion import simulate_study
from src.utils.console_logger import ConsoleLogger
from src.utils.logger_config import cambiar_nivel_logging, obtener_logger

logger = obtener_logger("cli")

DIR_DATOS = 'datos'
DIR_AJUSTE = 'ajuste'
DIR_PRONOSTICO = 'pronostico'
DIR_EVALUACION = 'evaluacion'

Unidad = Tuple[str, PanelDataset, Optional[Path]]


def construir_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rsss',
        description="Modelos de espacio de estados con cambio de régimen: simulación, ajuste, "
                    "pronóstico y evaluación",
    )
    parser.add_argument('comando', choices=[c.value for c in Comando], help="Etapa a ejecutar")
    parser.add_argument('--config', required=True, help="Documento YAML de la corrida")
    parser.add_argument('--jobs', type=int, default=None, help="Máximo de trabajadores (-1 = todos)")
    parser.add_argument('--seed', type=int, default=None, help="Semilla base")
    parser.add_argument('--out', default=None, help="Directorio de salida")
    parser.add_argument('--fast', action='store_true', help="Diseño reducido N=40, T=30, R=5")
    parser.add_argument('--verbose', action='store_true', help="Logging a nivel DEBUG")
    return parser


def _relativas(archivos: Sequence[Path], base: Path) -> List[str]:
    return [Path(archivo).relative_to(base).as_posix() for archivo in archivos]


def _escribir_manifiesto(config: RunConfig, comando: Comando, semillas: List[int],
                         archivos: List[Path], destino: Path) -> Path:
    """manifest.json sin marcas de tiempo: semillas, eco de la configuración y archivos"""
    base = config.directorio_salida
    return escribir_json({
        'command': comando.value,
        'seeds': semillas,
        'config': config.a_dict(),
        'files': _relativas(archivos, base),
    }, destino)


def _cargar_unidades(config: RunConfig) -> List[Unidad]:
    """Paneles a procesar con el directorio de su verdad simulada, si la hay"""
    if config.data.get('files'):
        archivos = config.data['files']
        datos = leer_panel(Path(archivos['y1']), Path(archivos['y2']),
                           Path(archivos['events']) if archivos.get('events') else None)
        directorio = Path(archivos['y1']).parent
        return [('panel', datos, directorio)]
    unidades = []
    for nombre, directorio in unidades_simuladas(Path(config.data['simulated'])):
        datos = leer_panel(directorio / 'y1.csv', directorio / 'y2.csv', directorio / 'events.csv')
        unidades.append((nombre, datos, directorio))
    return unidades


def cmd_simulate(config: RunConfig, consola: ConsoleLogger) -> List[Path]:
    """Paneles y verdades de R replicaciones con semillas seed + r"""
    spec = config.construir_spec()
    params = config.parametros_verdaderos(spec)
    simulacion = config.data['simulation']
    sim = SimConfig(N=simulacion['N'], T=simulacion['T'], params=params, spec=spec,
                    seed=config.seed, replications=simulacion['replications'])
    salidas = simulate_study(sim, n_jobs=config.jobs)

    base = config.directorio_salida
    archivos: List[Path] = []
    for r, salida in enumerate(salidas, start=1):
        directorio = base / DIR_DATOS / f"{PREFIJO_REPLICACION}{r:03d}"
        archivos.extend(escribir_panel(salida.data, directorio))
        archivos.extend(escribir_verdad(salida, params, directorio))
        consola.log_evento("REPLICACION", f"{directorio.name} semilla={salida.semilla} "
                                          f"régimen 2={np.mean(salida.true_regimes == 2):.3f}")
    semillas = [salida.semilla for salida in salidas]
    archivos.append(_escribir_manifiesto(config, Comando.SIMULATE, semillas, archivos,
                                         base / DIR_DATOS / 'manifest.json'))
    return archivos


def _ajustar(datos: PanelDataset, spec: ModelSpec, rprop: RpropConfig, semilla: int, t_ent: int,
             metodos: Tuple[MetodoErrores, ...], n_jobs: int,
             consola: Optional[ConsoleLogger]) -> Tuple[Optional[FitResult], List[str]]:
    try:
        return rprop_fit(datos, spec, rprop, semilla, t_ent, metodos, n_jobs, consola), []
    except FallaAjuste as error:
        logger.error(f"Ajuste fallido: {error}")
        return None, error.diagnosticos or [str(error)]


def _documento_ajuste(nombre: str, semilla: int, resultado: Optional[FitResult],
                      diagnosticos: List[str], spec: ModelSpec) -> Dict[str, object]:
    if resultado is None:
        return {'unit': nombre, 'status': 'failed', 'seed': semilla, 'diagnostics': diagnosticos}
    layout = construir_layout(spec)
    estimaciones = valores_por_entrada(resultado.params_hat, layout)
    k = len(layout)
    se_opg = resultado.se_opg if resultado.se_opg is not None else np.full(k, np.nan)
    se_hessiana = resultado.se_hessian if resultado.se_hessian is not None else np.full(k, np.nan)
    return {
        'unit': nombre,
        'status': 'ok',
        'seed': semilla,
        'loglik': resultado.loglik,
        'start_index': resultado.start_index,
        'start_logliks': a_nulos(resultado.logliks_inicios),
        'training_occasions': resultado.t_entrenamiento,
        'duration_seconds': round(resultado.duracion, 3),
        'parameters': [
            {'name': entrada.nombre, 'estimate': float(estimaciones[j]),
             'se_opg': a_nulos([se_opg[j]])[0], 'se_hessian': a_nulos([se_hessiana[j]])[0]}
            for j, entrada in enumerate(layout)
        ],
        'fixed': {grupo: np.asarray(spec.valor_fijo(grupo)).tolist() for grupo in sorted(spec.fixed)},
        'theta': resultado.theta_hat.theta.tolist(),
        'loglik_trace': resultado.loglik_trace,
        'params': resultado.params_hat.a_dict(),
        'diagnostics': resultado.diagnosticos,
    }


def cmd_fit(config: RunConfig, consola: ConsoleLogger) -> List[Path]:
    """Ajuste Rprop de cada panel en su ventana de entrenamiento"""
    spec = config.construir_spec()
    rprop = config.construir_rprop()
    metodos = config.metodos_errores()
    unidades = _cargar_unidades(config)
    semillas = [config.seed + u for u in range(len(unidades))]

    if config.jobs != 1 and len(unidades) > 1:
        ajustes = Parallel(n_jobs=config.jobs)(
            delayed(_ajustar)(datos, spec, rprop, semilla, config.t_entrenamiento(datos.T), metodos, 1, None)
            for (_, datos, _), semilla in zip(unidades, semillas)
        )
    else:
        ajustes = [_ajustar(datos, spec, rprop, semilla, config.t_entrenamiento(datos.T), metodos,
                            config.jobs, consola)
                   for (_, datos, _), semilla in zip(unidades, semillas)]

    base = config.directorio_salida
    archivos: List[Path] = []
    for (nombre, datos, _), semilla, (resultado, diagnosticos) in zip(unidades, semillas, ajustes):
        directorio = base / DIR_AJUSTE / nombre
        archivos.append(escribir_json(_documento_ajuste(nombre, semilla, resultado, diagnosticos, spec),
                                      directorio / 'fit.json'))
        if resultado is None:
            consola.log_evento("AJUSTE_FALLIDO", nombre)
            continue
        consola.reporte_ajuste(nombre, resultado)
        tabla = tabla_parametros(resultado.theta_hat.nombres,
                                 valores_por_entrada(resultado.params_hat, resultado.theta_hat.layout),
                                 resultado.se_opg, resultado.se_hessian,
                                 {grupo: spec.valor_fijo(grupo) for grupo in sorted(spec.fixed)})
        archivos.append(escribir_csv(tabla, directorio / 'parametros.csv'))
        filtrado = run_filter(datos, resultado.params_hat, spec, t_range=(0, resultado.t_entrenamiento))
        archivos.append(escribir_csv(tabla_filtrado(datos.ids, filtrado), directorio / 'filtered.csv'))

    if all(resultado is None for resultado, _ in ajustes):
        raise FallaAjuste("ningún panel pudo ajustarse", [d for _, ds in ajustes for d in ds])
    archivos.append(_escribir_manifiesto(config, Comando.FIT, semillas, archivos,
                                         base / DIR_AJUSTE / 'manifest.json'))
    return archivos


def _parametros_ajustados(config: RunConfig, nombre: str, spec: ModelSpec) -> Optional[ParameterSet]:
    """Parámetros del fit.json de una unidad; None si el ajuste falló"""
    ruta = config.directorio_salida / DIR_AJUSTE / nombre / 'fit.json'
    if not ruta.exists():
        raise ErrorConfiguracion(f"no hay ajuste para '{nombre}' en '{ruta}': ejecute primero fit")
    documento = leer_json(ruta)
    if documento.get('status') != 'ok':
        return None
    return completar_parametros(documento['params'], spec)


def _split(config: RunConfig, T: int) -> int:
    split = config.t_entrenamiento(T)
    if not 0 < split < T:
        raise ErrorConfiguracion(f"la ventana de pronóstico queda vacía: split={split}, T={T}")
    return split


def cmd_forecast(config: RunConfig, consola: ConsoleLogger) -> List[Path]:
    """Filtro sobre todo el horizonte con parámetros congelados"""
    spec = config.construir_spec()
    modo = config.modo_pronostico()
    base = config.directorio_salida
    archivos: List[Path] = []
    for nombre, datos, _ in _cargar_unidades(config):
        params = _parametros_ajustados(config, nombre, spec)
        if params is None:
            logger.warning(f"{nombre}: ajuste fallido, sin pronóstico")
            continue
        split = _split(config, datos.T)
        resultado = run_filter(datos, params, spec, modo=modo, t_corte=split)
        tabla = tabla_filtrado(datos.ids, resultado)
        directorio = base / DIR_PRONOSTICO / nombre
        archivos.append(escribir_csv(tabla[tabla['t'] <= split], directorio / 'observed.csv'))
        archivos.append(escribir_csv(tabla[tabla['t'] > split], directorio / 'forecast.csv'))

        resumen = resumen_cambios(probabilidad_evaluada(resultado, split), split, config.corte)
        resumen.update({'unit': nombre, 'split': split, 'mode': modo.value, 'cutoff': config.corte,
                        'ids': datos.ids.tolist()})
        archivos.append(escribir_json(resumen, directorio / 'resumen.json'))
        consola.log_evento("PRONOSTICO", f"{nombre} régimen 2 al final={resumen['proporcion_final']:.3f}")
    if not archivos:
        raise ErrorEvaluacion("no hay ajustes exitosos que pronosticar")
    archivos.append(_escribir_manifiesto(config, Comando.FORECAST, [config.seed], archivos,
                                         base / DIR_PRONOSTICO / 'manifest.json'))
    return archivos


def _leer_pronostico(config: RunConfig, nombre: str, datos: PanelDataset,
                     U1: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Probabilidad evaluada N x T y latentes pronosticados N x T x U1 desde los CSV de forecast"""
    directorio = config.directorio_salida / DIR_PRONOSTICO / nombre
    rutas = (directorio / 'observed.csv', directorio / 'forecast.csv', directorio / 'resumen.json')
    if not all(ruta.exists() for ruta in rutas):
        raise ErrorEvaluacion(f"faltan pronósticos para '{nombre}': ejecute primero forecast")
    split = int(leer_json(rutas[2])['split'])
    posicion = {valor: n for n, valor in enumerate(datos.ids)}
    prS2 = np.full((datos.N, datos.T), np.nan)
    eta = np.full((datos.N, datos.T, U1), np.nan)
    columnas_eta = [f"eta_predicted_{j}" for j in range(1, U1 + 1)]
    for ruta, columna in ((rutas[0], 'prS2_filtered'), (rutas[1], 'prS2_predicted')):
        tabla = pd.read_csv(ruta)
        filas = tabla['id'].map(posicion).to_numpy()
        ocasiones = tabla['t'].to_numpy(dtype=int) - 1
        prS2[filas, ocasiones] = tabla[columna].to_numpy(dtype=float)
        eta[filas, ocasiones] = tabla[columnas_eta].to_numpy(dtype=float)
    return prS2, eta, split


def _recuperacion(config: RunConfig, unidades: List[Unidad], verdades: Dict[str, ParameterSet],
                  spec: ModelSpec, destino: Path) -> List[Path]:
    archivos: List[Path] = []
    if len(unidades) >= 2:
        estimaciones = [_parametros_ajustados(config, nombre, spec) for nombre, _, _ in unidades]
        verdad = verdades[unidades[0][0]]
        tabla, excluidas = recovery_stats(estimaciones, verdad, spec)
        archivos.append(escribir_csv(tabla, destino / 'recovery.csv'))
        archivos.append(escribir_json({'replications': len(unidades), 'excluded': excluidas},
                                      destino / 'recovery_resumen.json'))
    else:
        logger.info("Recuperación omitida: se necesitan al menos dos replicaciones")

    condiciones = config.evaluation.get('conditions') or {}
    if condiciones:
        tablas = {}
        for etiqueta, directorio in condiciones.items():
            ruta = Path(directorio) / DIR_EVALUACION / 'recovery.csv'
            if not ruta.exists():
                raise ErrorEvaluacion(f"la condición '{etiqueta}' no tiene tabla de recuperación en '{ruta}'")
            tablas[str(etiqueta)] = pd.read_csv(ruta)
        archivos.append(escribir_csv(recuperacion_comparada(tablas), destino / 'recovery_comparada.csv'))
    return archivos


def cmd_evaluate(config: RunConfig, consola: ConsoleLogger) -> List[Path]:
    """Métricas de régimen, puntaje de pronóstico y recuperación de parámetros"""
    spec = config.construir_spec()
    base = config.directorio_salida
    destino = base / DIR_EVALUACION
    unidades = _cargar_unidades(config)
    archivos: List[Path] = []
    metricas: List[RegimeMetrics] = []
    series = []
    verdades: Dict[str, ParameterSet] = {}

    for nombre, datos, directorio_verdad in unidades:
        if directorio_verdad is None:
            raise ErrorEvaluacion(f"'{nombre}' no tiene archivos de verdad")
        regimenes, eta_verdad, verdades[nombre] = leer_verdad(directorio_verdad, spec, datos.ids)
        prS2, eta, split = _leer_pronostico(config, nombre, datos, spec.U1)
        metrica = regime_metrics(prS2, regimenes, split, config.corte)
        serie = score_function(eta, eta_verdad, (split, datos.T))
        metricas.append(metrica)
        series.append(pd.DataFrame({'unit': nombre, 't': serie.t, 'delta': serie.delta}))

        archivos.append(escribir_csv(tabla_metricas(metrica), destino / nombre / 'metrics.csv'))
        archivos.append(escribir_csv(tabla_conteos(metrica), destino / nombre / 'counts.csv'))
        consola.reporte_evaluacion(nombre, metrica)

    agregadas = sumar_conteos(metricas)
    puntajes = pd.concat(series, ignore_index=True)
    archivos.append(escribir_csv(promediar_metricas(metricas), destino / 'metrics_mean.csv'))
    archivos.append(escribir_csv(tabla_metricas(agregadas), destino / 'metrics_pooled.csv'))
    archivos.append(escribir_csv(tabla_conteos(agregadas), destino / 'counts_pooled.csv'))
    archivos.append(escribir_csv(puntajes, destino / 'score_series.csv'))
    archivos.append(escribir_csv(puntajes.groupby('t', as_index=False)['delta'].mean(),
                                 destino / 'score_mean.csv'))
    archivos.extend(_recuperacion(config, unidades, verdades, spec, destino))
    archivos.append(_escribir_manifiesto(config, Comando.EVALUATE, [config.seed], archivos,
                                         destino / 'manifest.json'))
    return archivos


COMANDOS = {
    Comando.SIMULATE: cmd_simulate,
    Comando.FIT: cmd_fit,
    Comando.FORECAST: cmd_forecast,
    Comando.EVALUATE: cmd_evaluate,
}


def ejecutar(argv: Optional[Sequence[str]] = None, consola: Optional[ConsoleLogger] = None) -> int:
    """
    Ejecuta un subcomando y devuelve el código de salida

    0 éxito, 2 error de configuración o evaluación, 3 falla numérica.
    """
    args = construir_parser().parse_args(argv)
    if args.verbose:
        cambiar_nivel_logging(logging.DEBUG)
    comando = Comando(args.comando)
    consola = consola or ConsoleLogger()
    try:
        config = RunConfig.desde_yaml(args.config).aplicar_argumentos(args.seed, args.out, args.jobs, args.fast)
        config.validar(comando)
        logger.info(f"Comando {comando.value}: salida en {config.directorio_salida}")
        archivos = COMANDOS[comando](config, consola)
    except (ErrorConfiguracion, ErrorEvaluacion) as error:
        logger.error(f"{comando.value}: {error}")
        return CodigoSalida.ERROR_CONFIGURACION.value
    except FallaNumerica as error:
        logger.error(f"{comando.value}: falla numérica: {error}")
        return CodigoSalida.FALLA_NUMERICA.value
    except ErrorRSSS as error:
        logger.error(f"{comando.value}: {error}")
        return CodigoSalida.ERROR_CONFIGURACION.value
    except OSError as error:
        logger.error(f"{comando.value}: no se pudo escribir la salida: {error}")
        return CodigoSalida.ERROR_CONFIGURACION.value

    consola.reporte_final(comando.value, [str(a) for a in archivos])
    return CodigoSalida.EXITO.value
