"""
Estimación por máxima verosimilitud aproximada: gradientes numéricos, Rprop y errores estándar
src/estimacion.py
"""

import time
from typing import Callable, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np
from joblib import Parallel, delayed

from src.constants import (
    AR_INICIAL, COND_MAXIMA, FRACCION_ENTRENAMIENTO, FRACCION_VARIANZA_MEDICION,
    FRACCION_VARIANZA_PROCESO, GAMMA1_FIJO, INTERVALO_REPORTE_OPTIMIZADOR, PASO_GRADIENTE,
    PASO_HESSIANA,
)
from src.enums import MetodoErrores
from src.excepciones import ErrorEstimacion, FallaAjuste, FallaFiltro
from src.filtro import run_filter
from src.models import FitResult, ModelSpec, PanelDataset, ParameterSet, ParameterVector, RpropConfig
from src.parametrizacion import construir_layout, jacobiano_transformacion, pack, unpack
from src.utils.logger_config import obtener_logger

if TYPE_CHECKING:
    from src.utils.console_logger import ConsoleLogger

logger = obtener_logger("estimacion")

FALLAS_VEROSIMILITUD = (FallaFiltro, ErrorEstimacion, np.linalg.LinAlgError, FloatingPointError)


def ventana_entrenamiento(T: int, t_entrenamiento: Optional[int] = None) -> int:
    """Número de ocasiones usadas para estimar (por defecto la primera mitad)"""
    if t_entrenamiento is None:
        return int(np.floor(T * FRACCION_ENTRENAMIENTO))
    return int(min(max(t_entrenamiento, 0), T))


def _como_arreglo(theta) -> np.ndarray:
    return theta.theta if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float)


def loglik_por_individuo(theta, data: PanelDataset, spec: ModelSpec,
                         t_entrenamiento: Optional[int] = None) -> np.ndarray:
    """
    Suma por individuo de log f(y_it | D_{1:t-1}) en la ventana de entrenamiento

    Cualquier falla del filtro devuelve -inf para todos los individuos.
    """
    fin = ventana_entrenamiento(data.T, t_entrenamiento)
    if fin == 0:
        return np.zeros(data.N)
    try:
        with np.errstate(over='ignore', invalid='ignore', divide='ignore', under='ignore'):
            params = unpack(_como_arreglo(theta), spec)
            resultado = run_filter(data, params, spec, t_range=(0, fin))
    except FALLAS_VEROSIMILITUD as error:
        logger.debug(f"Verosimilitud -inf: {error}")
        return np.full(data.N, -np.inf)
    valores = resultado.loglik_individual
    if not np.all(np.isfinite(valores)):
        return np.full(data.N, -np.inf)
    return valores


def total_loglik(theta, data: PanelDataset, spec: ModelSpec,
                 t_entrenamiento: Optional[int] = None) -> float:
    """Log-verosimilitud total en la ventana de entrenamiento; las fallas valen -inf"""
    return float(np.sum(loglik_por_individuo(theta, data, spec, t_entrenamiento)))


def diferencias_centrales(funcion: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                          h: float = PASO_GRADIENTE, n_jobs: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jacobiano por diferencias centrales con paso h * max(1, |x_j|)

    Si una de las dos evaluaciones es -inf se usa la diferencia de un lado;
    si lo son ambas la derivada se fija en 0 y se marca.

    Args:
        funcion: Función de R^k en R^m (o escalar)
        x: Punto de evaluación
        h: Paso relativo
        n_jobs: Trabajadores de joblib para evaluar las sondas

    Returns:
        (jacobiano m x k, banderas m x k de coordenadas sin información)
    """
    x = np.asarray(x, dtype=float)
    k = x.size
    pasos = h * np.maximum(1.0, np.abs(x))
    sondas = []
    for j in range(k):
        e = np.zeros(k)
        e[j] = pasos[j]
        sondas.extend([x + e, x - e])

    f0 = np.atleast_1d(np.asarray(funcion(x), dtype=float))
    if n_jobs == 1:
        valores = [funcion(punto) for punto in sondas]
    else:
        valores = Parallel(n_jobs=n_jobs)(delayed(funcion)(punto) for punto in sondas)
    valores = [np.atleast_1d(np.asarray(v, dtype=float)) for v in valores]

    jacobiano = np.zeros((f0.size, k))
    sin_informacion = np.zeros((f0.size, k), dtype=bool)
    for j in range(k):
        f_mas, f_menos = valores[2 * j], valores[2 * j + 1]
        ok_mas, ok_menos, ok_0 = np.isfinite(f_mas), np.isfinite(f_menos), np.isfinite(f0)
        with np.errstate(invalid='ignore'):
            central = (f_mas - f_menos) / (2.0 * pasos[j])
            adelante = (f_mas - f0) / pasos[j]
            atras = (f0 - f_menos) / pasos[j]
        columna = np.where(ok_mas & ok_menos, central,
                           np.where(ok_mas & ok_0, adelante,
                                    np.where(ok_menos & ok_0, atras, 0.0)))
        jacobiano[:, j] = columna
        sin_informacion[:, j] = ~ok_mas & ~ok_menos
    return jacobiano, sin_informacion


def gradiente_funcion(funcion: Callable[[np.ndarray], float], x: np.ndarray,
                      h: float = PASO_GRADIENTE, n_jobs: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Gradiente de una función escalar y banderas de coordenadas sin información"""
    jacobiano, banderas = diferencias_centrales(funcion, x, h, n_jobs)
    return jacobiano[0], banderas[0]


def numerical_gradient(theta, data: PanelDataset, spec: ModelSpec, h: float = PASO_GRADIENTE,
                       t_entrenamiento: Optional[int] = None,
                       n_jobs: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradiente de total_loglik por diferencias centrales

    Returns:
        (gradiente, banderas de coordenadas donde ambas sondas fueron -inf)
    """
    def objetivo(x: np.ndarray) -> float:
        return total_loglik(x, data, spec, t_entrenamiento)

    gradiente, banderas = gradiente_funcion(objetivo, _como_arreglo(theta), h, n_jobs)
    if banderas.any():
        logger.debug(f"Gradiente sin información en {int(banderas.sum())} coordenadas")
    return gradiente, banderas


def hessiana_numerica(funcion: Callable[[np.ndarray], float], x: np.ndarray,
                      h: float = PASO_HESSIANA) -> np.ndarray:
    """Hessiana por diferencias centrales de segundo orden, simetrizada"""
    x = np.asarray(x, dtype=float)
    k = x.size
    pasos = h * np.maximum(1.0, np.abs(x))
    f0 = funcion(x)
    H = np.zeros((k, k))
    base = np.eye(k) * pasos
    for j in range(k):
        ej = base[j]
        H[j, j] = (funcion(x + ej) - 2.0 * f0 + funcion(x - ej)) / pasos[j] ** 2
        for m in range(j + 1, k):
            em = base[m]
            valor = (funcion(x + ej + em) - funcion(x + ej - em)
                     - funcion(x - ej + em) + funcion(x - ej - em)) / (4.0 * pasos[j] * pasos[m])
            H[j, m] = H[m, j] = valor
    return H


def invertir_informacion(informacion: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Inversa robusta de una matriz de información

    Las coordenadas sin información o que participan en direcciones singulares
    quedan fuera de la inversión y se marcan como ausentes.

    Returns:
        (covarianza con NaN en filas/columnas ausentes, máscara de ausentes)
    """
    k = informacion.shape[0]
    ausentes = ~np.isfinite(np.diag(informacion)) | (np.diag(informacion) <= 0.0)
    ausentes |= ~np.all(np.isfinite(informacion), axis=1)
    while True:
        activos = np.flatnonzero(~ausentes)
        if activos.size == 0:
            break
        sub = informacion[np.ix_(activos, activos)]
        autovalores, autovectores = np.linalg.eigh(sub)
        limite = autovalores[-1] / COND_MAXIMA
        nulos = autovalores <= limite
        if not nulos.any():
            break
        implicados = np.any(np.abs(autovectores[:, nulos]) > 1e-3, axis=1)
        ausentes[activos[implicados]] = True

    covarianza = np.full((k, k), np.nan)
    activos = np.flatnonzero(~ausentes)
    if activos.size:
        covarianza[np.ix_(activos, activos)] = np.linalg.inv(informacion[np.ix_(activos, activos)])
    return covarianza, ausentes


def errores_restringidos(covarianza: np.ndarray, theta_hat: ParameterVector, spec: ModelSpec) -> np.ndarray:
    """Errores estándar en la escala restringida por el método delta"""
    J = jacobiano_transformacion(theta_hat, spec)
    ausentes = np.isnan(np.diag(covarianza))
    limpia = np.where(np.isnan(covarianza), 0.0, covarianza)
    varianzas = np.einsum('ij,jk,ik->i', J, limpia, J)
    afectadas = (np.abs(J[:, ausentes]) > 0.0).any(axis=1)
    errores = np.sqrt(np.maximum(varianzas, 0.0))
    errores[afectadas] = np.nan
    return errores


def errores_opg(funcion_individual: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                h: float = PASO_GRADIENTE, n_jobs: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Errores estándar OPG en la escala de x

    I_OPG = sum_i g_i g_i' con g_i el score del individuo i.

    Returns:
        (errores estándar con NaN para coordenadas ausentes, covarianza)
    """
    scores, _ = diferencias_centrales(funcion_individual, x, h, n_jobs)
    informacion = scores.T @ scores
    covarianza, _ = invertir_informacion(informacion)
    return np.sqrt(np.diag(covarianza)), covarianza


def opg_standard_errors(theta_hat: ParameterVector, data: PanelDataset, spec: ModelSpec,
                        h: float = PASO_GRADIENTE, t_entrenamiento: Optional[int] = None,
                        n_jobs: int = 1) -> np.ndarray:
    """Errores estándar OPG reportados en la escala restringida"""
    def por_individuo(x: np.ndarray) -> np.ndarray:
        return loglik_por_individuo(x, data, spec, t_entrenamiento)

    _, covarianza = errores_opg(por_individuo, theta_hat.theta, h, n_jobs)
    errores = errores_restringidos(covarianza, theta_hat, spec)
    if np.isnan(errores).any():
        ausentes = [nombre for nombre, e in zip(theta_hat.nombres, errores) if np.isnan(e)]
        logger.warning(f"Errores OPG ausentes para: {', '.join(ausentes)}")
    return errores


def hessian_standard_errors(theta_hat: ParameterVector, data: PanelDataset, spec: ModelSpec,
                            h: float = PASO_HESSIANA,
                            t_entrenamiento: Optional[int] = None) -> np.ndarray:
    """
    Errores estándar desde la Hessiana numérica negativa

    Si -H no es definida positiva todos los errores quedan ausentes.
    """
    def objetivo(x: np.ndarray) -> float:
        return total_loglik(x, data, spec, t_entrenamiento)

    H = hessiana_numerica(objetivo, theta_hat.theta, h)
    informacion = -0.5 * (H + H.T)
    if not np.all(np.isfinite(informacion)) or np.linalg.eigvalsh(informacion)[0] <= 0.0:
        logger.warning("La Hessiana negativa no es definida positiva: errores estándar ausentes")
        return np.full(len(theta_hat), np.nan)
    covarianza, _ = invertir_informacion(informacion)
    return errores_restringidos(covarianza, theta_hat, spec)


def parametros_neutros(data: PanelDataset, spec: ModelSpec) -> ParameterSet:
    """
    Punto de partida neutro con escalas tomadas de los datos

    Cargas libres en 1, varianzas residuales como fracción de la varianza del
    ítem, autorregresión 0.5 en la diagonal y efectos en 0.
    """
    var_y1 = np.nanvar(data.y1.reshape(-1, data.O1), axis=0)
    var_y1 = np.where(np.isfinite(var_y1) & (var_y1 > 0.0), var_y1, 1.0)
    var_y2 = np.var(data.y2, axis=0)
    var_y2 = np.where(var_y2 > 0.0, var_y2, 1.0)

    marcadores = [int(np.flatnonzero(~np.isnan(col) & (np.nan_to_num(col) != 0.0))[0])
                  for col in spec.loading_pattern_1.T]
    var_factor = var_y1[marcadores]

    valores = {
        'Lambda1': np.where(np.isnan(spec.loading_pattern_1), 1.0, spec.loading_pattern_1),
        'R1': FRACCION_VARIANZA_MEDICION * var_y1,
        'Lambda2': np.where(np.isnan(spec.loading_pattern_2), 1.0, spec.loading_pattern_2),
        'R2': FRACCION_VARIANZA_MEDICION * var_y2,
        'b1': np.stack([np.zeros(spec.U1), np.full(spec.U1, 0.1)]),
        'b2': np.zeros(spec.forma_grupo('b2')),
        'B3': np.full(spec.U1, AR_INICIAL),
        'B4': np.zeros(spec.U1),
        'Q1': FRACCION_VARIANZA_PROCESO * var_factor,
        'Q2': FRACCION_VARIANZA_PROCESO * var_factor,
        'gamma1': GAMMA1_FIJO,
        'gamma2': np.zeros(spec.U2),
        'gamma3': np.zeros(spec.U1),
        'gamma4': np.zeros(spec.U1),
        'P12': 0.01,
    }
    if not spec.diagonal_B:
        valores['B3'] = np.eye(spec.U1) * AR_INICIAL
        valores['B4'] = np.zeros((spec.U1, spec.U1))
    libres = {grupo: valor for grupo, valor in valores.items() if not spec.esta_fijo(grupo)}
    return ParameterSet.desde_dict(libres, spec)


def valores_iniciales(data: PanelDataset, spec: ModelSpec, rng: np.random.Generator,
                      dispersion: float) -> ParameterVector:
    """Arranque aleatorio: perturbación normal de theta alrededor del punto neutro"""
    neutro = pack(parametros_neutros(data, spec), spec)
    ruido = rng.normal(0.0, dispersion, size=len(neutro))
    return ParameterVector(neutro.theta + ruido, neutro.layout)


def rprop_maximizar(funcion: Callable[[np.ndarray], float],
                    gradiente: Callable[[np.ndarray], np.ndarray],
                    theta0: np.ndarray, config: RpropConfig,
                    inicio: int = 0,
                    consola: Optional['ConsoleLogger'] = None) -> Tuple[np.ndarray, float, List[float], List[Tuple[float, float]]]:
    """
    Rprop+ con retroceso de pesos, en dirección de ascenso

    Se detiene cuando |L_k - L_{k-1}| < tol durante `patience` iteraciones
    consecutivas o al llegar a max_iter. Un candidato con verosimilitud -inf se
    descarta: se vuelve al punto previo, se reducen los pasos y se registra la
    verosimilitud previa.

    Returns:
        (mejor theta, mejor verosimilitud, traza por iteración, (paso mínimo, paso máximo) por iteración)
    """
    theta = np.array(theta0, dtype=float)
    actual = funcion(theta)
    if not np.isfinite(actual):
        return theta, -np.inf, [], []

    k = theta.size
    delta = np.full(k, config.delta0)
    gradiente_previo = np.zeros(k)
    paso_previo = np.zeros(k)
    mejor_theta, mejor = theta.copy(), actual
    traza: List[float] = []
    rango_pasos: List[Tuple[float, float]] = []
    consecutivos = 0

    for iteracion in range(1, config.max_iter + 1):
        g = np.asarray(gradiente(theta), dtype=float)
        producto = g * gradiente_previo
        crece = producto > 0.0
        decrece = producto < 0.0
        delta[crece] = np.minimum(delta[crece] * config.eta_plus, config.delta_max)
        delta[decrece] = np.maximum(delta[decrece] * config.eta_minus, config.delta_min)

        paso = np.sign(g) * delta
        paso[decrece] = -paso_previo[decrece]
        g[decrece] = 0.0

        candidato = theta + paso
        valor = funcion(candidato)
        if np.isfinite(valor):
            mejora = valor - actual
            theta, actual = candidato, valor
            gradiente_previo, paso_previo = g, paso
        else:
            mejora = 0.0
            delta = np.maximum(delta * config.eta_minus, config.delta_min)
            gradiente_previo = np.zeros(k)
            paso_previo = np.zeros(k)

        traza.append(float(actual))
        rango_pasos.append((float(delta.min()), float(delta.max())))
        if actual > mejor:
            mejor_theta, mejor = theta.copy(), actual

        if consola is not None and iteracion % INTERVALO_REPORTE_OPTIMIZADOR == 0:
            consola.reporte_optimizador(inicio, iteracion, actual, mejora, delta.min(), delta.max())

        consecutivos = consecutivos + 1 if abs(mejora) < config.tol else 0
        if consecutivos >= config.patience:
            logger.debug(f"Arranque {inicio}: convergencia en la iteración {iteracion}")
            break

    return mejor_theta, float(mejor), traza, rango_pasos


def rprop_fit(data: PanelDataset, spec: ModelSpec, config: RpropConfig, seed: int,
              t_entrenamiento: Optional[int] = None,
              metodos_errores: Sequence[MetodoErrores] = (MetodoErrores.OPG,),
              n_jobs: int = 1,
              consola: Optional['ConsoleLogger'] = None) -> FitResult:
    """
    Ajuste por máxima verosimilitud con varios arranques de Rprop

    Args:
        data: Panel completo; solo se usa la ventana de entrenamiento
        spec: Especificación del modelo
        config: Hiperparámetros del optimizador
        seed: Semilla de los arranques
        t_entrenamiento: Ocasiones de entrenamiento (por defecto T/2)
        metodos_errores: Estimadores de errores estándar a calcular
        n_jobs: Trabajadores para las sondas del gradiente
        consola: Reportes periódicos opcionales

    Returns:
        Resultado del mejor arranque

    Raises:
        FallaAjuste: si todos los arranques divergen
    """
    inicio_reloj = time.perf_counter()
    fin = ventana_entrenamiento(data.T, t_entrenamiento)
    layout = construir_layout(spec)
    rng = np.random.default_rng(seed)
    logger.info(f"Ajuste Rprop: N={data.N}, T entrenamiento={fin}, {len(layout)} parámetros libres, "
                f"{config.n_starts} arranques")

    def objetivo(x: np.ndarray) -> float:
        return total_loglik(x, data, spec, fin)

    def gradiente(x: np.ndarray) -> np.ndarray:
        return numerical_gradient(x, data, spec, config.h, fin, n_jobs)[0]

    resultados = []
    diagnosticos = []
    for indice in range(config.n_starts):
        theta0 = valores_iniciales(data, spec, rng, config.dispersion_inicial)
        theta, loglik, traza, _ = rprop_maximizar(objetivo, gradiente, theta0.theta, config, indice, consola)
        if not np.isfinite(loglik):
            mensaje = f"arranque {indice}: verosimilitud no finita en el punto inicial"
            logger.warning(mensaje)
            diagnosticos.append(mensaje)
        else:
            logger.info(f"Arranque {indice}: loglik={loglik:.4f} en {len(traza)} iteraciones")
            diagnosticos.append(f"arranque {indice}: loglik={loglik:.4f}, iteraciones={len(traza)}")
        resultados.append((theta, loglik, traza))

    logliks = [r[1] for r in resultados]
    if not np.any(np.isfinite(logliks)):
        raise FallaAjuste("todos los arranques divergieron", diagnosticos)

    ganador = int(np.nanargmax(np.where(np.isfinite(logliks), logliks, np.nan)))
    theta_hat = ParameterVector(resultados[ganador][0], layout)
    params_hat = unpack(theta_hat, spec)

    se_opg = se_hessiana = None
    if MetodoErrores.OPG in metodos_errores:
        se_opg = opg_standard_errors(theta_hat, data, spec, config.h, fin, n_jobs)
    if MetodoErrores.HESSIANA in metodos_errores:
        se_hessiana = hessian_standard_errors(theta_hat, data, spec, t_entrenamiento=fin)

    return FitResult(
        theta_hat=theta_hat,
        params_hat=params_hat,
        loglik=float(logliks[ganador]),
        loglik_trace=resultados[ganador][2],
        se_opg=se_opg,
        se_hessian=se_hessiana,
        start_index=ganador,
        semilla=seed,
        t_entrenamiento=fin,
        duracion=time.perf_counter() - inicio_reloj,
        logliks_inicios=[float(x) for x in logliks],
        diagnosticos=diagnosticos,
    )

