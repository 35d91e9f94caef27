"""
Filtro de Kim extendido: ramas de Kalman aumentadas, filtro de Hamilton y colapso
src/filtro.py

Todos los arreglos llevan ejes de lote al frente. Dentro de un paso las ramas
se indexan (i, s, s'), con s el régimen actual y s' el previo.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from src.enums import ModoPronostico
from src.excepciones import ErrorDimensiones, FallaFiltro
from src.models import (
    AugmentedSystem, BranchRecord, DiagnosticoPaso, FilterState, ModelSpec, PanelDataset,
    ParameterSet, ResultadoFiltro,
)
from src.parametrizacion import matriz_transicion
from src.puntajes_factoriales import puntajes_desde_parametros
from src.utils.logger_config import obtener_logger

logger = obtener_logger("filtro")

LOG_2PI = np.log(2.0 * np.pi)
PROB_MINIMA = 1e-300


def _simetrizar(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def construir_sistema(params: ParameterSet, spec: ModelSpec, scores: np.ndarray) -> AugmentedSystem:
    """
    Matrices aumentadas para el estado (eta1, zeta2)

    Args:
        params: Parámetros del modelo
        spec: Especificación
        scores: Puntajes de Bartlett N x U2

    Returns:
        Sistema con interceptos y transiciones específicos de cada individuo
    """
    U1, S = spec.U1, spec.S
    d = spec.d_aug
    N = scores.shape[0]
    identidad = np.eye(U1)

    Lambda_aug = np.zeros((S, spec.O1, d))
    Lambda_aug[:, :, :U1] = params.Lambda1

    B1_aug = np.zeros((N, S, d))
    B1_aug[:, :, :U1] = params.b1[None] + np.einsum('skl,nl->nsk', params.b2, scores)

    # La interacción usa el primer factor entre-individuos
    B3_aug = np.zeros((N, S, d, d))
    B3_aug[:, :, :U1, :U1] = params.B3[None] + params.B4[None] * scores[:, 0, None, None, None]
    B3_aug[:, :, :U1, U1:] = identidad
    B3_aug[:, :, U1:, U1:] = identidad

    Q_aug = np.zeros((S, d, d))
    Q_aug[:, :U1, :U1] = np.stack([np.diag(q) for q in params.Q1])

    return AugmentedSystem(Lambda_aug, B1_aug, B3_aug, Q_aug, np.array(params.R1))


def init_state(spec: ModelSpec, params: ParameterSet, N: int) -> FilterState:
    """
    Estado inicial compartido por todos los individuos

    eta = 0, P = blockdiag(I, Q2), Pr[S_i0 = 1] = prob_inicial_regimen1.
    """
    U1, S, d = spec.U1, spec.S, spec.d_aug
    P0 = np.zeros((d, d))
    P0[:U1, :U1] = np.eye(U1)
    P0[U1:, U1:] = np.diag(params.Q2)
    prS0 = np.array([spec.prob_inicial_regimen1, 1.0 - spec.prob_inicial_regimen1])
    return FilterState(
        eta=np.zeros((N, S, d)),
        P=np.broadcast_to(P0, (N, S, d, d)).copy(),
        prS=np.broadcast_to(prS0, (N, S)).copy(),
        loglik_t=0.0,
        t=0,
    )


def kalman_predict(eta_prev: np.ndarray, P_prev: np.ndarray, B1: np.ndarray,
                   B3: np.ndarray, Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Propagación a un paso de media y covarianza

    eta_pred = B1 + B3 eta_prev; P_pred = B3 P_prev B3' + Q
    """
    eta_pred = B1 + np.einsum('...jk,...k->...j', B3, eta_prev)
    P_pred = B3 @ P_prev @ np.swapaxes(B3, -1, -2) + Q
    return eta_pred, _simetrizar(P_pred)


def joseph_covariance(P_pred: np.ndarray, K: np.ndarray, Lambda: np.ndarray,
                      R_diag: np.ndarray) -> np.ndarray:
    """
    Actualización de Joseph: (I - K L) P (I - K L)' + K R K'

    R_diag contiene la diagonal de la covarianza de medición.
    """
    d = P_pred.shape[-1]
    I_KL = np.eye(d) - K @ Lambda
    ruido = (K * R_diag[..., None, :]) @ np.swapaxes(K, -1, -2)
    P_upd = I_KL @ P_pred @ np.swapaxes(I_KL, -1, -2) + ruido
    return _simetrizar(P_upd)


def _ubicar_falla(F: np.ndarray) -> Tuple[Optional[int], ...]:
    """Primer índice de lote con F no definida positiva, como (i, s, s') en base 1"""
    autovalores = np.linalg.eigvalsh(np.nan_to_num(F, nan=-1.0))
    malos = ~(autovalores[..., 0] > 0.0) | ~np.all(np.isfinite(F), axis=(-1, -2))
    indice = np.argwhere(malos)
    if indice.size == 0 or indice.shape[1] != 3:
        return (None, None, None)
    i, s, s_prev = (int(k) + 1 for k in indice[0])
    return (i, s, s_prev)


def kalman_update(eta_pred: np.ndarray, P_pred: np.ndarray, y: np.ndarray, observado: np.ndarray,
                  Lambda: np.ndarray, R_diag: np.ndarray):
    """
    Actualización de Kalman con enmascarado de faltantes

    Las filas de Lambda de ítems faltantes se anulan, su varianza residual se
    reemplaza por 1 y su innovación por 0, de modo que F queda en bloques y la
    densidad usa solo la dimensión observada. Si no hay ningún ítem observado
    la actualización es exactamente la predicción y la densidad queda ausente.

    Returns:
        (v, F, eta_upd, P_upd, loglik) con loglik = log N(v; 0, F) en el bloque
        observado (0 donde no hay datos)

    Raises:
        FallaFiltro: si F no es definida positiva
    """
    y = np.where(observado, y, 0.0)
    mascara = observado.astype(float)
    Lambda_m = Lambda * mascara[..., None]
    R_m = np.where(observado, R_diag, 1.0)

    v = mascara * (y - np.einsum('...jk,...k->...j', Lambda_m, eta_pred))
    PLt = P_pred @ np.swapaxes(Lambda_m, -1, -2)
    F = Lambda_m @ PLt
    F = _simetrizar(F) + R_m[..., None] * np.eye(R_m.shape[-1])

    try:
        L = np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        i, s, s_prev = _ubicar_falla(F)
        raise FallaFiltro("covarianza de innovación no definida positiva", i=i, s=s, s_prev=s_prev)
    if not np.all(np.isfinite(L)):
        i, s, s_prev = _ubicar_falla(F)
        raise FallaFiltro("covarianza de innovación no finita", i=i, s=s, s_prev=s_prev)

    # K = P L' F^-1, usando la simetría de F
    K = np.swapaxes(np.linalg.solve(F, np.swapaxes(PLt, -1, -2)), -1, -2)
    eta_upd = eta_pred + np.einsum('...jk,...k->...j', K, v)
    P_upd = joseph_covariance(P_pred, K, Lambda_m, R_m)

    n_obs = mascara.sum(axis=-1)
    log_det = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    F_inv_v = np.linalg.solve(F, v[..., None])[..., 0]
    cuadratica = np.sum(v * F_inv_v, axis=-1)
    loglik = -0.5 * (n_obs * LOG_2PI + log_det + cuadratica)

    sin_datos = n_obs == 0
    eta_upd = np.where(sin_datos[..., None], eta_pred, eta_upd)
    P_upd = np.where(sin_datos[..., None, None], P_pred, P_upd)
    loglik = np.where(sin_datos, 0.0, loglik)
    return v, F, eta_upd, P_upd, loglik


def hamilton_predict(prS_prev: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Conjunta a priori (..., s, s') = Pr[s | s'] Pr[s']"""
    return trans * prS_prev[..., None, :]


def hamilton_update(joint_prior: np.ndarray, branch_loglik: np.ndarray,
                    observado: Optional[np.ndarray] = None):
    """
    Actualización de Hamilton en espacio logarítmico

    Args:
        joint_prior: Conjunta a priori (..., s, s')
        branch_loglik: log f(y | s, s', D) por rama
        observado: Indicador por lote de al menos un dato observado

    Returns:
        (joint_post, prS, log_f): posterior conjunta, marginal por régimen actual
        y log f(y | D); log_f es NaN donde la ocasión no tiene datos

    Raises:
        FallaFiltro: si la densidad de predicción es nula o no finita
    """
    lote = joint_prior.shape[:-2]
    observado = np.ones(lote, dtype=bool) if observado is None else np.asarray(observado, dtype=bool)
    with np.errstate(divide='ignore'):
        log_prior = np.log(joint_prior)
    log_conjunta = np.where(joint_prior > 0.0, branch_loglik + log_prior, -np.inf)
    log_f = logsumexp(log_conjunta, axis=(-2, -1))

    invalidos = observado & ~np.isfinite(log_f)
    if np.any(invalidos):
        indice = np.argwhere(invalidos)[0]
        i = int(indice[0]) + 1 if indice.size else None
        raise FallaFiltro("densidad de predicción nula o no finita", i=i)

    log_f_seguro = np.where(observado, log_f, 0.0)
    joint_post = np.exp(log_conjunta - log_f_seguro[..., None, None])
    joint_post = np.where(observado[..., None, None], joint_post, joint_prior)
    prS = joint_post.sum(axis=-1)
    return joint_post, prS, np.where(observado, log_f, np.nan)


def _rama_dominante(joint_post: np.ndarray, desempates: Tuple[Optional[np.ndarray], ...]) -> np.ndarray:
    """Índice s' de mayor peso por fila (s); cada desempate solo actúa sobre filas aún nulas"""
    referencia = joint_post
    for desempate in desempates:
        if desempate is None:
            continue
        nula = referencia.max(axis=-1, keepdims=True) <= 0.0
        referencia = np.where(nula, np.broadcast_to(desempate, referencia.shape), referencia)
    return np.argmax(referencia, axis=-1)


def collapse(joint_post: np.ndarray, eta_upd: np.ndarray, P_upd: np.ndarray,
             joint_prior: Optional[np.ndarray] = None,
             prS_prev: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Colapsa las ramas (s, s') en momentos por régimen actual s

    W[s, s'] = Pr[s, s' | D] / Pr[s | D]. Si Pr[s | D] es nula el peso completo
    va a la rama s' dominante: primero por probabilidad conjunta filtrada, luego
    por la predicha y por último por Pr[S_{t-1} = s'].
    """
    prS = joint_post.sum(axis=-1)
    degenerado = prS < PROB_MINIMA
    with np.errstate(invalid='ignore', divide='ignore'):
        W = joint_post / prS[..., None]
    previa = None if prS_prev is None else prS_prev[..., None, :]
    dominante = np.eye(joint_post.shape[-1])[_rama_dominante(joint_post, (joint_prior, previa))]
    W = np.where(degenerado[..., None], dominante, W)
    if np.any(degenerado):
        logger.debug(f"Colapso degenerado en {int(degenerado.sum())} regímenes")

    eta = np.einsum('...k,...kj->...j', W, eta_upd)
    desvio = eta_upd - eta[..., None, :]
    dispersion = desvio[..., :, None] * desvio[..., None, :]
    P = np.einsum('...k,...kij->...ij', W, P_upd + dispersion)
    return eta, _simetrizar(P)


def _momentos_marginales(pesos: np.ndarray, medias: np.ndarray, covarianzas: np.ndarray, U1: int):
    """Media y varianza de la mezcla sobre los ejes de pesos, primeras U1 componentes"""
    ejes = tuple(range(1, pesos.ndim))
    media = np.sum(pesos[..., None] * medias[..., :U1], axis=ejes)
    varianzas = np.diagonal(covarianzas, axis1=-2, axis2=-1)[..., :U1]
    extra = (slice(None),) + (None,) * len(ejes)
    segundo = varianzas + (medias[..., :U1] - media[extra]) ** 2
    return media, np.sum(pesos[..., None] * segundo, axis=ejes)


def _aplicar_evento(joint_post: np.ndarray, prS_prev: np.ndarray, activo: np.ndarray) -> np.ndarray:
    """Fuerza S = 2 para los individuos con evento observado: masa de s = 1 a cero y renormaliza"""
    if not np.any(activo):
        return joint_post
    fijada = joint_post.copy()
    fijada[activo, 0, :] = 0.0
    masa = fijada[activo].sum(axis=(-2, -1))
    filas = fijada[activo]
    sin_masa = masa <= 0.0
    filas[sin_masa, 1, :] = prS_prev[activo][sin_masa]
    masa = np.where(sin_masa, 1.0, masa)
    fijada[activo] = filas / masa[:, None, None]
    return fijada


def filter_step(state: FilterState, y1_t: np.ndarray, params: ParameterSet, spec: ModelSpec,
                scores: np.ndarray, regime_event: Optional[np.ndarray] = None,
                sistema: Optional[AugmentedSystem] = None) -> Tuple[FilterState, DiagnosticoPaso]:
    """
    Un paso del filtro de Kim para todos los individuos

    Args:
        state: Estado colapsado en t-1
        y1_t: Observaciones N x O1 de la ocasión t (NaN = faltante)
        params: Parámetros congelados
        spec: Especificación
        scores: Puntajes de Bartlett N x U2
        regime_event: d_i en base 1 por individuo (0 = sin evento)
        sistema: Sistema aumentado precalculado

    Returns:
        (estado en t, diagnósticos por individuo)
    """
    t = state.t + 1
    U1 = spec.U1
    sistema = sistema or construir_sistema(params, spec, scores)
    y1_t = np.asarray(y1_t, dtype=float)
    observado = ~np.isnan(y1_t)
    alguno = observado.any(axis=-1)

    # Covariables de transición: medias colapsadas de t-1 por régimen previo
    trans = matriz_transicion(state.eta[:, :, :U1], scores, params)
    joint_prior = hamilton_predict(state.prS, trans)

    try:
        eta_pred, P_pred = kalman_predict(
            state.eta[:, None], state.P[:, None],
            sistema.B1_aug[:, :, None], sistema.B3_aug[:, :, None], sistema.Q_aug[None, :, None],
        )
        v, F, eta_upd, P_upd, branch_loglik = kalman_update(
            eta_pred, P_pred, y1_t[:, None, None], observado[:, None, None],
            sistema.Lambda_aug[None, :, None], sistema.R1[None, :, None],
        )
        joint_post, prS, log_f = hamilton_update(joint_prior, branch_loglik, alguno)
    except FallaFiltro as error:
        raise FallaFiltro(error.motivo, i=error.i, t=t, s=error.s, s_prev=error.s_prev) from error

    prS2_predicha = joint_prior[:, 1, :].sum(axis=-1)
    if regime_event is not None:
        activo = (regime_event > 0) & (t >= regime_event)
        joint_post = _aplicar_evento(joint_post, state.prS, activo)
        prS = joint_post.sum(axis=-1)
        prS2_predicha = np.where(activo, 1.0, prS2_predicha)

    eta, P = collapse(joint_post, eta_upd, P_upd, joint_prior, state.prS)

    eta_predicha, var_predicha = _momentos_marginales(joint_prior, eta_pred, P_pred, U1)
    eta_filtrada, var_filtrada = _momentos_marginales(prS, eta, P, U1)
    y_ramas = np.einsum('sok,nsqk->nsqo', sistema.Lambda_aug, eta_pred)
    y_predicha = np.einsum('nsq,nsqo->no', joint_prior, y_ramas)

    loglik_i = np.where(alguno, log_f, 0.0)
    ramas = BranchRecord(
        eta_pred=eta_pred, P_pred=P_pred, v=v, F=F, eta_upd=eta_upd, P_upd=P_upd,
        prJoint_pred=joint_prior, prJoint_upd=joint_post, branch_loglik=branch_loglik,
    )
    diagnostico = DiagnosticoPaso(
        prS2_predicha=prS2_predicha,
        prS2_filtrada=prS[:, 1],
        eta_predicha=eta_predicha,
        var_predicha=var_predicha,
        eta_filtrada=eta_filtrada,
        var_filtrada=var_filtrada,
        y_predicha=y_predicha,
        loglik_i=loglik_i,
        observado_alguno=alguno,
        ramas=ramas,
    )
    nuevo = FilterState(eta=eta, P=P, prS=prS, loglik_t=float(np.sum(loglik_i)), t=t)
    return nuevo, diagnostico


def run_filter(data: PanelDataset, params: ParameterSet, spec: ModelSpec,
               t_range: Optional[Tuple[int, int]] = None, scores: Optional[np.ndarray] = None,
               modo: ModoPronostico = ModoPronostico.UN_PASO,
               t_corte: Optional[int] = None) -> ResultadoFiltro:
    """
    Ejecuta el filtro desde la primera ocasión hasta fin

    Args:
        data: Panel
        params: Parámetros congelados
        spec: Especificación
        t_range: (inicio, fin) en base 0; la verosimilitud acumula t en [inicio, fin)
        scores: Puntajes de Bartlett; se calculan si no se pasan
        modo: UN_PASO actualiza con todos los datos; EXTRAPOLACION ignora los
              datos desde t_corte en adelante
        t_corte: Número de ocasiones de entrenamiento para EXTRAPOLACION

    Returns:
        Trayectorias, verosimilitudes por (i, t) y total
    """
    inicio, fin = t_range if t_range is not None else (0, data.T)
    if not 0 <= inicio <= fin <= data.T:
        raise ErrorDimensiones(f"t_range ({inicio}, {fin}) fuera de 0..{data.T}")
    if data.O1 != spec.O1 or data.O2 != spec.O2:
        raise ErrorDimensiones(f"el panel tiene {data.O1}/{data.O2} ítems, el modelo {spec.O1}/{spec.O2}")

    if scores is None:
        scores = puntajes_desde_parametros(data.y2, params.Lambda2, params.R2)
    sistema = construir_sistema(params, spec, scores)

    y1 = data.y1
    if modo is ModoPronostico.EXTRAPOLACION:
        if t_corte is None:
            raise ErrorDimensiones("el modo de extrapolación requiere t_corte")
        y1 = y1.copy()
        y1[:, t_corte:, :] = np.nan

    N, U1, O1 = data.N, spec.U1, spec.O1
    estado = init_state(spec, params, N)
    estados = [estado]
    loglik_it = np.full((N, fin), np.nan)
    prS2_filtrada = np.zeros((N, fin))
    prS2_predicha = np.zeros((N, fin))
    eta_filtrada = np.zeros((N, fin, U1))
    sd_filtrada = np.zeros((N, fin, U1))
    eta_predicha = np.zeros((N, fin, U1))
    sd_predicha = np.zeros((N, fin, U1))
    y_predicha = np.zeros((N, fin, O1))

    for t in range(fin):
        estado, diag = filter_step(estado, y1[:, t, :], params, spec, scores, data.regime_event, sistema)
        estados.append(estado)
        loglik_it[:, t] = np.where(diag.observado_alguno, diag.loglik_i, np.nan)
        prS2_filtrada[:, t] = diag.prS2_filtrada
        prS2_predicha[:, t] = diag.prS2_predicha
        eta_filtrada[:, t] = diag.eta_filtrada
        sd_filtrada[:, t] = np.sqrt(np.maximum(diag.var_filtrada, 0.0))
        eta_predicha[:, t] = diag.eta_predicha
        sd_predicha[:, t] = np.sqrt(np.maximum(diag.var_predicha, 0.0))
        y_predicha[:, t] = diag.y_predicha

    loglik_individual = np.nansum(loglik_it[:, inicio:fin], axis=1)
    loglik = float(np.sum(loglik_individual))
    logger.debug(f"Filtro completado: T={fin}, loglik={loglik:.4f}")
    return ResultadoFiltro(
        loglik=loglik,
        loglik_individual=loglik_individual,
        loglik_it=loglik_it,
        estados=estados,
        prS2_filtrada=prS2_filtrada,
        prS2_predicha=prS2_predicha,
        eta_filtrada=eta_filtrada,
        sd_filtrada=sd_filtrada,
        eta_predicha=eta_predicha,
        sd_predicha=sd_predicha,
        y_predicha=y_predicha,
    )
