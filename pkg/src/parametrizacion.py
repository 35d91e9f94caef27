"""
Biyección entre parámetros restringidos y el vector theta, y probabilidades de transición
src/parametrizacion.py
"""

from functools import lru_cache
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy.special import expit, logit

from src.constants import GRUPOS_PARAMETROS, TOL_SIMETRIA
from src.enums import Regimen, Transformacion
from src.excepciones import ErrorDimensiones, ViolacionRestriccion
from src.models import EntradaLayout, ModelSpec, ParameterSet, ParameterVector
from src.utils.logger_config import obtener_logger

logger = obtener_logger("parametrizacion")

GRUPOS_VARIANZA = ('R1', 'R2', 'Q1', 'Q2')
GRUPOS_POR_REGIMEN = ('Lambda1', 'R1', 'b1', 'b2', 'B3', 'B4', 'Q1')


def _texto_indice(indice: Tuple[int, ...]) -> str:
    return "[" + ",".join(str(k + 1) for k in indice) + "]"


def _entradas_grupo(grupo: str, spec: ModelSpec) -> List[EntradaLayout]:
    """Entradas libres de un grupo, en orden de filas"""
    forma = spec.forma_grupo(grupo)
    if grupo in ('gamma1', 'P12'):
        transformacion = Transformacion.LOGIT if grupo == 'P12' else Transformacion.IDENTIDAD
        return [EntradaLayout(grupo, grupo, (), (), transformacion)]

    por_regimen = grupo in GRUPOS_POR_REGIMEN
    forma_celda = forma[1:] if por_regimen else forma

    if grupo == 'Lambda1':
        libres = [tuple(ix) for ix in np.argwhere(np.isnan(spec.loading_pattern_1))]
    elif grupo == 'Lambda2':
        libres = [tuple(ix) for ix in np.argwhere(np.isnan(spec.loading_pattern_2))]
    elif grupo in ('B3', 'B4') and spec.diagonal_B:
        libres = [(k, k) for k in range(spec.U1)]
    elif grupo == 'gamma4':
        libres = [(k,) for k in np.flatnonzero(spec.gamma4_mask)]
    else:
        libres = [tuple(ix) for ix in np.ndindex(*forma_celda)]

    transformacion = Transformacion.LOG if grupo in GRUPOS_VARIANZA else Transformacion.IDENTIDAD
    entradas = []
    if not por_regimen:
        for indice in libres:
            entradas.append(EntradaLayout(f"{grupo}{_texto_indice(indice)}", grupo, (), indice, transformacion))
    elif spec.es_invariante(grupo):
        for indice in libres:
            entradas.append(EntradaLayout(f"{grupo}{_texto_indice(indice)}", grupo, (0, 1), indice, transformacion))
    else:
        for s in range(spec.S):
            propia = transformacion
            if grupo == 'b1' and s == 1 and spec.ordering:
                propia = Transformacion.ORDENADA
            for indice in libres:
                entradas.append(EntradaLayout(f"{grupo}_{s + 1}{_texto_indice(indice)}", grupo, (s,), indice, propia))
    return entradas


@lru_cache(maxsize=32)
def construir_layout(spec: ModelSpec) -> Tuple[EntradaLayout, ...]:
    """
    Layout determinista del vector theta para una especificación

    Los grupos fijos no aparecen; dentro de cada grupo el orden es régimen,
    luego fila y columna.
    """
    layout = []
    for grupo in GRUPOS_PARAMETROS:
        if spec.esta_fijo(grupo):
            continue
        layout.extend(_entradas_grupo(grupo, spec))
    logger.debug(f"Layout construido con {len(layout)} parámetros libres")
    return tuple(layout)


def plantilla_parametros(spec: ModelSpec) -> Dict[str, np.ndarray]:
    """Arreglos completos con los valores fijos del modelo y ceros en las entradas libres"""
    plantilla = {}
    for grupo in GRUPOS_PARAMETROS + ('P2',):
        if spec.esta_fijo(grupo):
            plantilla[grupo] = np.array(spec.valor_fijo(grupo), dtype=float)
        else:
            plantilla[grupo] = np.zeros(spec.forma_grupo(grupo))
    patron_1 = np.nan_to_num(spec.loading_pattern_1, nan=0.0)
    plantilla['Lambda1'] = np.broadcast_to(patron_1, spec.forma_grupo('Lambda1')).copy()
    plantilla['Lambda2'] = np.nan_to_num(spec.loading_pattern_2, nan=0.0)
    return plantilla


def _indice_en_arreglo(entrada: EntradaLayout, s: int) -> Tuple[int, ...]:
    if entrada.grupo in GRUPOS_POR_REGIMEN:
        return (s,) + entrada.indice
    return entrada.indice


def _leer(params: ParameterSet, entrada: EntradaLayout) -> float:
    valor = getattr(params, entrada.grupo)
    if entrada.grupo in ('gamma1', 'P12'):
        return float(valor)
    s = entrada.regimenes[0] if entrada.regimenes else 0
    return float(valor[_indice_en_arreglo(entrada, s)])


def valores_por_entrada(params: ParameterSet, layout: Tuple[EntradaLayout, ...]) -> np.ndarray:
    """Valores en la escala restringida de cada entrada del layout"""
    return np.array([_leer(params, entrada) for entrada in layout])


def validar_parametros(params: ParameterSet, spec: ModelSpec):
    """
    Verifica que un ParameterSet respete máscaras, fijaciones e invariantes

    Raises:
        ViolacionRestriccion: nombrando la primera entrada que falla
    """
    for grupo in GRUPOS_PARAMETROS + ('P2',):
        valor = getattr(params, grupo)
        if np.shape(valor) != spec.forma_grupo(grupo):
            raise ViolacionRestriccion(grupo, f"forma {np.shape(valor)}, se esperaba {spec.forma_grupo(grupo)}")
        if not np.all(np.isfinite(valor)):
            raise ViolacionRestriccion(grupo, "contiene valores no finitos")
        if spec.esta_fijo(grupo) and not np.allclose(valor, spec.valor_fijo(grupo)):
            raise ViolacionRestriccion(grupo, "difiere del valor fijado en el modelo")

    for grupo, patron in (('Lambda1', spec.loading_pattern_1), ('Lambda2', spec.loading_pattern_2)):
        valor = getattr(params, grupo)
        celdas = valor if grupo == 'Lambda1' else valor[None]
        fijas = ~np.isnan(patron)
        for celda in celdas:
            diferentes = np.argwhere(fijas & ~np.isclose(celda, np.nan_to_num(patron)))
            if diferentes.size:
                raise ViolacionRestriccion(f"{grupo}{_texto_indice(tuple(diferentes[0]))}",
                                           "no coincide con la carga fija del patrón")

    for grupo in spec.class_invariant:
        valor = getattr(params, grupo)
        if not np.allclose(valor[0], valor[1]):
            raise ViolacionRestriccion(grupo, "debe ser igual en ambos regímenes")

    if spec.diagonal_B:
        for grupo in ('B3', 'B4'):
            valor = getattr(params, grupo)
            fuera = valor - np.stack([np.diag(np.diag(m)) for m in valor])
            if np.any(fuera != 0.0):
                raise ViolacionRestriccion(grupo, "debe ser diagonal")

    enmascarados = np.flatnonzero(~spec.gamma4_mask & (params.gamma4 != 0.0))
    if enmascarados.size:
        raise ViolacionRestriccion(f"gamma4[{enmascarados[0] + 1}]", "está enmascarado y debe ser 0")

    for grupo in GRUPOS_VARIANZA:
        if spec.esta_fijo(grupo):
            if np.any(getattr(params, grupo) < 0.0):
                raise ViolacionRestriccion(grupo, "varianza fija negativa")
            continue
        valor = getattr(params, grupo)
        malos = np.argwhere(valor <= 0.0)
        if malos.size:
            raise ViolacionRestriccion(f"{grupo}{_texto_indice(tuple(malos[0]))}", "varianza no positiva")

    if spec.ordering and not spec.esta_fijo('b1'):
        violadas = np.flatnonzero(params.b1[1] <= params.b1[0])
        if violadas.size:
            raise ViolacionRestriccion(f"b1_2[{violadas[0] + 1}]",
                                       "debe superar al intercepto del régimen 1")

    if not spec.esta_fijo('P12') and not 0.0 < params.P12 < 1.0:
        raise ViolacionRestriccion("P12", "debe estar en (0, 1)")

    if not np.allclose(params.P2, params.P2.T, atol=TOL_SIMETRIA) or np.any(np.linalg.eigvalsh(params.P2) <= 0.0):
        raise ViolacionRestriccion("P2", "debe ser simétrica definida positiva")


def pack(params: ParameterSet, spec: ModelSpec) -> ParameterVector:
    """
    Lleva un ParameterSet válido al vector theta sin restricciones

    Varianzas en escala log, intercepto ordenado como log(b1_2 - b1_1),
    P12 libre en escala logit, identidad en el resto.
    """
    validar_parametros(params, spec)
    layout = construir_layout(spec)
    theta = np.empty(len(layout))
    for j, entrada in enumerate(layout):
        valor = _leer(params, entrada)
        if entrada.transformacion is Transformacion.LOG:
            theta[j] = np.log(valor)
        elif entrada.transformacion is Transformacion.LOGIT:
            theta[j] = logit(valor)
        elif entrada.transformacion is Transformacion.ORDENADA:
            theta[j] = np.log(valor - params.b1[(0,) + entrada.indice])
        else:
            theta[j] = valor
    return ParameterVector(theta, layout)


def unpack(theta: Union[ParameterVector, np.ndarray], spec: ModelSpec) -> ParameterSet:
    """
    Inversa de pack; cualquier theta real produce un ParameterSet válido

    Raises:
        ErrorDimensiones: si la longitud no coincide con el layout
    """
    layout = construir_layout(spec)
    valores_theta = theta.theta if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float)
    if valores_theta.shape != (len(layout),):
        raise ErrorDimensiones(f"theta tiene longitud {valores_theta.size}, el layout {len(layout)}")

    arreglos = plantilla_parametros(spec)
    for entrada, t in zip(layout, valores_theta):
        if entrada.transformacion is Transformacion.LOG:
            valor = np.exp(t)
        elif entrada.transformacion is Transformacion.LOGIT:
            valor = expit(t)
        elif entrada.transformacion is Transformacion.ORDENADA:
            valor = arreglos['b1'][(0,) + entrada.indice] + np.exp(t)
        else:
            valor = t

        if entrada.grupo in ('gamma1', 'P12'):
            arreglos[entrada.grupo] = np.asarray(valor)
            continue
        destino = arreglos[entrada.grupo]
        for s in (entrada.regimenes or (0,)):
            destino[_indice_en_arreglo(entrada, s)] = valor

    arreglos['gamma1'] = float(arreglos['gamma1'])
    arreglos['P12'] = float(arreglos['P12'])
    return ParameterSet(**arreglos)


def jacobiano_transformacion(theta: ParameterVector, spec: ModelSpec) -> np.ndarray:
    """
    Jacobiano d(valor restringido)/d(theta) para el método delta

    La fila de un intercepto ordenado depende también del intercepto del
    régimen 1 con el mismo índice.
    """
    layout = theta.layout
    valores = theta.theta
    k = len(layout)
    J = np.zeros((k, k))
    posicion_b1_1 = {entrada.indice: j for j, entrada in enumerate(layout)
                     if entrada.grupo == 'b1' and entrada.regimenes == (0,)}
    for j, entrada in enumerate(layout):
        if entrada.transformacion is Transformacion.LOG:
            J[j, j] = np.exp(valores[j])
        elif entrada.transformacion is Transformacion.LOGIT:
            p = expit(valores[j])
            J[j, j] = p * (1.0 - p)
        elif entrada.transformacion is Transformacion.ORDENADA:
            J[j, j] = np.exp(valores[j])
            J[j, posicion_b1_1[entrada.indice]] = 1.0
        else:
            J[j, j] = 1.0
    return J


def completar_parametros(valores: Dict[str, object], spec: ModelSpec) -> ParameterSet:
    """Construye un ParameterSet desde valores abreviados (presets, YAML, JSON)"""
    completos = {grupo: valor for grupo, valor in valores.items()
                 if grupo in GRUPOS_PARAMETROS or grupo == 'P2'}
    return ParameterSet.desde_dict(completos, spec)


def transition_probability(eta1_prev: np.ndarray, eta2: np.ndarray, params: ParameterSet,
                           s_prev: Union[Regimen, int]) -> np.ndarray:
    """
    Probabilidades (Pr[S=1], Pr[S=2]) dado el régimen previo

    Acepta ejes de lote al frente de eta1_prev (..., U1) y eta2 (..., U2).
    Desde el régimen 1 se usa la sigmoide de gamma1 + gamma2 eta2 + gamma3 eta1
    + gamma4 (eta1 * eta2[0]); desde el régimen 2, el par fijo (P12, 1 - P12).
    """
    regimen = s_prev if isinstance(s_prev, Regimen) else Regimen(int(s_prev))
    eta1_prev = np.asarray(eta1_prev, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    lote = np.broadcast_shapes(eta1_prev.shape[:-1], eta2.shape[:-1])
    if regimen is Regimen.DOS:
        p1 = np.full(lote, params.P12)
    else:
        indice = (params.gamma1
                  + eta2 @ params.gamma2
                  + eta1_prev @ params.gamma3
                  + (eta1_prev * eta2[..., :1]) @ params.gamma4)
        p1 = np.broadcast_to(expit(indice), lote)
    return np.stack([p1, 1.0 - p1], axis=-1)


def matriz_transicion(eta1_prev: np.ndarray, eta2: np.ndarray, params: ParameterSet) -> np.ndarray:
    """
    Matrices de transición por individuo, con ejes (N, s, s')

    eta1_prev: (N, S, U1) medias colapsadas de t-1 por régimen previo s'.
    Cada columna s' es una distribución sobre s.
    """
    desde_1 = transition_probability(eta1_prev[:, 0, :], eta2, params, Regimen.UNO)
    desde_2 = transition_probability(eta1_prev[:, 1, :], eta2, params, Regimen.DOS)
    return np.stack([desde_1, desde_2], axis=-1)
