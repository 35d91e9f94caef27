"""
Puntajes factoriales de Bartlett para el nivel entre-individuos
src/puntajes_factoriales.py
"""

import numpy as np

from src.constants import TOL_BARTLETT
from src.excepciones import ErrorEstimacion
from src.models import FactorScoreWeights


def bartlett_weights(Lambda2: np.ndarray, R2: np.ndarray) -> FactorScoreWeights:
    """
    Calcula F2 = (Lambda2' R2^-1 Lambda2)^-1 Lambda2' R2^-1

    Args:
        Lambda2: Cargas O2 x U2
        R2: Varianzas residuales (vector diagonal O2 o matriz diagonal)

    Returns:
        Pesos con F2 Lambda2 = I

    Raises:
        ErrorEstimacion: si el sistema normal es singular, nombrando el factor deficiente
    """
    Lambda2 = np.asarray(Lambda2, dtype=float)
    R2 = np.asarray(R2, dtype=float)
    varianzas = np.diag(R2) if R2.ndim == 2 else R2
    if np.any(varianzas <= 0.0):
        raise ErrorEstimacion("R2 debe tener diagonal estrictamente positiva")

    ponderadas = Lambda2.T / varianzas            # Lambda2' R2^-1
    normal = ponderadas @ Lambda2
    nulas = np.flatnonzero(np.all(np.abs(Lambda2) < TOL_BARTLETT, axis=0))
    if nulas.size:
        raise ErrorEstimacion(f"factor {nulas[0] + 1} sin cargas: sistema de Bartlett singular")

    autovalores, autovectores = np.linalg.eigh(normal)
    if autovalores[0] <= TOL_BARTLETT * max(autovalores[-1], 1.0):
        deficiente = int(np.argmax(np.abs(autovectores[:, 0])))
        raise ErrorEstimacion(f"factor {deficiente + 1} no identificado: sistema de Bartlett singular")

    F2 = np.linalg.solve(normal, ponderadas)
    return FactorScoreWeights(F2)


def score(y2: np.ndarray, weights: FactorScoreWeights) -> np.ndarray:
    """Puntajes eta2_i = F2 y2_i para cada individuo (N x U2)"""
    return np.asarray(y2, dtype=float) @ weights.F2.T


def puntajes_desde_parametros(y2: np.ndarray, Lambda2: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """Atajo usado en cada evaluación de la verosimilitud"""
    return score(y2, bartlett_weights(Lambda2, R2))
