"""
Proceso generador de datos del modelo RSSS y diseños de simulación
src/simulacion.py
"""

from typing import Dict, List, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.constants import PARAMETROS_EMPIRICOS, PARAMETROS_SIMULACION
from src.enums import Regimen
from src.models import ModelSpec, PanelDataset, ParameterSet, SimConfig, SimOutput
from src.parametrizacion import completar_parametros, transition_probability
from src.utils.logger_config import obtener_logger

logger = obtener_logger("simulacion")


class SimuladorRSSS:
    """Genera un panel completo a partir de los parámetros verdaderos"""

    def __init__(self, config: SimConfig):
        self.config = config
        self.spec = config.spec
        self.params = config.params
        self.rng = np.random.default_rng(config.seed)

    def _generar_entre_individuos(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Factores entre-individuos, interceptos aleatorios e indicadores y2"""
        N, p = self.config.N, self.params
        eta2 = self.rng.multivariate_normal(np.zeros(self.spec.U2), p.P2, size=N)
        zeta2 = self.rng.standard_normal((N, self.spec.U1)) * np.sqrt(p.Q2)
        y2 = eta2 @ p.Lambda2.T + self.rng.standard_normal((N, self.spec.O2)) * np.sqrt(p.R2)
        return eta2, zeta2, y2

    def _siguiente_regimen(self, regimen_previo: np.ndarray, eta1_previo: np.ndarray,
                           eta2: np.ndarray) -> np.ndarray:
        """Sortea S_it con la ley de Markov usando los latentes verdaderos de t-1"""
        p1_desde_1 = transition_probability(eta1_previo, eta2, self.params, Regimen.UNO)[:, 0]
        p1 = np.where(regimen_previo == 1, p1_desde_1, self.params.P12)
        return np.where(self.rng.random(self.config.N) < p1, 1, 2)

    def _paso_latente(self, regimen: np.ndarray, eta1_previo: np.ndarray, eta2: np.ndarray,
                      zeta2: np.ndarray) -> np.ndarray:
        """eta1_it = b1s + b2s eta2 + (B3s + B4s eta2) eta1_{t-1} + zeta2 + ruido"""
        p = self.params
        s = regimen - 1
        B3_i = p.B3[s] + p.B4[s] * eta2[:, 0, None, None]
        media = (p.b1[s]
                 + np.einsum('nkl,nl->nk', p.b2[s], eta2)
                 + np.einsum('nkl,nl->nk', B3_i, eta1_previo)
                 + zeta2)
        return media + self.rng.standard_normal(media.shape) * np.sqrt(p.Q1[s])

    def _medicion(self, regimen: np.ndarray, eta1: np.ndarray) -> np.ndarray:
        s = regimen - 1
        media = np.einsum('nok,nk->no', self.params.Lambda1[s], eta1)
        return media + self.rng.standard_normal(media.shape) * np.sqrt(self.params.R1[s])

    def ejecutar(self) -> SimOutput:
        """Simula N individuos durante T ocasiones"""
        N, T = self.config.N, self.config.T
        eta2, zeta2, y2 = self._generar_entre_individuos()

        regimenes = np.zeros((N, T), dtype=int)
        eta1 = np.zeros((N, T, self.spec.U1))
        y1 = np.zeros((N, T, self.spec.O1))
        regimen_previo = np.ones(N, dtype=int)
        eta1_previo = np.zeros((N, self.spec.U1))

        for t in range(T):
            regimen = self._siguiente_regimen(regimen_previo, eta1_previo, eta2)
            eta1[:, t] = self._paso_latente(regimen, eta1_previo, eta2, zeta2)
            y1[:, t] = self._medicion(regimen, eta1[:, t])
            regimenes[:, t] = regimen
            regimen_previo, eta1_previo = regimen, eta1[:, t]

        logger.debug(f"Panel simulado (semilla {self.config.seed}): "
                     f"proporción en régimen 2 = {np.mean(regimenes == 2):.3f}")
        return SimOutput(
            data=PanelDataset(y1, y2),
            true_regimes=regimenes,
            true_eta1=eta1,
            true_eta2=eta2,
            true_zeta2=zeta2,
            semilla=self.config.seed,
        )


def simulate_panel(config: SimConfig) -> SimOutput:
    """Simula un panel completo (sin faltantes) desde S_i0 = 1 y eta1_i0 = 0"""
    return SimuladorRSSS(config).ejecutar()


def _replicacion(config: SimConfig, r: int) -> SimOutput:
    return simulate_panel(SimConfig(config.N, config.T, config.params, config.spec, config.seed + r, 1))


def simulate_study(config: SimConfig, n_jobs: int = 1) -> List[SimOutput]:
    """
    R replicaciones independientes con semillas seed + r

    Args:
        config: Configuración con replications = R
        n_jobs: Trabajadores de joblib

    Returns:
        Lista ordenada por replicación
    """
    logger.info(f"Simulando {config.replications} replicaciones (N={config.N}, T={config.T})")
    if n_jobs == 1:
        return [_replicacion(config, r) for r in range(config.replications)]
    return Parallel(n_jobs=n_jobs)(delayed(_replicacion)(config, r) for r in range(config.replications))


def _grupos_de_valores(tabla: Dict[str, object]) -> Dict[str, object]:
    return {clave: valor for clave, valor in tabla.items()
            if not clave.startswith(('patron_', 'mascara_', 'items_', 'cargas_'))}


def preset_simulacion() -> Tuple[ModelSpec, ParameterSet]:
    """Diseño de dos factores dinámicos con sus valores verdaderos"""
    tabla = PARAMETROS_SIMULACION
    spec = ModelSpec(
        O1=4, U1=2, O2=2, U2=1,
        loading_pattern_1=tabla['patron_carga_1'],
        loading_pattern_2=tabla['patron_carga_2'],
        gamma4_mask=tabla['mascara_gamma4'],
        fixed={'Q2': tabla['Q2'], 'P2': tabla['P2']},
    )
    return spec, completar_parametros(_grupos_de_valores(tabla), spec)


def patron_por_bloques(items_por_factor: List[int]) -> List[List[object]]:
    """Patrón sin cargas cruzadas: primer ítem de cada factor fijo en 1, el resto libre"""
    U1 = len(items_por_factor)
    patron = []
    for k, cantidad in enumerate(items_por_factor):
        for j in range(cantidad):
            fila = [0.0] * U1
            fila[k] = 1.0 if j == 0 else None
            patron.append(fila)
    return patron


def preset_empirico() -> Tuple[ModelSpec, ParameterSet]:
    """Diseño de siete factores dinámicos con las estimaciones del estudio empírico"""
    tabla = PARAMETROS_EMPIRICOS
    patron = patron_por_bloques(tabla['items_por_factor'])
    U1 = len(tabla['items_por_factor'])
    spec = ModelSpec(
        O1=len(patron), U1=U1, O2=2, U2=1,
        loading_pattern_1=patron,
        loading_pattern_2=[[1.0], [1.0]],
        gamma4_mask=tabla['mascara_gamma4'],
        fixed={'Q2': tabla['Q2'], 'P2': tabla['P2']},
    )
    libres = iter(tabla['cargas_libres'])
    Lambda1 = [[next(libres) if x is None else x for x in fila] for fila in patron]
    valores = _grupos_de_valores(tabla)
    valores['Lambda1'] = Lambda1
    return spec, completar_parametros(valores, spec)
