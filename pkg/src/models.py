"""
Modelos y clases de datos básicas
src/models.py
"""

from dataclasses import dataclass, field, fields
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Self

from src.constants import (
    GAMMA1_FIJO, GRUPOS_FIJABLES, GRUPOS_INVARIANTES, NUM_REGIMENES, P12_FIJO, PROB_INICIAL_REGIMEN1,
    RPROP_DELTA_MAX, RPROP_DELTA_MIN, RPROP_ETA_MAS, RPROP_ETA_MENOS, RPROP_MAX_ITER,
    RPROP_N_INICIOS, RPROP_PACIENCIA, RPROP_TOL, PASO_GRADIENTE, DISPERSION_INICIAL,
)
from src.enums import Transformacion
from src.excepciones import ErrorConfiguracion, ErrorDimensiones


def _solo_lectura(valor, dtype=float) -> np.ndarray:
    """Copia un arreglo y lo marca como inmutable"""
    arreglo = np.array(valor, dtype=dtype, copy=True)
    arreglo.setflags(write=False)
    return arreglo


def _patron(valor) -> np.ndarray:
    """Convierte un patrón de cargas (None = libre) a flotantes con NaN"""
    filas = [[np.nan if x is None else float(x) for x in fila] for fila in np.asarray(valor, dtype=object)]
    return _solo_lectura(filas)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Dimensiones, máscaras y restricciones de identificación del modelo RSSS"""
    O1: int
    U1: int
    O2: int
    U2: int
    loading_pattern_1: np.ndarray
    loading_pattern_2: np.ndarray
    gamma4_mask: np.ndarray
    diagonal_B: bool = True
    class_invariant: FrozenSet[str] = frozenset(GRUPOS_INVARIANTES)
    ordering: bool = True
    interaccion_multifactor: bool = False
    fixed: Mapping[str, np.ndarray] = field(default_factory=dict)
    liberados: FrozenSet[str] = frozenset()
    prob_inicial_regimen1: float = PROB_INICIAL_REGIMEN1
    S: int = NUM_REGIMENES

    def __post_init__(self):
        object.__setattr__(self, 'loading_pattern_1', _patron(self.loading_pattern_1))
        object.__setattr__(self, 'loading_pattern_2', _patron(self.loading_pattern_2))
        object.__setattr__(self, 'gamma4_mask', _solo_lectura(self.gamma4_mask, dtype=bool))
        object.__setattr__(self, 'class_invariant', frozenset(self.class_invariant))
        object.__setattr__(self, 'liberados', frozenset(self.liberados))
        self._validar()

        # gamma1, P12 y P2 quedan fijos salvo que se liberen explícitamente
        por_defecto = {'gamma1': GAMMA1_FIJO, 'P12': P12_FIJO, 'P2': np.eye(self.U2)}
        valores = {nombre: valor for nombre, valor in por_defecto.items() if nombre not in self.liberados}
        valores.update(dict(self.fixed))
        fijos = {nombre: self._expandir_fijo(nombre, valor) for nombre, valor in valores.items()}
        object.__setattr__(self, 'fixed', fijos)

        P2 = fijos['P2']
        if not np.allclose(P2, P2.T) or np.any(np.linalg.eigvalsh(P2) <= 0.0):
            raise ErrorConfiguracion("P2 debe ser simétrica definida positiva")
        if 'P12' in fijos and not 0.0 <= float(fijos['P12']) <= 1.0:
            raise ErrorConfiguracion("P12 debe estar en [0, 1]")

    def _validar(self):
        """Valida dimensiones e identificación"""
        if self.S != NUM_REGIMENES:
            raise ErrorConfiguracion(f"S debe ser {NUM_REGIMENES}, se recibió {self.S}")
        for nombre in ('O1', 'U1', 'O2', 'U2'):
            if getattr(self, nombre) < 1:
                raise ErrorConfiguracion(f"{nombre} debe ser positivo")
        if self.loading_pattern_1.shape != (self.O1, self.U1):
            raise ErrorConfiguracion(f"loading_pattern_1 debe ser {self.O1}x{self.U1}")
        if self.loading_pattern_2.shape != (self.O2, self.U2):
            raise ErrorConfiguracion(f"loading_pattern_2 debe ser {self.O2}x{self.U2}")
        for etiqueta, patron in (('loading_pattern_1', self.loading_pattern_1),
                                 ('loading_pattern_2', self.loading_pattern_2)):
            for j in range(patron.shape[1]):
                columna = patron[:, j]
                fijas = columna[~np.isnan(columna)]
                if not np.any(fijas != 0.0):
                    raise ErrorConfiguracion(
                        f"{etiqueta}: el factor {j + 1} necesita al menos una carga fija distinta de cero")
        if self.gamma4_mask.shape != (self.U1,):
            raise ErrorConfiguracion(f"gamma4_mask debe tener {self.U1} entradas")
        if self.U2 > 1 and not self.interaccion_multifactor and self.gamma4_mask.any():
            raise ErrorConfiguracion(
                "con U2 > 1 las interacciones gamma4 requieren interaccion_multifactor")
        desconocidos = self.class_invariant - set(GRUPOS_INVARIANTES)
        if desconocidos:
            raise ErrorConfiguracion(f"grupos invariantes desconocidos: {sorted(desconocidos)}")
        for nombre in self.fixed:
            if nombre not in GRUPOS_FIJABLES:
                raise ErrorConfiguracion(f"el grupo '{nombre}' no se puede fijar")
            if nombre in self.liberados:
                raise ErrorConfiguracion(f"el grupo '{nombre}' no puede estar fijo y liberado a la vez")
        if not self.liberados <= {'gamma1', 'P12'}:
            raise ErrorConfiguracion("solo gamma1 y P12 se pueden liberar")
        if not 0.0 <= self.prob_inicial_regimen1 <= 1.0:
            raise ErrorConfiguracion("prob_inicial_regimen1 debe estar en [0, 1]")

    @property
    def d_aug(self) -> int:
        """Dimensión del estado aumentado (eta1, zeta2)"""
        return 2 * self.U1

    def es_invariante(self, grupo: str) -> bool:
        """Indica si un grupo se comparte entre regímenes"""
        return grupo in self.class_invariant

    def esta_fijo(self, grupo: str) -> bool:
        return grupo in self.fixed

    def forma_grupo(self, grupo: str) -> Tuple[int, ...]:
        """Forma completa (con eje de régimen cuando aplica) de un grupo de parámetros"""
        S, O1, U1, O2, U2 = self.S, self.O1, self.U1, self.O2, self.U2
        formas = {
            'Lambda1': (S, O1, U1), 'R1': (S, O1), 'Lambda2': (O2, U2), 'R2': (O2,),
            'P2': (U2, U2), 'b1': (S, U1), 'b2': (S, U1, U2), 'B3': (S, U1, U1),
            'B4': (S, U1, U1), 'Q1': (S, U1), 'Q2': (U1,), 'gamma1': (), 'gamma2': (U2,),
            'gamma3': (U1,), 'gamma4': (U1,), 'P12': (),
        }
        return formas[grupo]

    def _expandir_fijo(self, grupo: str, valor) -> np.ndarray:
        try:
            return _solo_lectura(expandir_grupo(grupo, valor, self))
        except (ValueError, ErrorDimensiones) as error:
            raise ErrorConfiguracion(f"valor fijo de '{grupo}' incompatible: {error}") from error

    def valor_fijo(self, grupo: str) -> np.ndarray:
        return self.fixed[grupo]


def expandir_grupo(grupo: str, valor, spec: ModelSpec) -> np.ndarray:
    """
    Lleva un valor abreviado a la forma completa del grupo

    Acepta diagonales para B3/B4, vectores compartidos para grupos con eje de
    régimen, y b2 sin el eje U2 cuando U2 = 1.
    """
    forma = spec.forma_grupo(grupo)
    arreglo = np.array(valor, dtype=float)
    if grupo in ('B3', 'B4') and arreglo.shape in ((spec.S, spec.U1), (spec.U1,)):
        arreglo = np.broadcast_to(arreglo, (spec.S, spec.U1))
        arreglo = np.stack([np.diag(fila) for fila in arreglo])
    if grupo == 'b2' and spec.U2 == 1 and arreglo.shape in ((spec.S, spec.U1), (spec.U1,)):
        arreglo = arreglo[..., None]
    if grupo == 'P2' and arreglo.ndim < 2:
        arreglo = np.diag(np.atleast_1d(arreglo)) if arreglo.ndim == 1 else arreglo.reshape(1, 1)
    try:
        return np.array(np.broadcast_to(arreglo, forma), dtype=float)
    except ValueError as error:
        raise ErrorDimensiones(f"{grupo}: forma {arreglo.shape} no compatible con {forma}") from error


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Todos los parámetros del modelo; covarianzas diagonales guardadas como vectores"""
    Lambda1: np.ndarray
    R1: np.ndarray
    Lambda2: np.ndarray
    R2: np.ndarray
    P2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    B3: np.ndarray
    B4: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    gamma1: float
    gamma2: np.ndarray
    gamma3: np.ndarray
    gamma4: np.ndarray
    P12: float

    def __post_init__(self):
        for campo in fields(self):
            valor = getattr(self, campo.name)
            if campo.name in ('gamma1', 'P12'):
                object.__setattr__(self, campo.name, float(valor))
            else:
                object.__setattr__(self, campo.name, _solo_lectura(valor))

    @classmethod
    def desde_dict(cls, valores: Mapping[str, object], spec: ModelSpec) -> Self:
        """Construye el conjunto desde un diccionario (presets, YAML o JSON)"""
        completos = {}
        for campo in fields(cls):
            if campo.name in valores:
                completos[campo.name] = expandir_grupo(campo.name, valores[campo.name], spec)
            elif campo.name in spec.fixed:
                completos[campo.name] = spec.valor_fijo(campo.name)
            elif campo.name == 'P2':
                completos[campo.name] = np.eye(spec.U2)
            else:
                raise ErrorConfiguracion(f"falta el parámetro '{campo.name}'")
        return cls(**completos)

    def a_dict(self) -> Dict[str, object]:
        """Representación serializable (listas anidadas)"""
        return {
            campo.name: (getattr(self, campo.name) if campo.name in ('gamma1', 'P12')
                         else getattr(self, campo.name).tolist())
            for campo in fields(self)
        }


@dataclass(frozen=True, eq=False)
class EntradaLayout:
    """Una posición de theta y la entrada del ParameterSet que representa"""
    nombre: str
    grupo: str
    regimenes: Tuple[int, ...]
    indice: Tuple[int, ...]
    transformacion: Transformacion


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Vector theta sin restricciones y su layout"""
    theta: np.ndarray
    layout: Tuple[EntradaLayout, ...]

    def __post_init__(self):
        object.__setattr__(self, 'theta', _solo_lectura(self.theta))
        object.__setattr__(self, 'layout', tuple(self.layout))
        if self.theta.shape != (len(self.layout),):
            raise ErrorDimensiones(
                f"theta tiene longitud {self.theta.size}, el layout {len(self.layout)}")

    @property
    def nombres(self) -> List[str]:
        return [entrada.nombre for entrada in self.layout]

    def __len__(self) -> int:
        return len(self.layout)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Panel de N individuos por T ocasiones; NaN en y1 marca un dato faltante"""
    y1: np.ndarray
    y2: np.ndarray
    regime_event: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float)
        y2 = np.asarray(self.y2, dtype=float)
        if y1.ndim != 3 or y2.ndim != 2 or y1.shape[0] != y2.shape[0]:
            raise ErrorDimensiones(f"y1 {y1.shape} e y2 {y2.shape} no forman un panel")
        if not np.all(np.isfinite(y2)):
            raise ErrorConfiguracion("y2 debe estar completo (sin faltantes)")
        object.__setattr__(self, 'y1', _solo_lectura(y1))
        object.__setattr__(self, 'y2', _solo_lectura(y2))
        n = y1.shape[0]
        if self.regime_event is not None:
            eventos = np.asarray(self.regime_event, dtype=int)
            if eventos.shape != (n,):
                raise ErrorDimensiones("regime_event debe tener un valor por individuo")
            presentes = eventos[eventos != 0]
            if np.any((presentes < 1) | (presentes > y1.shape[1])):
                raise ErrorConfiguracion(f"los eventos de régimen deben cumplir 1 <= d_i <= {y1.shape[1]}")
            object.__setattr__(self, 'regime_event', _solo_lectura(eventos, dtype=int))
        ids = np.arange(1, n + 1) if self.ids is None else np.asarray(self.ids)
        if ids.shape != (n,):
            raise ErrorDimensiones("ids debe tener un valor por individuo")
        object.__setattr__(self, 'ids', _solo_lectura(ids, dtype=ids.dtype))

    @property
    def N(self) -> int:
        return self.y1.shape[0]

    @property
    def T(self) -> int:
        return self.y1.shape[1]

    @property
    def O1(self) -> int:
        return self.y1.shape[2]

    @property
    def O2(self) -> int:
        return self.y2.shape[1]

    @property
    def observado(self) -> np.ndarray:
        """Máscara N x T x O1 de entradas observadas"""
        return ~np.isnan(self.y1)

    def subconjunto(self, indices: Sequence[int]) -> Self:
        """Panel restringido a un subconjunto de individuos"""
        indices = np.asarray(indices, dtype=int)
        eventos = None if self.regime_event is None else self.regime_event[indices]
        return PanelDataset(self.y1[indices], self.y2[indices], eventos, self.ids[indices])


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Matrices del sistema aumentado por individuo y régimen"""
    Lambda_aug: np.ndarray   # (S, O1, 2U1)
    B1_aug: np.ndarray       # (N, S, 2U1)
    B3_aug: np.ndarray       # (N, S, 2U1, 2U1)
    Q_aug: np.ndarray        # (S, 2U1, 2U1)
    R1: np.ndarray           # (S, O1) diagonales


@dataclass(frozen=True, eq=False)
class FilterState:
    """Momentos colapsados por individuo y régimen al cierre de la ocasión t"""
    eta: np.ndarray          # (N, S, 2U1)
    P: np.ndarray            # (N, S, 2U1, 2U1)
    prS: np.ndarray          # (N, S)
    loglik_t: float = 0.0
    t: int = 0


@dataclass(frozen=True, eq=False)
class BranchRecord:
    """Intermedios de las ramas (s, s') de una ocasión; ejes (N, s, s', ...)"""
    eta_pred: np.ndarray
    P_pred: np.ndarray
    v: np.ndarray
    F: np.ndarray
    eta_upd: np.ndarray
    P_upd: np.ndarray
    prJoint_pred: np.ndarray
    prJoint_upd: np.ndarray
    branch_loglik: np.ndarray


@dataclass(frozen=True, eq=False)
class DiagnosticoPaso:
    """Salidas por (i, t) de un paso del filtro"""
    prS2_predicha: np.ndarray     # Pr[S_it=2 | D_{1:t-1}]
    prS2_filtrada: np.ndarray     # Pr[S_it=2 | D_{1:t}]
    eta_predicha: np.ndarray      # (N, U1) media marginal a un paso
    var_predicha: np.ndarray
    eta_filtrada: np.ndarray
    var_filtrada: np.ndarray
    y_predicha: np.ndarray        # (N, O1)
    loglik_i: np.ndarray          # (N,), 0 si no hubo datos
    observado_alguno: np.ndarray  # (N,)
    ramas: BranchRecord


@dataclass(frozen=True, eq=False)
class ResultadoFiltro:
    """Trayectorias completas de una corrida del filtro"""
    loglik: float
    loglik_individual: np.ndarray
    loglik_it: np.ndarray
    estados: List[FilterState]
    prS2_filtrada: np.ndarray
    prS2_predicha: np.ndarray
    eta_filtrada: np.ndarray
    sd_filtrada: np.ndarray
    eta_predicha: np.ndarray
    sd_predicha: np.ndarray
    y_predicha: np.ndarray

    @property
    def T(self) -> int:
        return self.loglik_it.shape[1]


@dataclass(frozen=True)
class RpropConfig:
    """Hiperparámetros del optimizador Rprop con retroceso"""
    delta0: float = 0.1
    eta_plus: float = RPROP_ETA_MAS
    eta_minus: float = RPROP_ETA_MENOS
    delta_min: float = RPROP_DELTA_MIN
    delta_max: float = RPROP_DELTA_MAX
    patience: int = RPROP_PACIENCIA
    tol: float = RPROP_TOL
    n_starts: int = RPROP_N_INICIOS
    max_iter: int = RPROP_MAX_ITER
    dispersion_inicial: float = DISPERSION_INICIAL
    h: float = PASO_GRADIENTE

    def __post_init__(self):
        if not 0.0 < self.eta_minus < 1.0 < self.eta_plus:
            raise ErrorConfiguracion("se requiere 0 < eta_minus < 1 < eta_plus")
        if not 0.0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ErrorConfiguracion("se requiere 0 < delta_min <= delta0 <= delta_max")
        if self.patience < 1 or self.n_starts < 1 or self.max_iter < 1:
            raise ErrorConfiguracion("patience, n_starts y max_iter deben ser positivos")
        if self.h <= 0.0:
            raise ErrorConfiguracion("el paso h debe ser positivo")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Resultado de la estimación por máxima verosimilitud aproximada"""
    theta_hat: ParameterVector
    params_hat: ParameterSet
    loglik: float
    loglik_trace: List[float]
    se_opg: Optional[np.ndarray] = None
    se_hessian: Optional[np.ndarray] = None
    start_index: int = 0
    semilla: int = 0
    t_entrenamiento: int = 0
    duracion: float = 0.0
    logliks_inicios: List[float] = field(default_factory=list)
    diagnosticos: List[str] = field(default_factory=list)

    @property
    def nombres(self) -> List[str]:
        return self.theta_hat.nombres


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Configuración de una simulación del proceso generador"""
    N: int
    T: int
    params: ParameterSet
    spec: ModelSpec
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if self.N < 1 or self.T < 1 or self.replications < 1:
            raise ErrorConfiguracion("N, T y replications deben ser positivos")


@dataclass(frozen=True, eq=False)
class SimOutput:
    """Panel simulado y su verdad latente"""
    data: PanelDataset
    true_regimes: np.ndarray   # (N, T) con valores 1 y 2
    true_eta1: np.ndarray      # (N, T, U1)
    true_eta2: np.ndarray      # (N, U2)
    true_zeta2: np.ndarray     # (N, U1)
    semilla: int = 0


@dataclass(frozen=True)
class MetricasVentana:
    """Matriz de confusión de una ventana con el régimen 2 como positivo"""
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def sensitivity(self) -> Optional[float]:
        positivos = self.tp + self.fn
        return self.tp / positivos if positivos else None

    @property
    def specificity(self) -> Optional[float]:
        negativos = self.tn + self.fp
        return self.tn / negativos if negativos else None


@dataclass(frozen=True)
class RegimeMetrics:
    """Métricas de clasificación de régimen en las ventanas observada y de pronóstico"""
    observado: MetricasVentana
    pronostico: MetricasVentana


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """Puntaje cuadrático por ocasión de pronóstico (t en base 1)"""
    t: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True, eq=False)
class FactorScoreWeights:
    """Pesos de Bartlett F2 (U2 x O2), con F2 Lambda2 = I"""
    F2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'F2', _solo_lectura(self.F2))
