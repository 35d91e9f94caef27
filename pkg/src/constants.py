"""
Configuración global y constantes del sistema
src/constants.py
"""

# Número de regímenes del modelo (fijo)
NUM_REGIMENES = 2

# Parámetros fijados para identificación
GAMMA1_FIJO = 4.60          # logit(0.99)
P12_FIJO = 1e-12            # probabilidad de volver al régimen 1
PROB_INICIAL_REGIMEN1 = 1.0

# Tolerancias numéricas
TOL_SIMETRIA = 1e-12
TOL_BARTLETT = 1e-10
COND_MAXIMA = 1e12          # número de condición aceptado al invertir informaciones

# Optimizador Rprop
RPROP_ETA_MAS = 1.2
RPROP_ETA_MENOS = 0.5
RPROP_DELTA_MIN = 1e-6
RPROP_DELTA_MAX = 50.0
RPROP_PACIENCIA = 20
RPROP_TOL = 1e-4
RPROP_N_INICIOS = 3
RPROP_MAX_ITER = 1000

PRESETS_RPROP = {
    'empirico': {'delta0': 0.01},
    'simulacion': {'delta0': 0.1},
}

# Diferencias finitas
PASO_GRADIENTE = 1e-5
PASO_HESSIANA = 1e-4

# Inicialización de los arranques
DISPERSION_INICIAL = 0.1
AR_INICIAL = 0.5
FRACCION_VARIANZA_MEDICION = 0.5
FRACCION_VARIANZA_PROCESO = 0.1

# Evaluación
CORTE_REGIMEN = 0.5
FRACCION_ENTRENAMIENTO = 0.5

# Diseño del estudio de simulación
N_ESTUDIO = (75, 100)
T_ESTUDIO = 50
PRESET_RAPIDO = {'N': 40, 'T': 30, 'replicaciones': 5}

# Configuración de logging
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_FILE = 'rsss.log'
LOG_DIR = 'logs'
INTERVALO_REPORTE_OPTIMIZADOR = 25  # iteraciones

# Valores verdaderos del diseño de simulación (2 factores dinámicos: costo, miedo a fallar).
# None marca una carga libre en el patrón.
PARAMETROS_SIMULACION = {
    'patron_carga_1': [[1.0, 0.0], [None, 0.0], [0.0, 1.0], [0.0, None]],
    'patron_carga_2': [[1.0], [1.0]],
    'Lambda1': [[1.0, 0.0], [0.92, 0.0], [0.0, 1.0], [0.0, 0.92]],
    'R1': [0.26, 0.29, 0.32, 0.35],
    'Lambda2': [[1.0], [1.0]],
    'R2': [0.47, 0.54],
    'P2': [[0.74]],
    'b1': [[-0.01, -0.01], [0.06, 0.06]],
    'b2': [[[-0.03], [-0.03]], [[-0.02], [-0.03]]],
    'B3': [[0.94, 0.93], [0.93, 0.96]],
    'B4': [[0.01, 0.00], [0.01, 0.02]],
    'Q1': [0.03, 0.01],
    'Q2': [0.0, 0.0],
    'gamma1': GAMMA1_FIJO,
    'gamma2': [-0.93],
    'gamma3': [-3.28, -2.58],
    'gamma4': [1.55, -2.28],
    'mascara_gamma4': [True, True],
    'P12': P12_FIJO,
}

# Estimaciones del estudio empírico (7 factores dinámicos, 17 ítems, 1 factor entre-individuos).
# Tamaños de factor 3,2,2,2,2,3,3; las cargas libres sin valor publicado quedan en 1.0.
PARAMETROS_EMPIRICOS = {
    'items_por_factor': [3, 2, 2, 2, 2, 3, 3],
    'cargas_libres': [1.29, 1.03, 0.92, 0.92, 1.14, 1.09, 1.0, 1.0, 1.0, 1.0],
    'R1': [0.37, 0.29, 0.50, 0.26, 0.29, 0.32, 0.35, 0.31, 0.36,
           0.29, 0.24, 0.40, 0.53, 0.66, 0.56, 0.32, 0.49],
    'Lambda2': [[1.0], [1.0]],
    'R2': [0.47, 0.54],
    'P2': [[0.74]],
    'b1': [[0.04, -0.01, -0.01, 0.02, 0.03, 0.03, -0.07],
           [0.06, 0.06, 0.06, 0.07, 0.12, 0.09, 0.04]],
    'b2': [[-0.02, -0.03, -0.03, -0.03, -0.05, -0.01, -0.04],
           [-0.02, -0.02, -0.03, -0.04, -0.04, -0.01, -0.01]],
    'B3': [[0.89, 0.94, 0.93, 0.91, 0.90, 0.91, 0.88],
           [0.93, 0.93, 0.96, 0.91, 0.91, 0.88, 0.93]],
    'B4': [[0.05, 0.01, 0.00, 0.01, 0.00, 0.04, 0.00],
           [0.02, 0.01, 0.02, 0.02, 0.02, 0.03, 0.00]],
    'Q1': [0.02, 0.03, 0.01, 0.02, 0.03, 0.09, 0.09],
    'Q2': [0.0] * 7,
    'gamma1': GAMMA1_FIJO,
    'gamma2': [-0.93],
    'gamma3': [-3.92, -3.28, -2.58, 0.76, -0.78, -0.24, -0.97],
    'gamma4': [0.0, 1.55, -2.28, 0.0, -1.35, 0.0, 0.0],
    'mascara_gamma4': [False, True, True, False, True, False, False],
    'P12': P12_FIJO,
}

# Grupos de parámetros en el orden del vector de optimización
GRUPOS_PARAMETROS = (
    'Lambda1', 'R1', 'Lambda2', 'R2', 'b1', 'b2', 'B3', 'B4',
    'Q1', 'Q2', 'gamma1', 'gamma2', 'gamma3', 'gamma4', 'P12',
)
GRUPOS_FIJABLES = ('R1', 'R2', 'b1', 'b2', 'B3', 'B4', 'Q1', 'Q2',
                   'gamma1', 'gamma2', 'gamma3', 'gamma4', 'P12', 'P2')
GRUPOS_INVARIANTES = ('Lambda1', 'R1', 'Q1')
