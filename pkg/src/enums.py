"""
Enumeraciones y tipos de datos del sistema
src/enums.py
"""

from enum import Enum


class Regimen(Enum):
    """Regímenes del modelo (1: sin intención, 2: intención de abandono)"""
    UNO = 1
    DOS = 2


class Transformacion(Enum):
    """Transformaciones entre valor restringido y entrada de theta"""
    IDENTIDAD = "identidad"
    LOG = "log"
    ORDENADA = "ordenada"   # b1 del régimen 2 = b1 del régimen 1 + exp(theta)
    LOGIT = "logit"


class ModoPronostico(Enum):
    """Modos de pronóstico fuera de muestra"""
    UN_PASO = "un_paso"
    EXTRAPOLACION = "extrapolacion"


class MetodoErrores(Enum):
    """Estimadores de errores estándar disponibles"""
    OPG = "opg"
    HESSIANA = "hessiana"


class Comando(Enum):
    """Subcomandos de la línea de comandos"""
    SIMULATE = "simulate"
    FIT = "fit"
    FORECAST = "forecast"
    EVALUATE = "evaluate"


class CodigoSalida(Enum):
    """Códigos de salida del proceso"""
    EXITO = 0
    ERROR_CONFIGURACION = 2
    FALLA_NUMERICA = 3
