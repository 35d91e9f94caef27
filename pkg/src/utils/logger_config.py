"""
Configuración del sistema de logging
src/utils/logger_config.py
"""

import logging
import os
import time
from datetime import datetime
from typing import Optional

from src.constants import LOG_DIR, LOG_FILE, LOG_FORMAT

NOMBRE_RAIZ = 'rsss'


def configurar_logging(nivel: int = logging.INFO,
                       directorio_logs: Optional[str] = None) -> logging.Logger:
    """
    Configura el sistema de logging para la aplicación

    Args:
        nivel: Nivel de logging (logging.INFO, logging.DEBUG, etc.)
        directorio_logs: Carpeta de los archivos de log (por defecto ``logs``)

    Returns:
        Logger raíz del paquete configurado
    """
    logs_dir = directorio_logs or LOG_DIR
    os.makedirs(logs_dir, exist_ok=True)

    # Nombre del archivo con timestamp
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_filename = os.path.join(logs_dir, f"rsss_{timestamp}.log")

    formato = logging.Formatter(LOG_FORMAT)
    logger = logging.getLogger(NOMBRE_RAIZ)
    logger.setLevel(nivel)

    # Evitar handlers duplicados si se llama dos veces en el mismo proceso
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    handlers = [
        logging.StreamHandler(),  # Consola
        logging.FileHandler(log_filename, encoding='utf-8'),  # Archivo
        logging.FileHandler(os.path.join(logs_dir, LOG_FILE), encoding='utf-8'),  # Archivo principal
    ]
    for handler in handlers:
        handler.setFormatter(formato)
        handler.setLevel(nivel)
        logger.addHandler(handler)
    logger.propagate = False

    logger.info("=" * 60)
    logger.info("SISTEMA DE LOGGING INICIALIZADO")
    logger.info(f"Archivo de log: {log_filename}")
    logger.info(f"Nivel de logging: {logging.getLevelName(nivel)}")
    logger.info("=" * 60)

    return logger


def obtener_logger(nombre: str) -> logging.Logger:
    """
    Obtiene un logger con el nombre especificado

    Args:
        nombre: Nombre del módulo

    Returns:
        Logger hijo de ``rsss``
    """
    return logging.getLogger(f"{NOMBRE_RAIZ}.{nombre}")


def cambiar_nivel_logging(nuevo_nivel: int):
    """
    Cambia el nivel de logging en tiempo de ejecución

    Args:
        nuevo_nivel: Nuevo nivel de logging
    """
    logger = logging.getLogger(NOMBRE_RAIZ)
    logger.setLevel(nuevo_nivel)

    # Cambiar también en todos los handlers
    for handler in logger.handlers:
        handler.setLevel(nuevo_nivel)

    logger.info(f"Nivel de logging cambiado a: {logging.getLevelName(nuevo_nivel)}")


def limpiar_logs_antiguos(directorio_logs: str = LOG_DIR, dias_antiguedad: int = 7) -> int:
    """
    Elimina archivos de log más antiguos que los días especificados

    Args:
        directorio_logs: Carpeta de los logs
        dias_antiguedad: Días de antigüedad para considerar un log como antiguo

    Returns:
        Número de archivos eliminados
    """
    if not os.path.exists(directorio_logs):
        return 0

    tiempo_limite = time.time() - (dias_antiguedad * 24 * 60 * 60)

    archivos_eliminados = 0
    for archivo in os.listdir(directorio_logs):
        if archivo.startswith("rsss_") and archivo.endswith(".log"):
            ruta_archivo = os.path.join(directorio_logs, archivo)
            if os.path.getmtime(ruta_archivo) < tiempo_limite:
                try:
                    os.remove(ruta_archivo)
                    archivos_eliminados += 1
                except OSError:
                    pass

    if archivos_eliminados > 0:
        logger = obtener_logger("limpieza")
        logger.info(f"Eliminados {archivos_eliminados} archivos de log antiguos")
    return archivos_eliminados
