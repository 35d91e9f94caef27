#!/usr/bin/env python3
"""
Modelos de espacio de estados con cambio de régimen para paneles longitudinales
Archivo Principal - main.py
"""

import sys

from src.cli import ejecutar
from src.constants import LOG_DIR
from src.utils.logger_config import configurar_logging, limpiar_logs_antiguos


def mostrar_bienvenida():
    """Muestra el mensaje de bienvenida del sistema"""
    print("📈 RSSS: MODELOS DE ESPACIO DE ESTADOS CON CAMBIO DE RÉGIMEN")
    print("=" * 80)
    print("Etapas disponibles:")
    print("🎲 simulate  - Paneles simulados con su verdad latente")
    print("🔧 fit       - Máxima verosimilitud aproximada (filtro de Kim + Rprop)")
    print("🔮 forecast  - Probabilidades de régimen y latentes a un paso")
    print("🧭 evaluate  - Exactitud, sensibilidad, especificidad, puntaje y recuperación")
    print("")
    print("USO: python main.py <etapa> --config configs/simulacion.yaml [--jobs N] [--seed S] [--out DIR]")
    print("=" * 80)


def main(argv=None) -> int:
    """Función principal del programa"""
    logger = configurar_logging()
    limpiar_logs_antiguos(LOG_DIR)

    argumentos = sys.argv[1:] if argv is None else argv
    if not argumentos or argumentos[0] in ('-h', '--help'):
        mostrar_bienvenida()

    try:
        return ejecutar(argumentos)
    except KeyboardInterrupt:
        print("\n👋 Corrida terminada por el usuario")
        logger.info("Corrida terminada por interrupción del usuario")
        return 130


if __name__ == "__main__":
    sys.exit(main())
