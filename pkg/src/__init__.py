# src/__init__.py
"""
Modelos de espacio de estados con cambio de régimen (RSSS)
Paquete principal
"""

__version__ = "1.0.0"
__description__ = "Filtro de Kim extendido, estimación Rprop y pronóstico de regímenes en paneles"
