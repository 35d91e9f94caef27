# src/utils/__init__.py
"""
Módulo de utilidades: logging a archivo y reportes en consola
"""
