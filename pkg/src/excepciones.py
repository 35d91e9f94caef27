"""
Jerarquía de excepciones del paquete
src/excepciones.py
"""

from typing import List, Optional


class ErrorRSSS(Exception):
    """Raíz de todos los errores del paquete"""


class ErrorConfiguracion(ErrorRSSS):
    """Configuración inválida; guarda la línea del documento YAML si se conoce"""

    def __init__(self, mensaje: str, linea: Optional[int] = None):
        self.linea = linea
        if linea is not None:
            mensaje = f"línea {linea}: {mensaje}"
        super().__init__(mensaje)


class ViolacionRestriccion(ErrorRSSS):
    """Un conjunto de parámetros viola una restricción del modelo"""

    def __init__(self, entrada: str, motivo: str):
        self.entrada = entrada
        super().__init__(f"{entrada}: {motivo}")


class ErrorDimensiones(ErrorRSSS):
    """Dimensiones incompatibles entre arreglos o con el layout"""


class FallaNumerica(ErrorRSSS):
    """Fallas numéricas (código de salida 3)"""


class ErrorEstimacion(FallaNumerica):
    """Sistema de Bartlett singular u otra estimación imposible"""


class FallaFiltro(FallaNumerica):
    """El filtro no puede continuar; lleva el contexto (i, t, s, s')"""

    def __init__(self, motivo: str, i: Optional[int] = None, t: Optional[int] = None,
                 s: Optional[int] = None, s_prev: Optional[int] = None):
        self.motivo = motivo
        self.i = i
        self.t = t
        self.s = s
        self.s_prev = s_prev
        contexto = ", ".join(
            f"{nombre}={valor}"
            for nombre, valor in (("i", i), ("t", t), ("s", s), ("s'", s_prev))
            if valor is not None
        )
        super().__init__(f"{motivo} ({contexto})" if contexto else motivo)


class FallaAjuste(FallaNumerica):
    """Todos los arranques del optimizador divergieron"""

    def __init__(self, mensaje: str, diagnosticos: Optional[List[str]] = None):
        self.diagnosticos = diagnosticos or []
        detalle = "; ".join(self.diagnosticos)
        super().__init__(f"{mensaje}: {detalle}" if detalle else mensaje)


class ErrorEvaluacion(ErrorRSSS):
    """Evaluación imposible: ventana vacía, verdad ausente, pocas replicaciones"""
