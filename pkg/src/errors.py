"""
Errores del laboratorio
Cada error lleva el codigo de salida del CLI y, si aplica, la condicion de patron violada
"""
from typing import Optional


class LabError(Exception):
    """Error base del laboratorio"""

    exit_code = 2

    def __init__(self, message: str, condition: Optional[int] = None):
        super().__init__(message)
        self.condition = condition

    def describe(self) -> str:
        if self.condition is None:
            return str(self)
        return f"condicion {self.condition}: {self}"


# ── Violaciones de condiciones del patron (salida 2) ──────────────

class ConditionViolation(LabError):
    """Una condicion del patron repetitivo no se cumple"""


class NoContraction(ConditionViolation):
    """La palabra no contrae el arco (g(J) fuera de J o derivada >= 1)"""

    def __init__(self, message: str, condition: Optional[int] = 3):
        super().__init__(message, condition)


class NoConvergence(ConditionViolation):
    """La busqueda de punto fijo no alcanzo la tolerancia"""

    def __init__(self, message: str, condition: Optional[int] = 3):
        super().__init__(message, condition)


class DisjointnessFailure(ConditionViolation):
    """Arcos que debian ser disjuntos se intersectan"""

    def __init__(self, message: str, condition: Optional[int] = 2):
        super().__init__(message, condition)


class NoiseWordNotFound(ConditionViolation):
    """Ninguna palabra de ruido candidata produjo una etapa valida"""

    def __init__(self, message: str, condition: Optional[int] = 3):
        super().__init__(message, condition)


# ── Chequeos cuantitativos (salida 3) ─────────────────────────────

class QuantitativeCheckFailed(LabError):
    exit_code = 3


class CertificationFailure(QuantitativeCheckFailed):
    """Un par del emparejamiento por bloques no pasa window_agree"""


class SpanningVerificationFailure(QuantitativeCheckFailed):
    """La grilla de prueba no queda eps-cubierta"""


# ── Limites de recursos (salida 4) ────────────────────────────────

class ResourceCapExceeded(LabError):
    exit_code = 4


class HorizonTooLarge(ResourceCapExceeded):
    pass


class SampleCapExceeded(ResourceCapExceeded):
    pass


class WordOverflow(ResourceCapExceeded):
    """El periodo no cabe en 64 bits sin signo"""
