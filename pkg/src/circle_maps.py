"""
Aritmetica del circulo S^1 = R/Z y familias parametricas de difeomorfismos
Composicion por palabras, derivadas, imagenes de arcos y puntos fijos atractores
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np

from .errors import NoContraction, NoConvergence
from .symbolic import WordLike, iter_symbols


TWO_PI = 2.0 * math.pi

# Parametros por defecto del localizador de puntos fijos
DEFAULT_GRID_POINTS = 4096
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERATIONS = 1_000_000

# Iteraciones sin mejora antes de pasar a biseccion
STALL_WINDOW = 64
BISECTION_STEPS = 200

# Cada cuantos simbolos se vuelca el producto de derivadas a log
_LOG_FLUSH = 32

CirclePoint = float
Points = Union[float, np.ndarray]


def wrap(x: Points) -> Points:
    """Reduce mod 1 a [0, 1). Acepta escalares o arrays"""
    if isinstance(x, np.ndarray):
        r = np.mod(x, 1.0)
        return np.where(r >= 1.0, 0.0, r)
    r = float(x) % 1.0
    return 0.0 if r >= 1.0 else r


def circle_distance(u: Points, v: Points) -> Points:
    """min(|u - v|, 1 - |u - v|) en el circulo de longitud 1"""
    d = np.abs(np.asarray(u) - np.asarray(v)) % 1.0
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Arc:
    """
    Arco {anchor + t mod 1 : 0 <= t <= length}

    Longitud 1 es el circulo completo. Se admiten arcos de longitud 0
    (imagenes degeneradas a resolucion de punto flotante).
    """
    anchor: float
    length: float

    def __post_init__(self):
        if not (0.0 <= self.length <= 1.0) or not math.isfinite(self.anchor):
            raise ValueError(f"Arco no valido: anchor={self.anchor}, length={self.length}")
        object.__setattr__(self, "anchor", wrap(self.anchor))

    @classmethod
    def centered(cls, center: float, length: float) -> "Arc":
        return cls(center - length / 2.0, length)

    @property
    def is_full(self) -> bool:
        return self.length >= 1.0

    @property
    def end(self) -> float:
        """Extremo final sin reducir (levantado)"""
        return self.anchor + self.length

    @property
    def center(self) -> float:
        return wrap(self.anchor + self.length / 2.0)

    def contains_point(self, x: float, slack: float = 0.0) -> bool:
        if self.is_full:
            return True
        offset = wrap(x - self.anchor)
        return offset <= self.length + slack or offset >= 1.0 - slack

    def grid(self, points: int) -> np.ndarray:
        """Grilla uniforme levantada que incluye ambos extremos"""
        return np.linspace(self.anchor, self.end, points)


# ── Familias de difeomorfismos ────────────────────────────────────

class MapFamily:
    """Familia de difeomorfismos del circulo indexada por simbolos 1..k"""

    family_id = "base"

    def __init__(self, params: Dict[int, Sequence[float]]):
        if not params:
            raise ValueError("La familia necesita al menos un simbolo")
        self.params: Dict[int, Tuple[float, ...]] = {
            int(j): tuple(float(p) for p in values) for j, values in params.items()
        }
        expected = list(range(1, len(self.params) + 1))
        if sorted(self.params) != expected:
            raise ValueError(f"Los simbolos deben ser 1..k, recibidos {sorted(self.params)}")

    @property
    def alphabet_size(self) -> int:
        return len(self.params)

    @property
    def symbols(self) -> List[int]:
        return sorted(self.params)

    def check_symbol(self, j: int):
        if j not in self.params:
            raise ValueError(f"Simbolo desconocido: {j}")

    def lift(self, j: int, x: Points) -> Points:
        """Levantamiento R -> R de f_j (grado 1, creciente)"""
        raise NotImplementedError

    def derivative(self, j: int, x: Points) -> Points:
        raise NotImplementedError

    def max_derivative(self, j: int) -> float:
        """sup de |f_j'| sobre todo el circulo"""
        raise NotImplementedError

    def lift_many(self, symbols: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Aplica f_{symbols[i]} a x[i] componente a componente"""
        raise NotImplementedError

    def derivative_many(self, symbols: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval_symbol(self, j: int, x: Points) -> Points:
        return wrap(self.lift(j, x))

    def describe(self) -> Dict:
        return {
            "id": self.family_id,
            "params": {str(j): [repr(p) for p in self.params[j]] for j in self.symbols},
        }


class SineFamily(MapFamily):
    """
    Rotaciones perturbadas x -> x + a_j + (b_j / 2pi) sin(2pi x) mod 1

    Derivada exacta 1 + b_j cos(2pi x); |b_j| < 1 garantiza difeomorfismo.
    """

    family_id = "sine"

    def __init__(self, params: Dict[int, Sequence[float]]):
        super().__init__(params)
        size = self.alphabet_size + 1
        self._a = np.zeros(size)
        self._b = np.zeros(size)
        for j, values in self.params.items():
            if len(values) != 2:
                raise ValueError(f"Simbolo {j}: la familia sine usa (a, b), recibido {values}")
            a, b = values
            if not abs(b) < 1.0:
                raise ValueError(f"Simbolo {j}: |b| debe ser < 1, recibido {b}")
            self._a[j] = a
            self._b[j] = b
        self._s = self._b / TWO_PI
        self._coef = {j: (float(self._a[j]), float(self._s[j]), float(self._b[j])) for j in self.params}

    def _coefficients(self, j: int) -> Tuple[float, float, float]:
        try:
            return self._coef[j]
        except KeyError:
            raise ValueError(f"Simbolo desconocido: {j}") from None

    def lift(self, j: int, x: Points) -> Points:
        a, s, _ = self._coefficients(j)
        if isinstance(x, np.ndarray):
            return x + a + s * np.sin(TWO_PI * x)
        return x + a + s * math.sin(TWO_PI * x)

    def derivative(self, j: int, x: Points) -> Points:
        _, _, b = self._coefficients(j)
        if isinstance(x, np.ndarray):
            return 1.0 + b * np.cos(TWO_PI * x)
        return 1.0 + b * math.cos(TWO_PI * x)

    def max_derivative(self, j: int) -> float:
        _, _, b = self._coefficients(j)
        return 1.0 + abs(b)

    def lift_many(self, symbols: np.ndarray, x: np.ndarray) -> np.ndarray:
        return x + self._a[symbols] + self._s[symbols] * np.sin(TWO_PI * x)

    def derivative_many(self, symbols: np.ndarray, x: np.ndarray) -> np.ndarray:
        return 1.0 + self._b[symbols] * np.cos(TWO_PI * x)


# Familias de forma cerrada registradas
FAMILIES: Dict[str, Type[MapFamily]] = {
    "sine": SineFamily,
}


def build_family(family_id: str, params: Dict[int, Sequence[float]]) -> MapFamily:
    if family_id not in FAMILIES:
        raise ValueError(f"Familia no valida: {family_id}. Opciones: {list(FAMILIES.keys())}")
    return FAMILIES[family_id](params)


# ── Composicion por palabras ──────────────────────────────────────

def eval_symbol(fam: MapFamily, j: int, x: Points) -> Points:
    return fam.eval_symbol(j, x)


def eval_word(fam: MapFamily, w: WordLike, x: Points) -> Points:
    """
    Aplica la palabra de izquierda a derecha: el primer simbolo actua primero

    Args:
        fam: Familia de mapas
        w: Palabra (texto, lista o HierarchicalWord; no se expande)
        x: Punto o array de puntos

    Returns:
        f_{w_n} o ... o f_{w_1}(x) reducido mod 1
    """
    if isinstance(x, np.ndarray):
        x = x.astype(float)
        for j in iter_symbols(w):
            x = wrap(fam.lift(j, x))
        return x
    x = wrap(x)
    for j in iter_symbols(w):
        x = fam.lift(j, x) % 1.0
    return wrap(x)


def word_log_derivative(fam: MapFamily, w: WordLike, x: Points) -> Points:
    """log de la derivada de la composicion; no sufre underflow"""
    is_array = isinstance(x, np.ndarray)
    x = np.array(x, dtype=float) if is_array else wrap(x)
    total = np.zeros_like(x) if is_array else 0.0
    product = np.ones_like(x) if is_array else 1.0
    log = np.log if is_array else math.log
    for step, j in enumerate(iter_symbols(w), start=1):
        product = product * fam.derivative(j, x)
        x = fam.lift(j, x)
        if step % _LOG_FLUSH == 0:
            total = total + log(product)
            product = np.ones_like(x) if is_array else 1.0
            x = wrap(x)
    return total + log(product)


def word_derivative(fam: MapFamily, w: WordLike, x: Points) -> Points:
    """Producto de derivadas a lo largo de la orbita de x (regla de la cadena)"""
    log_d = word_log_derivative(fam, w, x)
    if isinstance(log_d, np.ndarray):
        return np.exp(log_d)
    return math.exp(log_d)


def push_arcs(fam: MapFamily, w: WordLike, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Imagen de arcos [lo, hi] (levantados) bajo la palabra

    Returns:
        (lo, hi) con lo en [0, 1) y hi - lo la longitud de la imagen
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for j in iter_symbols(w):
        lo = fam.lift(j, lo)
        hi = fam.lift(j, hi)
        shift = np.floor(lo)
        lo -= shift
        hi -= shift
    return lo, hi


def arc_image(fam: MapFamily, w: WordLike, arc: Arc) -> Arc:
    """Arco entre las imagenes de los extremos, en sentido positivo"""
    if arc.is_full:
        raise ValueError("arc_image requiere un arco propio (longitud < 1)")
    lo, hi = push_arcs(fam, w, np.array([arc.anchor]), np.array([arc.end]))
    return Arc(float(lo[0]), min(1.0, max(0.0, float(hi[0] - lo[0]))))


# ── Logica de arcos ───────────────────────────────────────────────

@dataclass
class OverlapReport:
    """Resultado del barrido de solapamientos entre arcos"""
    arc_count: int
    touching: int          # pares adyacentes que se tocan o solapan
    failures: int          # solapamientos mayores que la tolerancia
    unresolved: int        # solapamientos <= tolerancia
    worst_overlap: float
    min_gap: float

    @property
    def disjoint(self) -> bool:
        return self.touching == 0


def _split_pieces(anchors: np.ndarray, lengths: np.ndarray):
    starts = np.asarray(anchors, dtype=float)
    ends = starts + np.asarray(lengths, dtype=float)
    ids = np.arange(len(starts))
    wraps = ends > 1.0
    piece_starts = np.concatenate([starts, np.zeros(int(wraps.sum()))])
    piece_ends = np.concatenate([np.minimum(ends, 1.0), ends[wraps] - 1.0])
    piece_ids = np.concatenate([ids, ids[wraps]])
    return piece_starts, piece_ends, piece_ids


def overlap_report(anchors: np.ndarray, lengths: np.ndarray, tolerance: float = 0.0) -> OverlapReport:
    """
    Barrido ordenado de arcos; tocarse en un extremo cuenta como interseccion

    Args:
        anchors: Inicios en [0, 1)
        lengths: Longitudes (< 1)
        tolerance: Solapamientos hasta esta longitud se cuentan como no resueltos
    """
    count = len(anchors)
    if count == 0:
        return OverlapReport(0, 0, 0, 0, 0.0, 1.0)
    if np.any(np.asarray(lengths) >= 1.0):
        overlaps = count - 1
        return OverlapReport(count, overlaps, overlaps, 0, 1.0, 0.0)

    starts, ends, _ = _split_pieces(anchors, lengths)
    order = np.argsort(starts, kind="stable")
    s, e = starts[order], ends[order]
    run_max = np.maximum.accumulate(e)
    overlap = np.minimum(run_max[:-1], e[1:]) - s[1:]
    hit = s[1:] <= run_max[:-1]
    amounts = overlap[hit]

    touching = int(hit.sum())
    failures = int((amounts > tolerance).sum())
    worst = float(amounts.max()) if touching else 0.0

    gaps = s[1:] - run_max[:-1]
    gaps = gaps[~hit]
    # Hueco a traves de 0
    wrap_gap = s[0] + 1.0 - run_max[-1]
    raw_starts = np.asarray(anchors, dtype=float)
    raw_ends = raw_starts + np.asarray(lengths, dtype=float)
    if np.any(raw_ends > 1.0):
        # 0 cae dentro de un arco partido; el barrido ya vio sus contactos
        pass
    elif np.any(raw_ends >= 1.0) and np.any(raw_starts <= 0.0):
        touching += 1
    else:
        gaps = np.append(gaps, wrap_gap)
    min_gap = float(gaps.min()) if len(gaps) else 0.0

    return OverlapReport(
        arc_count=count,
        touching=touching,
        failures=failures,
        unresolved=touching - failures,
        worst_overlap=worst,
        min_gap=min_gap,
    )


def arcs_disjoint(arcs: Sequence[Arc]) -> bool:
    """Disjuntos dos a dos; arcos que se tocan NO son disjuntos"""
    if len(arcs) <= 1:
        return True
    anchors = np.array([a.anchor for a in arcs])
    lengths = np.array([a.length for a in arcs])
    return overlap_report(anchors, lengths).disjoint


def arc_contains(outer: Arc, inner: Arc, slack: float = 0.0) -> bool:
    """Verdadero si inner esta contenido en outer (arcos cerrados)"""
    if outer.is_full:
        return True
    if inner.is_full:
        return False
    offset = wrap(inner.anchor - outer.anchor + slack)
    return offset + inner.length <= outer.length + 2.0 * slack


# ── Puntos fijos atractores ───────────────────────────────────────

@dataclass(frozen=True)
class FixedPoint:
    """Punto fijo atractor q y cota de contraccion c sobre el arco"""
    q: float
    c: float
    log_c: float
    iterations: int
    method: str

    def __iter__(self):
        return iter((self.q, self.c))


def sup_log_derivative(fam: MapFamily, w: WordLike, arc: Arc,
                       grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Maximo de log|g'| sobre una grilla uniforme del arco"""
    grid = arc.grid(max(2, grid_points))
    return float(np.max(word_log_derivative(fam, w, grid)))


def find_attracting_fixed_point(
    fam: MapFamily,
    w: WordLike,
    arc: Arc,
    tol: float = DEFAULT_TOL,
    grid_points: int = DEFAULT_GRID_POINTS,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FixedPoint:
    """
    Localiza el punto fijo atractor de g = eval_word(w, .) en el arco

    Args:
        fam: Familia de mapas
        w: Palabra que define g
        arc: Arco J con g(J) contenido en J
        tol: Tolerancia de |g(q) - q| (distancia en el circulo)
        grid_points: Puntos de la grilla para estimar sup|g'|
        max_iterations: Presupuesto de iteraciones

    Returns:
        FixedPoint con q y c = sup|g'| estimado en la grilla
    """
    image = arc_image(fam, w, arc)
    if not arc_contains(arc, image):
        raise NoContraction(f"g(J) no esta contenido en J (J={arc}, g(J)={image})")

    log_c = sup_log_derivative(fam, w, arc, grid_points)
    if log_c >= 0.0:
        raise NoContraction(f"sup|g'| >= 1 en J (log c = {log_c:.6g})")
    c = math.exp(log_c)

    x = arc.center
    best = math.inf
    stalled = 0
    for iteration in range(1, max_iterations + 1):
        y = eval_word(fam, w, x)
        distance = circle_distance(x, y)
        if distance < tol:
            return FixedPoint(q=x, c=c, log_c=log_c, iterations=iteration, method="iteration")
        if distance < best:
            best = distance
            stalled = 0
        else:
            stalled += 1
            if stalled >= STALL_WINDOW:
                break
        x = y

    q = _bisect_fixed_point(fam, w, arc, tol)
    if q is None:
        raise NoConvergence(f"Punto fijo sin convergencia (tol={tol}, mejor distancia={best:.3g})")
    return FixedPoint(q=q, c=c, log_c=log_c, iterations=max_iterations, method="bisection")


def _bisect_fixed_point(fam: MapFamily, w: WordLike, arc: Arc, tol: float) -> Optional[float]:
    """Biseccion sobre el desplazamiento levantado g(x) - x dentro de J"""
    def displacement(t: float) -> float:
        # t es la posicion relativa al ancla; g(J) esta en J
        x = wrap(arc.anchor + t)
        return wrap(eval_word(fam, w, x) - arc.anchor) - t

    lo, hi = 0.0, arc.length
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        d = displacement(mid)
        x = wrap(arc.anchor + mid)
        if circle_distance(eval_word(fam, w, x), x) < tol:
            return x
        if d > 0:
            lo = mid
        else:
            hi = mid
    return None
