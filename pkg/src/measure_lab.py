"""
Laboratorio de medidas: orbitas empiricas, conjuntos franja I_n / A_n, ocupacion,
longitudes de Lebesgue, histogramas de desintegracion, exponentes de Lyapunov
y conjuntos generadores en la fibra
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circle_maps import (
    Arc,
    arc_contains,
    MapFamily,
    circle_distance,
    overlap_report,
    push_arcs,
    wrap,
    OverlapReport,
)
from .errors import ConditionViolation, DisjointnessFailure, SampleCapExceeded, SpanningVerificationFailure
from .pattern import Stage
from .symbolic import PeriodicPoint


# Parametros por defecto
DEFAULT_SAMPLE_CAP = 10_000_000
DEFAULT_THETA = 0.5
DEFAULT_RESOLUTION = 1e-10
DEFAULT_ENDPOINT_TOL = 1e-12

# Empujones deterministas de theta cuando un punto cae junto a un extremo
THETA_NUDGE = 1e-3
MAX_NUDGES = 8

# Holgura de la verificacion de eps-densidad
SPANNING_SLACK = 1e-12


@dataclass
class OrbitMeasure:
    """Medida uniforme sobre los pi_m puntos de fibra de una orbita periodica"""
    stage_index: int
    start: float
    points: np.ndarray    # punto tras aplicar l simbolos, l = 1..pi
    symbols: np.ndarray   # simbolo aplicado en el paso l

    def __len__(self) -> int:
        return len(self.points)

    @property
    def phases(self) -> np.ndarray:
        return np.arange(1, len(self.points) + 1)

    @property
    def preimages(self) -> np.ndarray:
        """Punto sobre el que actua cada simbolo"""
        return np.concatenate([[self.start], self.points[:-1]])

    @classmethod
    def from_points(cls, points: Sequence[float], symbols: Sequence[int],
                    start: Optional[float] = None, stage_index: int = -1) -> "OrbitMeasure":
        pts = wrap(np.asarray(points, dtype=float))
        syms = np.asarray(symbols, dtype=np.uint8)
        if len(pts) != len(syms) or len(pts) == 0:
            raise ValueError("points y symbols deben tener la misma longitud (> 0)")
        return cls(stage_index, float(pts[-1] if start is None else start), pts, syms)


def orbit_fiber_points(stages: Sequence[Stage], m: int, fam: MapFamily,
                       sample_cap: int = DEFAULT_SAMPLE_CAP) -> OrbitMeasure:
    """
    Orbita de q_m bajo la palabra xi_m, simbolo a simbolo y sin expandir la palabra

    Args:
        stages: Etapas construidas
        m: Indice de la etapa
        fam: Familia de mapas
        sample_cap: Maximo de puntos

    Returns:
        OrbitMeasure con exactamente pi_m puntos
    """
    stage = stages[m]
    if stage.pi > sample_cap:
        raise SampleCapExceeded(f"Orbita de {stage.pi} puntos excede el limite {sample_cap}")

    points = np.empty(stage.pi)
    symbols = np.empty(stage.pi, dtype=np.uint8)
    x = stage.q
    for ell, j in enumerate(stage.xi.iter_symbols()):
        x = fam.eval_symbol(j, x)
        points[ell] = x
        symbols[ell] = j
    return OrbitMeasure(stage_index=m, start=stage.q, points=points, symbols=symbols)


def lyapunov_exponent(orbit: OrbitMeasure, fam: MapFamily) -> float:
    """(1/pi) * suma de log f'_{w_l} en el punto previo de la orbita"""
    logs = np.log(fam.derivative_many(orbit.symbols.astype(np.intp), orbit.preimages))
    return float(math.fsum(logs)) / len(orbit)


# ── Conjuntos franja ──────────────────────────────────────────────

@dataclass
class StripFamily:
    """Arcos de I_n(J') y A_n(J') con su union y longitud de Lebesgue"""
    level: int
    j_prime: Arc
    theta: float
    i_count: int
    anchors: np.ndarray
    lengths: np.ndarray
    union_starts: np.ndarray
    union_ends: np.ndarray
    overlaps: OverlapReport
    resolution: float

    @property
    def arc_count(self) -> int:
        return len(self.anchors)

    @property
    def total_length(self) -> float:
        return float(np.sum(self.union_ends - self.union_starts))

    def arcs(self, limit: Optional[int] = None) -> List[Arc]:
        count = self.arc_count if limit is None else min(limit, self.arc_count)
        return [Arc(float(self.anchors[i]), float(self.lengths[i])) for i in range(count)]

    def i_arcs(self) -> List[Arc]:
        return self.arcs(self.i_count)

    def contains(self, points: np.ndarray, slack: float = DEFAULT_ENDPOINT_TOL) -> np.ndarray:
        """Pertenencia a la union de arcos cerrados"""
        x = np.asarray(points, dtype=float)
        starts, ends = self.union_starts, self.union_ends
        last = len(starts) - 1
        idx = np.searchsorted(starts, x, side="right") - 1
        inside = (idx >= 0) & (x <= ends[np.maximum(idx, 0)] + slack)
        nxt = np.minimum(idx + 1, last)
        inside |= (idx < last) & (starts[nxt] - slack <= x)
        # Cercania a traves de 0
        inside |= (1.0 - x + starts[0]) <= slack
        inside |= (x + 1.0 - ends[last]) <= slack
        return inside

    def resolved_endpoints(self) -> np.ndarray:
        """Extremos (ordenados, en [0, 1)) de los arcos mas largos que la resolucion"""
        keep = self.lengths > self.resolution
        ends = wrap(self.anchors[keep] + self.lengths[keep])
        return np.sort(np.concatenate([self.anchors[keep], ends]))


def _merge_union(anchors: np.ndarray, lengths: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    starts = anchors
    ends = anchors + lengths
    wraps = ends > 1.0
    s = np.concatenate([starts, np.zeros(int(wraps.sum()))])
    e = np.concatenate([np.minimum(ends, 1.0), ends[wraps] - 1.0])
    order = np.argsort(s, kind="stable")
    s, e = s[order], e[order]
    run_max = np.maximum.accumulate(e)
    new_group = np.empty(len(s), dtype=bool)
    new_group[0] = True
    new_group[1:] = s[1:] > run_max[:-1]
    heads = np.flatnonzero(new_group)
    return s[heads], np.maximum.reduceat(e, heads)


def strip_core(stages: Sequence[Stage], n: int, theta: float = DEFAULT_THETA) -> Arc:
    """
    J' centrado en q_n con longitud max(|cobertura de J_{n+1}|(1+theta), theta|J_n|)

    La cobertura es el menor arco centrado en q_n que contiene a J_{n+1};
    si J_{n+1} no existe queda theta|J_n|. El resultado se recorta dentro de J_n
    y debe seguir conteniendo a J_{n+1}.
    """
    stage = stages[n]
    J, q = stage.J, stage.q
    length = theta * J.length
    if n + 1 < len(stages):
        nxt = stages[n + 1].J
        cover = max(circle_distance(q, nxt.anchor), circle_distance(q, wrap(nxt.end)))
        length = max(length, 2.0 * cover * (1.0 + theta))
    offset = wrap(q - J.anchor)
    room = 2.0 * min(offset, J.length - offset)
    core = Arc.centered(q, min(length, room))
    if n + 1 < len(stages) and not arc_contains(core, stages[n + 1].J, DEFAULT_ENDPOINT_TOL):
        raise ConditionViolation(f"Franja n={n}: J' recortado no contiene a J_{n + 1}", condition=1)
    return core


def build_strips(stages: Sequence[Stage], n: int, fam: MapFamily, theta: float = DEFAULT_THETA,
                 resolution: float = DEFAULT_RESOLUTION) -> StripFamily:
    """
    Arcos g_0^{l_1} o ... o g_{n-1}^{l_n}(J') con l_i en 0..k_i, luego las
    imagenes por los prefijos de omega^0

    Args:
        stages: Etapas construidas (al menos hasta n)
        n: Nivel de la franja
        fam: Familia de mapas
        theta: Parametro de achicamiento de J'
        resolution: Solapamientos menores se reportan como no resueltos

    Returns:
        StripFamily con la union de arcos y su longitud
    """
    if not 0 <= n < len(stages):
        raise ValueError(f"Nivel de franja fuera de rango: {n}")
    core = strip_core(stages, n, theta)
    lo = np.array([core.anchor])
    hi = np.array([core.end])

    # Primero actua g_{n-1}^{l_n}, al final g_0^{l_1}
    for i in range(n, 0, -1):
        word = stages[i - 1].xi
        blocks_lo, blocks_hi = [lo], [hi]
        cur_lo, cur_hi = lo, hi
        for _ in range(stages[i].k):
            cur_lo, cur_hi = push_arcs(fam, word, cur_lo, cur_hi)
            blocks_lo.append(cur_lo)
            blocks_hi.append(cur_hi)
        lo = np.concatenate(blocks_lo)
        hi = np.concatenate(blocks_hi)
    i_count = len(lo)

    omega0 = stages[0].xi.expand()
    blocks_lo, blocks_hi = [lo], [hi]
    cur_lo, cur_hi = lo, hi
    for j in omega0[:-1]:
        cur_lo, cur_hi = push_arcs(fam, (int(j),), cur_lo, cur_hi)
        blocks_lo.append(cur_lo)
        blocks_hi.append(cur_hi)
    lo = wrap(np.concatenate(blocks_lo))
    lengths = np.clip(np.concatenate(blocks_hi) - np.concatenate(blocks_lo), 0.0, 1.0)

    report = overlap_report(lo, lengths, tolerance=resolution)
    if report.failures:
        raise DisjointnessFailure(
            f"Franja n={n}: {report.failures} solapamientos mayores que {resolution:g} "
            f"(peor {report.worst_overlap:.3g})",
            condition=None,
        )
    starts, ends = _merge_union(lo, lengths)
    return StripFamily(
        level=n, j_prime=core, theta=theta, i_count=i_count, anchors=lo, lengths=lengths,
        union_starts=starts, union_ends=ends, overlaps=report, resolution=resolution,
    )


def strips_nested(outer: StripFamily, inner: StripFamily, slack: float = DEFAULT_ENDPOINT_TOL) -> bool:
    """A_m contenido en A_n: ambos extremos de cada arco de inner en la union de outer"""
    starts = inner.anchors
    ends = wrap(inner.anchors + inner.lengths)
    if not (np.all(outer.contains(starts, slack)) and np.all(outer.contains(ends, slack))):
        return False
    # Cada arco debe quedar en una sola componente de la union
    idx_start = np.searchsorted(outer.union_starts, starts + slack, side="right") - 1
    lifted_end = inner.anchors + inner.lengths
    comp_end = outer.union_ends[np.maximum(idx_start, 0)]
    same = lifted_end <= comp_end + slack
    crossing = comp_end >= 1.0 - slack
    return bool(np.all(same | crossing))


@dataclass
class Occupancy:
    count: int
    total: int

    @property
    def proportion(self) -> float:
        return self.count / self.total

    def meets(self, required: int) -> bool:
        return self.count >= required


def occupancy(orbit: OrbitMeasure, strips: StripFamily, slack: float = DEFAULT_ENDPOINT_TOL) -> Occupancy:
    """Cuenta exacta de puntos de la orbita en la union de arcos cerrados"""
    count = int(np.count_nonzero(strips.contains(orbit.points, slack)))
    return Occupancy(count=count, total=len(orbit))


def endpoint_conflicts(orbit: OrbitMeasure, strips: StripFamily, tol: float = DEFAULT_ENDPOINT_TOL) -> int:
    """Puntos de la orbita a distancia < tol de un extremo de arco resuelto"""
    endpoints = strips.resolved_endpoints()
    if len(endpoints) == 0:
        return 0
    x = orbit.points
    idx = np.searchsorted(endpoints, x)
    left = endpoints[(idx - 1) % len(endpoints)]
    right = endpoints[idx % len(endpoints)]
    nearest = np.minimum(circle_distance(x, left), circle_distance(x, right))
    return int(np.count_nonzero(nearest < tol))


@dataclass
class OccupancyRow:
    n: int
    m: int
    count: int
    total: int
    required: int
    rho_m: float

    @property
    def proportion(self) -> float:
        return self.count / self.total

    @property
    def passed(self) -> bool:
        return self.count >= self.required


@dataclass
class StripRow:
    n: int
    theta: float
    nudges: int
    arc_count: int
    i_count: int
    j_prime_length: float
    total_length: float
    unresolved: int
    min_gap: float
    core_fallback: bool = False         # sin J_{n+1}: J' = theta|J_n|
    residual_conflicts: int = 0         # puntos junto a extremos tras los empujones
    nested_next: Optional[bool] = None  # A_{n+1} contenido en A_n


@dataclass
class OccupancyTable:
    strips: List[StripRow]
    rows: List[OccupancyRow]

    def failures(self) -> List[OccupancyRow]:
        return [row for row in self.rows if not row.passed]

    def nesting_failures(self) -> List[StripRow]:
        return [row for row in self.strips if row.nested_next is False]


def occupancy_table(stages: Sequence[Stage], fam: MapFamily, n_max: int, theta: float = DEFAULT_THETA,
                    resolution: float = DEFAULT_RESOLUTION, endpoint_tol: float = DEFAULT_ENDPOINT_TOL,
                    sample_cap: int = DEFAULT_SAMPLE_CAP, orbits: Optional[Dict[int, OrbitMeasure]] = None,
                    progress_callback=None) -> OccupancyTable:
    """
    Ocupacion de A_n por las orbitas de las etapas m = n..n_max

    Para cada n se verifica que ninguna orbita quede junto a un extremo de
    arco resuelto; si ocurre, theta se reduce en un factor fijo y se reconstruye.
    Cada fila de franja registra si A_{n+1} queda contenido en A_n.
    """
    n_max = min(n_max, len(stages) - 1)
    orbits = dict(orbits or {})
    for m in range(1, n_max + 1):
        if m not in orbits:
            orbits[m] = orbit_fiber_points(stages, m, fam, sample_cap)

    strip_rows: List[StripRow] = []
    rows: List[OccupancyRow] = []
    previous: Optional[StripFamily] = None
    for n in range(1, n_max + 1):
        theta_n = theta
        for nudges in range(MAX_NUDGES + 1):
            strips = build_strips(stages, n, fam, theta_n, resolution)
            conflicts = sum(endpoint_conflicts(orbits[m], strips, endpoint_tol) for m in range(n, n_max + 1))
            if conflicts == 0 or nudges == MAX_NUDGES:
                break
            theta_n *= 1.0 - THETA_NUDGE

        strip_rows.append(StripRow(
            n=n, theta=theta_n, nudges=nudges, arc_count=strips.arc_count, i_count=strips.i_count,
            j_prime_length=strips.j_prime.length, total_length=strips.total_length,
            unresolved=strips.overlaps.unresolved, min_gap=strips.overlaps.min_gap,
            core_fallback=n + 1 >= len(stages), residual_conflicts=conflicts,
        ))
        if previous is not None:
            strip_rows[-2].nested_next = strips_nested(previous, strips)
        previous = strips
        for m in range(n, n_max + 1):
            occ = occupancy(orbits[m], strips, endpoint_tol)
            rows.append(OccupancyRow(
                n=n, m=m, count=occ.count, total=occ.total,
                required=stages[m].required_count(), rho_m=stages[m].rho,
            ))
        if progress_callback:
            progress_callback(n / n_max, f"Franja n={n}: {strips.arc_count} arcos")

    return OccupancyTable(strips=strip_rows, rows=rows)


@dataclass
class TrendRow:
    n: int
    total_length: float
    inf_occupancy: float
    rho_n_max: float


def strip_length_trend(stages: Sequence[Stage], fam: MapFamily, n_max: int, theta: float = DEFAULT_THETA,
                       table: Optional[OccupancyTable] = None, **kwargs) -> List[TrendRow]:
    """
    (n, |A_n|, inf de ocupacion sobre m en (n, n_max]); la ultima fila usa m = n
    """
    table = table or occupancy_table(stages, fam, n_max, theta, **kwargs)
    n_max = min(n_max, len(stages) - 1)
    rho_last = stages[n_max].rho
    out = []
    for strip in table.strips:
        later = [r.proportion for r in table.rows if r.n == strip.n and r.m > strip.n]
        if not later:
            later = [r.proportion for r in table.rows if r.n == strip.n and r.m == strip.n]
        out.append(TrendRow(strip.n, strip.total_length, min(later), rho_last))
    return out


# ── Generadores en la fibra ───────────────────────────────────────

@dataclass
class SpanningResult:
    horizon: int
    eps: float
    count: int
    bound: int
    verified: bool
    worst_distance: float
    test_points: int

    @property
    def within_bound(self) -> bool:
        return self.count <= self.bound


def fiber_spanning_count(fam: MapFamily, xi: PeriodicPoint, n: int, eps: float) -> SpanningResult:
    """
    Conjunto (n, eps)-generador en la fibra a lo largo de la base xi

    En cada paso se agregan, en la fibra imagen, puntos equiespaciados en los
    huecos mayores que eps (a lo sumo floor(1/eps) por paso). El orden ciclico
    se preserva, asi que el vecino izquierdo en el conjunto acompaña a cada punto
    en todos los tiempos; la grilla de prueba se verifica paso a paso.

    Returns:
        SpanningResult con count <= n (floor(1/eps) + 1)
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps debe estar en (0, 0.5), recibido {eps}")
    if n < 1:
        raise ValueError(f"El horizonte debe ser >= 1, recibido {n}")

    per_step = math.floor(1.0 / eps)
    bound = n * (per_step + 1)
    initial = per_step + 1

    K = np.arange(initial) / initial
    test_count = 10 * math.ceil(1.0 / eps)
    grid = np.arange(test_count) / test_count
    symbols = xi.expand_range(0, n - 1).astype(np.intp)

    worst = _worst_left_distance(K, grid)
    for j in symbols:
        K = fam.lift_many(np.full(len(K), j), K)
        grid = fam.lift_many(np.full(len(grid), j), grid)
        base = np.floor(K[0])
        K -= base
        grid -= base

        gaps = np.diff(np.append(K, K[0] + 1.0))
        extra = np.maximum(np.ceil(gaps / eps).astype(np.int64) - 1, 0)
        if extra.any():
            where = np.flatnonzero(extra)
            reps = extra[where]
            owner = np.repeat(where, reps)
            rank = np.concatenate([np.arange(1, r + 1) for r in reps])
            fresh = K[owner] + gaps[owner] * rank / (extra[owner] + 1)
            K = np.insert(K, owner + 1, fresh)
        worst = max(worst, _worst_left_distance(K, grid))

    verified = worst <= eps + SPANNING_SLACK
    result = SpanningResult(
        horizon=n, eps=eps, count=len(K), bound=bound, verified=verified,
        worst_distance=worst, test_points=test_count,
    )
    if not verified:
        raise SpanningVerificationFailure(
            f"(n={n}, eps={eps}): distancia {worst:.3g} al vecino del conjunto excede eps"
        )
    return result


def _worst_left_distance(K: np.ndarray, grid: np.ndarray) -> float:
    """Maxima distancia de la grilla a su vecino izquierdo en K (K ordenado, levantado)"""
    x = K[0] + np.mod(grid - K[0], 1.0)
    idx = np.searchsorted(K, x, side="right") - 1
    return float(np.max(x - K[np.maximum(idx, 0)]))


# ── Desintegracion ────────────────────────────────────────────────

@dataclass
class CylinderRow:
    word: Tuple[int, ...]
    weight: float
    samples: int
    heaviest_mass: float
    histogram: np.ndarray


@dataclass
class DisintegrationReport:
    """Histogramas condicionales de la fibra por cilindro de la base"""
    stage_index: int
    window: int
    bins: int
    cylinders: List[CylinderRow]
    aggregate_heaviest: float
    mean_heaviest: float
    max_sum_error: float
    occupancy: List[OccupancyRow] = field(default_factory=list)


def disintegration_histogram(orbit: OrbitMeasure, w: int, B: int) -> DisintegrationReport:
    """
    Agrupa los puntos por el cilindro xi[l-w .. l+w] de su punto base y los
    histograma en B celdas iguales

    Returns:
        DisintegrationReport con la masa de la celda mas pesada por cilindro
    """
    if w < 0:
        raise ValueError(f"Ventana negativa: {w}")
    if B < 1:
        raise ValueError(f"Numero de celdas no valido: {B}")

    total = len(orbit)
    # El punto tras l simbolos esta sobre sigma^l(xi): su coordenada j es xi[l + j]
    positions = np.arange(1, total + 1)
    cyl = np.stack([orbit.symbols[(positions + j) % total] for j in range(-w, w + 1)], axis=1)
    words, inverse, counts = np.unique(cyl, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)

    bins = np.minimum((orbit.points * B).astype(np.int64), B - 1)
    hist = np.zeros((len(words), B))
    np.add.at(hist, (inverse, bins), 1.0)
    conditional = hist / counts[:, None]

    heaviest = conditional.max(axis=1)
    weights = counts / total
    sum_error = float(np.max(np.abs(conditional.sum(axis=1) - 1.0)))

    rows = [
        CylinderRow(
            word=tuple(int(s) for s in words[i]), weight=float(weights[i]), samples=int(counts[i]),
            heaviest_mass=float(heaviest[i]), histogram=conditional[i],
        )
        for i in range(len(words))
    ]
    return DisintegrationReport(
        stage_index=orbit.stage_index,
        window=w,
        bins=B,
        cylinders=rows,
        aggregate_heaviest=float(np.dot(weights, heaviest)),
        mean_heaviest=float(heaviest.mean()),
        max_sum_error=sum_error,
    )


@dataclass
class WeakStarGap:
    """Distancias entre medidas empiricas sobre una familia de funciones de prueba"""
    fourier: float
    cylinder: float

    @property
    def value(self) -> float:
        return max(self.fourier, self.cylinder)


def _cylinder_frequencies(orbit: OrbitMeasure, length: int) -> Dict[Tuple[int, ...], float]:
    total = len(orbit)
    positions = np.arange(1, total + 1)
    cyl = np.stack([orbit.symbols[(positions + j) % total] for j in range(length)], axis=1)
    words, counts = np.unique(cyl, axis=0, return_counts=True)
    return {tuple(int(s) for s in word): c / total for word, c in zip(words, counts)}


def weak_star_gap(first: OrbitMeasure, second: OrbitMeasure, modes: int = 8, word_length: int = 3) -> WeakStarGap:
    """
    Modos de Fourier en la fibra (max_j |E e^{2 pi i j x}| de la diferencia) y
    variacion total de las frecuencias de cilindros de la base
    """
    harmonics = np.arange(1, modes + 1)[:, None]
    phase_a = np.exp(2j * np.pi * harmonics * first.points[None, :]).mean(axis=1)
    phase_b = np.exp(2j * np.pi * harmonics * second.points[None, :]).mean(axis=1)
    fourier = float(np.max(np.abs(phase_a - phase_b))) if modes else 0.0

    freq_a = _cylinder_frequencies(first, word_length)
    freq_b = _cylinder_frequencies(second, word_length)
    keys = set(freq_a) | set(freq_b)
    cylinder = 0.5 * sum(abs(freq_a.get(k, 0.0) - freq_b.get(k, 0.0)) for k in keys)
    return WeakStarGap(fourier=fourier, cylinder=float(cylinder))
