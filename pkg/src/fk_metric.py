"""
Pseudometrica de Feldman-Katok sobre orbitas de la base
Emparejamientos (n, delta) por programacion dinamica, funciones gap, f-bar_delta
para sucesiones periodicas, estimacion de F-bar_K, cota certificada por bloques
y oraculo por fuerza bruta
"""
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CertificationFailure, HorizonTooLarge
from .pattern import Stage
from .symbolic import PeriodicPoint, phased_equal, window_agree


# Horizonte maximo de la programacion dinamica exacta
DP_CAP = 20_000

# Tabla completa (para reconstruir el alineamiento) solo hasta este horizonte
ALIGNMENT_CAP = 2_000

BRUTE_FORCE_CAP = 10


@dataclass(frozen=True)
class MatchProblem:
    u: PeriodicPoint
    v: PeriodicPoint
    horizon: int
    window: int
    phase_u: int = 0
    phase_v: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"El horizonte debe ser >= 1, recibido {self.horizon}")
        if self.window < 0:
            raise ValueError(f"Ventana negativa: {self.window}")


@dataclass
class MatchResult:
    fit: int
    horizon: int
    alignment: Optional[List[Tuple[int, int]]] = None

    @property
    def gap(self) -> float:
        return 1.0 - self.fit / self.horizon


def window_tokens(u: PeriodicPoint, v: PeriodicPoint, horizon: int, window: int,
                  phase_u: int = 0, phase_v: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Identificador entero de cada ventana de 2m+1 simbolos

    Dos posiciones coinciden a la escala de la ventana si y solo si tienen
    el mismo identificador.
    """
    span = 2 * window + 1
    wu = sliding_window_view(u.expand_range(phase_u - window, phase_u + horizon + window), span)
    wv = sliding_window_view(v.expand_range(phase_v - window, phase_v + horizon + window), span)
    _, inverse = np.unique(np.vstack([wu, wv]), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return inverse[:horizon], inverse[horizon:]


def _fit_rows(tu: np.ndarray, tv: np.ndarray, horizons: Sequence[int], keep_table: bool = False):
    """
    Recurrencia T[i][j] = max(T[i-1][j], T[i][j-1], T[i-1][j-1] + agree(i-1, j-1))
    fila por fila; devuelve T[h][h] para cada horizonte pedido
    """
    size = max(horizons)
    wanted = set(horizons)
    fits = {}
    prev = np.zeros(size + 1, dtype=np.int64)
    table = np.zeros((size + 1, size + 1), dtype=np.int32) if keep_table else None
    tv = tv[:size]
    for i in range(size):
        agree = tv == tu[i]
        candidate = np.maximum(prev[1:], prev[:-1] + agree)
        row = np.empty_like(prev)
        row[0] = 0
        np.maximum.accumulate(candidate, out=row[1:])
        prev = row
        if keep_table:
            table[i + 1] = row
        if i + 1 in wanted:
            fits[i + 1] = int(row[i + 1])
    return fits, table


def _backtrack(table: np.ndarray, tu: np.ndarray, tv: np.ndarray, n: int) -> List[Tuple[int, int]]:
    pairs = []
    i = j = n
    while i > 0 and j > 0:
        if tu[i - 1] == tv[j - 1] and table[i, j] == table[i - 1, j - 1] + 1:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1, j] == table[i, j]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def max_fit(p: MatchProblem, with_alignment: bool = False, cap: int = DP_CAP) -> MatchResult:
    """
    Mayor biyeccion parcial que preserva el orden entre posiciones cercanas

    Args:
        p: Problema (u, v, horizonte, ventana)
        with_alignment: Reconstruir los pares emparejados
        cap: Horizonte maximo

    Returns:
        MatchResult exacto
    """
    if p.horizon > cap:
        raise HorizonTooLarge(f"Horizonte {p.horizon} excede el limite {cap}; usar la cota por bloques")
    tu, tv = window_tokens(p.u, p.v, p.horizon, p.window, p.phase_u, p.phase_v)
    keep = with_alignment and p.horizon <= ALIGNMENT_CAP
    fits, table = _fit_rows(tu, tv, [p.horizon], keep_table=keep)
    fit = fits[p.horizon]
    alignment = _backtrack(table, tu, tv, p.horizon) if keep else None
    return MatchResult(fit=fit, horizon=p.horizon, alignment=alignment)


def gap(p: MatchProblem, cap: int = DP_CAP) -> float:
    """1 - fit / n"""
    return max_fit(p, cap=cap).gap


def brute_force_fit(u: PeriodicPoint, v: PeriodicPoint, n: int, m: int,
                    phase_u: int = 0, phase_v: int = 0) -> int:
    """Enumeracion explicita de biyecciones parciales crecientes (oraculo, n <= 10)"""
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"brute_force_fit admite n <= {BRUTE_FORCE_CAP}, recibido {n}")
    agree = [[window_agree(u, phase_u + i, v, phase_v + j, m) for j in range(n)] for i in range(n)]
    for size in range(n, 0, -1):
        for domain in itertools.combinations(range(n), size):
            for image in itertools.combinations(range(n), size):
                if all(agree[i][j] for i, j in zip(domain, image)):
                    return size
    return 0


# ── f-bar_delta y F-bar_K ─────────────────────────────────────────

@dataclass
class ProfilePoint:
    multiple: int
    horizon: int
    fit: int
    gap: float


@dataclass
class FbarEstimate:
    window: int
    period: int
    estimate: float
    profile: List[ProfilePoint]


def fbar_delta(u: PeriodicPoint, v: PeriodicPoint, m: int, multiples: Sequence[int] = (1, 2, 4),
               cap: int = DP_CAP) -> FbarEstimate:
    """
    Gap a lo largo de horizontes q*N con N = pi_u * pi_v

    Una sola pasada de la programacion dinamica hasta el mayor horizonte:
    T[h][h] es la respuesta para el horizonte h.
    """
    if not multiples or min(multiples) < 1:
        raise ValueError("multiples debe contener enteros >= 1")
    N = u.period * v.period
    horizons = [q * N for q in multiples]
    if max(horizons) > cap:
        raise HorizonTooLarge(f"Horizonte {max(horizons)} excede el limite {cap}")
    tu, tv = window_tokens(u, v, max(horizons), m)
    fits, _ = _fit_rows(tu, tv, horizons)
    profile = [
        ProfilePoint(multiple=q, horizon=h, fit=fits[h], gap=1.0 - fits[h] / h)
        for q, h in zip(multiples, horizons)
    ]
    return FbarEstimate(window=m, period=N, estimate=profile[-1].gap, profile=profile)


@dataclass
class FKDistance:
    value: float
    witness_window: Optional[int]
    gammas: List[float] = field(default_factory=list)
    exact_zero: bool = False


def fk_distance(u: PeriodicPoint, v: PeriodicPoint, m_max: int, multiples: Sequence[int] = (1, 2, 4),
                cap: int = DP_CAP) -> FKDistance:
    """
    F-bar_K = inf{delta : f-bar_delta < delta}

    f-bar_delta es constante en (2^-(m+1), 2^-m] con valor gamma_{m+1} (ventana m+1);
    el infimo es el minimo de max(gamma_{m+1}, 2^-(m+1)) sobre los m con
    gamma_{m+1} < 2^-m. Si ninguno califica devuelve 1.
    """
    if m_max < 1:
        raise ValueError(f"m_max debe ser >= 1, recibido {m_max}")
    if phased_equal(u, 0, v, 0):
        return FKDistance(value=0.0, witness_window=None, gammas=[0.0] * (m_max + 1), exact_zero=True)

    best = 1.0
    witness = None
    gammas = []
    for m in range(m_max + 1):
        gamma = fbar_delta(u, v, m + 1, multiples, cap).estimate
        gammas.append(gamma)
        if gamma < 2.0 ** -m:
            candidate = max(gamma, 2.0 ** -(m + 1))
            if candidate < best:
                best = candidate
                witness = m + 1
    return FKDistance(value=best, witness_window=witness, gammas=gammas)


def fk_upper_bound(window: int, gap_value: float) -> float:
    """Si f-bar_delta <= eps en toda delta > 2^-window entonces F-bar_K <= 2^-window + eps"""
    return 2.0 ** -window + gap_value


# ── Cota por bloques ──────────────────────────────────────────────

@dataclass
class BlockMatch:
    n: int
    window: int
    horizon: int
    fit_per_block: int
    fit_total: int
    gap_upper: float
    pairs_checked: int
    certified: bool


def block_match_bound(stage_n: Stage, stage_n1: Stage, m: int, verify: bool = True) -> BlockMatch:
    """
    Emparejamiento por bloques entre y_n y y_{n+1} sobre el horizonte N = pi_n pi_{n+1}

    En cada periodo de y_{n+1} se alinean las k_{n+1} copias de xi_n con y_n,
    descartando m posiciones en cada borde; la fase p de y_{n+1} se empareja
    con la fase p mod pi_n de y_n.

    Returns:
        BlockMatch con gap_upper = (R_{n+1} + 2m) / pi_{n+1}
    """
    if stage_n1.n != stage_n.n + 1 or stage_n1.k is None:
        raise ValueError("block_match_bound requiere etapas consecutivas")
    if m < 0:
        raise ValueError(f"Ventana negativa: {m}")
    k, R = stage_n1.k, stage_n1.R
    pi_n, pi_n1 = stage_n.pi, stage_n1.pi
    block = k * pi_n
    per_block = max(0, block - 2 * m)

    checked = 0
    if verify and per_block:
        # Solo importan las fases: basta comparar cada par de fases distinto una vez
        upper = stage_n1.point
        lower = stage_n.point
        phases = np.arange(m, block - m)
        for offset in range(-m, m + 1):
            a = upper.expanded[(phases + offset) % pi_n1]
            b = lower.expanded[(phases + offset) % pi_n]
            bad = np.flatnonzero(a != b)
            if len(bad):
                p = int(phases[bad[0]])
                raise CertificationFailure(
                    f"Par de fases ({p}, {p % pi_n}) no coincide en la ventana {m} (n={stage_n.n})"
                )
        checked = per_block

    return BlockMatch(
        n=stage_n.n,
        window=m,
        horizon=pi_n * pi_n1,
        fit_per_block=per_block,
        fit_total=pi_n * per_block,
        gap_upper=min(1.0, (R + 2 * m) / pi_n1),
        pairs_checked=checked,
        certified=verify,
    )


def cauchy_bound(stage_n: Stage, next_stage: Stage) -> float:
    """lambda_{n+1} + (n+1) / 2^n"""
    if next_stage.n != stage_n.n + 1 or next_stage.lam is None:
        raise ValueError("cauchy_bound requiere la etapa siguiente")
    return next_stage.lam + (stage_n.n + 1) / 2.0 ** stage_n.n
