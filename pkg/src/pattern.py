"""
Construccion y certificacion de sucesiones de orbitas periodicas con patron repetitivo
Etapas xi_n = xi_{n-1}^{k_n} alpha_n, intervalos J_n encajados, recursiones de lambda y rho
"""
import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .circle_maps import (
    DEFAULT_GRID_POINTS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOL,
    Arc,
    MapFamily,
    arc_contains,
    arc_image,
    arcs_disjoint,
    circle_distance,
    eval_word,
    find_attracting_fixed_point,
    sup_log_derivative,
    wrap,
)
from .errors import (
    ConditionViolation,
    NoContraction,
    NoiseWordNotFound,
    DisjointnessFailure,
)
from .symbolic import (
    Concat,
    HierarchicalWord,
    Literal,
    PeriodicPoint,
    Power,
    build_stage_word,
    literal,
)


# Expansion literal para la verificacion de factorizacion
FACTORIZATION_EXPANSION_CAP = 1_000_000

# Holgura absoluta para |g(J)| <= c |J|
LENGTH_SLACK = 1e-15

# Cota de achicamiento exigida por el certificado
CERTIFIED_SHRINK = 0.5


@dataclass
class BuilderSettings:
    """Parametros del constructor de etapas"""
    grid_points: int = DEFAULT_GRID_POINTS
    tol: float = DEFAULT_TOL
    c_target: float = 0.9
    shrink_ratio: float = 0.5
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    # Escalera de radios candidatos para J_n
    ladder_steps: int = 16
    ladder_factor: float = 0.5
    # Presupuesto de la busqueda exhaustiva de ruido
    max_candidates: int = 4096


@dataclass(frozen=True)
class Stage:
    """Una etapa del patron: palabra, periodo, punto fijo, intervalo y recursiones"""
    n: int
    xi: HierarchicalWord
    pi: int
    q: float
    J: Arc
    c: float
    log_c: float
    k: Optional[int] = None
    alpha: Optional[Literal] = None
    lam: Optional[float] = None
    rho: Optional[float] = None
    rho_exact: Optional[Fraction] = field(default=None, compare=False)

    @property
    def R(self) -> Optional[int]:
        return None if self.alpha is None else self.alpha.length

    @property
    def lambda_exact(self) -> Optional[Fraction]:
        """lambda_n = R_n / (k_n pi_{n-1}) como racional exacto"""
        if self.alpha is None:
            return None
        return Fraction(self.R, self.pi - self.R)

    @property
    def point(self) -> PeriodicPoint:
        return PeriodicPoint(self.xi)

    def required_count(self) -> Optional[int]:
        """ceil(rho_n pi_n) en aritmetica exacta"""
        if self.rho_exact is None:
            return None
        value = self.rho_exact * self.pi
        return -((-value.numerator) // value.denominator)


@dataclass
class NoiseSearchResult:
    alpha: Literal
    stage: Stage
    candidates_tried: int


@dataclass
class NoiseStrategy:
    """Estrategia de busqueda: "exhaustive" o "sampled" (s palabras con semilla fija)"""
    kind: str = "exhaustive"
    samples: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exhaustive", "sampled"):
            raise ValueError(f"Estrategia no valida: {self.kind}")
        if self.samples < 1:
            raise ValueError("samples debe ser >= 1")


@dataclass
class TailModel:
    """Modelo de cola declarado: lambda_n <= C * ratio^n para n >= from_stage"""
    C: float = 1.0
    ratio: float = 0.5
    from_stage: int = 1

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"ratio debe estar en (0, 1), recibido {self.ratio}")
        if self.C <= 0:
            raise ValueError("C debe ser positivo")

    def bound(self, n: int) -> float:
        return self.C * self.ratio ** n

    def tail_sum(self, last: int) -> float:
        """Suma declarada de lambda_n para n > last"""
        start = max(last + 1, self.from_stage)
        return self.C * self.ratio ** start / (1.0 - self.ratio)


@dataclass
class CheckRow:
    """Una verificacion del certificado"""
    condition: int
    stage: int
    check: str
    passed: bool
    value: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""


@dataclass
class PatternCertificate:
    """Veredictos de las condiciones 1-4 con evidencia numerica"""
    checks: List[CheckRow]
    lambda_values: List[float]
    partial_sums: List[float]
    tail_sum: float
    lambda_hat: float
    rho_values: List[float]
    rho_lower_bound: float

    @property
    def valid(self) -> bool:
        return all(row.passed for row in self.checks)

    def verdicts(self) -> Dict[int, bool]:
        out = {c: True for c in (1, 2, 3, 4)}
        for row in self.checks:
            out[row.condition] = out[row.condition] and row.passed
        return out

    def failing_conditions(self) -> List[int]:
        return sorted(c for c, ok in self.verdicts().items() if not ok)

    def to_dict(self) -> Dict:
        return {
            "valid": self.valid,
            "conditions": {str(c): ("VALID" if ok else "INVALID") for c, ok in self.verdicts().items()},
            "lambda": [repr(x) for x in self.lambda_values],
            "lambda_partial_sums": [repr(x) for x in self.partial_sums],
            "tail_sum": repr(self.tail_sum),
            "lambda_hat": repr(self.lambda_hat),
            "rho": [repr(x) for x in self.rho_values],
            "rho_lower_bound": repr(self.rho_lower_bound),
            "checks": [
                {
                    "condition": row.condition,
                    "stage": row.stage,
                    "check": row.check,
                    "passed": row.passed,
                    "value": None if row.value is None else repr(float(row.value)),
                    "bound": None if row.bound is None else repr(float(row.bound)),
                    "detail": row.detail,
                }
                for row in self.checks
            ],
        }


# ── Construccion ──────────────────────────────────────────────────

def _prefix_images(fam: MapFamily, word: Literal, J0: Arc) -> List[Arc]:
    """J_0 y sus imagenes por los prefijos propios de omega^0"""
    arcs = [J0]
    current = J0
    for j in word.symbols[:-1]:
        current = arc_image(fam, (j,), current)
        arcs.append(current)
    return arcs


def init_stage0(fam: MapFamily, omega0: Union[str, Sequence[int], Literal], J0: Arc,
                settings: Optional[BuilderSettings] = None) -> Stage:
    """
    Etapa 0: punto fijo atractor de g_0 en J_0 y disjuncion de las imagenes de J_0

    Args:
        fam: Familia de mapas
        omega0: Palabra literal omega^0
        J0: Intervalo inicial

    Returns:
        Stage con n=0 (lambda y rho no definidos)
    """
    settings = settings or BuilderSettings()
    word = literal(omega0)
    if word.length == 0:
        raise ConditionViolation("omega^0 no puede ser vacia", condition=3)
    for j in word.symbols:
        fam.check_symbol(j)

    if not arcs_disjoint(_prefix_images(fam, word, J0)):
        raise DisjointnessFailure("Las imagenes de J_0 por los prefijos de omega^0 se intersectan")

    fixed = find_attracting_fixed_point(
        fam, word, J0, tol=settings.tol,
        grid_points=settings.grid_points, max_iterations=settings.max_iterations,
    )
    return Stage(n=0, xi=word, pi=word.length, q=fixed.q, J=J0, c=fixed.c, log_c=fixed.log_c)


def _certified_arc(fam: MapFamily, xi: HierarchicalWord, q: float, prev: Stage,
                   settings: BuilderSettings):
    """Mayor arco de la escalera centrado en q con g(J) en J y sup|g'| <= c_target"""
    offset = wrap(q - prev.J.anchor)
    room = min(offset, prev.J.length - offset)
    radius = min(settings.shrink_ratio * prev.J.length / 2.0, room)
    log_target = math.log(settings.c_target)

    for _ in range(settings.ladder_steps):
        if radius <= 0.0:
            break
        candidate = Arc.centered(q, 2.0 * radius)
        if candidate.length < prev.J.length and arc_contains(prev.J, candidate):
            image = arc_image(fam, xi, candidate)
            if arc_contains(candidate, image):
                log_c = sup_log_derivative(fam, xi, candidate, settings.grid_points)
                if log_c <= log_target:
                    return candidate, log_c
        radius *= settings.ladder_factor
    return None, None


def build_next_stage(prev: Stage, k_n: int, alpha: Union[str, Sequence[int], Literal],
                     fam: MapFamily, settings: Optional[BuilderSettings] = None) -> Stage:
    """
    Construye la etapa n = prev.n + 1 con g_n = T_{R_n} o g_{n-1}^{k_n}

    Args:
        prev: Etapa anterior
        k_n: Repeticiones (>= 2)
        alpha: Palabra de ruido (longitud R_n >= 1)
        fam: Familia de mapas
        settings: Parametros del constructor

    Returns:
        Stage con q_n en J_{n-1}, J_n certificado, lambda_n y rho_n
    """
    settings = settings or BuilderSettings()
    n = prev.n + 1
    if k_n < 2:
        raise ConditionViolation(f"Etapa {n}: k_n debe ser >= 2, recibido {k_n}", condition=3)
    alpha = literal(alpha)
    if alpha.length == 0:
        raise ConditionViolation(f"Etapa {n}: la palabra de ruido no puede ser vacia", condition=3)
    for j in alpha.symbols:
        fam.check_symbol(j)

    xi = build_stage_word(prev.xi, k_n, alpha)
    fixed = find_attracting_fixed_point(
        fam, xi, prev.J, tol=settings.tol,
        grid_points=settings.grid_points, max_iterations=settings.max_iterations,
    )

    J, log_c = _certified_arc(fam, xi, fixed.q, prev, settings)
    if J is None:
        raise NoContraction(f"Etapa {n}: no hay arco certificado alrededor de q_{n}")

    lam_exact = Fraction(alpha.length, k_n * prev.pi)
    rho_prev = prev.rho_exact if prev.n > 0 else Fraction(1)
    rho_exact = rho_prev / (1 + lam_exact)
    rho_prev_float = prev.rho if prev.n > 0 else 1.0
    lam = alpha.length / (k_n * prev.pi)

    return Stage(
        n=n,
        xi=xi,
        pi=xi.length,
        q=fixed.q,
        J=J,
        c=math.exp(log_c),
        log_c=log_c,
        k=k_n,
        alpha=alpha,
        lam=lam,
        rho=rho_prev_float / (1.0 + lam),
        rho_exact=rho_exact,
    )


def _candidate_words(k: int, R: int, strategy: NoiseStrategy, budget: int):
    if strategy.kind == "exhaustive":
        total = k ** R
        if total > budget:
            raise NoiseWordNotFound(f"Busqueda exhaustiva de {total} palabras excede el presupuesto {budget}")
        return [Literal(w) for w in itertools.product(range(1, k + 1), repeat=R)]
    rng = np.random.default_rng(strategy.seed)
    drawn = {tuple(int(j) for j in rng.integers(1, k + 1, size=R)) for _ in range(strategy.samples)}
    return [Literal(w) for w in sorted(drawn)]


def search_noise_word(prev: Stage, k_n: int, R_n: int, strategy: NoiseStrategy,
                      fam: MapFamily, settings: Optional[BuilderSettings] = None) -> NoiseSearchResult:
    """
    Primera palabra (orden lexicografico) de longitud R_n que produce una etapa valida
    """
    settings = settings or BuilderSettings()
    if k_n < 2:
        raise ConditionViolation(f"Etapa {prev.n + 1}: k_n debe ser >= 2, recibido {k_n}", condition=3)
    if R_n < 1:
        raise ConditionViolation(f"R_n debe ser >= 1, recibido {R_n}", condition=3)

    tried = 0
    last_error: Optional[ConditionViolation] = None
    for alpha in _candidate_words(fam.alphabet_size, R_n, strategy, settings.max_candidates):
        tried += 1
        try:
            stage = build_next_stage(prev, k_n, alpha, fam, settings)
        except ConditionViolation as e:
            last_error = e
            continue
        return NoiseSearchResult(alpha=alpha, stage=stage, candidates_tried=tried)

    detail = f" (ultimo error: {last_error})" if last_error else ""
    raise NoiseWordNotFound(f"Etapa {prev.n + 1}: ninguna de {tried} palabras de ruido funciona{detail}")


def recompute_rho(stages: Sequence[Stage]) -> List[Stage]:
    """Reconstruye rho_exact a partir de (pi, R) de cada etapa"""
    out = []
    rho = Fraction(1)
    for stage in stages:
        if stage.n == 0:
            out.append(stage)
            continue
        rho = rho / (1 + stage.lambda_exact)
        out.append(replace(stage, rho_exact=rho))
    return out


# ── Certificado ───────────────────────────────────────────────────

def _factorization_ok(stage: Stage, prev: Stage) -> Tuple[bool, str]:
    if stage.pi <= FACTORIZATION_EXPANSION_CAP:
        full = stage.xi.expand()
        head = np.tile(prev.xi.expand(), stage.k)
        ok = (
            len(full) == len(head) + stage.R
            and np.array_equal(full[:len(head)], head)
            and np.array_equal(full[len(head):], np.array(stage.alpha.symbols, dtype=np.uint8))
        )
        return bool(ok), "expansion"
    node = stage.xi
    ok = (
        isinstance(node, Concat)
        and len(node.children) == 2
        and isinstance(node.children[0], Power)
        and node.children[0].child == prev.xi
        and node.children[0].exponent == stage.k
        and node.children[1] == stage.alpha
    )
    return ok, "structure"


def validate(stages: Sequence[Stage], fam: MapFamily, settings: Optional[BuilderSettings] = None,
             tail: Optional[TailModel] = None) -> PatternCertificate:
    """
    Re-verifica las condiciones 1-4 sobre una lista de etapas consecutivas

    Args:
        stages: Etapas desde el nivel 0
        fam: Familia de mapas
        settings: Tolerancias y grilla
        tail: Modelo de cola declarado para la condicion 4

    Returns:
        PatternCertificate (los veredictos van en el certificado, no hay excepciones)
    """
    settings = settings or BuilderSettings()
    tail = tail or TailModel()
    checks: List[CheckRow] = []

    if not stages or stages[0].n != 0:
        checks.append(CheckRow(3, 0, "stages_start_at_zero", False, detail="la lista debe empezar en n=0"))
        return PatternCertificate(checks, [], [], 0.0, 0.0, [], 0.0)

    # Condicion 2
    base = stages[0]
    omega0 = base.xi if isinstance(base.xi, Literal) else literal(base.xi.expand().tolist())
    images = _prefix_images(fam, omega0, base.J)
    checks.append(CheckRow(2, 0, "prefix_images_disjoint", arcs_disjoint(images), value=len(images)))

    log_target = math.log(settings.c_target)
    for idx, stage in enumerate(stages):
        if stage.n != idx:
            checks.append(CheckRow(3, idx, "consecutive_levels", False, detail=f"nivel {stage.n} en posicion {idx}"))
            continue

        # Condicion 3: punto fijo y contraccion
        g_q = eval_word(fam, stage.xi, stage.q)
        distance = circle_distance(g_q, stage.q)
        checks.append(CheckRow(3, idx, "fixed_point", distance < settings.tol, value=distance, bound=settings.tol))

        image = arc_image(fam, stage.xi, stage.J)
        checks.append(CheckRow(3, idx, "invariant_arc", arc_contains(stage.J, image)))
        log_c = sup_log_derivative(fam, stage.xi, stage.J, settings.grid_points)
        limit = 0.0 if idx == 0 else log_target
        checks.append(CheckRow(3, idx, "contraction_log", log_c < limit, value=log_c, bound=limit))
        c = math.exp(log_c)
        checks.append(CheckRow(
            3, idx, "image_length", image.length <= c * stage.J.length + LENGTH_SLACK,
            value=image.length, bound=c * stage.J.length,
        ))
        if idx == 0:
            continue
        checks.append(CheckRow(3, idx, "period_exceeds_2^n", stage.pi > 2 ** idx, value=stage.pi, bound=2 ** idx))
        prev = stages[idx - 1]

        # Condicion 1: encaje y achicamiento
        checks.append(CheckRow(1, idx, "nested", arc_contains(prev.J, stage.J)))
        ratio = stage.J.length / prev.J.length
        checks.append(CheckRow(
            1, idx, "shrinking", 0.0 < stage.J.length < prev.J.length and ratio <= CERTIFIED_SHRINK,
            value=ratio, bound=CERTIFIED_SHRINK,
        ))

        # Condicion 3: factorizacion y recursion de periodos
        checks.append(CheckRow(3, idx, "k_at_least_2", stage.k is not None and stage.k >= 2, value=stage.k))
        checks.append(CheckRow(3, idx, "noise_nonempty", stage.R is not None and stage.R >= 1, value=stage.R))
        if stage.k is None or stage.alpha is None:
            continue
        checks.append(CheckRow(
            3, idx, "period_recursion", stage.pi == stage.k * prev.pi + stage.R,
            value=stage.pi, bound=stage.k * prev.pi + stage.R,
        ))
        ok, how = _factorization_ok(stage, prev)
        checks.append(CheckRow(3, idx, "factorization", ok, detail=how))

    # Condicion 4: sumabilidad de lambda contra el modelo de cola
    lambdas = [float(s.lambda_exact) for s in stages[1:] if s.alpha is not None]
    partial = list(itertools.accumulate(lambdas))
    for n, lam in enumerate(lambdas, start=1):
        if n >= tail.from_stage:
            checks.append(CheckRow(4, n, "tail_model", lam <= tail.bound(n), value=lam, bound=tail.bound(n)))

    last = len(stages) - 1
    tail_sum = tail.tail_sum(last)
    lambda_hat = (partial[-1] if partial else 0.0) + tail_sum
    rho_lower = math.exp(-lambda_hat)

    # Recursion de rho contra la forma cerrada
    rho_values = []
    closed = Fraction(1)
    previous_rho = None
    for n, stage in enumerate(stages[1:], start=1):
        if stage.rho is None or stage.alpha is None:
            continue
        closed = closed / (1 + stage.lambda_exact)
        rho_values.append(stage.rho)
        relative = abs(stage.rho - float(closed)) / float(closed)
        checks.append(CheckRow(4, n, "rho_closed_form", relative <= 1e-12, value=relative, bound=1e-12))
        bound = math.exp(-partial[n - 1])
        checks.append(CheckRow(4, n, "rho_exceeds_exp_partial", stage.rho > bound, value=stage.rho, bound=bound))
        if previous_rho is not None:
            checks.append(CheckRow(4, n, "rho_decreasing", stage.rho < previous_rho, value=stage.rho, bound=previous_rho))
        previous_rho = stage.rho
    if rho_values:
        checks.append(CheckRow(4, last, "rho_exceeds_exp_lambda_hat", rho_values[-1] > rho_lower,
                               value=rho_values[-1], bound=rho_lower))

    return PatternCertificate(
        checks=checks,
        lambda_values=lambdas,
        partial_sums=partial,
        tail_sum=tail_sum,
        lambda_hat=lambda_hat,
        rho_values=rho_values,
        rho_lower_bound=rho_lower,
    )


# ── Chequeos informativos de tipo GIKN ────────────────────────────

@dataclass
class GiknRow:
    n: int
    lyapunov: float
    halving: Optional[bool]
    log10_gamma: float
    noise_ratio: Optional[float]


@dataclass
class GiknReport:
    rows: List[GiknRow]
    summability_trend: bool


def gikn_side_checks(stages: Sequence[Stage], fam: MapFamily, sample_cap: int = 10_000_000) -> GiknReport:
    """
    Exponente de Lyapunov de cada orbita, condicion de mitad y cantidad gamma

    La cantidad (max_j sup|f_j'|)^{pi_n} |J_n| se reporta como log10.
    No hay veredicto: es informativo.
    """
    # Import local para evitar el ciclo pattern <-> measure_lab
    from .measure_lab import lyapunov_exponent, orbit_fiber_points

    log10_max = math.log10(max(fam.max_derivative(j) for j in fam.symbols))
    rows: List[GiknRow] = []
    for stage in stages:
        orbit = orbit_fiber_points(stages, stage.n, fam, sample_cap=sample_cap)
        exponent = lyapunov_exponent(orbit, fam)
        halving = None
        noise_ratio = None
        if rows:
            previous = rows[-1].lyapunov
            halving = previous / 2.0 <= exponent < 0.0
            prev_stage = stages[stage.n - 1]
            if prev_stage.lam:
                noise_ratio = stage.lam / prev_stage.lam
        log10_gamma = stage.pi * log10_max + math.log10(stage.J.length)
        rows.append(GiknRow(stage.n, exponent, halving, log10_gamma, noise_ratio))

    gammas = [row.log10_gamma for row in rows]
    trend = len(gammas) >= 2 and all(b - a <= -math.log10(2.0) for a, b in zip(gammas, gammas[1:]))
    return GiknReport(rows=rows, summability_trend=trend)
