"""
Orquestador de experimentos
Construye etapas, valida el certificado, corre los reportes FK y de medidas
y escribe todos los archivos de salida
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .circle_maps import MapFamily
from .config import ExperimentConfig
from .errors import SpanningVerificationFailure
from .fk_metric import (
    MatchProblem,
    block_match_bound,
    cauchy_bound,
    fk_distance,
    fk_upper_bound,
    max_fit,
)
from .measure_lab import (
    OccupancyTable,
    TrendRow,
    disintegration_histogram,
    fiber_spanning_count,
    occupancy_table,
    orbit_fiber_points,
    strip_length_trend,
    weak_star_gap,
)
from .pattern import (
    PatternCertificate,
    Stage,
    build_next_stage,
    gikn_side_checks,
    init_stage0,
    search_noise_word,
    validate,
)
from .reports import write_csv, write_dat, write_json
from .stage_store import load_stages, save_stages, stored_family
from .symbolic import phased_equal


STAGE_FILE = "stages.json"

# Tolerancia de la suma de cada histograma condicional
HISTOGRAM_SUM_TOL = 1e-12

# Cota de |A_n_max| / |A_1| esperada para la geometria de contraccion
STRIP_RATIO_BOUND = 0.1

# Enunciados que instancia cada fila con veredicto (columna reference)
RESULTS = {
    "repetitive_pattern.condition_1": "Los arcos J_n estan encajados y su longitud tiende a 0",
    "repetitive_pattern.condition_2": "Las imagenes de J_0 por los prefijos de omega^0 son disjuntas dos a dos",
    "repetitive_pattern.condition_3": "g_n = T_{R_n} o g_{n-1}^{k_n} contrae J_n y fija q_n en J_{n-1}",
    "repetitive_pattern.condition_4": "La suma de lambda_n es finita",
    "fk_consecutive_stages": "F_K(y_n, y_{n+1}) <= lambda_{n+1} + (n+1) / 2^n",
    "strip_occupancy": "Para n <= m la orbita de la etapa m tiene al menos ceil(rho_m pi_m) puntos en A_n",
    "strip_nesting": "A_{n+1} esta contenido en A_n",
    "fiber_spanning_growth": "Un conjunto (n, eps)-generador en la fibra tiene a lo sumo n (floor(1/eps) + 1) puntos",
    "conditional_normalization": "Cada histograma condicional de la fibra suma 1",
}


@dataclass
class SearchRow:
    n: int
    k: int
    R: int
    mode: str
    alpha: str
    candidates_tried: int


@dataclass
class BuildResult:
    stages: List[Stage]
    certificate: PatternCertificate
    searches: List[SearchRow]
    stage_file: Path


@dataclass
class FKRow:
    """Una fila por par de etapas consecutivas (n, n+1) con ventana m = n"""
    n: int
    window: int
    horizon: int
    status: str  # certified | bound-only | exact-zero
    fit: Optional[int]
    gap: Optional[float]
    block_fit: int
    block_gap_upper: float
    pairs_checked: int
    fk_upper: float
    cauchy: float
    slack: float
    fk_estimate: Optional[float]
    estimate_window: Optional[int]
    passed: bool
    check: str = "fk_cauchy_bound"
    reference: str = "fk_consecutive_stages"


@dataclass
class SpanningRow:
    horizon: int
    eps: float
    count: int
    bound: int
    worst_distance: float
    verified: bool
    passed: bool
    check: str = "fiber_spanning_linear_growth"
    reference: str = "fiber_spanning_growth"


@dataclass
class DisintegrationRow:
    m: int
    window: int
    bins: int
    cylinders: int
    aggregate_heaviest: float
    mean_heaviest: float
    inverse_bins: float
    max_sum_error: float
    passed: bool
    check: str = "conditional_histograms_sum_to_one"
    reference: str = "conditional_normalization"


@dataclass
class WeakStarRow:
    m: int
    fourier: float
    cylinder: float
    value: float


@dataclass
class MeasureSummary:
    occupancy: OccupancyTable
    trend: List[TrendRow]
    spanning: List[SpanningRow]
    disintegration: List[DisintegrationRow]
    weak_star: List[WeakStarRow]
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


class PatternLab:
    """Fachada del laboratorio: una configuracion, un directorio de salida"""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[str] = None, verbose: bool = True):
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.family: MapFamily = config.build_family()
        self.settings = config.builder_settings()
        self.verbose = verbose

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def _write_results(self):
        """Catalogo de enunciados referidos por la columna reference"""
        write_json(self.output_dir / "results.json", {"results": RESULTS})

    # ── Etapas ────────────────────────────────────────────────────

    def build(self, max_stage: Optional[int] = None, progress_callback=None) -> BuildResult:
        """
        Construye las etapas 0..N segun el calendario y emite el certificado

        Args:
            max_stage: Ultima etapa (por defecto todo el calendario)
            progress_callback: Funcion (fraccion, mensaje)

        Returns:
            BuildResult; el archivo de etapas se escribe aunque el certificado sea INVALID
        """
        entries = self.config.stage_entries()
        if max_stage is not None:
            entries = entries[:max_stage]
        total = len(entries)

        stage = init_stage0(self.family, self.config.omega0, self.config.J0.to_arc(), self.settings)
        stages = [stage]
        searches: List[SearchRow] = []
        self._log(f"Etapa 0: q={stage.q:.12f} c={stage.c:.6f}")

        for n, entry in enumerate(entries, start=1):
            if progress_callback:
                progress_callback((n - 1) / total, f"Construyendo etapa {n}/{total}")
            if entry.word is not None:
                stage = build_next_stage(stage, entry.k, entry.word, self.family, self.settings)
                searches.append(SearchRow(n, entry.k, entry.R, "explicit", entry.word, 1))
            else:
                found = search_noise_word(
                    stage, entry.k, entry.R, self.config.noise_strategy(entry, n), self.family, self.settings,
                )
                stage = found.stage
                alpha = "".join(str(j) for j in found.alpha.symbols)
                searches.append(SearchRow(n, entry.k, entry.R, entry.search, alpha, found.candidates_tried))
            stages.append(stage)
            self._log(f"Etapa {n}: pi={stage.pi} q={stage.q:.12f} |J|={stage.J.length:.3e} c={stage.c:.6f}")

        certificate = validate(stages, self.family, self.settings, self.config.tail_model())
        stage_file = save_stages(self.output_dir / STAGE_FILE, stages, self.family, certificate)
        self._write_certificate(stages, certificate)
        write_csv(self.output_dir / "noise_search.csv", searches,
                  ["n", "k", "R", "mode", "alpha", "candidates_tried"])

        if progress_callback:
            progress_callback(1.0, "Completado")
        status = "VALID" if certificate.valid else f"INVALID (condiciones {certificate.failing_conditions()})"
        self._log(f"Certificado: {status}")
        return BuildResult(stages, certificate, searches, stage_file)

    def load(self, stage_file, max_stage: Optional[int] = None) -> List[Stage]:
        """Carga etapas y comprueba que la familia coincide con la configuracion"""
        if stored_family(stage_file) != self.family.describe():
            raise ValueError("La familia del archivo de etapas no coincide con la configuracion")
        stages = load_stages(stage_file)
        if max_stage is not None:
            stages = stages[:max_stage + 1]
        return stages

    def validate(self, stages: Sequence[Stage]) -> PatternCertificate:
        certificate = validate(stages, self.family, self.settings, self.config.tail_model())
        self._write_certificate(stages, certificate)
        return certificate

    def _write_certificate(self, stages: Sequence[Stage], certificate: PatternCertificate):
        write_json(self.output_dir / "certificate.json", certificate.to_dict())
        check_rows = [
            {**asdict(r), "reference": f"repetitive_pattern.condition_{r.condition}"}
            for r in certificate.checks
        ]
        write_csv(self.output_dir / "certificate.csv", check_rows,
                  ["condition", "stage", "check", "passed", "value", "bound", "detail", "reference"])
        self._write_results()

        rows = []
        for s in stages[1:]:
            rows.append({
                "n": s.n, "pi": s.pi, "k": s.k, "R": s.R,
                "lambda": s.lam, "rho": s.rho,
                "required": s.required_count(), "J_length": s.J.length, "c": s.c, "q": s.q,
            })
        write_csv(self.output_dir / "stages.csv", rows,
                  ["n", "pi", "k", "R", "lambda", "rho", "required", "J_length", "c", "q"])
        ns = [s.n for s in stages[1:]]
        write_dat(self.output_dir / "rho.dat", ns, [s.rho for s in stages[1:]], "n rho_n")
        write_dat(self.output_dir / "lambda_partial.dat", ns, certificate.partial_sums, "n sum_{i<=n} lambda_i")

    # ── Feldman-Katok ─────────────────────────────────────────────

    def _fk_row(self, pair) -> FKRow:
        lower, upper = pair
        fk = self.config.fk
        n = lower.n
        m = n
        N = lower.pi * upper.pi
        cauchy = cauchy_bound(lower, upper)

        y_n, y_n1 = lower.point, upper.point
        if phased_equal(y_n, 0, y_n1, 0):
            return FKRow(
                n=n, window=m, horizon=N, status="exact-zero", fit=N, gap=0.0, block_fit=N,
                block_gap_upper=0.0, pairs_checked=0, fk_upper=0.0, cauchy=cauchy, slack=0.0,
                fk_estimate=0.0, estimate_window=None, passed=True,
            )

        block = block_match_bound(lower, upper, m)
        fit = gap_value = None
        status = "bound-only"
        slack = 0.0
        used_gap = block.gap_upper
        if N <= fk.dp_cap:
            result = max_fit(MatchProblem(y_n, y_n1, N, m), cap=fk.dp_cap)
            fit, gap_value = result.fit, result.gap
            used_gap = gap_value
            slack = 1.0 / N
            if gap_value <= block.gap_upper:
                status = "certified"

        estimate = window = None
        if N * max(fk.multiples) <= fk.estimate_cap:
            distance = fk_distance(y_n, y_n1, fk.m_max, fk.multiples, cap=fk.estimate_cap)
            estimate, window = distance.value, distance.witness_window

        upper_bound = fk_upper_bound(m, used_gap)
        passed = upper_bound <= cauchy + slack and (gap_value is None or gap_value <= block.gap_upper)
        if estimate is not None:
            passed = passed and estimate <= cauchy + 1.0 / N
        return FKRow(
            n=n, window=m, horizon=N, status=status, fit=fit, gap=gap_value,
            block_fit=block.fit_total, block_gap_upper=block.gap_upper, pairs_checked=block.pairs_checked,
            fk_upper=upper_bound, cauchy=cauchy, slack=slack,
            fk_estimate=estimate, estimate_window=window, passed=passed,
        )

    def run_fk(self, stages: Sequence[Stage], progress_callback=None) -> List[FKRow]:
        """
        Reporte de pares consecutivos: cota por bloques certificada, programacion
        dinamica cuando el horizonte lo permite y comparacion con la cota de Cauchy
        """
        last = len(stages) - 2
        if self.config.fk.max_pair_stage is not None:
            last = min(last, self.config.fk.max_pair_stage)
        pairs = [(stages[n], stages[n + 1]) for n in range(1, last + 1)]
        if progress_callback:
            progress_callback(0.0, f"FK: {len(pairs)} pares")

        with ThreadPoolExecutor(max_workers=self.config.measure.workers) as pool:
            rows = list(pool.map(self._fk_row, pairs))

        write_csv(self.output_dir / "fk.csv", rows, [
            "n", "window", "horizon", "status", "fit", "gap", "block_fit", "block_gap_upper",
            "pairs_checked", "fk_upper", "cauchy", "slack", "fk_estimate", "estimate_window", "passed", "check", "reference",
        ])
        write_dat(self.output_dir / "fk_bound.dat", [r.n for r in rows], [r.fk_upper for r in rows], "n fk_upper")
        write_dat(self.output_dir / "fk_cauchy.dat", [r.n for r in rows], [r.cauchy for r in rows], "n cauchy")
        self._write_results()
        for row in rows:
            self._log(f"FK n={row.n}: {row.status} cota={row.fk_upper:.6f} <= {row.cauchy:.6f} "
                      f"{'ok' if row.passed else 'FALLA'}")
        if progress_callback:
            progress_callback(1.0, "Completado")
        return rows

    # ── Medidas ───────────────────────────────────────────────────

    def _spanning_row(self, task) -> SpanningRow:
        base, n, eps = task
        try:
            result = fiber_spanning_count(self.family, base, n, eps)
        except SpanningVerificationFailure as e:
            self._log(f"Generadores: {e}")
            return SpanningRow(n, eps, -1, 0, float("inf"), False, False)
        return SpanningRow(
            horizon=n, eps=eps, count=result.count, bound=result.bound,
            worst_distance=result.worst_distance, verified=result.verified,
            passed=result.verified and result.within_bound,
        )

    def run_measure(self, stages: Sequence[Stage], progress_callback=None) -> MeasureSummary:
        """
        Ocupacion de franjas, longitudes, generadores en la fibra, desintegracion,
        exponentes de Lyapunov y distancias debiles entre orbitas sucesivas
        """
        mc = self.config.measure
        n_max = len(stages) - 1
        failures: List[str] = []

        orbits = {
            m: orbit_fiber_points(stages, m, self.family, sample_cap=mc.sample_cap)
            for m in range(1, n_max + 1)
        }

        def occupancy_progress(fraction, message):
            if progress_callback:
                progress_callback(0.6 * fraction, message)

        table = occupancy_table(
            stages, self.family, n_max, theta=float(mc.theta), resolution=float(mc.resolution),
            endpoint_tol=float(mc.endpoint_tol), sample_cap=mc.sample_cap, orbits=orbits,
            progress_callback=occupancy_progress,
        )
        for row in table.failures():
            failures.append(f"ocupacion n={row.n} m={row.m}: {row.count} < {row.required}")
        for row in table.nesting_failures():
            failures.append(f"A_{row.n + 1} no esta contenido en A_{row.n}")
        for row in table.strips:
            if row.residual_conflicts:
                self._log(f"Franja n={row.n}: {row.residual_conflicts} puntos junto a extremos tras {row.nudges} empujones")
        trend = strip_length_trend(stages, self.family, n_max, table=table)

        lengths = [row.total_length for row in trend]
        decreasing = all(b < a for a, b in zip(lengths, lengths[1:]))
        if not decreasing:
            failures.append("longitud de A_n no es estrictamente decreciente")
        ratio = lengths[-1] / lengths[0] if len(lengths) >= 2 and lengths[0] > 0 else None
        if ratio is not None and ratio >= STRIP_RATIO_BOUND:
            failures.append(f"|A_{n_max}| / |A_1| = {ratio:.3g} >= {STRIP_RATIO_BOUND}")

        # Generadores en la fibra
        if progress_callback:
            progress_callback(0.6, "Conjuntos generadores")
        span_index = mc.spanning_stage if mc.spanning_stage is not None else n_max
        base = stages[min(span_index, n_max)].point
        tasks = [(base, n, float(eps)) for n in mc.spanning_horizons for eps in mc.spanning_eps]
        with ThreadPoolExecutor(max_workers=mc.workers) as pool:
            spanning = list(pool.map(self._spanning_row, tasks))
        for row in spanning:
            if not row.passed:
                failures.append(f"generadores n={row.horizon} eps={row.eps}")

        # Desintegracion
        if progress_callback:
            progress_callback(0.8, "Histogramas de desintegracion")
        disintegration: List[DisintegrationRow] = []
        for m in mc.disintegration_stages:
            if not 1 <= m <= n_max:
                continue
            for B in mc.bins:
                report = disintegration_histogram(orbits[m], mc.window, B)
                ok = report.max_sum_error <= HISTOGRAM_SUM_TOL
                if not ok:
                    failures.append(f"histograma m={m} B={B} no suma 1")
                disintegration.append(DisintegrationRow(
                    m=m, window=mc.window, bins=B, cylinders=len(report.cylinders),
                    aggregate_heaviest=report.aggregate_heaviest, mean_heaviest=report.mean_heaviest,
                    inverse_bins=1.0 / B, max_sum_error=report.max_sum_error, passed=ok,
                ))

        weak_star = []
        for m in range(1, n_max):
            gap = weak_star_gap(orbits[m], orbits[m + 1], mc.fourier_modes, mc.cylinder_length)
            weak_star.append(WeakStarRow(m, gap.fourier, gap.cylinder, gap.value))

        gikn = gikn_side_checks(stages, self.family, sample_cap=mc.sample_cap)

        summary = MeasureSummary(table, trend, spanning, disintegration, weak_star, failures)
        self._write_measure(summary, gikn, ratio)
        if progress_callback:
            progress_callback(1.0, "Completado")
        self._log(f"Medidas: {'ok' if summary.passed else f'{len(failures)} chequeos fallidos'}")
        return summary

    def _write_measure(self, summary: MeasureSummary, gikn, strip_ratio: Optional[float]):
        out = self.output_dir
        table = summary.occupancy
        occupancy_rows = [
            {
                "n": r.n, "m": r.m, "count": r.count, "total": r.total, "required": r.required,
                "proportion": r.proportion, "rho_m": r.rho_m, "passed": r.passed,
                "check": "strip_occupancy_lower_bound", "reference": "strip_occupancy",
            }
            for r in table.rows
        ]
        write_csv(out / "occupancy.csv", occupancy_rows,
                  ["n", "m", "count", "total", "required", "proportion", "rho_m", "passed", "check", "reference"])
        strip_rows = [
            {**asdict(r), "check": "strip_sets_nested", "reference": "strip_nesting"}
            for r in table.strips
        ]
        write_csv(out / "strips.csv", strip_rows, [
            "n", "theta", "nudges", "residual_conflicts", "core_fallback", "arc_count", "i_count", "j_prime_length",
            "total_length", "unresolved", "min_gap", "nested_next", "check", "reference",
        ])
        write_csv(out / "strip_trend.csv", summary.trend, ["n", "total_length", "inf_occupancy", "rho_n_max"])
        write_dat(out / "strip_length.dat", [r.n for r in summary.trend], [r.total_length for r in summary.trend],
                  "n |A_n|")
        write_dat(out / "strip_occupancy.dat", [r.n for r in summary.trend],
                  [r.inf_occupancy for r in summary.trend], "n inf_m occupancy")

        write_csv(out / "spanning.csv", summary.spanning,
                  ["horizon", "eps", "count", "bound", "worst_distance", "verified", "passed", "check", "reference"])
        write_csv(out / "disintegration.csv", summary.disintegration, [
            "m", "window", "bins", "cylinders", "aggregate_heaviest", "mean_heaviest", "inverse_bins",
            "max_sum_error", "passed", "check", "reference",
        ])
        for m in sorted({r.m for r in summary.disintegration}):
            rows = [r for r in summary.disintegration if r.m == m]
            write_dat(out / f"atomicity_m{m}.dat", [r.bins for r in rows], [r.aggregate_heaviest for r in rows],
                      "B heaviest_bin_mass")

        write_csv(out / "lyapunov.csv", gikn.rows, ["n", "lyapunov", "halving", "log10_gamma", "noise_ratio"])
        write_dat(out / "lyapunov.dat", [r.n for r in gikn.rows], [r.lyapunov for r in gikn.rows], "n lyapunov")
        write_csv(out / "weak_star.csv", summary.weak_star, ["m", "fourier", "cylinder", "value"])
        self._write_results()

        write_json(out / "measure.json", {
            "passed": summary.passed,
            "failures": summary.failures,
            "occupancy_checks": len(table.rows),
            "occupancy_failures": len(table.failures()),
            "strip_lengths": [r.total_length for r in summary.trend],
            "strip_ratio": strip_ratio,
            "spanning_checks": len(summary.spanning),
            "gikn_summability_trend": gikn.summability_trend,
        })

    # ── Todo ──────────────────────────────────────────────────────

    def report_all(self, max_stage: Optional[int] = None, progress_callback=None) -> Dict:
        """build + fk + measure con un resumen JSON"""
        def stage_progress(start, width):
            def callback(fraction, message):
                if progress_callback:
                    progress_callback(start + width * fraction, message)
            return callback

        built = self.build(max_stage, stage_progress(0.0, 0.3))
        fk_rows = self.run_fk(built.stages, stage_progress(0.3, 0.3))
        summary = self.run_measure(built.stages, stage_progress(0.6, 0.4))
        result = {
            "stages": len(built.stages) - 1,
            "certificate_valid": built.certificate.valid,
            "failing_conditions": built.certificate.failing_conditions(),
            "fk_rows": len(fk_rows),
            "fk_failures": [r.n for r in fk_rows if not r.passed],
            "measure_passed": summary.passed,
            "measure_failures": summary.failures,
        }
        write_json(self.output_dir / "summary.json", result)
        return result
