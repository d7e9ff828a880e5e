"""
Esquema de configuracion de experimentos
Un solo documento JSON versionado; los decimales se escriben como texto
"""
import json
from decimal import Decimal
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .circle_maps import Arc, MapFamily, build_family as make_family
from .pattern import BuilderSettings, NoiseStrategy, TailModel


SCHEMA_VERSION = 1


# ── Familia y arco inicial ────────────────────────────────────────

class FamilyConfig(BaseModel):
    id: Literal["sine"] = "sine"
    params: Dict[int, List[Decimal]]  # {simbolo: [a, b]}


class ArcConfig(BaseModel):
    center: Decimal
    length: Decimal = Field(gt=0, lt=1)

    def to_arc(self) -> Arc:
        return Arc.centered(float(self.center), float(self.length))


# ── Calendario de etapas ──────────────────────────────────────────

class ScheduleEntry(BaseModel):
    k: int = Field(ge=1)
    R: Optional[int] = Field(default=None, ge=0)
    word: Optional[str] = None  # palabra de ruido explicita
    search: Literal["exhaustive", "sampled"] = "exhaustive"
    samples: int = Field(default=16, ge=1)
    repeat: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _noise_length(self):
        if self.word is not None:
            if self.R is None:
                self.R = len(self.word)
            elif self.R != len(self.word):
                raise ValueError(f"R={self.R} no coincide con la palabra {self.word!r}")
        elif self.R is None:
            raise ValueError("Cada entrada necesita R o una palabra explicita")
        return self


class TailConfig(BaseModel):
    """lambda_n <= C * ratio^n para n >= from_stage"""
    C: Decimal = Decimal("1")
    ratio: Decimal = Field(default=Decimal("0.5"), gt=0, lt=1)
    from_stage: int = Field(default=1, ge=1)


class BuilderConfig(BaseModel):
    grid_points: int = Field(default=4096, ge=16)
    tol: Decimal = Field(default=Decimal("1e-12"), gt=0)
    c_target: Decimal = Field(default=Decimal("0.9"), gt=0, lt=1)
    shrink_ratio: Decimal = Field(default=Decimal("0.5"), gt=0, lt=1)
    max_iterations: int = Field(default=1_000_000, ge=1)
    ladder_steps: int = Field(default=16, ge=1)
    ladder_factor: Decimal = Field(default=Decimal("0.5"), gt=0, lt=1)
    max_candidates: int = Field(default=4096, ge=1)


# ── Reportes ──────────────────────────────────────────────────────

class FKConfig(BaseModel):
    m_max: int = Field(default=6, ge=1)
    multiples: List[int] = Field(default_factory=lambda: [1, 2])
    dp_cap: int = Field(default=20_000, ge=1)
    estimate_cap: int = Field(default=4_000, ge=1)  # horizonte maximo para el estimador completo
    max_pair_stage: Optional[int] = None

    @field_validator("multiples")
    @classmethod
    def _positive(cls, v):
        if not v or min(v) < 1:
            raise ValueError("multiples debe contener enteros >= 1")
        return sorted(set(v))


class MeasureConfig(BaseModel):
    theta: Decimal = Field(default=Decimal("0.5"), gt=0, le=1)
    window: int = Field(default=2, ge=0)
    bins: List[int] = Field(default_factory=lambda: [4, 16, 64])
    disintegration_stages: List[int] = Field(default_factory=lambda: [4, 8, 12])
    sample_cap: int = Field(default=10_000_000, ge=1)
    resolution: Decimal = Field(default=Decimal("1e-10"), ge=0)
    endpoint_tol: Decimal = Field(default=Decimal("1e-12"), ge=0)
    spanning_stage: Optional[int] = None
    spanning_horizons: List[int] = Field(default_factory=lambda: [10, 100, 1000])
    spanning_eps: List[Decimal] = Field(default_factory=lambda: [Decimal("0.1"), Decimal("0.05"), Decimal("0.01")])
    fourier_modes: int = Field(default=8, ge=0)
    cylinder_length: int = Field(default=3, ge=1)
    workers: int = Field(default=4, ge=1)

    @field_validator("spanning_eps")
    @classmethod
    def _eps_range(cls, v):
        for eps in v:
            if not Decimal(0) < eps < Decimal("0.5"):
                raise ValueError(f"eps fuera de (0, 0.5): {eps}")
        return v


# ── Experimento ───────────────────────────────────────────────────

class ExperimentConfig(BaseModel):
    schema_version: int = SCHEMA_VERSION
    alphabet: int = Field(ge=2, le=9)
    family: FamilyConfig
    omega0: str
    J0: ArcConfig
    schedule: List[ScheduleEntry]
    tail: TailConfig = Field(default_factory=TailConfig)
    builder: BuilderConfig = Field(default_factory=BuilderConfig)
    fk: FKConfig = Field(default_factory=FKConfig)
    measure: MeasureConfig = Field(default_factory=MeasureConfig)
    seed: int = 0
    output_dir: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"Version de esquema no soportada: {self.schema_version}")
        if not self.schedule:
            raise ValueError("El calendario no puede ser vacio")
        if sorted(self.family.params) != list(range(1, self.alphabet + 1)):
            raise ValueError(f"La familia debe dar parametros para los simbolos 1..{self.alphabet}")
        symbols = {str(j) for j in range(1, self.alphabet + 1)}
        if not self.omega0 or set(self.omega0) - symbols:
            raise ValueError(f"omega0 no valida: {self.omega0!r}")
        for entry in self.schedule:
            if entry.word is not None and set(entry.word) - symbols:
                raise ValueError(f"Palabra de ruido no valida: {entry.word!r}")
        return self

    # Vistas para los modulos de calculo

    def stage_entries(self) -> List[ScheduleEntry]:
        """Entradas del calendario con las repeticiones expandidas (etapa n = indice + 1)"""
        out = []
        for entry in self.schedule:
            out.extend([entry] * entry.repeat)
        return out

    def build_family(self) -> MapFamily:
        params = {j: tuple(float(x) for x in values) for j, values in self.family.params.items()}
        return make_family(self.family.id, params)

    def builder_settings(self) -> BuilderSettings:
        b = self.builder
        return BuilderSettings(
            grid_points=b.grid_points,
            tol=float(b.tol),
            c_target=float(b.c_target),
            shrink_ratio=float(b.shrink_ratio),
            max_iterations=b.max_iterations,
            ladder_steps=b.ladder_steps,
            ladder_factor=float(b.ladder_factor),
            max_candidates=b.max_candidates,
        )

    def tail_model(self) -> TailModel:
        return TailModel(C=float(self.tail.C), ratio=float(self.tail.ratio), from_stage=self.tail.from_stage)

    def noise_strategy(self, entry: ScheduleEntry, n: int) -> NoiseStrategy:
        # Semilla derivada por etapa
        return NoiseStrategy(kind=entry.search, samples=entry.samples, seed=self.seed * 1_000_003 + n)


def load_config(path) -> ExperimentConfig:
    """Carga y valida un documento de configuracion"""
    with open(path, 'r', encoding='utf-8') as f:
        return ExperimentConfig.model_validate(json.load(f))


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config.model_dump(mode="json"), f, ensure_ascii=False, indent=2)
        f.write("\n")


def reference_config(stages: int = 12) -> ExperimentConfig:
    """
    Calendario de referencia: dos simbolos, omega0 = "2", k_n = 2, R_n = 1

    El simbolo 1 tiene punto fijo 0.07 con multiplicador 0.2; el simbolo 2 es
    la contraccion senoidal con a = 0, b = -0.62832.
    """
    return ExperimentConfig(
        alphabet=2,
        family=FamilyConfig(params={
            1: [Decimal("0.059914105117932"), Decimal("-0.884146863005120")],
            2: [Decimal("0"), Decimal("-0.62832")],
        }),
        omega0="2",
        J0=ArcConfig(center=Decimal("0"), length=Decimal("0.2")),
        schedule=[ScheduleEntry(k=2, R=1, search="exhaustive", repeat=stages)],
        builder=BuilderConfig(shrink_ratio=Decimal("0.2")),
    )
