"""
Interfaz de linea de comandos del laboratorio
Subcomandos: build, fk, measure, validate, report-all

Codigos de salida: 0 exito, 2 certificado invalido o condicion violada,
3 chequeo cuantitativo fallido, 4 limite de recursos
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .config import ExperimentConfig, load_config, reference_config
from .errors import LabError
from .orchestrator import STAGE_FILE, PatternLab


EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3


def _progress(fraction: float, message: str):
    print(f"[{fraction:4.0%}] {message}")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else reference_config()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    return config.model_copy(update=updates) if updates else config


def _lab(args) -> PatternLab:
    return PatternLab(_load(args), verbose=not args.quiet)


def _stage_file(args, lab: PatternLab) -> Path:
    return Path(args.stages) if args.stages else lab.output_dir / STAGE_FILE


def cmd_build(args) -> int:
    lab = _lab(args)
    result = lab.build(args.max_stage, None if args.quiet else _progress)
    print(f"Etapas guardadas en {result.stage_file}")
    return EXIT_OK if result.certificate.valid else EXIT_INVALID


def cmd_validate(args) -> int:
    lab = _lab(args)
    stages = lab.load(_stage_file(args, lab), args.max_stage)
    certificate = lab.validate(stages)
    for condition, ok in certificate.verdicts().items():
        print(f"Condicion {condition}: {'VALID' if ok else 'INVALID'}")
    return EXIT_OK if certificate.valid else EXIT_INVALID


def cmd_fk(args) -> int:
    lab = _lab(args)
    stages = lab.load(_stage_file(args, lab), args.max_stage)
    rows = lab.run_fk(stages, None if args.quiet else _progress)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_CHECK_FAILED


def cmd_measure(args) -> int:
    lab = _lab(args)
    stages = lab.load(_stage_file(args, lab), args.max_stage)
    summary = lab.run_measure(stages, None if args.quiet else _progress)
    for failure in summary.failures:
        print(f"FALLA: {failure}")
    return EXIT_OK if summary.passed else EXIT_CHECK_FAILED


def cmd_report_all(args) -> int:
    lab = _lab(args)
    result = lab.report_all(args.max_stage, None if args.quiet else _progress)
    if not result["certificate_valid"]:
        return EXIT_INVALID
    if result["fk_failures"] or not result["measure_passed"]:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewlab",
        description="Orbitas periodicas con patron repetitivo en productos torcidos con fibra circular",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Configuracion JSON (por defecto el calendario de referencia)")
    common.add_argument("--stages", help=f"Archivo de etapas (por defecto <out>/{STAGE_FILE})")
    common.add_argument("--out", help="Directorio de salida")
    common.add_argument("--seed", type=int, help="Semilla de la busqueda de ruido")
    common.add_argument("--max-stage", type=int, dest="max_stage", help="Ultima etapa a usar")
    common.add_argument("--quiet", action="store_true", help="Sin mensajes de progreso")

    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "build": (cmd_build, "Construye etapas y emite el certificado"),
        "fk": (cmd_fk, "Cotas de Feldman-Katok entre etapas consecutivas"),
        "measure": (cmd_measure, "Ocupacion, desintegracion, generadores y Lyapunov"),
        "validate": (cmd_validate, "Re-verifica el certificado de un archivo de etapas"),
        "report-all": (cmd_report_all, "build + fk + measure"),
    }
    for name, (handler, help_text) in commands.items():
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.set_defaults(handler=handler)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.max_stage is not None and args.max_stage < 0:
        print("Error: --max-stage debe ser >= 0", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.handler(args)
    except LabError as e:
        print(f"Error: {e.describe()}", file=sys.stderr)
        return e.exit_code
    except (ValidationError, ValueError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
