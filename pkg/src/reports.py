"""
Escritura de reportes: CSV, resumen JSON y archivos .dat de dos columnas para graficar
Salida determinista: orden fijo de columnas, reales con repr, fin de linea "\n"
"""
import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


REPORT_SCHEMA_VERSION = 1


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (tuple, list)):
        return "".join(str(v) for v in value)
    return value


def _json_value(value: Any) -> Any:
    if is_dataclass(value):
        value = asdict(value)
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_csv(path, rows: Iterable[Any], fieldnames: Sequence[str]) -> Path:
    """
    Escribe filas (dicts o dataclasses) con comillas estilo RFC 4180

    Args:
        path: Archivo destino
        rows: Filas
        fieldnames: Columnas en orden
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            record = asdict(row) if is_dataclass(row) else row
            writer.writerow([_cell(record.get(name)) for name in fieldnames])
    return path


def write_json(path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": REPORT_SCHEMA_VERSION}
    payload.update(_json_value(data))
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
        f.write("\n")
    return path


def write_dat(path, xs: Sequence[float], ys: Sequence[float], header: Optional[str] = None) -> Path:
    """Dos columnas separadas por espacio, listas para gnuplot o matplotlib"""
    if len(xs) != len(ys):
        raise ValueError(f"Columnas de distinta longitud: {len(xs)} vs {len(ys)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        if header:
            f.write(f"# {header}\n")
        for x, y in zip(xs, ys):
            f.write(f"{_cell(x)} {_cell(y)}\n")
    return path


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))
