"""
Persistencia de etapas en JSON versionado
Los reales se guardan con repr para reproducir bit a bit al recargar
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .circle_maps import Arc, MapFamily
from .pattern import PatternCertificate, Stage, recompute_rho
from .symbolic import build_stage_word, literal, parse_word


STAGE_FILE_VERSION = 1


def _stage_to_dict(stage: Stage) -> Dict[str, Any]:
    return {
        "n": stage.n,
        "xi": stage.xi.to_text(),
        "pi": stage.pi,
        "q": repr(stage.q),
        "J": {"anchor": repr(stage.J.anchor), "length": repr(stage.J.length)},
        "c": repr(stage.c),
        "log_c": repr(stage.log_c),
        "k": stage.k,
        "alpha": None if stage.alpha is None else "".join(str(j) for j in stage.alpha.symbols),
        "lambda": None if stage.lam is None else repr(stage.lam),
        "rho": None if stage.rho is None else repr(stage.rho),
    }


def save_stages(path, stages: Sequence[Stage], fam: MapFamily,
                certificate: Optional[PatternCertificate] = None) -> Path:
    """Escribe el archivo de etapas (y el certificado si se entrega)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {
        "version": STAGE_FILE_VERSION,
        "family": fam.describe(),
        "stages": [_stage_to_dict(s) for s in stages],
    }
    if certificate is not None:
        data["certificate"] = certificate.to_dict()
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write("\n")
    return path


def load_stages(path) -> List[Stage]:
    """
    Lee un archivo de etapas

    Cada palabra se reconstruye como xi_{n-1}^{k_n} alpha_n y se compara con el
    texto guardado; rho_exact se recalcula desde (pi, R).
    """
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    version = data.get("version")
    if version != STAGE_FILE_VERSION:
        raise ValueError(f"Version de archivo de etapas no soportada: {version}")

    stages: List[Stage] = []
    for entry in data["stages"]:
        parsed = parse_word(entry["xi"])
        alpha = None if entry["alpha"] is None else literal(entry["alpha"])
        if stages:
            xi = build_stage_word(stages[-1].xi, entry["k"], alpha)
            if xi != parsed:
                raise ValueError(f"Etapa {entry['n']}: la palabra no coincide con xi_(n-1)^k alpha")
        else:
            xi = parsed
        if xi.length != entry["pi"]:
            raise ValueError(f"Etapa {entry['n']}: periodo {entry['pi']} no coincide con la palabra")

        stages.append(Stage(
            n=entry["n"],
            xi=xi,
            pi=entry["pi"],
            q=float(entry["q"]),
            J=Arc(float(entry["J"]["anchor"]), float(entry["J"]["length"])),
            c=float(entry["c"]),
            log_c=float(entry["log_c"]),
            k=entry["k"],
            alpha=alpha,
            lam=None if entry["lambda"] is None else float(entry["lambda"]),
            rho=None if entry["rho"] is None else float(entry["rho"]),
        ))
    return recompute_rho(stages)


def stored_family(path) -> Dict[str, Any]:
    """Descripcion de la familia guardada junto a las etapas"""
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)["family"]
