"""
Fixtures compartidas: familia y etapas del calendario de referencia
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config import reference_config
from src.pattern import NoiseStrategy, init_stage0, search_noise_word


REFERENCE_STAGES = 12


@pytest.fixture(scope="session")
def ref_config():
    return reference_config(REFERENCE_STAGES)


@pytest.fixture(scope="session")
def family(ref_config):
    return ref_config.build_family()


@pytest.fixture(scope="session")
def settings(ref_config):
    return ref_config.builder_settings()


@pytest.fixture(scope="session")
def reference_stages(ref_config, family, settings):
    """Etapas 0..12 con k_n = 2, R_n = 1 y busqueda exhaustiva"""
    stage = init_stage0(family, ref_config.omega0, ref_config.J0.to_arc(), settings)
    stages = [stage]
    for _ in range(REFERENCE_STAGES):
        stage = search_noise_word(stage, 2, 1, NoiseStrategy(), family, settings).stage
        stages.append(stage)
    return stages
