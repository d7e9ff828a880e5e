"""
SkewLab - CLI
Laboratorio de orbitas periodicas con patron repetitivo sobre el shift con fibra circular

Uso: python app.py report-all --config configs/reference.json --out out
"""
import sys
from pathlib import Path

# Agregar src al path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
