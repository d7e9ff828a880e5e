"""
Tests de la linea de comandos y de los archivos que escribe
"""
import json

import pytest

from src.cli import main
from src.config import load_config, reference_config, save_config
from src.orchestrator import RESULTS
from src.reports import read_csv
from src.stage_store import load_stages


@pytest.fixture
def small_build(tmp_path):
    out = tmp_path / "run"
    code = main(["build", "--out", str(out), "--max-stage", "4", "--quiet"])
    return code, out


def test_build_writes_stage_file(small_build):
    code, out = small_build
    assert code == 0
    stages = load_stages(out / "stages.json")
    assert [s.pi for s in stages] == [1, 3, 7, 15, 31]
    assert stages[4].required_count() == 16
    for name in ("certificate.json", "certificate.csv", "stages.csv", "rho.dat", "noise_search.csv"):
        assert (out / name).exists()
    certificate = json.loads((out / "certificate.json").read_text(encoding="utf-8"))
    assert certificate["valid"] is True
    assert certificate["schema_version"] == 1


def test_build_is_deterministic(small_build, tmp_path):
    _, out = small_build
    again = tmp_path / "again"
    assert main(["build", "--out", str(again), "--max-stage", "4", "--quiet"]) == 0
    assert (out / "stages.json").read_bytes() == (again / "stages.json").read_bytes()


def test_validate_and_fk_on_stored_stages(small_build):
    _, out = small_build
    assert main(["validate", "--out", str(out), "--quiet"]) == 0
    assert main(["fk", "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "fk.csv")
    assert [int(r["n"]) for r in rows] == [1, 2, 3]
    assert all(r["passed"] == "yes" for r in rows)
    assert all(r["status"] == "certified" for r in rows)


def test_noise_search_report(small_build):
    _, out = small_build
    rows = read_csv(out / "noise_search.csv")
    assert [r["alpha"] for r in rows] == ["1"] * 4
    assert all(r["mode"] == "exhaustive" for r in rows)


def test_k_equal_one_exits_with_condition_three(tmp_path):
    config = reference_config(3).model_dump(mode="json")
    config["schedule"][0]["k"] = 1
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["build", "--config", str(path), "--out", str(tmp_path / "bad"), "--quiet"]) == 2


def test_invalid_config_document(tmp_path):
    config = reference_config(3).model_dump(mode="json")
    config["schema_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["build", "--config", str(path), "--out", str(tmp_path / "x"), "--quiet"]) == 2


def test_negative_max_stage(tmp_path):
    assert main(["build", "--out", str(tmp_path), "--max-stage", "-1", "--quiet"]) == 2


def test_missing_stage_file(tmp_path):
    assert main(["measure", "--stages", str(tmp_path / "none.json"), "--out", str(tmp_path), "--quiet"]) == 2


def test_family_mismatch_is_rejected(small_build, tmp_path):
    _, out = small_build
    config = reference_config(4)
    config.family.params[2] = [config.family.params[2][0], config.family.params[2][1] / 2]
    path = tmp_path / "other.json"
    save_config(config, path)
    code = main(["validate", "--config", str(path), "--stages", str(out / "stages.json"),
                 "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 2


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "ref.json"
    save_config(reference_config(12), path)
    assert load_config(path) == reference_config(12)


@pytest.fixture(scope="module")
def full_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    assert main(["report-all", "--out", str(out), "--quiet"]) == 0
    return out


def test_report_all_reference(full_report):
    out = full_report
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["stages"] == 12
    assert summary["certificate_valid"] is True
    assert summary["fk_failures"] == []
    assert summary["measure_passed"] is True
    occupancy = read_csv(out / "occupancy.csv")
    assert len(occupancy) == 78
    assert all(r["passed"] == "yes" for r in occupancy)
    spanning = read_csv(out / "spanning.csv")
    assert len(spanning) == 9
    assert all(int(r["count"]) <= int(r["bound"]) for r in spanning)


def test_report_all_is_byte_identical(full_report, tmp_path):
    again = tmp_path / "again"
    assert main(["report-all", "--out", str(again), "--quiet"]) == 0
    first = sorted(p.relative_to(full_report) for p in full_report.rglob("*") if p.is_file())
    second = sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
    assert first == second
    for rel in first:
        assert (full_report / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_rows_reference_known_results(full_report):
    catalog = json.loads((full_report / "results.json").read_text(encoding="utf-8"))["results"]
    assert catalog == RESULTS
    for name in ("certificate.csv", "fk.csv", "occupancy.csv", "strips.csv", "spanning.csv", "disintegration.csv"):
        rows = read_csv(full_report / name)
        assert rows, name
        assert all(r["reference"] in RESULTS for r in rows), name


def test_strips_report_nesting(full_report):
    rows = read_csv(full_report / "strips.csv")
    assert [int(r["n"]) for r in rows] == list(range(1, 13))
    assert all(r["nested_next"] == "yes" for r in rows[:-1])
    assert rows[-1]["nested_next"] == ""
    assert rows[-1]["core_fallback"] == "yes"
    assert all(r["residual_conflicts"] == "0" for r in rows)
