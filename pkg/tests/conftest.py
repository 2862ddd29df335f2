import csv
import json
import random
import shutil
from pathlib import Path

import pytest

from dualgen.config import load_config
from dualgen.dataset import HotelRecord
from dualgen.geo import GeoPoint, ViewpointRecord
from dualgen.pipeline import Pipeline

FIXTURES = Path(__file__).parent / "fixtures"
STANDARD_PROMPT = "Please recommend me viewpoints near St. Regis Lhasa"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def config_path():
    return FIXTURES / "config.toml"


@pytest.fixture
def config(config_path):
    return load_config(config_path)


@pytest.fixture
def pipeline(config):
    return Pipeline(config)


@pytest.fixture
def workdir(tmp_path):
    """A writable copy of the fixture directory."""
    dst = tmp_path / "fx"
    shutil.copytree(FIXTURES, dst)
    return dst


def synthetic_hotels(n: int, seed: int = 7) -> list[HotelRecord]:
    rng = random.Random(seed)
    return [
        HotelRecord(f"Hotel {i:03d}", GeoPoint(rng.uniform(29.55, 29.75), rng.uniform(90.95, 91.25)))
        for i in range(n)
    ]


def synthetic_viewpoints(n: int, seed: int = 11) -> list[ViewpointRecord]:
    rng = random.Random(seed)
    return [
        ViewpointRecord(
            f"Viewpoint {i:03d}",
            GeoPoint(rng.uniform(27.5, 35.5), rng.uniform(80.0, 98.0)),
            f"Introduction to viewpoint {i:03d}: history, geography and visitor notes.",
        )
        for i in range(n)
    ]


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, ensure_ascii=False), encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
