import os
import shutil
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def skeleton():
    return ROOT / "data" / "mrsa_skeleton.csv"


@pytest.fixture(scope="session")
def schema():
    import json

    import tnma

    with open(tnma.schema_path()) as f:
        return json.load(f)


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("TNMA_CLI") or shutil.which("tnma")
    if not path:
        pytest.skip("tnma executable not found; set TNMA_CLI")
    return path
