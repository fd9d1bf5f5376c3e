import sys
from pathlib import Path

import pytest
from loguru import logger

from riscv_supplychain import config
from riscv_supplychain.descriptors import (
    REFERENCE_DIAGRAM_FILENAME,
    REFERENCE_GRAPH_FILENAME,
    REFERENCE_RULES_FILENAME,
)
from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.kg.script import ingest_script
from riscv_supplychain.process_model import lower_to_model
from riscv_supplychain.rules import parse_rules
from riscv_supplychain.utils import read_fixture


@pytest.fixture(autouse=True)
def config_dir(tmp_path, monkeypatch):
    """Keep every test away from the user's configuration and endpoint."""
    path = tmp_path / "config"
    monkeypatch.setenv(config.CONFIG_DIR_ENV, str(path))
    for name in (config.BASE_URL_ENV, config.MODEL_ENV, config.API_KEY_ENV):
        monkeypatch.delenv(name, raising=False)
    yield path
    # The CLI rebinds loguru to streams that die with the test.
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture()
def log_messages():
    messages = []
    handler = logger.add(messages.append, level="DEBUG", format="{message}")
    yield messages
    logger.remove(handler)


@pytest.fixture()
def data_path():
    return Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def reference_text():
    return read_fixture(REFERENCE_DIAGRAM_FILENAME)


@pytest.fixture(scope="session")
def reference_ast(reference_text):
    return parse_activity_diagram(
        reference_text, source_name=REFERENCE_DIAGRAM_FILENAME
    )


@pytest.fixture(scope="session")
def reference_model(reference_ast):
    return lower_to_model(reference_ast)


@pytest.fixture(scope="session")
def reference_rules():
    return parse_rules(read_fixture(REFERENCE_RULES_FILENAME))


@pytest.fixture()
def reference_graph():
    return ingest_script(read_fixture(REFERENCE_GRAPH_FILENAME))
