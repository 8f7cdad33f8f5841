from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sbtforge.assets import data_text
from sbtforge.rdf import parse_turtle


@pytest.fixture()
def blocksworld_graph():
    return parse_turtle(data_text("blocksworld.ttl"))


BW = "http://sbtforge.org/bw#"
SBT = "http://sbtforge.org/vocab/sbt#"
AGENT = "http://sbtforge.org/vocab/agent#"
