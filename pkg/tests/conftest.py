from __future__ import annotations

import pytest

from confined_tracer.model import WallParams


@pytest.fixture
def noneq() -> WallParams:
    return WallParams(0.5, 1.0)


@pytest.fixture
def eq() -> WallParams:
    return WallParams(1.0, 1.0)
