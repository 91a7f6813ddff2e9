import importlib.resources

import pytest


def scene_path(name: str) -> str:
    return str(importlib.resources.files("linflow") / "scenes" / name)


@pytest.fixture
def scenes_dir():
    return str(importlib.resources.files("linflow") / "scenes")
