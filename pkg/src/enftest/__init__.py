"""Test generation, execution and performance gating for runtime enforcers."""

from importlib import resources

__version__ = "0.1.0"


def fixture_text(name: str) -> str:
    """Contents of a bundled fixture (camera.model, foocam-mini-leaky.json, ...)."""
    return resources.files(__package__).joinpath("fixtures", name).read_text(encoding="utf-8")


def fixture_path(name: str) -> str:
    return str(resources.files(__package__).joinpath("fixtures", name))
