"""Shipped example IFS configuration files."""

from importlib import resources
from pathlib import Path

__all__ = ["config_path", "list_configs"]


def config_path(name: str) -> Path:
    """Filesystem path of a shipped config, e.g. config_path('sierpinski.ifs')."""
    if not name.endswith(".ifs"):
        name += ".ifs"
    path = Path(str(resources.files(__package__) / name))
    if not path.is_file():
        raise FileNotFoundError(f"no shipped config named {name!r}")
    return path


def list_configs() -> list[str]:
    """Names of all shipped configs."""
    return sorted(
        entry.name for entry in resources.files(__package__).iterdir()
        if entry.name.endswith(".ifs")
    )
