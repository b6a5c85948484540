"""Module entry point: ``python -m fastbasin``."""

from .cli import entry

if __name__ == "__main__":
    entry()
