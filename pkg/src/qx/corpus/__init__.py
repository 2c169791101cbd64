"""Circuit files for the worked examples (CNOT, SRC, Shor encoder, damping)."""

from importlib.resources import files
from pathlib import Path

NAMES = ("fig1.qc", "src.qc", "shor.qc", "damping.qc")


def path(name: str) -> Path:
    """Location of a bundled circuit; the ``.qc`` suffix is optional."""
    if not name.endswith(".qc"):
        name += ".qc"
    return Path(str(files(__name__) / name))
