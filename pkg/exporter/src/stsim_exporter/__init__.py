"""Checkpoint-to-STPW converter and parity-fixture toolkit."""

from .export import (
    FIXTURE_TOLERANCE,
    ExportError,
    convert,
    export,
    forward_levels,
    load_checkpoint,
    make_fixture,
    verify_fixture,
)
from .stpw import read_stpw, write_stpw

__version__ = "0.1.0"
