import logging
import sys
from typing import Optional

LOG_FORMAT = "ts=%(asctime)s level=%(levelname)s logger=%(name)s msg=\"%(message)s\""


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """Attach one stderr handler to the package logger. Safe to call twice."""
    from decaylab.core.settings import get_settings

    level_name = (level or get_settings().log_level).upper()
    root = logging.getLogger("decaylab")
    root.setLevel(getattr(logging, level_name, logging.INFO))

    if not any(getattr(h, "_decaylab", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._decaylab = True
        root.addHandler(handler)
    root.propagate = False
    return root
