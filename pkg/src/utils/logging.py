"""
📝 Logging configuration
"""

import logging
import os
from pathlib import Path
from typing import Optional

LOG_FILE_NAME = "oescn.log"


def default_log_dir() -> Path:
    """The `logs` directory next to the `src` package"""
    return Path(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))) / "logs"


def setup_logging(debug: bool = False, log_dir: Optional[Path] = None) -> Path:
    """
    🔧 Configure logging for a pipeline run

    Args:
        debug: Whether to enable debug logging
        log_dir: Where the log file goes (defaults to ./logs next to src)

    Returns:
        Path: The log file in use
    """
    level = logging.DEBUG if debug else logging.INFO

    # Remove any existing handlers
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()

    root.setLevel(level)

    # Ensure logs directory exists
    logs_dir = Path(log_dir) if log_dir is not None else default_log_dir()
    os.makedirs(logs_dir, exist_ok=True)

    formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")

    log_file = logs_dir / LOG_FILE_NAME
    file_handler = logging.FileHandler(log_file)
    file_handler.setFormatter(formatter)
    root.addHandler(file_handler)

    # Warnings and errors also reach the terminal
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.WARNING)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    logging.debug("🔍 Debug logging enabled")
    return log_file
