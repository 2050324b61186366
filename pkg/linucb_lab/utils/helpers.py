"""
Small shared helpers: version strings and output directories
"""

import logging
import subprocess
from pathlib import Path
from typing import Union

from linucb_lab import __version__

logger = logging.getLogger(__name__)


def version_string() -> str:
    """
    git-describe-style version of the running code

    Returns:
        `git describe --always --dirty` output when inside a checkout,
        otherwise "v<package version>"
    """
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return f"v{__version__}-{result.stdout.strip()}"
    except (OSError, subprocess.SubprocessError) as e:
        logger.debug(f"git describe unavailable: {e}")
    return f"v{__version__}"


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
