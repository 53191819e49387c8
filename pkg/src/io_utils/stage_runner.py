"""
Shared entry-point wrapper for main.py and the runnable stage modules.

Runs one command function and turns its failure into the process exit code
carried by the error (see errors.py).
"""

import logging
import subprocess
import sys

from io_utils.errors import ConfigurationError, VqadError

logger = logging.getLogger(__name__)


def run_stage(command: str, func, args) -> int:
    try:
        return func(args)
    except VqadError as e:
        logger.error(f"{command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except subprocess.CalledProcessError as e:
        logger.error(f"{command} stage failed with exit code {e.returncode}: {e.cmd}")
        print(f"error: stage exited with code {e.returncode}", file=sys.stderr)
        return e.returncode
    except OSError as e:
        logger.error(f"{command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return ConfigurationError.exit_code
