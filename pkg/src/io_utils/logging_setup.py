"""
Logging config for the CLI.

Same format everywhere: '%(asctime)s - %(levelname)s - %(message)s', appended
to a log file (vqad.log unless --log-file / VQAD_LOG_FILE say otherwise), with
warnings and errors echoed to the console.
"""

import logging
import os

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DEFAULT_LOG_FILE = 'vqad.log'


def setup_logging(log_file=None, level=logging.INFO):
    log_file = log_file or os.getenv("VQAD_LOG_FILE", DEFAULT_LOG_FILE)

    console = logging.StreamHandler()
    console.setLevel(logging.WARNING)
    console.setFormatter(logging.Formatter(LOG_FORMAT))

    logging.basicConfig(
        filename=log_file,
        filemode='a',
        level=level,
        format=LOG_FORMAT,
        force=True,
    )
    logging.getLogger().addHandler(console)
    return log_file


def progress_disabled() -> bool:
    """tqdm bars are off when VQAD_NO_PROGRESS=1."""
    return os.getenv("VQAD_NO_PROGRESS", "0") == "1"
