import logging
from os import getenv

from dotenv import load_dotenv
from rich.logging import RichHandler

load_dotenv()

LOG_LEVEL: str = getenv("MIMO_LOG_LEVEL", "WARNING").upper()
DEFAULT_SEED: int = int(getenv("MIMO_DEFAULT_SEED", "0"))
PATTERN_SAMPLES: int = int(getenv("MIMO_PATTERN_SAMPLES", "361"))


def configure_logging(level: str | None = None):
    """
    Installs a rich handler on the root logger.

    Args:
        level (str, optional): Log level name; defaults to MIMO_LOG_LEVEL.

    Library modules only ever call `logging.getLogger(__name__)`; the CLI and
    the HTTP app call this once at start-up.
    """
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )
