from __future__ import annotations

import logging
import sys
from typing import Sequence

from box_drawings.commands import run_command
from box_drawings.settings import load_settings

LOGGER = logging.getLogger(__name__)

EXIT_INTERNAL = 1
EXIT_USAGE = 2


def configure_logging(level: int = logging.INFO) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        settings = load_settings()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(settings.log_level)
    try:
        return run_command(argv, settings)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        LOGGER.exception("Unexpected failure")
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
