"""
Viseme Command Line
-------------------
Entry point wiring the subcommands to the pipeline and mapping failures to
exit codes: 0 on success, 1 when a stage fails, 2 for usage and I/O errors.
"""

import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .cli import create_parser
from .cli.commands import EXIT_STAGE, EXIT_USAGE
from .core.config import logger
from .core.errors import ConfigError, ImageFormatError, VisemeError


def main(argv: Optional[List[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.getLogger().setLevel(args.log_level.upper())
    try:
        return args.handler(args)
    except (ImageFormatError, ConfigError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except VisemeError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
