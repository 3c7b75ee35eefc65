#!/usr/bin/env python
"""
Viseme Runner
-------------
Script to run the viseme pipeline commands from a source checkout
"""
import sys

from viseme.core.config import settings, logger  # Import settings and logger
from viseme.main import main


if __name__ == "__main__":
    logger.debug(f"Running with THREADS={settings.THREADS}, LOG_LEVEL={settings.LOG_LEVEL}")
    sys.exit(main())
