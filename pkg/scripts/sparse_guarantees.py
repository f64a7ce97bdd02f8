"""
Command-line script for the sparse guarantees toolkit

Thin wrapper around src.cli.main so the CLI can be run directly from a
checkout. Logging is configured by the CLI itself (stderr plus a log file in
--output-dir).
"""

import sys
from pathlib import Path

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli.main import main


if __name__ == "__main__":
    sys.exit(main())
