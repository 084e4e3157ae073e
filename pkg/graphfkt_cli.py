#!/usr/bin/env python3
"""
Graph-spectral classifier command line

Build atlas graphs, select cohorts, fit and evaluate the classifier,
export discriminative-mode reports and generate synthetic datasets.

Usage:
    python graphfkt_cli.py COMMAND [options]
    python graphfkt_cli.py --help
"""

import sys
from pathlib import Path

# Add package directory to path
sys.path.insert(0, str(Path(__file__).parent))

from graphfkt.cli import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⚠ Interrupted by user")
        sys.exit(130)
