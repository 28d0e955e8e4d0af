#!/usr/bin/env python3
"""
Entry point for python -m thermal_geoloc
"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
