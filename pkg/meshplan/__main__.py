#!/usr/bin/env python3
"""
meshplan entry point.
Allows running as: python3 -m meshplan <command>
"""

from meshplan.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
