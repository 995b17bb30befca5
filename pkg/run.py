#!/usr/bin/env python3
"""
Run the SSC-MMD command line
"""

from app.main import cli


if __name__ == "__main__":
    cli()
